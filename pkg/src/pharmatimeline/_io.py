"""CSV / JSONL plumbing shared by the table readers and report writers."""

from __future__ import annotations

import csv
import datetime as dt
import io
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence


class SchemaError(ValueError):
    """An input table does not match its documented layout."""

    def __init__(self, message: str, path=None, line: Optional[int] = None):
        self.path = None if path is None else str(path)
        self.line = line
        prefix = self.path or ""
        if line is not None:
            prefix = f"{prefix}:{line}" if prefix else f"line {line}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


def parse_date(value: str, path=None, line: Optional[int] = None) -> dt.date:
    try:
        return dt.date.fromisoformat(value.strip())
    except (ValueError, AttributeError):
        raise SchemaError(f"invalid ISO date {value!r}", path, line) from None


def parse_optional_date(value: str, path=None, line: Optional[int] = None) -> Optional[dt.date]:
    if value is None or not value.strip():
        return None
    return parse_date(value, path, line)


def read_csv(path, required: Sequence[str]) -> Iterator[tuple[int, dict[str, str]]]:
    """Yield ``(line_number, row)`` pairs; blank lines are skipped."""
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}", path, 1)
    for row in reader:
        if None in row:
            raise SchemaError("too many fields", path, reader.line_num)
        if any(v is None for v in row.values()):
            raise SchemaError("too few fields", path, reader.line_num)
        if not any(v.strip() for v in row.values()):
            continue
        yield reader.line_num, row


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    """Write UTF-8 CSV with ``\\n`` line endings. Returns the number of data rows."""
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)
            n += 1
    return n
