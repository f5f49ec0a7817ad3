"""Drug, adverse-event and SIDER reference dictionaries.

All three are plain CSV files. List-valued cells (brand names, synonyms) use
``|`` as the separator so no quoting is ever needed.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

from ._io import SchemaError, read_csv

__all__ = [
    "DrugCategory",
    "DrugEntry",
    "DrugLexicon",
    "AdeEntry",
    "AdeLexicon",
    "SiderRange",
    "SiderReference",
    "LexiconError",
    "AmbiguousAliasError",
    "normalize_term",
    "load_drug_dictionary",
    "load_ade_dictionary",
    "load_sider_reference",
    "write_drug_dictionary",
    "write_ade_dictionary",
    "write_sider_reference",
    "map_to_generic",
    "default_drug_lexicon",
    "default_ade_lexicon",
    "default_sider_reference",
]

LIST_SEP = "|"


class DrugCategory(str, enum.Enum):
    ANTIDEPRESSANTS = "Antidepressants"
    ANTIDIABETICS = "Antidiabetics"
    ANTIEPILEPTICS = "Antiepileptics"
    ANTIHYPERTENSIVES = "Antihypertensives"
    ANTIPSYCHOTICS = "Antipsychotics"
    ANTI_DEMENTIA = "Anti-Dementia"
    HYPNOTICS_ANXIOLYTICS = "Hypnotics & Anxiolytics"
    LIPID_REGULATORY = "Lipid Regulatory"
    MOOD_STABILIZERS = "Mood Stabilizers"
    NSAIDS = "Non-Steroidal Anti-Inflammatory"
    ANTI_PARKINSON = "Anti-Parkinson"


class LexiconError(SchemaError):
    """Malformed dictionary file. ``line`` is 1-based and counts the header."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        super().__init__(message, path, line)


class AmbiguousAliasError(LexiconError):
    def __init__(self, alias: str, first: str, second: str, line: Optional[int] = None,
                 path: Optional[str] = None):
        self.alias = alias
        self.first = first
        self.second = second
        super().__init__(
            f"alias {alias!r} is claimed by both {first!r} and {second!r}", line, path
        )


def normalize_term(surface: str) -> str:
    """Lowercase and collapse runs of whitespace."""
    return " ".join(surface.lower().split())


def _split_list(cell: str) -> list[str]:
    return [s for s in (normalize_term(x) for x in cell.split(LIST_SEP)) if s]


@dataclass(frozen=True)
class DrugEntry:
    generic: str
    brands: tuple[str, ...]
    category: DrugCategory


@dataclass(frozen=True)
class DrugLexicon:
    entries: tuple[DrugEntry, ...]
    index: Mapping[str, str] = field(repr=False)

    @classmethod
    def from_entries(cls, entries: Iterable[DrugEntry], path: Optional[str] = None) -> "DrugLexicon":
        entries = tuple(entries)
        index = _build_index(((e.generic, e.brands) for e in entries), path)
        return cls(entries, MappingProxyType(index))

    def lookup(self, surface: str) -> Optional[str]:
        return self.index.get(normalize_term(surface))

    def category_of(self, generic: str) -> Optional[DrugCategory]:
        for e in self.entries:
            if e.generic == generic:
                return e.category
        return None

    @property
    def generics(self) -> tuple[str, ...]:
        return tuple(e.generic for e in self.entries)


@dataclass(frozen=True)
class AdeEntry:
    canonical: str
    synonyms: tuple[str, ...]


@dataclass(frozen=True)
class AdeLexicon:
    entries: tuple[AdeEntry, ...]
    index: Mapping[str, str] = field(repr=False)

    @classmethod
    def from_entries(cls, entries: Iterable[AdeEntry], path: Optional[str] = None) -> "AdeLexicon":
        entries = tuple(entries)
        index = _build_index(((e.canonical, e.synonyms) for e in entries), path)
        return cls(entries, MappingProxyType(index))

    def lookup(self, surface: str) -> Optional[str]:
        return self.index.get(normalize_term(surface))

    @property
    def canonicals(self) -> tuple[str, ...]:
        return tuple(e.canonical for e in self.entries)


def _build_index(rows, path) -> dict[str, str]:
    index: dict[str, str] = {}
    for canonical, aliases in rows:
        for alias in (canonical, *aliases):
            owner = index.setdefault(alias, canonical)
            if owner != canonical:
                raise AmbiguousAliasError(alias, owner, canonical, path=path)
    return index


def _read_rows(path, required: tuple[str, ...]):
    yield from read_csv(path, required)


def load_drug_dictionary(path) -> DrugLexicon:
    entries = []
    seen: dict[str, int] = {}
    for lineno, row in _read_rows(path, ("generic", "brands", "category")):
        generic = normalize_term(row["generic"])
        if not generic:
            raise LexiconError("empty generic name", lineno, str(path))
        if generic in seen:
            raise LexiconError(f"duplicate generic {generic!r} (first on line {seen[generic]})",
                               lineno, str(path))
        seen[generic] = lineno
        try:
            category = DrugCategory(row["category"].strip())
        except ValueError:
            raise LexiconError(f"unknown drug category {row['category']!r}", lineno, str(path)) from None
        entries.append((lineno, DrugEntry(generic, tuple(_split_list(row["brands"])), category)))
    _check_aliases([(ln, e.generic, e.brands) for ln, e in entries], path)
    return DrugLexicon.from_entries((e for _, e in entries), str(path))


def load_ade_dictionary(path) -> AdeLexicon:
    entries = []
    seen: dict[str, int] = {}
    for lineno, row in _read_rows(path, ("canonical", "synonyms")):
        canonical = normalize_term(row["canonical"])
        if not canonical:
            raise LexiconError("empty canonical ADE name", lineno, str(path))
        if canonical in seen:
            raise LexiconError(f"duplicate ADE {canonical!r} (first on line {seen[canonical]})",
                               lineno, str(path))
        seen[canonical] = lineno
        entries.append((lineno, AdeEntry(canonical, tuple(_split_list(row["synonyms"])))))
    _check_aliases([(ln, e.canonical, e.synonyms) for ln, e in entries], path)
    return AdeLexicon.from_entries((e for _, e in entries), str(path))


def _check_aliases(rows, path) -> None:
    # same as _build_index but reports the real file line
    owner: dict[str, str] = {}
    for lineno, canonical, aliases in rows:
        for alias in (canonical, *aliases):
            prev = owner.setdefault(alias, canonical)
            if prev != canonical:
                raise AmbiguousAliasError(alias, prev, canonical, lineno, str(path))


def map_to_generic(lexicon: DrugLexicon, surface: str) -> Optional[str]:
    """Generic name for a brand or generic surface form, or None if unknown."""
    return lexicon.lookup(surface)


@dataclass(frozen=True)
class SiderRange:
    low_pct: Optional[float] = None
    high_pct: Optional[float] = None

    @property
    def is_empty(self) -> bool:
        return self.low_pct is None and self.high_pct is None


@dataclass(frozen=True)
class SiderReference:
    rows: Mapping[str, SiderRange]

    def get(self, ade: str) -> Optional[SiderRange]:
        """Range for an ADE, or None when there is no usable reference."""
        r = self.rows.get(normalize_term(ade))
        if r is None or r.is_empty:
            return None
        return r


def _parse_pct(cell: str, column: str, lineno: int, path) -> Optional[float]:
    cell = cell.strip()
    if not cell:
        return None
    try:
        value = float(cell)
    except ValueError:
        raise LexiconError(f"{column} is not a number: {cell!r}", lineno, str(path)) from None
    if not math.isfinite(value) or not 0.0 <= value <= 100.0:
        raise LexiconError(f"{column} must be within [0, 100], got {cell}", lineno, str(path))
    return value


def load_sider_reference(path) -> SiderReference:
    rows: dict[str, SiderRange] = {}
    for lineno, row in _read_rows(path, ("ade", "low_pct", "high_pct")):
        ade = normalize_term(row["ade"])
        if not ade:
            raise LexiconError("empty ADE name", lineno, str(path))
        if ade in rows:
            raise LexiconError(f"duplicate ADE {ade!r}", lineno, str(path))
        low = _parse_pct(row["low_pct"], "low_pct", lineno, path)
        high = _parse_pct(row["high_pct"], "high_pct", lineno, path)
        if low is not None and high is not None and low > high:
            raise LexiconError(f"low_pct {low} exceeds high_pct {high} for {ade!r}", lineno, str(path))
        rows[ade] = SiderRange(low, high)
    return SiderReference(MappingProxyType(rows))


def write_drug_dictionary(lexicon: DrugLexicon, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["generic", "brands", "category"])
        for e in lexicon.entries:
            w.writerow([e.generic, LIST_SEP.join(e.brands), e.category.value])


def write_ade_dictionary(lexicon: AdeLexicon, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["canonical", "synonyms"])
        for e in lexicon.entries:
            w.writerow([e.canonical, LIST_SEP.join(e.synonyms)])


def _fmt_pct(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.2f}"


def write_sider_reference(ref: SiderReference, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ade", "low_pct", "high_pct"])
        for ade, r in ref.rows.items():
            w.writerow([ade, _fmt_pct(r.low_pct), _fmt_pct(r.high_pct)])


def _data_path(name: str) -> Path:
    return Path(str(resources.files("pharmatimeline") / "data" / name))


# Bundled illustrative dictionaries. The full production lists are user data.
def default_drug_lexicon() -> DrugLexicon:
    return load_drug_dictionary(_data_path("drugs.csv"))


def default_ade_lexicon() -> AdeLexicon:
    return load_ade_dictionary(_data_path("ades.csv"))


def default_sider_reference() -> SiderReference:
    return load_sider_reference(_data_path("sider.csv"))
