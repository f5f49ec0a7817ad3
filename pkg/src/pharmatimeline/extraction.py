"""Dictionary-based drug/ADE mention extraction with a NegEx-style cue window.

Text is tokenized into alphanumeric runs plus single punctuation characters.
Lexicon terms match as token sequences (longest match wins), and each match
is tagged Positive, Negated or Hedged by looking back over a fixed number of
word tokens for a cue, stopping at scope breakers such as ``.`` or ``but``.
"""

from __future__ import annotations

import datetime as dt
import enum
import json
import logging
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from ._io import SchemaError, parse_date, read_csv, write_csv
from .lexicon import AdeLexicon, DrugLexicon

log = logging.getLogger(__name__)

__all__ = [
    "MentionKind",
    "Polarity",
    "Source",
    "ClinicalDocument",
    "Mention",
    "DailyEvent",
    "CueConfig",
    "Token",
    "tokenize",
    "Gazetteer",
    "extract_mentions",
    "classify_polarity",
    "collapse_daily",
    "prescription_mentions",
    "load_documents",
    "write_documents",
    "load_prescriptions",
    "write_mentions",
]


class MentionKind(str, enum.Enum):
    DRUG = "Drug"
    ADE = "Ade"


class Polarity(str, enum.Enum):
    POSITIVE = "Positive"
    NEGATED = "Negated"
    HEDGED = "Hedged"


class Source(str, enum.Enum):
    TEXT = "Text"
    STRUCTURED_PRESCRIPTION = "StructuredPrescription"


@dataclass(frozen=True)
class ClinicalDocument:
    patient_id: str
    doc_id: str
    date: dt.date
    text: str


@dataclass(frozen=True)
class Mention:
    patient_id: str
    date: dt.date
    kind: MentionKind
    canonical: str
    surface: str
    polarity: Polarity
    source: Source = Source.TEXT
    doc_id: str = ""
    start: int = -1
    end: int = -1


@dataclass(frozen=True, order=True)
class DailyEvent:
    patient_id: str
    date: dt.date
    kind: MentionKind
    canonical: str


@dataclass(frozen=True)
class CueConfig:
    negation_cues: tuple[str, ...] = ("no", "not", "denies", "no evidence of", "without")
    hedge_cues: tuple[str, ...] = ("risk of", "warned", "potential", "suspected", "monitor for", "?")
    scope_breakers: tuple[str, ...] = ("but", ".", ";")
    window_tokens: int = 5

    def __post_init__(self):
        if self.window_tokens < 1:
            raise ValueError("window_tokens must be >= 1")
        # tokenized once; cue phrases are matched token by token
        object.__setattr__(self, "_neg", tuple(_term_tokens(c) for c in self.negation_cues))
        object.__setattr__(self, "_hedge", tuple(_term_tokens(c) for c in self.hedge_cues))
        object.__setattr__(self, "_breakers", frozenset(b.lower() for b in self.scope_breakers))

    @classmethod
    def from_mapping(cls, data: Optional[dict]) -> "CueConfig":
        if not data:
            return cls()
        kwargs = {}
        for key in ("negation_cues", "hedge_cues", "scope_breakers"):
            if key in data:
                kwargs[key] = tuple(str(x) for x in data[key])
        if "window_tokens" in data:
            kwargs["window_tokens"] = int(data["window_tokens"])
        return cls(**kwargs)


@dataclass(frozen=True)
class Token:
    text: str  # lowercased
    start: int
    end: int

    @property
    def is_word(self) -> bool:
        return self.text[0].isalnum()


_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_", re.UNICODE)


def tokenize(text: str) -> list[Token]:
    return [Token(m.group().lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def _term_tokens(term: str) -> tuple[str, ...]:
    return tuple(t.text for t in tokenize(term))


class Gazetteer:
    """Token-sequence index over both lexicons."""

    def __init__(self, drugs: DrugLexicon, ades: AdeLexicon):
        self.terms: dict[tuple[str, ...], tuple[MentionKind, str]] = {}
        # ADE entries first so a drug term shadows an identical ADE term
        for kind, lex in ((MentionKind.ADE, ades), (MentionKind.DRUG, drugs)):
            for alias, canonical in lex.index.items():
                toks = _term_tokens(alias)
                if toks:
                    self.terms[toks] = (kind, canonical)
        self.max_len = max((len(k) for k in self.terms), default=0)

    def find(self, tokens: Sequence[Token]) -> list[tuple[int, int, MentionKind, str]]:
        """Greedy left-to-right longest match; returns (first_tok, end_tok, kind, canonical)."""
        out = []
        i, n = 0, len(tokens)
        while i < n:
            hit = None
            if tokens[i].is_word:
                for length in range(min(self.max_len, n - i), 0, -1):
                    key = tuple(t.text for t in tokens[i:i + length])
                    found = self.terms.get(key)
                    if found is not None:
                        hit = (i, i + length, *found)
                        break
            if hit:
                out.append(hit)
                i = hit[1]
            else:
                i += 1
        return out


def _cue_before(tokens: Sequence[Token], first: int, phrases, lo: int) -> bool:
    for phrase in phrases:
        k = len(phrase)
        for end in range(first - 1, lo + k - 2, -1):
            if tuple(t.text for t in tokens[end - k + 1:end + 1]) == phrase:
                return True
    return False


def _polarity_at(tokens: Sequence[Token], first: int, cues: CueConfig) -> Polarity:
    # walk back at most window_tokens word tokens, stopping at a scope breaker
    lo = first
    words = 0
    j = first - 1
    while j >= 0:
        tok = tokens[j]
        if tok.text in cues._breakers:
            break
        if tok.is_word:
            words += 1
            if words > cues.window_tokens:
                break
        lo = j
        j -= 1
    if _cue_before(tokens, first, cues._neg, lo):
        return Polarity.NEGATED
    if _cue_before(tokens, first, cues._hedge, lo):
        return Polarity.HEDGED
    return Polarity.POSITIVE


def classify_polarity(text: str, match_span: tuple[int, int], cues: Optional[CueConfig] = None) -> Polarity:
    """Polarity of the term occupying ``text[start:end]``."""
    cues = cues or CueConfig()
    start, end = match_span
    if not (0 <= start < end <= len(text)):
        raise ValueError(f"span {match_span} is not inside text of length {len(text)}")
    tokens = tokenize(text)
    first = next((i for i, t in enumerate(tokens) if t.end > start), len(tokens))
    return _polarity_at(tokens, first, cues)


def extract_mentions(doc: ClinicalDocument, drugs: DrugLexicon, ades: AdeLexicon,
                     cues: Optional[CueConfig] = None, gazetteer: Optional[Gazetteer] = None) -> list[Mention]:
    """All lexicon matches in one document, in text order.

    Pass a prebuilt ``gazetteer`` when processing many documents.
    """
    if not doc.text:
        return []
    cues = cues or CueConfig()
    gaz = gazetteer or Gazetteer(drugs, ades)
    tokens = tokenize(doc.text)
    mentions = []
    for first, stop, kind, canonical in gaz.find(tokens):
        start, end = tokens[first].start, tokens[stop - 1].end
        mentions.append(Mention(
            patient_id=doc.patient_id,
            date=doc.date,
            kind=kind,
            canonical=canonical,
            surface=doc.text[start:end],
            polarity=_polarity_at(tokens, first, cues),
            source=Source.TEXT,
            doc_id=doc.doc_id,
            start=start,
            end=end,
        ))
    return mentions


def collapse_daily(mentions: Iterable[Mention], include_hedged: bool = False) -> list[DailyEvent]:
    """One event per (patient, date, kind, canonical) among the kept mentions.

    Negated mentions are always dropped; Hedged ones unless ``include_hedged``.
    """
    keep = {Polarity.POSITIVE, Polarity.HEDGED} if include_hedged else {Polarity.POSITIVE}
    events = {
        DailyEvent(m.patient_id, m.date, m.kind, m.canonical)
        for m in mentions
        if m.polarity in keep
    }
    return sorted(events, key=lambda e: (e.patient_id, e.date, e.canonical, e.kind.value))


def prescription_mentions(rows: Iterable[tuple[str, dt.date, str]], drugs: DrugLexicon) -> list[Mention]:
    """Structured ``(patient_id, date, drug)`` rows as positive Drug mentions.

    Rows naming a drug outside the lexicon are skipped with a warning.
    """
    out = []
    for patient_id, date, name in rows:
        generic = drugs.lookup(name)
        if generic is None:
            log.warning("prescription for unknown drug %r (patient %s) skipped", name, patient_id)
            continue
        out.append(Mention(patient_id, date, MentionKind.DRUG, generic, name,
                           Polarity.POSITIVE, Source.STRUCTURED_PRESCRIPTION))
    return out


def load_documents(path) -> list[ClinicalDocument]:
    docs = []
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", path, lineno) from None
            if not isinstance(obj, dict):
                raise SchemaError("expected a JSON object", path, lineno)
            missing = [k for k in ("patient_id", "doc_id", "date", "text") if k not in obj]
            if missing:
                raise SchemaError(f"missing key(s): {', '.join(missing)}", path, lineno)
            key = (str(obj["patient_id"]), str(obj["doc_id"]))
            if key in seen:
                raise SchemaError(f"duplicate doc_id {key[1]!r} for patient {key[0]!r}", path, lineno)
            seen.add(key)
            docs.append(ClinicalDocument(key[0], key[1], parse_date(str(obj["date"]), path, lineno),
                                         str(obj["text"])))
    return docs


def write_documents(docs: Iterable[ClinicalDocument], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in docs:
            fh.write(json.dumps({"patient_id": d.patient_id, "doc_id": d.doc_id,
                                 "date": d.date.isoformat(), "text": d.text},
                                ensure_ascii=False) + "\n")
            n += 1
    return n


def load_prescriptions(path) -> list[tuple[str, dt.date, str]]:
    return [
        (row["patient_id"].strip(), parse_date(row["date"], path, line), row["drug"].strip())
        for line, row in read_csv(path, ("patient_id", "date", "drug"))
    ]


MENTION_COLUMNS = ("patient_id", "doc_id", "date", "kind", "canonical", "surface",
                   "polarity", "source", "start", "end")


def write_mentions(mentions: Iterable[Mention], path) -> int:
    return write_csv(path, MENTION_COLUMNS, (
        (m.patient_id, m.doc_id, m.date.isoformat(), m.kind.value, m.canonical, m.surface,
         m.polarity.value, m.source.value, m.start, m.end)
        for m in mentions
    ))
