"""ADR timeline: adverse events joined to the drugs active on the same day,
study cohort selection and monthly bucketing around the index date."""

from __future__ import annotations

import dataclasses
import datetime as dt
import enum
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Union

from ._io import write_csv
from .episodes import MedicationEpisode, Timeline
from .extraction import DailyEvent, MentionKind

__all__ = [
    "MonthBucket",
    "BUCKETS",
    "AdrEvent",
    "CohortMember",
    "BucketRule",
    "build_adr_timeline",
    "month_bucket",
    "assign_buckets",
    "select_cohort",
    "write_adr_events",
]


class MonthBucket(str, enum.Enum):
    M_MINUS_3 = "M-3"
    M_MINUS_2 = "M-2"
    M_MINUS_1 = "M-1"
    M_PLUS_1 = "M+1"
    M_PLUS_2 = "M+2"
    M_PLUS_3 = "M+3"

    @property
    def offset(self) -> int:
        """Signed month number: -3..-1, 1..3."""
        return int(self.value[1:])

    @property
    def after_index(self) -> bool:
        return self.offset > 0


BUCKETS = tuple(MonthBucket)


@dataclass(frozen=True)
class AdrEvent:
    patient_id: str
    ade: str
    date: dt.date
    concurrent_drugs: frozenset[str]
    interval: Optional[MonthBucket] = None


@dataclass(frozen=True)
class CohortMember:
    patient_id: str
    index_date: dt.date
    qualifying: bool
    coverage_end: Optional[dt.date] = None


@dataclass(frozen=True)
class BucketRule:
    month_length_days: int = 30
    index_day_in_first_month: bool = True

    def __post_init__(self):
        if self.month_length_days < 1:
            raise ValueError("month_length_days must be >= 1")


def build_adr_timeline(ade_events: Iterable[DailyEvent], episodes: Iterable[MedicationEpisode]
                       ) -> list[AdrEvent]:
    """One AdrEvent per ADE daily event, in input order.

    Events on days with no active episode keep an empty ``concurrent_drugs``.
    """
    timeline = Timeline(episodes)
    out = []
    for ev in ade_events:
        if ev.kind is not MentionKind.ADE:
            raise ValueError(f"expected ADE events, got {ev.kind.value}")
        out.append(AdrEvent(ev.patient_id, ev.canonical, ev.date, timeline.active_on(ev.date)))
    return out


def month_bucket(index: dt.date, event: dt.date, rule: BucketRule = BucketRule()) -> Optional[MonthBucket]:
    delta = (event - index).days
    if not rule.index_day_in_first_month:
        # index day falls into the month before
        delta -= 1
    month = rule.month_length_days
    if delta >= 0:
        k = delta // month + 1
    else:
        k = -((-delta - 1) // month + 1)
    if -3 <= k <= 3:
        return BUCKETS[k + 3] if k < 0 else BUCKETS[k + 2]
    return None


def assign_buckets(events: Iterable[AdrEvent], index_date: dt.date, rule: BucketRule = BucketRule(),
                   strict_drug: Optional[str] = None) -> list[AdrEvent]:
    """Set ``interval`` on each event relative to ``index_date``.

    With ``strict_drug`` set, post-index events only get a bucket when that
    drug is among the concurrent drugs.
    """
    out = []
    for ev in events:
        bucket = month_bucket(index_date, ev.date, rule)
        if (bucket is not None and strict_drug is not None and bucket.after_index
                and strict_drug not in ev.concurrent_drugs):
            bucket = None
        out.append(dataclasses.replace(ev, interval=bucket))
    return out


EpisodesArg = Union[Mapping[str, Iterable[MedicationEpisode]], Iterable[MedicationEpisode]]


def _group(episodes: EpisodesArg) -> Mapping[str, list[MedicationEpisode]]:
    if isinstance(episodes, Mapping):
        return {k: list(v) for k, v in episodes.items()}
    grouped = defaultdict(list)
    for e in episodes:
        grouped[e.patient_id].append(e)
    return grouped


def select_cohort(all_patients: Iterable[str], episodes: EpisodesArg, drug: str = "clozapine",
                  min_days: int = 90, max_gap_days: int = 42) -> list[CohortMember]:
    """Patients with at least one episode of ``drug``, sorted by patient id.

    The index date is the earliest episode start. Coverage is chained forward
    from it across episodes separated by at most ``max_gap_days``; a member
    qualifies when that chain reaches ``min_days`` past the index.
    """
    grouped = _group(episodes)
    members = []
    for pid in sorted(set(all_patients)):
        eps = sorted((e for e in grouped.get(pid, ()) if e.generic == drug), key=lambda e: e.start)
        if not eps:
            continue
        index = eps[0].start
        end = eps[0].stop
        for e in eps[1:]:
            if (e.start - end).days > max_gap_days:
                break
            end = max(end, e.stop)
        members.append(CohortMember(pid, index, (end - index).days >= min_days, end))
    return members


ADR_COLUMNS = ("patient_id", "ade", "date", "bucket", "concurrent_drugs")


def write_adr_events(events: Iterable[AdrEvent], path) -> int:
    return write_csv(path, ADR_COLUMNS, (
        (e.patient_id, e.ade, e.date.isoformat(), e.interval.value if e.interval else "",
         "|".join(sorted(e.concurrent_drugs)))
        for e in events
    ))
