"""Medication episodes from dated drug evidence.

Per patient and generic drug, the distinct evidence dates are sorted and cut
wherever two consecutive dates are further apart than the gap threshold
(42 days by default). Each run of dates becomes one episode running from its
first to its last date.
"""

from __future__ import annotations

import bisect
import datetime as dt
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from ._io import SchemaError, parse_date, read_csv, write_csv
from .extraction import DailyEvent, MentionKind

__all__ = [
    "MedicationEpisode",
    "EpisodeThreshold",
    "build_episodes",
    "build_all_episodes",
    "active_drugs",
    "first_episode_start",
    "Timeline",
    "write_episodes",
    "load_episodes",
]


@dataclass(frozen=True, order=True)
class MedicationEpisode:
    patient_id: str
    generic: str
    start: dt.date
    stop: dt.date
    evidence_count: int

    def __post_init__(self):
        if self.start > self.stop:
            raise ValueError(f"episode starts after it stops: {self.start} > {self.stop}")
        if self.evidence_count < 1:
            raise ValueError("evidence_count must be >= 1")
        if self.evidence_count == 1 and self.start != self.stop:
            raise ValueError("a single-date episode must start and stop on that date")

    @property
    def duration_days(self) -> int:
        return (self.stop - self.start).days

    def contains(self, day: dt.date) -> bool:
        return self.start <= day <= self.stop


@dataclass(frozen=True)
class EpisodeThreshold:
    max_gap_days: int = 42
    per_drug_gap_days: Mapping[str, int] = field(default_factory=dict)
    # gap == max_gap_days continues the episode when True
    inclusive: bool = True

    def __post_init__(self):
        if self.max_gap_days < 1:
            raise ValueError("max_gap_days must be >= 1")
        for drug, gap in self.per_drug_gap_days.items():
            if gap < 1:
                raise ValueError(f"gap for {drug!r} must be >= 1")

    def gap_for(self, generic: str) -> int:
        return self.per_drug_gap_days.get(generic, self.max_gap_days)

    def continues(self, generic: str, gap_days: int) -> bool:
        limit = self.gap_for(generic)
        return gap_days <= limit if self.inclusive else gap_days < limit


def _segment(dates: list[dt.date], generic: str, threshold: EpisodeThreshold):
    runs = [[dates[0]]]
    for prev, cur in zip(dates, dates[1:]):
        if threshold.continues(generic, (cur - prev).days):
            runs[-1].append(cur)
        else:
            runs.append([cur])
    return runs


def build_episodes(events: Iterable[DailyEvent], threshold: Optional[EpisodeThreshold] = None
                   ) -> list[MedicationEpisode]:
    """Episodes for a single patient, sorted by (generic, start)."""
    threshold = threshold or EpisodeThreshold()
    by_drug: dict[str, set[dt.date]] = defaultdict(set)
    patient = None
    for ev in events:
        if ev.kind is not MentionKind.DRUG:
            raise ValueError(f"build_episodes takes drug events only, got {ev.kind.value}")
        if patient is None:
            patient = ev.patient_id
        elif ev.patient_id != patient:
            raise ValueError(f"events from several patients: {patient!r}, {ev.patient_id!r}")
        by_drug[ev.canonical].add(ev.date)

    episodes = []
    for generic in sorted(by_drug):
        for run in _segment(sorted(by_drug[generic]), generic, threshold):
            episodes.append(MedicationEpisode(patient, generic, run[0], run[-1], len(run)))
    return episodes


def build_all_episodes(events: Iterable[DailyEvent], threshold: Optional[EpisodeThreshold] = None
                       ) -> dict[str, list[MedicationEpisode]]:
    """Group drug events by patient and build each patient's episodes."""
    per_patient: dict[str, list[DailyEvent]] = defaultdict(list)
    for ev in events:
        if ev.kind is MentionKind.DRUG:
            per_patient[ev.patient_id].append(ev)
    return {pid: build_episodes(per_patient[pid], threshold) for pid in sorted(per_patient)}


def active_drugs(episodes: Iterable[MedicationEpisode], d: dt.date) -> set[str]:
    return {e.generic for e in episodes if e.start <= d <= e.stop}


def first_episode_start(episodes: Iterable[MedicationEpisode], generic: str) -> Optional[dt.date]:
    return min((e.start for e in episodes if e.generic == generic), default=None)


class Timeline:
    """Per-patient episode index answering "which drugs were active on day d".

    Episodes of one drug are disjoint, so a bisect over their start dates
    finds the only candidate.
    """

    def __init__(self, episodes: Iterable[MedicationEpisode]):
        grouped: dict[str, list[MedicationEpisode]] = defaultdict(list)
        for e in episodes:
            grouped[e.generic].append(e)
        self._starts = {}
        self._episodes = {}
        for generic, eps in grouped.items():
            eps.sort(key=lambda e: e.start)
            self._episodes[generic] = eps
            self._starts[generic] = [e.start for e in eps]

    def active_on(self, d: dt.date) -> frozenset[str]:
        out = []
        for generic, starts in self._starts.items():
            i = bisect.bisect_right(starts, d) - 1
            if i >= 0 and d <= self._episodes[generic][i].stop:
                out.append(generic)
        return frozenset(out)

    def episodes(self, generic: str) -> list[MedicationEpisode]:
        return list(self._episodes.get(generic, ()))


EPISODE_COLUMNS = ("patient_id", "generic", "start", "stop", "evidence_count")


def write_episodes(episodes: Iterable[MedicationEpisode], path) -> int:
    return write_csv(path, EPISODE_COLUMNS, (
        (e.patient_id, e.generic, e.start.isoformat(), e.stop.isoformat(), e.evidence_count)
        for e in episodes
    ))


def load_episodes(path) -> list[MedicationEpisode]:
    out = []
    for line, row in read_csv(path, EPISODE_COLUMNS):
        try:
            count = int(row["evidence_count"])
            out.append(MedicationEpisode(row["patient_id"].strip(), row["generic"].strip(),
                                         parse_date(row["start"], path, line),
                                         parse_date(row["stop"], path, line), count))
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(str(exc), path, line) from None
    return out
