"""Prevalence tables, chi-square tests with Bonferroni adjustment, and
validation metrics (PPV/FDR, percent agreement, Cohen's kappa)."""

from __future__ import annotations

import dataclasses
import datetime as dt
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .adr import BUCKETS, AdrEvent, MonthBucket
from .cohort import DIMENSIONS, Strata

log = logging.getLogger(__name__)

__all__ = [
    "StudySubject",
    "PrevalenceCell",
    "ContingencyTable",
    "ChiSquareResult",
    "ValidationMetrics",
    "Agreement",
    "DegenerateTableError",
    "UndefinedKappaError",
    "format_pct",
    "prevalence_table",
    "contingency_table",
    "chi_square",
    "chi_square_pvalue",
    "regularized_gamma_q",
    "bonferroni",
    "analyze",
    "combined_analysis",
    "dimension_available",
    "cohen_kappa",
    "ppv_fdr",
    "sample_for_validation",
]

ALPHA = 0.05


class DegenerateTableError(ValueError):
    """A contingency table with an empty row or column margin."""


class UndefinedKappaError(ValueError):
    """Chance agreement is 1, so kappa is 0/0."""


@dataclass(frozen=True)
class StudySubject:
    """A qualifying cohort member with the strata used for reporting."""

    patient_id: str
    trust: str
    index_date: dt.date
    strata: Strata


@dataclass(frozen=True)
class PrevalenceCell:
    ade: str
    dimension: str
    level: str
    bucket: MonthBucket
    numerator: int
    denominator: int

    @property
    def pct(self) -> float:
        return 100.0 * self.numerator / self.denominator

    @property
    def pct_text(self) -> str:
        return format_pct(self.numerator, self.denominator)


def format_pct(numerator: int, denominator: int) -> str:
    """Exact percentage rounded half-up to two decimals."""
    value = Fraction(100 * numerator, denominator)
    d = Decimal(value.numerator) / Decimal(value.denominator)
    return str(d.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _affected(events: Iterable[AdrEvent]) -> dict[tuple[str, MonthBucket], set[str]]:
    out: dict[tuple[str, MonthBucket], set[str]] = defaultdict(set)
    for e in events:
        if e.interval is not None:
            out[e.ade, e.interval].add(e.patient_id)
    return out


def _levels(subjects: Sequence[StudySubject], dimension: str) -> dict[str, list[str]]:
    members: dict[str, list[str]] = {lvl: [] for lvl in DIMENSIONS[dimension]}
    for s in subjects:
        lvl = s.strata.level(dimension)
        if lvl is not None:
            members[lvl].append(s.patient_id)
    return members


def prevalence_table(cohort: Sequence[StudySubject], adr_events: Iterable[AdrEvent],
                     ades: Sequence[str], dimension: str = "trust_total",
                     warnings: Optional[list[str]] = None) -> list[PrevalenceCell]:
    """Cells for every (ade, level, bucket), ordered ade → level → bucket.

    Levels with no patients are dropped and reported through ``warnings``.
    Patients without a recorded value for the dimension are left out of it.
    """
    if dimension not in DIMENSIONS:
        raise ValueError(f"unknown dimension {dimension!r}")
    in_cohort = {s.patient_id for s in cohort}
    affected = _affected(e for e in adr_events if e.patient_id in in_cohort)
    levels = {}
    for lvl, pids in _levels(cohort, dimension).items():
        if not pids:
            if warnings is not None:
                warnings.append(f"{dimension}={lvl}: no patients, level dropped")
            continue
        levels[lvl] = set(pids)
    cells = []
    for ade in ades:
        for lvl, pids in levels.items():
            for bucket in BUCKETS:
                n = len(affected.get((ade, bucket), set()) & pids)
                cells.append(PrevalenceCell(ade, dimension, lvl, bucket, n, len(pids)))
    return cells


@dataclass(frozen=True)
class ContingencyTable:
    rows: tuple[str, ...]
    cells: np.ndarray  # shape (len(rows), 2): affected, not affected

    def __post_init__(self):
        if self.cells.ndim != 2 or self.cells.shape[0] != len(self.rows):
            raise ValueError("cells must have one row per level")
        if (self.cells < 0).any():
            raise ValueError("counts must be non-negative")


def contingency_table(cohort: Sequence[StudySubject], adr_events: Iterable[AdrEvent], ade: str,
                      dimension: str, bucket: MonthBucket) -> ContingencyTable:
    cells = prevalence_table(cohort, adr_events, [ade], dimension)
    rows = [c for c in cells if c.bucket is bucket]
    return ContingencyTable(
        tuple(c.level for c in rows),
        np.array([[c.numerator, c.denominator - c.numerator] for c in rows], dtype=np.int64).reshape(-1, 2),
    )


def _expected(observed: np.ndarray) -> np.ndarray:
    row = observed.sum(axis=1, keepdims=True)
    col = observed.sum(axis=0, keepdims=True)
    return row * col / observed.sum()


def chi_square(table) -> tuple[float, int]:
    """Pearson statistic and degrees of freedom, no continuity correction."""
    observed = np.asarray(table.cells if isinstance(table, ContingencyTable) else table, dtype=float)
    if observed.ndim != 2 or min(observed.shape) < 2:
        raise DegenerateTableError(f"need at least a 2x2 table, got shape {observed.shape}")
    if (observed.sum(axis=0) == 0).any() or (observed.sum(axis=1) == 0).any():
        raise DegenerateTableError("a row or column margin is zero")
    expected = _expected(observed)
    stat = float(((observed - expected) ** 2 / expected).sum())
    df = (observed.shape[0] - 1) * (observed.shape[1] - 1)
    return stat, df


_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 100_000


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) = Γ(a, x) / Γ(a)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    log_prefix = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        # series for P(a, x)
        term = total = 1.0 / a
        ap = a
        for _ in range(_MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _EPS:
                break
        return max(0.0, 1.0 - total * math.exp(log_prefix))
    # modified Lentz continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return min(1.0, math.exp(log_prefix) * h)


def chi_square_pvalue(statistic: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if statistic < 0:
        raise ValueError("statistic must be non-negative")
    return regularized_gamma_q(df / 2.0, statistic / 2.0)


def bonferroni(p: float, m: int) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be within [0, 1], got {p}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return min(1.0, m * p)


@dataclass(frozen=True)
class ChiSquareResult:
    ade: str
    dimension: str
    bucket: MonthBucket
    statistic: Optional[float]
    df: Optional[int]
    p: Optional[float]
    p_adjusted: Optional[float] = None
    significant: bool = False
    trust: str = ""
    warnings: tuple[str, ...] = ()

    @property
    def tested(self) -> bool:
        return self.statistic is not None


def _test_one(cohort, affected, ade, dimension, bucket, trust) -> ChiSquareResult:
    rows = []
    for lvl, pids in _levels(cohort, dimension).items():
        if pids:
            n = len(affected.get((ade, bucket), set()).intersection(pids))
            rows.append([n, len(pids) - n])
    observed = np.array(rows, dtype=float).reshape(-1, 2)
    try:
        stat, df = chi_square(observed)
    except DegenerateTableError as exc:
        return ChiSquareResult(ade, dimension, bucket, None, None, None, trust=trust,
                               warnings=(f"degenerate: {exc}",))
    warns = ()
    if (_expected(observed) < 1.0).any():
        warns = ("low_expected_count",)
    return ChiSquareResult(ade, dimension, bucket, stat, df, chi_square_pvalue(stat, df),
                           trust=trust, warnings=warns)


def analyze(cohort: Sequence[StudySubject], adr_events: Iterable[AdrEvent], ades: Sequence[str],
            dimensions: Sequence[str], buckets: Sequence[MonthBucket] = BUCKETS,
            family_size: Optional[int] = None, trust: str = "") -> list[ChiSquareResult]:
    """Chi-square test per (ade, dimension, bucket) with Bonferroni adjustment.

    A family is one (dimension, bucket) pair. Unless ``family_size`` is given,
    m is the number of ADEs actually tested in that family.
    """
    in_cohort = {s.patient_id for s in cohort}
    affected = _affected(e for e in adr_events if e.patient_id in in_cohort)
    results = []
    for dimension in dimensions:
        for bucket in buckets:
            family = [_test_one(cohort, affected, ade, dimension, bucket, trust) for ade in ades]
            m = family_size or max(1, sum(r.tested for r in family))
            for r in family:
                if r.tested:
                    adj = bonferroni(r.p, m)
                    r = dataclasses.replace(r, p_adjusted=adj, significant=adj < ALPHA)
                results.append(r)
    _sort_results(results, ades, dimensions)
    return results


def _sort_results(results: list[ChiSquareResult], ades, dimensions) -> None:
    ade_pos = {a: i for i, a in enumerate(ades)}
    dim_pos = {d: i for i, d in enumerate(dimensions)}
    results.sort(key=lambda r: (ade_pos[r.ade], dim_pos[r.dimension], BUCKETS.index(r.bucket)))


def dimension_available(cohort: Iterable[StudySubject], dimension: str) -> bool:
    """True when at least one member has a recorded level for the dimension."""
    return any(s.strata.level(dimension) is not None for s in cohort)


def combined_analysis(per_trust_inputs: Mapping[str, tuple[Sequence[StudySubject], Sequence[AdrEvent]]],
                      ades: Sequence[str], dimensions: Sequence[str],
                      buckets: Sequence[MonthBucket] = BUCKETS, family_size: Optional[int] = None,
                      warnings: Optional[list[str]] = None) -> list[ChiSquareResult]:
    """Pool patients across trusts and test each dimension on the pooled cohort.

    A trust with no recorded values for a dimension is left out of that
    dimension's pool.
    """
    results = []
    for dimension in dimensions:
        pool: list[StudySubject] = []
        events: list[AdrEvent] = []
        for trust in sorted(per_trust_inputs):
            subjects, trust_events = per_trust_inputs[trust]
            if not dimension_available(subjects, dimension):
                if warnings is not None:
                    warnings.append(f"trust {trust!r} has no {dimension} data; excluded from combined {dimension}")
                continue
            pool.extend(subjects)
            events.extend(trust_events)
        if not pool:
            continue
        results.extend(analyze(pool, events, ades, [dimension], buckets, family_size, trust="Combined"))
    _sort_results(results, ades, dimensions)
    return results


@dataclass(frozen=True)
class Agreement:
    kappa: float
    percent_agreement: float


def cohen_kappa(confusion) -> Agreement:
    """Cohen's kappa and percent agreement from a square count matrix.

    Rows are annotator A's labels, columns annotator B's.
    """
    m = np.asarray(confusion, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("confusion matrix must be square")
    if (m < 0).any():
        raise ValueError("counts must be non-negative")
    total = m.sum()
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    p_o = np.trace(m) / total
    p_e = float((m.sum(axis=0) * m.sum(axis=1)).sum() / total ** 2)
    if math.isclose(p_e, 1.0):
        raise UndefinedKappaError("chance agreement is 1; kappa is undefined")
    return Agreement(float((p_o - p_e) / (1.0 - p_e)), float(100.0 * p_o))


@dataclass(frozen=True)
class ValidationMetrics:
    ppv: float
    fdr: float
    true_positives: int = 0
    false_positives: int = 0
    percent_agreement: Optional[float] = None
    kappa: Optional[float] = None


def ppv_fdr(labels: Iterable[bool]) -> ValidationMetrics:
    """PPV and FDR from human verdicts on predicted-positive samples (True = confirmed)."""
    verdicts = [bool(v) for v in labels]
    if not verdicts:
        raise ValueError("no validation samples")
    tp = sum(verdicts)
    fp = len(verdicts) - tp
    ppv = tp / (tp + fp)
    return ValidationMetrics(ppv, 1.0 - ppv, tp, fp)


def sample_for_validation(adr_events: Sequence[AdrEvent], n: int = 300, seed: int = 0) -> list[AdrEvent]:
    """Uniform sample without replacement, reproducible from ``seed``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > len(adr_events):
        raise ValueError(f"cannot sample {n} from {len(adr_events)} events")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(adr_events), size=n, replace=False)
    return [adr_events[i] for i in idx]
