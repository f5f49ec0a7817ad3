"""End-to-end orchestration: extract → episodes → cohort → adr → stats → compare.

Each stage is a plain function over in-memory tables; :func:`run_pipeline`
chains them and writes the report bundle plus a manifest of stage counts,
input hashes and invariant checks.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import __version__
from ._io import SchemaError, write_csv
from .adr import BUCKETS, AdrEvent, CohortMember, MonthBucket, assign_buckets, build_adr_timeline, \
    select_cohort, write_adr_events
from .cohort import (DIMENSIONS, AdmissionRecord, DiagnosisRecord, PatientDemographics, SmokingObservation,
                     derive_strata, group_by_patient, load_admissions, load_diagnoses, load_patients,
                     load_smoking)
from .config import RunConfig
from .episodes import MedicationEpisode, active_drugs, build_all_episodes, write_episodes
from .extraction import (ClinicalDocument, DailyEvent, Gazetteer, Mention, MentionKind, Polarity,
                         collapse_daily, extract_mentions, load_documents, load_prescriptions,
                         prescription_mentions, write_mentions)
from .lexicon import (AdeLexicon, DrugLexicon, SiderReference, default_ade_lexicon, default_drug_lexicon,
                      default_sider_reference, load_ade_dictionary, load_drug_dictionary,
                      load_sider_reference)
from .stats import (ChiSquareResult, PrevalenceCell, StudySubject, analyze, combined_analysis,
                    dimension_available, prevalence_table, sample_for_validation)

log = logging.getLogger(__name__)

__all__ = [
    "PipelineError",
    "MissingInputError",
    "SchemaMismatchError",
    "EmptyCohortError",
    "InvariantError",
    "Inputs",
    "Results",
    "SiderFlag",
    "SiderComparison",
    "load_inputs",
    "compare_with_sider",
    "run_stages",
    "run_pipeline",
    "write_report",
    "write_validation_sample",
    "check_invariants",
    "manifest_hash",
    "ALL_STAGES",
    "COMBINED",
]

COMBINED = "Combined"


class PipelineError(Exception):
    exit_code = 1


class MissingInputError(PipelineError):
    exit_code = 3


class SchemaMismatchError(PipelineError):
    exit_code = 4


class EmptyCohortError(PipelineError):
    exit_code = 5


class InvariantError(PipelineError):
    exit_code = 6


@dataclass
class Inputs:
    drugs: DrugLexicon
    ades: AdeLexicon
    sider: SiderReference
    documents: list[ClinicalDocument]
    patients: list[PatientDemographics]
    admissions: list[AdmissionRecord] = field(default_factory=list)
    diagnoses: list[DiagnosisRecord] = field(default_factory=list)
    smoking: list[SmokingObservation] = field(default_factory=list)
    prescriptions: list[tuple] = field(default_factory=list)
    hashes: dict[str, dict[str, str]] = field(default_factory=dict)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_inputs(config: RunConfig) -> Inputs:
    """Read every configured input, mapping failures to pipeline errors."""
    loaders = {
        "documents": load_documents,
        "patients": load_patients,
        "admissions": load_admissions,
        "diagnoses": load_diagnoses,
        "smoking": load_smoking,
        "prescriptions": load_prescriptions,
        "drugs": load_drug_dictionary,
        "ades": load_ade_dictionary,
        "sider": load_sider_reference,
    }
    for name in config.inputs.REQUIRED:
        if getattr(config.inputs, name) is None:
            raise MissingInputError(f"config does not name the required '{name}' input")
    loaded = {}
    hashes = {}
    for name, loader in loaders.items():
        path = config.path(name)
        if path is None:
            continue
        if not path.is_file():
            raise MissingInputError(f"input file not found: {path}")
        try:
            loaded[name] = loader(path)
        except SchemaError as exc:
            raise SchemaMismatchError(str(exc)) from exc
        hashes[name] = {"path": getattr(config.inputs, name), "sha256": _sha256(path)}
    return Inputs(
        drugs=loaded.get("drugs") or default_drug_lexicon(),
        ades=loaded.get("ades") or default_ade_lexicon(),
        sider=loaded.get("sider") or default_sider_reference(),
        documents=loaded["documents"],
        patients=loaded["patients"],
        admissions=loaded.get("admissions", []),
        diagnoses=loaded.get("diagnoses", []),
        smoking=loaded.get("smoking", []),
        prescriptions=loaded.get("prescriptions", []),
        hashes=hashes,
    )


class SiderFlag(str, enum.Enum):
    BELOW = "Below"
    WITHIN = "Within"
    ABOVE = "Above"
    NO_REFERENCE = "NoReference"


@dataclass(frozen=True)
class SiderComparison:
    ade: str
    trust: str
    bucket: MonthBucket
    pct: float
    pct_text: str
    low_pct: Optional[float]
    high_pct: Optional[float]
    flag: SiderFlag


SIDER_ONE_SIDED = ("point", "open")


def compare_with_sider(prevalence: Iterable[PrevalenceCell], reference: SiderReference,
                       trust: str = "", one_sided: str = "point") -> list[SiderComparison]:
    """Place each post-index trust-total percentage against its reference range.

    A range with a single bound is a single reported frequency. Under
    ``one_sided="point"`` it is compared as [v, v]; under ``"open"`` a
    low-only range reads as [low, 100] and a high-only one as [0, high].
    """
    if one_sided not in SIDER_ONE_SIDED:
        raise ValueError(f"one_sided must be one of {SIDER_ONE_SIDED}, got {one_sided!r}")
    out = []
    for cell in prevalence:
        if cell.dimension != "trust_total" or not cell.bucket.after_index:
            continue
        rng = reference.get(cell.ade)
        if rng is None:
            flag, low, high = SiderFlag.NO_REFERENCE, None, None
        else:
            low, high = rng.low_pct, rng.high_pct
            if one_sided == "point":
                lo = high if low is None else low
                hi = low if high is None else high
            else:
                lo = 0.0 if low is None else low
                hi = 100.0 if high is None else high
            flag = SiderFlag.BELOW if cell.pct < lo else SiderFlag.ABOVE if cell.pct > hi else SiderFlag.WITHIN
        out.append(SiderComparison(cell.ade, trust, cell.bucket, cell.pct, cell.pct_text, low, high, flag))
    return out


@dataclass
class Results:
    config: RunConfig
    mentions: list[Mention]
    daily_events: list[DailyEvent]
    episodes: dict[str, list[MedicationEpisode]]
    members: list[CohortMember]
    subjects: list[StudySubject]
    adr_events: list[AdrEvent]
    prevalence: dict[tuple[str, str], list[PrevalenceCell]]  # (trust, dimension) -> cells
    chisq_per_trust: list[ChiSquareResult]
    chisq_combined: list[ChiSquareResult]
    sider: list[SiderComparison]
    validation_sample: list[AdrEvent]
    ade_names: tuple[str, ...]
    counts: dict[str, int]
    warnings: list[str]
    invariants: dict[str, bool] = field(default_factory=dict)

    @property
    def trusts(self) -> list[str]:
        return sorted({s.trust for s in self.subjects})


def _extract(inputs: Inputs, config: RunConfig) -> list[Mention]:
    gaz = Gazetteer(inputs.drugs, inputs.ades)
    cues = config.cue_config()
    mentions = []
    for doc in inputs.documents:
        mentions.extend(extract_mentions(doc, inputs.drugs, inputs.ades, cues, gaz))
    mentions.extend(prescription_mentions(inputs.prescriptions, inputs.drugs))
    mentions.sort(key=lambda m: (m.patient_id, m.date, m.doc_id, m.start))
    return mentions


def _subjects(inputs: Inputs, members: Sequence[CohortMember], config: RunConfig,
              warnings: list[str]) -> list[StudySubject]:
    by_id = {p.patient_id: p for p in inputs.patients}
    adm = group_by_patient(inputs.admissions)
    dia = group_by_patient(inputs.diagnoses)
    smk = group_by_patient(inputs.smoking)
    trusts_with_admissions = {by_id[a.patient_id].trust for a in inputs.admissions if a.patient_id in by_id}
    for t in sorted({p.trust for p in inputs.patients} - trusts_with_admissions):
        warnings.append(f"trust {t!r} has no admission records; admission status left unrecorded")
    opts = config.strata_options()
    subjects = []
    for m in members:
        if not m.qualifying:
            continue
        p = by_id[m.patient_id]
        if p.dob is not None and p.dob > m.index_date:
            raise SchemaMismatchError(f"patient {p.patient_id}: date of birth {p.dob} after index {m.index_date}")
        strata = derive_strata(p, m.index_date, adm.get(p.patient_id, ()), dia.get(p.patient_id, ()),
                               smk.get(p.patient_id, ()), config.ethnicity_map, opts,
                               admissions_recorded=p.trust in trusts_with_admissions)
        subjects.append(StudySubject(p.patient_id, p.trust, m.index_date, strata))
    return subjects


def run_stages(inputs: Inputs, config: RunConfig, through: str = "compare") -> Results:
    """Run stages up to and including ``through``.

    Stage names: extract, episodes, adr, prevalence, stats, compare.
    Later fields of the result stay empty.
    """
    order = ("extract", "episodes", "adr", "prevalence", "stats", "compare")
    if through not in order:
        raise ValueError(f"unknown stage {through!r}")
    upto = order.index(through)
    warnings: list[str] = []
    counts: dict[str, int] = {
        "documents": len(inputs.documents),
        "patients": len(inputs.patients),
        "prescription_rows": len(inputs.prescriptions),
    }
    ade_names = inputs.ades.canonicals
    res = Results(config, [], [], {}, [], [], [], {}, [], [], [], [], ade_names, counts, warnings)

    res.mentions = _extract(inputs, config)
    counts["mentions"] = len(res.mentions)
    counts["positive_mentions"] = sum(m.polarity is Polarity.POSITIVE for m in res.mentions)
    counts["hedged_mentions"] = sum(m.polarity is Polarity.HEDGED for m in res.mentions)
    counts["negated_mentions"] = sum(m.polarity is Polarity.NEGATED for m in res.mentions)
    if upto < 1:
        return res

    known = {p.patient_id for p in inputs.patients}
    res.daily_events = collapse_daily(res.mentions, include_hedged=config.count_hedged)
    stray = sorted({e.patient_id for e in res.daily_events} - known)
    if stray:
        warnings.append(f"{len(stray)} patient id(s) in documents are missing from patients.csv; ignored")
        res.daily_events = [e for e in res.daily_events if e.patient_id in known]
    counts["daily_events"] = len(res.daily_events)
    res.episodes = build_all_episodes(res.daily_events, config.threshold())
    counts["episodes"] = sum(len(v) for v in res.episodes.values())
    if upto < 2:
        return res

    res.members = select_cohort(known, res.episodes, config.drug, config.min_treatment_days,
                                config.threshold().gap_for(config.drug))
    counts["cohort_members"] = len(res.members)
    counts["qualifying"] = sum(m.qualifying for m in res.members)
    if counts["qualifying"] == 0:
        raise EmptyCohortError(f"no patient has {config.min_treatment_days} days of {config.drug}")
    res.subjects = _subjects(inputs, res.members, config, warnings)
    index_of = {s.patient_id: s.index_date for s in res.subjects}
    ade_by_patient: dict[str, list[DailyEvent]] = defaultdict(list)
    for e in res.daily_events:
        if e.kind is MentionKind.ADE and e.patient_id in index_of:
            ade_by_patient[e.patient_id].append(e)
    rule = config.bucket_rule()
    strict = config.drug if config.strict_attribution else None
    for pid in sorted(ade_by_patient):
        events = build_adr_timeline(ade_by_patient[pid], res.episodes.get(pid, []))
        res.adr_events.extend(assign_buckets(events, index_of[pid], rule, strict))
    counts["adr_events"] = len(res.adr_events)
    counts["bucketed_adr_events"] = sum(e.interval is not None for e in res.adr_events)
    if upto < 3:
        return res

    dims = ("trust_total",) + tuple(config.dimensions)
    by_trust: dict[str, list[StudySubject]] = defaultdict(list)
    for s in res.subjects:
        by_trust[s.trust].append(s)
    trust_of = {s.patient_id: s.trust for s in res.subjects}
    events_by_trust: dict[str, list[AdrEvent]] = defaultdict(list)
    for e in res.adr_events:
        events_by_trust[trust_of[e.patient_id]].append(e)
    groups = [(t, by_trust[t], events_by_trust[t]) for t in sorted(by_trust)]
    groups.append((COMBINED, res.subjects, res.adr_events))
    for trust, subjects, events in groups:
        for dim in dims:
            if not dimension_available(subjects, dim):
                warnings.append(f"{trust}: no {dim} data recorded; dimension skipped")
                continue
            level_warnings: list[str] = []
            res.prevalence[trust, dim] = prevalence_table(subjects, events, ade_names, dim, level_warnings)
            warnings.extend(f"{trust}: {w}" for w in level_warnings)
    if upto < 4:
        return res

    for trust, subjects, events in groups[:-1]:
        dims_here = [d for d in config.dimensions if dimension_available(subjects, d)]
        res.chisq_per_trust.extend(analyze(subjects, events, ade_names, dims_here,
                                           family_size=config.bonferroni_m, trust=trust))
    res.chisq_combined = combined_analysis(
        {t: (by_trust[t], events_by_trust[t]) for t in by_trust}, ade_names, list(config.dimensions),
        family_size=config.bonferroni_m, warnings=warnings)
    if upto < 5:
        return res

    for trust, _, _ in groups:
        cells = res.prevalence.get((trust, "trust_total"), [])
        res.sider.extend(compare_with_sider(cells, inputs.sider, trust, config.sider_one_sided))
    linked = [e for e in res.adr_events
              if e.interval is not None and e.interval.after_index and config.drug in e.concurrent_drugs]
    n = min(config.validation_sample_size, len(linked))
    if n < config.validation_sample_size:
        warnings.append(f"only {len(linked)} drug-linked events available; validation sample has {n}")
    res.validation_sample = sample_for_validation(linked, n, config.seed)
    counts["validation_sample"] = len(res.validation_sample)
    return res


def check_invariants(res: Results) -> dict[str, bool]:
    c = res.counts
    checks = {
        "mentions_monotone": c.get("positive_mentions", 0) <= c.get("mentions", 0),
        "daily_events_le_kept_mentions": c.get("daily_events", 0) <= (
            c.get("positive_mentions", 0) + (c.get("hedged_mentions", 0) if res.config.count_hedged else 0)),
        "cohort_le_patients": c.get("qualifying", 0) <= c.get("cohort_members", 0) <= c.get("patients", 0),
        "bucketed_le_adr_events": c.get("bucketed_adr_events", 0) <= c.get("adr_events", 0),
    }
    # concurrent drugs against a linear scan of each patient's episodes
    checks["concurrent_drugs_match_scan"] = all(
        e.concurrent_drugs == active_drugs(res.episodes.get(e.patient_id, []), e.date) for e in res.adr_events)

    # levels of a fully recorded dimension add up to the trust total
    partition_ok = True
    for (trust, dim), cells in res.prevalence.items():
        if dim == "trust_total" or (trust, "trust_total") not in res.prevalence:
            continue
        total = {(c.ade, c.bucket): c for c in res.prevalence[trust, "trust_total"]}
        denominators = {c.level: c.denominator for c in cells}
        if sum(denominators.values()) != next(iter(total.values())).denominator:
            continue  # some patients unrecorded for this dimension
        sums: dict[tuple, int] = defaultdict(int)
        for cell in cells:
            sums[cell.ade, cell.bucket] += cell.numerator
        partition_ok &= all(sums[k] == t.numerator for k, t in total.items())
    checks["partition_consistency"] = partition_ok
    checks["bonferroni_not_below_p"] = all(
        r.p_adjusted >= r.p for r in res.chisq_per_trust + res.chisq_combined if r.tested)
    return checks


# ---------------------------------------------------------------- writers

PREVALENCE_COLUMNS = ("ade", "trust", "dimension", "level", "m-3", "m-2", "m-1", "m+1", "m+2", "m+3",
                      "sider_low", "sider_high")
CHISQ_COLUMNS = ("ade", "dimension", "bucket", "statistic", "df", "p", "p_adjusted", "significant", "warnings")
SIDER_COLUMNS = ("ade", "trust", "bucket", "pct", "sider_low", "sider_high", "flag")
COHORT_COLUMNS = ("patient_id", "trust", "index_date", "qualifying", "coverage_end", "gender", "ethnicity",
                  "age_group", "smoking", "admission", "diagnosis")
VALIDATION_COLUMNS = ("sample_no", "patient_id", "ade", "date", "bucket", "concurrent_drugs",
                      "ade_verdict", "drug_verdict")


def _pct_or_blank(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.2f}"


def prevalence_rows(res: Results, sider: SiderReference):
    trust_order = res.trusts + [COMBINED]
    dim_order = ["trust_total"] + list(res.config.dimensions)
    grouped: dict[tuple, dict[MonthBucket, PrevalenceCell]] = defaultdict(dict)
    for (trust, dim), cells in res.prevalence.items():
        for c in cells:
            grouped[c.ade, trust, dim, c.level][c.bucket] = c
    ade_pos = {a: i for i, a in enumerate(res.ade_names)}

    def key(k):
        ade, trust, dim, level = k
        return ade_pos[ade], trust_order.index(trust), dim_order.index(dim), DIMENSIONS[dim].index(level)

    for k in sorted(grouped, key=key):
        ade, trust, dim, level = k
        rng = sider.rows.get(ade)
        yield (ade, trust, dim, level, *(grouped[k][b].pct_text for b in BUCKETS),
               _pct_or_blank(rng.low_pct if rng else None), _pct_or_blank(rng.high_pct if rng else None))


def _chisq_row(r: ChiSquareResult) -> tuple:
    if not r.tested:
        return (r.ade, r.dimension, r.bucket.value, "", "", "", "", "false", "|".join(r.warnings))
    return (r.ade, r.dimension, r.bucket.value, f"{r.statistic:.4f}", r.df, f"{r.p:.2e}",
            f"{r.p_adjusted:.2e}", "true" if r.significant else "false", "|".join(r.warnings))


def write_cohort(res: Results, path) -> int:
    strata = {s.patient_id: s.strata for s in res.subjects}
    trust = {s.patient_id: s.trust for s in res.subjects}

    def cell(v):
        return "" if v is None else v.value

    rows = []
    for m in res.members:
        st = strata.get(m.patient_id)
        rows.append((m.patient_id, trust.get(m.patient_id, ""), m.index_date.isoformat(),
                     "true" if m.qualifying else "false",
                     m.coverage_end.isoformat() if m.coverage_end else "",
                     *((cell(st.gender), cell(st.ethnicity), cell(st.age_group), cell(st.smoking),
                        cell(st.admission), cell(st.diagnosis)) if st else ("",) * 6)))
    return write_csv(path, COHORT_COLUMNS, rows)


def write_report(res: Results, out_dir, sider: SiderReference, stages: Sequence[str]) -> dict[str, Path]:
    """Write the files belonging to ``stages``; returns name -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}

    def emit(name, writer):
        path = out / name
        writer(path)
        written[name] = path

    if "extract" in stages:
        emit("mentions.csv", lambda p: write_mentions(res.mentions, p))
    if "episodes" in stages:
        emit("episodes.csv", lambda p: write_episodes(
            [e for pid in sorted(res.episodes) for e in res.episodes[pid]], p))
    if "adr" in stages:
        emit("cohort.csv", lambda p: write_cohort(res, p))
        emit("adr_events.csv", lambda p: write_adr_events(res.adr_events, p))
    if "prevalence" in stages:
        emit("prevalence.csv", lambda p: write_csv(p, PREVALENCE_COLUMNS, prevalence_rows(res, sider)))
    if "stats" in stages:
        emit("chisq_per_trust.csv", lambda p: write_csv(
            p, ("trust",) + CHISQ_COLUMNS, ((r.trust, *_chisq_row(r)) for r in res.chisq_per_trust)))
        emit("chisq_combined.csv", lambda p: write_csv(p, CHISQ_COLUMNS, map(_chisq_row, res.chisq_combined)))
    if "compare" in stages:
        emit("sider_compare.csv", lambda p: write_csv(p, SIDER_COLUMNS, (
            (c.ade, c.trust, c.bucket.value, c.pct_text, _pct_or_blank(c.low_pct), _pct_or_blank(c.high_pct),
             c.flag.value) for c in res.sider)))
    if "validate" in stages:
        emit("validation_sample.csv", lambda p: write_validation_sample(res.validation_sample, p))
    return written


def write_validation_sample(sample: Sequence[AdrEvent], path) -> int:
    return write_csv(path, VALIDATION_COLUMNS, (
        (i, e.patient_id, e.ade, e.date.isoformat(), e.interval.value if e.interval else "",
         "|".join(sorted(e.concurrent_drugs)), "", "")
        for i, e in enumerate(sample, start=1)))


def build_manifest(res: Results, inputs: Inputs, written: dict[str, Path]) -> dict:
    outputs = {name: _sha256(path) for name, path in sorted(written.items())}
    return {
        "package_version": __version__,
        "config_hash": res.config.hash(),
        "seed": res.config.seed,
        "drug": res.config.drug,
        "inputs": dict(sorted(inputs.hashes.items())),
        "counts": dict(sorted(res.counts.items())),
        "outputs": outputs,
        "bundle_hash": hashlib.sha256(json.dumps(outputs, sort_keys=True).encode()).hexdigest(),
        "invariants": dict(sorted(res.invariants.items())),
        "warnings": res.warnings,
    }


ALL_STAGES = ("extract", "episodes", "adr", "prevalence", "stats", "compare", "validate")


def run_pipeline(config: RunConfig, out_dir=None) -> tuple[Results, Path]:
    """Full run; writes every report file and ``run_manifest.json``.

    Raises :class:`InvariantError` after writing the bundle when a
    consistency check fails.
    """
    out = Path(out_dir) if out_dir else config.output_dir()
    inputs = load_inputs(config)
    res = run_stages(inputs, config, "compare")
    checks = res.invariants = check_invariants(res)
    written = write_report(res, out, inputs.sider, ALL_STAGES)
    manifest = build_manifest(res, inputs, written)
    manifest_path = out / "run_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        raise InvariantError(f"invariant check(s) failed: {', '.join(failed)}")
    return res, manifest_path


def manifest_hash(path) -> str:
    return _sha256(Path(path))
