"""Seeded synthetic corpus with planted adverse-event prevalences.

Every patient gets a clozapine mention sequence at a fixed cadence starting
on their index date, plus templated ADE sentences planted per monthly bucket
at configured rates. Negated and hedged sentences are mixed in so the
extraction filters have something to do. Output files use exactly the input
layouts the pipeline reads.
"""

from __future__ import annotations

import datetime as dt
from collections import defaultdict
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np

from ._io import write_csv
from .adr import BUCKETS, MonthBucket
from .cohort import AdmissionRecord, DiagnosisRecord, Gender, PatientDemographics, SmokingObservation
from .extraction import ClinicalDocument, write_documents
from .lexicon import AdeLexicon, default_ade_lexicon

__all__ = ["SynthSpec", "SynthCorpus", "generate", "table3_preset", "DEFAULT_ADE_RATES"]

AGE_RANGES = {
    "Under21": (16, 20), "21-30": (21, 30), "31-40": (31, 40), "41-50": (41, 50),
    "51-60": (51, 60), "61-70": (61, 70), "71-80": (71, 80), "Above80": (81, 90),
}

# combined-cohort proportions, roughly following the published cohort table
DEFAULT_AGE_MIX = {"Under21": 0.025, "21-30": 0.19, "31-40": 0.28, "41-50": 0.27,
                   "51-60": 0.16, "61-70": 0.05, "71-80": 0.02, "Above80": 0.005}
DEFAULT_ETHNICITY_MIX = {"White British": 0.45, "Any other white background": 0.11,
                         "Black Caribbean": 0.17, "Black African": 0.13, "Indian": 0.03,
                         "Chinese": 0.03, "Mixed": 0.05, "": 0.03}
DEFAULT_DIAGNOSIS_MIX = {"F20.0": 0.75, "F25.1": 0.13, "F31.2": 0.03, "F32.1": 0.02,
                         "I10": 0.05, "": 0.02}

# rates per bucket in order M-3, M-2, M-1, M+1, M+2, M+3
DEFAULT_ADE_RATES = {
    "agitation": (0.15, 0.18, 0.20, 0.42, 0.29, 0.23),
    "fatigue": (0.11, 0.13, 0.14, 0.40, 0.31, 0.28),
    "sedation": (0.08, 0.10, 0.11, 0.30, 0.28, 0.23),
    "dizziness": (0.03, 0.04, 0.04, 0.15, 0.12, 0.10),
    "hypersalivation": (0.01, 0.01, 0.02, 0.14, 0.12, 0.10),
    "weight gain": (0.03, 0.03, 0.04, 0.10, 0.09, 0.08),
    "tachycardia": (0.01, 0.01, 0.02, 0.11, 0.08, 0.06),
    "constipation": (0.02, 0.02, 0.03, 0.09, 0.07, 0.06),
    "headache": (0.03, 0.03, 0.04, 0.08, 0.06, 0.05),
    "tremor": (0.01, 0.02, 0.03, 0.05, 0.04, 0.03),
}

POSITIVE_TEMPLATES = (
    "Complains of {t}.",
    "Patient reports {t} since last review.",
    "{T} noted on review.",
    "Ongoing {t} discussed with the team.",
)
NEGATED_TEMPLATES = (
    "No evidence of {t}.",
    "Denies {t}.",
    "Patient denies {t} today.",
    "No {t} reported.",
)
HEDGED_TEMPLATES = (
    "Risk of {t} discussed.",
    "Warned about potential {t}.",
    "Monitor for {t}.",
    "Query ?{t}.",
)
FILLERS = (
    "Mental state stable.",
    "Seen in clinic with care coordinator.",
    "Bloods taken.",
    "Plan discussed with patient and family.",
)
CLOZAPINE_SURFACES = ("clozapine", "Clozaril", "Denzapine", "Zaponex")
OTHER_DRUG_SURFACES = ("olanzapine", "Zyprexa")

Rates = tuple[float, float, float, float, float, float]


@dataclass
class SynthSpec:
    seed: int = 0
    n_patients: int = 1000
    trusts: dict[str, float] = field(default_factory=lambda: {"SLAM": 0.6, "Camden & Islington": 0.2,
                                                              "Oxford": 0.2})
    # dimensions a trust does not record: any of age_group, smoking, admission
    trust_missing: dict[str, list[str]] = field(default_factory=dict)
    male_fraction: float = 0.62
    ethnicity_mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_ETHNICITY_MIX))
    age_mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_AGE_MIX))
    smoker_rate: float = 0.6
    smoking_unrecorded_rate: float = 0.05
    inpatient_rate: float = 0.37
    diagnosis_mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_DIAGNOSIS_MIX))
    ade_rates: dict[str, Rates] = field(default_factory=lambda: dict(DEFAULT_ADE_RATES))
    cadence_days: int = 28
    treatment_days: int = 180
    short_treatment_rate: float = 0.05
    negation_rate: Union[float, dict[str, float]] = 0.0
    distractor_rate: float = 0.05
    duplicate_rate: float = 0.2
    other_drug_rate: float = 0.4
    exact_counts: bool = False
    first_index: dt.date = dt.date(2008, 1, 1)
    last_index: dt.date = dt.date(2015, 12, 31)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_patients < 1:
            raise ValueError("n_patients must be >= 1")
        if self.cadence_days < 1:
            raise ValueError("cadence_days must be >= 1")
        if self.treatment_days < 0:
            raise ValueError("treatment_days must be >= 0")
        rates = {
            "male_fraction": self.male_fraction,
            "smoker_rate": self.smoker_rate,
            "smoking_unrecorded_rate": self.smoking_unrecorded_rate,
            "inpatient_rate": self.inpatient_rate,
            "short_treatment_rate": self.short_treatment_rate,
            "distractor_rate": self.distractor_rate,
            "duplicate_rate": self.duplicate_rate,
            "other_drug_rate": self.other_drug_rate,
        }
        neg = self.negation_rate
        if isinstance(neg, Mapping):
            rates.update({f"negation_rate[{k}]": v for k, v in neg.items()})
        else:
            rates["negation_rate"] = neg
        for ade, rs in self.ade_rates.items():
            if len(rs) != len(BUCKETS):
                raise ValueError(f"ade_rates[{ade!r}] needs {len(BUCKETS)} values, got {len(rs)}")
            rates.update({f"ade_rates[{ade}][{i}]": r for i, r in enumerate(rs)})
        for name, r in rates.items():
            if not 0.0 <= float(r) <= 1.0:
                raise ValueError(f"{name} must be within [0, 1], got {r}")
        for name, mix in (("trusts", self.trusts), ("ethnicity_mix", self.ethnicity_mix),
                          ("age_mix", self.age_mix), ("diagnosis_mix", self.diagnosis_mix)):
            if not mix or any(v < 0 for v in mix.values()) or sum(mix.values()) <= 0:
                raise ValueError(f"{name} must have non-negative weights with a positive sum")
        unknown_ages = set(self.age_mix) - set(AGE_RANGES)
        if unknown_ages:
            raise ValueError(f"unknown age groups: {sorted(unknown_ages)}")
        if self.first_index > self.last_index:
            raise ValueError("first_index is after last_index")

    def negation_for(self, ade: str) -> float:
        if isinstance(self.negation_rate, Mapping):
            return float(self.negation_rate.get(ade, 0.0))
        return float(self.negation_rate)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "SynthSpec":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names - {"preset"}
        if unknown:
            raise ValueError(f"unknown synth setting(s): {', '.join(sorted(unknown))}")
        kwargs = {k: v for k, v in data.items() if k != "preset"}
        for key in ("first_index", "last_index"):
            if isinstance(kwargs.get(key), str):
                kwargs[key] = dt.date.fromisoformat(kwargs[key])
        if "ade_rates" in kwargs:
            kwargs["ade_rates"] = {k: tuple(float(x) for x in v) for k, v in kwargs["ade_rates"].items()}
        base = table3_preset() if data.get("preset") == "table3_oxford" else cls()
        if data.get("preset") not in (None, "table3_oxford"):
            raise ValueError(f"unknown synth preset {data['preset']!r}")
        merged = {f.name: getattr(base, f.name) for f in fields(cls)}
        merged.update(kwargs)
        return cls(**merged)


@dataclass
class SynthCorpus:
    patients: list[PatientDemographics]
    documents: list[ClinicalDocument]
    admissions: list[AdmissionRecord]
    diagnoses: list[DiagnosisRecord]
    smoking: list[SmokingObservation]
    # bookkeeping for tests; planted lists patients with a surviving positive mention
    index_dates: dict[str, dt.date]
    qualifying: set[str]
    planted: dict[tuple[str, MonthBucket], set[str]]

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {name: out / fname for name, fname in (
            ("patients", "patients.csv"), ("documents", "documents.jsonl"),
            ("admissions", "admissions.csv"), ("diagnoses", "diagnoses.csv"), ("smoking", "smoking.csv"))}
        write_csv(paths["patients"], ("patient_id", "dob", "gender", "ethnicity", "trust"), (
            (p.patient_id, p.dob.isoformat() if p.dob else "",
             "" if p.gender is Gender.UNKNOWN else p.gender.value, p.ethnicity_raw, p.trust)
            for p in self.patients))
        write_documents(self.documents, paths["documents"])
        write_csv(paths["admissions"], ("patient_id", "admit_date", "discharge_date"), (
            (a.patient_id, a.admit_date.isoformat(), a.discharge_date.isoformat() if a.discharge_date else "")
            for a in self.admissions))
        write_csv(paths["diagnoses"], ("patient_id", "date", "icd10"), (
            (d.patient_id, d.date.isoformat(), d.icd10_code) for d in self.diagnoses))
        write_csv(paths["smoking"], ("patient_id", "date", "status"), (
            (s.patient_id, s.date.isoformat(), "smoker" if s.smoker else "non-smoker") for s in self.smoking))
        return paths


def _bucket_window(bucket: MonthBucket) -> tuple[int, int]:
    """Day offsets [lo, hi) of a bucket under the default 30-day rule."""
    k = bucket.offset
    return ((k - 1) * 30, k * 30) if k > 0 else (k * 30, (k + 1) * 30)


def _pick(rng: np.random.Generator, mix: Mapping[str, float]) -> str:
    keys = list(mix)
    w = np.array([mix[k] for k in keys], dtype=float)
    return keys[int(rng.choice(len(keys), p=w / w.sum()))]


def _term_forms(ades: AdeLexicon) -> dict[str, tuple[str, ...]]:
    return {e.canonical: (e.canonical, *e.synonyms) for e in ades.entries}


def generate(spec: SynthSpec, ades: Optional[AdeLexicon] = None) -> SynthCorpus:
    spec.validate()
    ades = ades or default_ade_lexicon()
    forms = _term_forms(ades)
    unknown = set(spec.ade_rates) - set(forms)
    if unknown:
        raise ValueError(f"ade_rates names ADEs missing from the lexicon: {sorted(unknown)}")
    rng = np.random.default_rng(spec.seed)
    n = spec.n_patients
    span = (spec.last_index - spec.first_index).days

    # patient attributes
    pids = [f"P{i:06d}" for i in range(1, n + 1)]
    trusts = [_pick(rng, spec.trusts) for _ in pids]
    index_dates = {pid: spec.first_index + dt.timedelta(days=int(rng.integers(0, span + 1))) for pid in pids}
    short = {pid for pid in pids if rng.random() < spec.short_treatment_rate}
    qualifying = [pid for pid in pids if pid not in short]

    # planted positives per (ade, bucket)
    planted: dict[tuple[str, MonthBucket], set[str]] = defaultdict(set)
    for ade in spec.ade_rates:
        for b, rate in zip(BUCKETS, spec.ade_rates[ade]):
            if spec.exact_counts:
                k = int(round(rate * len(qualifying)))
                chosen = rng.permutation(len(qualifying))[:k]
                planted[ade, b] = {qualifying[i] for i in chosen}
            else:
                draws = rng.random(n)
                planted[ade, b] = {pid for pid, u in zip(pids, draws) if u < rate}

    patients, admissions, diagnoses, smoking = [], [], [], []
    sentences: dict[str, dict[dt.date, list[str]]] = {pid: defaultdict(list) for pid in pids}
    recovered: dict[tuple[str, MonthBucket], set[str]] = defaultdict(set)

    for pid, trust in zip(pids, trusts):
        idx = index_dates[pid]
        missing = set(spec.trust_missing.get(trust, ()))
        day = lambda off: idx + dt.timedelta(days=int(off))  # noqa: E731
        say = sentences[pid]

        # demographics
        lo, hi = AGE_RANGES[_pick(rng, spec.age_mix)]
        age = int(rng.integers(lo, hi + 1))
        anniversary = _same_day(idx, idx.year - age)
        dob = anniversary - dt.timedelta(days=int(rng.integers(0, 365)))
        gender = Gender.MALE if rng.random() < spec.male_fraction else Gender.FEMALE
        patients.append(PatientDemographics(pid, None if "age_group" in missing else dob, gender,
                                            _pick(rng, spec.ethnicity_mix), trust))

        # clozapine course
        stop_day = spec.treatment_days if pid not in short else int(rng.integers(14, 71))
        for off in range(0, stop_day + 1, spec.cadence_days):
            surface = CLOZAPINE_SURFACES[int(rng.integers(len(CLOZAPINE_SURFACES)))]
            if off == 0:
                say[day(off)].append(f"Started {surface} titration today.")
            else:
                say[day(off)].append(f"Continues on {surface} {int(rng.integers(4, 19)) * 25}mg nocte.")

        # an earlier antipsychotic that stops well before the index
        if rng.random() < spec.other_drug_rate:
            for off in range(-200, -30, 28):
                surface = OTHER_DRUG_SURFACES[int(rng.integers(len(OTHER_DRUG_SURFACES)))]
                say[day(off)].append(f"Taking {surface} 10mg daily.")

        # adverse events
        for ade in spec.ade_rates:
            neg = spec.negation_for(ade)
            for b in BUCKETS:
                lo_off, hi_off = _bucket_window(b)
                term_choices = forms[ade]
                if pid in planted[ade, b]:
                    d = day(rng.integers(lo_off, hi_off))
                    t = term_choices[int(rng.integers(len(term_choices)))]
                    if rng.random() < neg:
                        templates = NEGATED_TEMPLATES if rng.random() < 0.5 else HEDGED_TEMPLATES
                        say[d].append(_render(rng, templates, t))
                    else:
                        say[d].append(_render(rng, POSITIVE_TEMPLATES, t))
                        if rng.random() < spec.duplicate_rate:
                            say[d].append(_render(rng, POSITIVE_TEMPLATES, t))
                        if pid not in short:
                            recovered[ade, b].add(pid)
                elif rng.random() < spec.distractor_rate:
                    d = day(rng.integers(lo_off, hi_off))
                    t = term_choices[int(rng.integers(len(term_choices)))]
                    templates = NEGATED_TEMPLATES if rng.random() < 0.5 else HEDGED_TEMPLATES
                    say[d].append(_render(rng, templates, t))

        # admissions
        if "admission" not in missing:
            if rng.random() < spec.inpatient_rate:
                admit = day(-int(rng.integers(1, 61)))
                discharge = None if rng.random() < 0.1 else day(int(rng.integers(10, 121)))
                admissions.append(AdmissionRecord(pid, admit, discharge))
            elif rng.random() < 0.3:
                admit = day(-int(rng.integers(200, 400)))
                admissions.append(AdmissionRecord(pid, admit, admit + dt.timedelta(days=int(rng.integers(5, 60)))))

        # smoking
        if "smoking" not in missing and rng.random() >= spec.smoking_unrecorded_rate:
            is_smoker = rng.random() < spec.smoker_rate
            smoking.append(SmokingObservation(pid, day(rng.integers(-150, 151)), is_smoker))
            if rng.random() < 0.2:
                # contradicting note outside the six-month window
                smoking.append(SmokingObservation(pid, day(rng.choice([-1, 1]) * rng.integers(200, 400)),
                                                  not is_smoker))

        # diagnosis
        code = _pick(rng, spec.diagnosis_mix)
        if code:
            if rng.random() < 0.1:
                off = int(rng.choice([-1, 1]) * rng.integers(200, 700))
            else:
                off = int(rng.integers(-150, 151))
            diagnoses.append(DiagnosisRecord(pid, day(off), code))

        # a little text that matches nothing
        for _ in range(int(rng.integers(0, 3))):
            say[day(rng.integers(-90, 90))].append(FILLERS[int(rng.integers(len(FILLERS)))])

    documents = []
    for pid in pids:
        doc_no = 0
        for d in sorted(sentences[pid]):
            parts = sentences[pid][d]
            # same-day notes are sometimes split across two documents
            split = len(parts) if len(parts) < 2 or rng.random() < 0.7 else int(rng.integers(1, len(parts)))
            for chunk in (parts[:split], parts[split:]):
                if chunk:
                    doc_no += 1
                    documents.append(ClinicalDocument(pid, f"{pid}-D{doc_no:04d}", d, " ".join(chunk)))

    return SynthCorpus(patients, documents, admissions, diagnoses, smoking, index_dates,
                       set(qualifying), dict(recovered))


def _same_day(d: dt.date, year: int) -> dt.date:
    try:
        return d.replace(year=year)
    except ValueError:  # 29 February
        return d.replace(year=year, day=28)


def _render(rng: np.random.Generator, templates: tuple[str, ...], term: str) -> str:
    tpl = templates[int(rng.integers(len(templates)))]
    return tpl.format(t=term, T=term[0].upper() + term[1:])


# Oxford rows of the published prevalence table, percentages per bucket
_TABLE3_OXFORD = {
    "agitation": (14.59, 15.76, 16.34, 34.24, 25.10, 20.62),
    "fatigue": (9.73, 11.87, 12.06, 35.21, 27.43, 26.85),
    "sedation": (7.20, 8.37, 9.34, 31.52, 21.40, 18.48),
}


def table3_preset(seed: int = 2018) -> SynthSpec:
    """514 Oxford-like patients whose planted counts reproduce published cells.

    Rates are exact counts over 514 so the report prints the same two-decimal
    percentages. Oxford did not record age, smoking or admission data.
    """
    n = 514
    rates = {ade: tuple(round(p * n / 100) / n for p in pcts)
             for ade, pcts in _TABLE3_OXFORD.items()}
    return SynthSpec(
        seed=seed,
        n_patients=n,
        trusts={"Oxford": 1.0},
        trust_missing={"Oxford": ["age_group", "smoking", "admission"]},
        ade_rates=rates,
        short_treatment_rate=0.0,
        negation_rate=0.0,
        exact_counts=True,
    )
