"""Stratification variables for the study cohort.

Every derivation here is a pure function of one patient's tables and the
index date, so patients can be processed independently.
"""

from __future__ import annotations

import datetime as dt
import enum
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from ._io import SchemaError, parse_date, parse_optional_date, read_csv
from .lexicon import normalize_term

__all__ = [
    "Gender",
    "AgeGroup",
    "Ethnicity",
    "Smoking",
    "Admission",
    "Diagnosis",
    "PatientDemographics",
    "AdmissionRecord",
    "DiagnosisRecord",
    "SmokingObservation",
    "Strata",
    "StrataOptions",
    "DIMENSIONS",
    "DEFAULT_ETHNICITY_MAP",
    "age_in_years",
    "age_group",
    "ethnicity_group",
    "smoking_status",
    "admission_status",
    "classify_icd10",
    "diagnosis_category",
    "derive_strata",
    "load_patients",
    "load_admissions",
    "load_diagnoses",
    "load_smoking",
    "group_by_patient",
]

SIX_MONTHS_DAYS = 183


class Gender(str, enum.Enum):
    MALE = "Male"
    FEMALE = "Female"
    UNKNOWN = "Unknown"


class AgeGroup(str, enum.Enum):
    UNDER_21 = "Under21"
    AGE_21_30 = "21-30"
    AGE_31_40 = "31-40"
    AGE_41_50 = "41-50"
    AGE_51_60 = "51-60"
    AGE_61_70 = "61-70"
    AGE_71_80 = "71-80"
    ABOVE_80 = "Above80"


class Ethnicity(str, enum.Enum):
    WHITE = "White"
    BLACK = "Black"
    ASIAN = "Asian"
    OTHER = "Other"


class Smoking(str, enum.Enum):
    SMOKER = "Smoker"
    NON_SMOKER = "NonSmoker"
    UNKNOWN = "Unknown"


class Admission(str, enum.Enum):
    INPATIENT = "Inpatient"
    OUTPATIENT = "Outpatient"


class Diagnosis(str, enum.Enum):
    SCHIZOPHRENIA = "Schizophrenia"
    SCHIZOAFFECTIVE = "Schizoaffective"
    BIPOLAR = "Bipolar"
    OTHER_MENTAL = "OtherMental"
    OTHER_DIAGNOSIS = "OtherDiagnosis"
    NOT_AVAILABLE = "NotAvailable"


# most specific first; used to break same-day ties between codes
_DIAGNOSIS_PRIORITY = (
    Diagnosis.SCHIZOAFFECTIVE,
    Diagnosis.SCHIZOPHRENIA,
    Diagnosis.BIPOLAR,
    Diagnosis.OTHER_MENTAL,
    Diagnosis.OTHER_DIAGNOSIS,
)

DEFAULT_ETHNICITY_MAP: dict[str, str] = {
    "white": "White",
    "white british": "White",
    "white irish": "White",
    "any other white background": "White",
    "black": "Black",
    "black british": "Black",
    "black caribbean": "Black",
    "black african": "Black",
    "any other black background": "Black",
    "asian": "Asian",
    "asian british": "Asian",
    "indian": "Asian",
    "pakistani": "Asian",
    "bangladeshi": "Asian",
    "chinese": "Asian",
    "any other asian background": "Asian",
}

_ICD10_RE = re.compile(r"^([A-Z])(\d{2})(?:\.?[0-9A-Z]{1,4})?$")


@dataclass(frozen=True)
class PatientDemographics:
    patient_id: str
    dob: Optional[dt.date]
    gender: Gender
    ethnicity_raw: str
    trust: str


@dataclass(frozen=True)
class AdmissionRecord:
    patient_id: str
    admit_date: dt.date
    discharge_date: Optional[dt.date] = None

    def __post_init__(self):
        if self.discharge_date is not None and self.discharge_date < self.admit_date:
            raise ValueError(f"discharge {self.discharge_date} precedes admission {self.admit_date}")


@dataclass(frozen=True)
class DiagnosisRecord:
    patient_id: str
    date: dt.date
    icd10_code: str

    def __post_init__(self):
        if not _ICD10_RE.match(self.icd10_code):
            raise ValueError(f"malformed ICD-10 code {self.icd10_code!r}")


@dataclass(frozen=True)
class SmokingObservation:
    patient_id: str
    date: dt.date
    smoker: bool


@dataclass(frozen=True)
class StrataOptions:
    smoking_window_days: int = SIX_MONTHS_DAYS
    smoking_rule: str = "smoker_dominates"  # or "latest"
    diagnosis_window_days: int = SIX_MONTHS_DAYS
    diagnosis_tie_break: str = "after"  # or "before"

    def __post_init__(self):
        if self.smoking_rule not in ("smoker_dominates", "latest"):
            raise ValueError(f"unknown smoking_rule {self.smoking_rule!r}")
        if self.diagnosis_tie_break not in ("after", "before"):
            raise ValueError(f"unknown diagnosis_tie_break {self.diagnosis_tie_break!r}")


@dataclass(frozen=True)
class Strata:
    gender: Gender
    ethnicity: Ethnicity
    age_group: Optional[AgeGroup]
    smoking: Smoking
    admission: Optional[Admission]
    diagnosis: Diagnosis

    def level(self, dimension: str) -> Optional[str]:
        """Level label for a stratification dimension, None when unrecorded."""
        if dimension == "trust_total":
            return "All"
        value = getattr(self, dimension)
        if value is None or value in (Gender.UNKNOWN, Smoking.UNKNOWN):
            return None
        return value.value


# dimension name -> levels in report order
DIMENSIONS: dict[str, tuple[str, ...]] = {
    "trust_total": ("All",),
    "gender": (Gender.MALE.value, Gender.FEMALE.value),
    "ethnicity": tuple(e.value for e in Ethnicity),
    "age_group": tuple(a.value for a in AgeGroup),
    "smoking": (Smoking.SMOKER.value, Smoking.NON_SMOKER.value),
    "admission": tuple(a.value for a in Admission),
    "diagnosis": tuple(d.value for d in Diagnosis),
}


def age_in_years(dob: dt.date, on: dt.date) -> int:
    """Completed years. A 29 February birthday ticks over on 1 March."""
    if dob > on:
        raise ValueError(f"date of birth {dob} is after {on}")
    return on.year - dob.year - ((on.month, on.day) < (dob.month, dob.day))


def age_group(dob: dt.date, index: dt.date) -> AgeGroup:
    age = age_in_years(dob, index)
    if age < 21:
        return AgeGroup.UNDER_21
    if age > 80:
        return AgeGroup.ABOVE_80
    # 21-30 -> 1, ..., 71-80 -> 6
    return list(AgeGroup)[(age - 11) // 10]


def ethnicity_group(raw: str, mapping: Optional[Mapping[str, str]] = None) -> Ethnicity:
    mapping = DEFAULT_ETHNICITY_MAP if mapping is None else mapping
    label = {normalize_term(k): v for k, v in mapping.items()}.get(normalize_term(raw or ""))
    if label is None:
        return Ethnicity.OTHER
    return Ethnicity(label)


def smoking_status(records: Iterable[SmokingObservation], index: dt.date,
                   options: StrataOptions = StrataOptions()) -> Smoking:
    window = [r for r in records if abs((r.date - index).days) <= options.smoking_window_days]
    if not window:
        return Smoking.UNKNOWN
    if options.smoking_rule == "latest":
        latest = max(r.date for r in window)
        smoker = any(r.smoker for r in window if r.date == latest)
    else:
        smoker = any(r.smoker for r in window)
    return Smoking.SMOKER if smoker else Smoking.NON_SMOKER


def admission_status(admissions: Iterable[AdmissionRecord], index: dt.date) -> Admission:
    for a in admissions:
        if a.admit_date <= index and (a.discharge_date is None or index <= a.discharge_date):
            return Admission.INPATIENT
    return Admission.OUTPATIENT


def classify_icd10(code: str) -> Diagnosis:
    m = _ICD10_RE.match(code.strip().upper())
    if not m:
        raise ValueError(f"malformed ICD-10 code {code!r}")
    letter, num = m.group(1), int(m.group(2))
    if letter == "F":
        if num == 25:
            return Diagnosis.SCHIZOAFFECTIVE
        if 20 <= num <= 29:
            return Diagnosis.SCHIZOPHRENIA
        if num == 31:
            return Diagnosis.BIPOLAR
        if 1 <= num <= 99:
            return Diagnosis.OTHER_MENTAL
    return Diagnosis.OTHER_DIAGNOSIS


def diagnosis_category(diagnoses: Iterable[DiagnosisRecord], index: dt.date,
                       options: StrataOptions = StrataOptions()) -> Diagnosis:
    """Category of the diagnosis closest to the index date.

    The search starts at +/- six months and doubles until something is found
    or no record is left outside the window. At equal distance the post-index
    record wins (configurable); same-day codes resolve to the most specific
    category.
    """
    records = list(diagnoses)
    if not records:
        return Diagnosis.NOT_AVAILABLE
    furthest = max(abs((r.date - index).days) for r in records)
    window = options.diagnosis_window_days
    while True:
        found = [r for r in records if abs((r.date - index).days) <= window]
        if found or window >= furthest:
            break
        window *= 2
    after_first = options.diagnosis_tie_break == "after"

    def key(r: DiagnosisRecord):
        delta = (r.date - index).days
        side = 0 if (delta >= 0) == after_first else 1
        return abs(delta), side, _DIAGNOSIS_PRIORITY.index(classify_icd10(r.icd10_code))

    return classify_icd10(min(found, key=key).icd10_code)


def derive_strata(patient: PatientDemographics, index: dt.date,
                  admissions: Iterable[AdmissionRecord] = (),
                  diagnoses: Iterable[DiagnosisRecord] = (),
                  smoking: Iterable[SmokingObservation] = (),
                  ethnicity_map: Optional[Mapping[str, str]] = None,
                  options: StrataOptions = StrataOptions(),
                  admissions_recorded: bool = True) -> Strata:
    """All strata for one patient.

    ``admissions_recorded=False`` marks a source with no admission data at
    all, leaving ``admission`` unset instead of defaulting to Outpatient.
    """
    return Strata(
        gender=patient.gender,
        ethnicity=ethnicity_group(patient.ethnicity_raw, ethnicity_map),
        age_group=None if patient.dob is None else age_group(patient.dob, index),
        smoking=smoking_status(smoking, index, options),
        admission=admission_status(admissions, index) if admissions_recorded else None,
        diagnosis=diagnosis_category(diagnoses, index, options),
    )


def _parse_gender(raw: str) -> Gender:
    v = raw.strip().lower()
    if v in ("male", "m"):
        return Gender.MALE
    if v in ("female", "f"):
        return Gender.FEMALE
    return Gender.UNKNOWN


def load_patients(path) -> list[PatientDemographics]:
    out = []
    seen = set()
    for line, row in read_csv(path, ("patient_id", "dob", "gender", "ethnicity", "trust")):
        pid = row["patient_id"].strip()
        if not pid:
            raise SchemaError("empty patient_id", path, line)
        if pid in seen:
            raise SchemaError(f"duplicate patient_id {pid!r}", path, line)
        seen.add(pid)
        out.append(PatientDemographics(pid, parse_optional_date(row["dob"], path, line),
                                       _parse_gender(row["gender"]), row["ethnicity"].strip(),
                                       row["trust"].strip()))
    return out


def load_admissions(path) -> list[AdmissionRecord]:
    out = []
    for line, row in read_csv(path, ("patient_id", "admit_date", "discharge_date")):
        try:
            out.append(AdmissionRecord(row["patient_id"].strip(),
                                       parse_date(row["admit_date"], path, line),
                                       parse_optional_date(row["discharge_date"], path, line)))
        except SchemaError:
            raise
        except ValueError as exc:
            raise SchemaError(str(exc), path, line) from None
    return out


def load_diagnoses(path) -> list[DiagnosisRecord]:
    out = []
    for line, row in read_csv(path, ("patient_id", "date", "icd10")):
        code = row["icd10"].strip().upper()
        if not _ICD10_RE.match(code):
            raise SchemaError(f"malformed ICD-10 code {row['icd10']!r}", path, line)
        out.append(DiagnosisRecord(row["patient_id"].strip(), parse_date(row["date"], path, line), code))
    return out


def load_smoking(path) -> list[SmokingObservation]:
    out = []
    for line, row in read_csv(path, ("patient_id", "date", "status")):
        status = row["status"].strip().lower()
        if status not in ("smoker", "non-smoker"):
            raise SchemaError(f"status must be smoker or non-smoker, got {row['status']!r}", path, line)
        out.append(SmokingObservation(row["patient_id"].strip(), parse_date(row["date"], path, line),
                                      status == "smoker"))
    return out


def group_by_patient(records: Iterable) -> dict[str, list]:
    grouped = defaultdict(list)
    for r in records:
        grouped[r.patient_id].append(r)
    return dict(grouped)
