import datetime as dt
import itertools

import pytest
from hypothesis import given, settings, strategies as st

from oracles import age_by_counting
from pharmatimeline._io import SchemaError
from pharmatimeline.cohort import (Admission, AdmissionRecord, AgeGroup, Diagnosis, DiagnosisRecord, Ethnicity,
                                   Gender, PatientDemographics, Smoking, SmokingObservation, StrataOptions,
                                   admission_status, age_group, age_in_years, classify_icd10, derive_strata,
                                   diagnosis_category, ethnicity_group, load_diagnoses, load_patients, load_smoking,
                                   smoking_status)

IDX = dt.date(2012, 6, 1)


def shift(n):
    return IDX + dt.timedelta(n)


@pytest.mark.parametrize("dob, index, group", [
    (dt.date(1990, 6, 15), dt.date(2010, 6, 14), AgeGroup.UNDER_21),
    (dt.date(1990, 6, 15), dt.date(2011, 6, 15), AgeGroup.AGE_21_30),
    (dt.date(1930, 1, 1), dt.date(2012, 1, 2), AgeGroup.ABOVE_80),
    (dt.date(1980, 1, 1), dt.date(2010, 12, 31), AgeGroup.AGE_21_30),
    (dt.date(1980, 1, 1), dt.date(2011, 1, 1), AgeGroup.AGE_31_40),
    (dt.date(1930, 1, 1), dt.date(2010, 12, 31), AgeGroup.AGE_71_80),
])
def test_age_group_examples(dob, index, group):
    assert age_group(dob, index) is group


def test_leap_day_birthday():
    assert age_in_years(dt.date(2000, 2, 29), dt.date(2021, 2, 28)) == 20
    assert age_in_years(dt.date(2000, 2, 29), dt.date(2021, 3, 1)) == 21
    with pytest.raises(ValueError):
        age_in_years(dt.date(2000, 1, 2), dt.date(2000, 1, 1))


@settings(max_examples=300)
@given(st.dates(dt.date(1900, 1, 1), dt.date(2015, 1, 1)), st.integers(0, 110 * 366))
def test_age_matches_counting_and_groups_partition(dob, offset):
    on = dob + dt.timedelta(offset)
    age = age_in_years(dob, on)
    assert age == age_by_counting(dob, on)
    labels = [g for g in AgeGroup if _in_group(age, g)]
    assert labels == [age_group(dob, on)]


def _in_group(age, group):
    if group is AgeGroup.UNDER_21:
        return age < 21
    if group is AgeGroup.ABOVE_80:
        return age > 80
    lo, hi = map(int, group.value.split("-"))
    return lo <= age <= hi


@pytest.mark.parametrize("raw, group", [
    ("White British", Ethnicity.WHITE), ("", Ethnicity.OTHER), ("Black Caribbean", Ethnicity.BLACK),
    ("  INDIAN ", Ethnicity.ASIAN), ("Martian", Ethnicity.OTHER),
])
def test_ethnicity(raw, group):
    assert ethnicity_group(raw) is group


def test_ethnicity_custom_map():
    assert ethnicity_group("Klingon", {"klingon": "Asian"}) is Ethnicity.ASIAN
    assert ethnicity_group("White British", {"klingon": "Asian"}) is Ethnicity.OTHER


def obs(offset, smoker):
    return SmokingObservation("P", shift(offset), smoker)


@pytest.mark.parametrize("records, status", [
    ([obs(-100, True)], Smoking.SMOKER),
    ([obs(-200, True)], Smoking.UNKNOWN),
    ([obs(-30, False), obs(30, True)], Smoking.SMOKER),
    ([obs(-30, False)], Smoking.NON_SMOKER),
    ([obs(183, True)], Smoking.SMOKER),
    ([obs(184, True)], Smoking.UNKNOWN),
    ([], Smoking.UNKNOWN),
])
def test_smoking(records, status):
    assert smoking_status(records, IDX) is status


def test_smoking_latest_rule():
    opts = StrataOptions(smoking_rule="latest")
    assert smoking_status([obs(-30, True), obs(30, False)], IDX, opts) is Smoking.NON_SMOKER
    assert smoking_status([obs(30, False), obs(30, True)], IDX, opts) is Smoking.SMOKER
    with pytest.raises(ValueError):
        StrataOptions(smoking_rule="vibes")


def adm(start, stop):
    return AdmissionRecord("P", shift(start), None if stop is None else shift(stop))


@pytest.mark.parametrize("records, status", [
    ([adm(-31, 29)], Admission.INPATIENT),
    ([adm(-31, -22)], Admission.OUTPATIENT),
    ([adm(-31, None)], Admission.INPATIENT),
    ([adm(0, 0)], Admission.INPATIENT),
    ([adm(1, None)], Admission.OUTPATIENT),
    ([], Admission.OUTPATIENT),
])
def test_admission(records, status):
    assert admission_status(records, IDX) is status


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(-50, 50), st.one_of(st.none(), st.integers(0, 40))), max_size=6),
       st.integers(-60, 60))
def test_admission_brute_force(spans, probe):
    records = [adm(s, None if length is None else s + length) for s, length in spans]
    day = shift(probe)
    covered = set()
    for r in records:
        stop = r.discharge_date or day  # open admissions cover everything after admit
        d = r.admit_date
        while d <= stop:
            covered.add(d)
            d += dt.timedelta(1)
    expected = Admission.INPATIENT if day in covered else Admission.OUTPATIENT
    assert admission_status(records, day) is expected


def test_admission_rejects_reversed_interval():
    with pytest.raises(ValueError):
        adm(5, 1)


@pytest.mark.parametrize("code, category", [
    ("F20.0", Diagnosis.SCHIZOPHRENIA), ("F25.1", Diagnosis.SCHIZOAFFECTIVE), ("F29", Diagnosis.SCHIZOPHRENIA),
    ("F31.2", Diagnosis.BIPOLAR), ("F32.1", Diagnosis.OTHER_MENTAL), ("F01", Diagnosis.OTHER_MENTAL),
    ("F00.1", Diagnosis.OTHER_DIAGNOSIS), ("G40", Diagnosis.OTHER_DIAGNOSIS), ("f205", Diagnosis.SCHIZOPHRENIA),
])
def test_classify_icd10(code, category):
    assert classify_icd10(code) is category


@pytest.mark.parametrize("bad", ["", "F2", "20.0", "FF20", "F20.00000"])
def test_malformed_icd10(bad):
    with pytest.raises(ValueError):
        classify_icd10(bad)


def dx(offset, code):
    return DiagnosisRecord("P", shift(offset), code)


@pytest.mark.parametrize("records, category", [
    ([dx(-30, "F20.0")], Diagnosis.SCHIZOPHRENIA),
    ([dx(10, "F25.1")], Diagnosis.SCHIZOAFFECTIVE),
    ([], Diagnosis.NOT_AVAILABLE),
    ([dx(-30, "F20.0"), dx(10, "F31.0")], Diagnosis.BIPOLAR),  # closest wins
    ([dx(-10, "F20.0"), dx(10, "F31.0")], Diagnosis.BIPOLAR),  # tie: after index
    ([dx(5, "F20.0"), dx(5, "F25.0")], Diagnosis.SCHIZOAFFECTIVE),  # same day: most specific
    ([dx(-900, "F31.0")], Diagnosis.BIPOLAR),  # window keeps doubling
])
def test_diagnosis_category(records, category):
    assert diagnosis_category(records, IDX) is category


def test_diagnosis_tie_break_before():
    records = [dx(-10, "F20.0"), dx(10, "F31.0")]
    assert diagnosis_category(records, IDX, StrataOptions(diagnosis_tie_break="before")) is Diagnosis.SCHIZOPHRENIA


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(-1500, 1500), st.sampled_from(["F20.0", "F25.1", "F31.2", "F32", "I10"])),
                min_size=1, max_size=5))
def test_diagnosis_order_invariant_and_closest(entries):
    records = [dx(o, c) for o, c in entries]
    got = diagnosis_category(records, IDX)
    for perm in itertools.islice(itertools.permutations(records), 24):
        assert diagnosis_category(perm, IDX) is got
    nearest = min(abs(o) for o, _ in entries)
    assert got in {classify_icd10(c) for o, c in entries if abs(o) == nearest}


def patient(dob=dt.date(1980, 3, 3), gender=Gender.MALE):
    return PatientDemographics("P", dob, gender, "White British", "SLAM")


def test_derive_strata_and_levels():
    s = derive_strata(patient(), IDX, [adm(-5, 5)], [dx(0, "F20.0")], [obs(0, True)])
    assert (s.gender, s.ethnicity, s.age_group, s.smoking, s.admission, s.diagnosis) == (
        Gender.MALE, Ethnicity.WHITE, AgeGroup.AGE_31_40, Smoking.SMOKER, Admission.INPATIENT,
        Diagnosis.SCHIZOPHRENIA)
    assert s.level("trust_total") == "All"
    assert s.level("age_group") == "31-40"


def test_missing_values_have_no_level():
    s = derive_strata(patient(dob=None, gender=Gender.UNKNOWN), IDX, admissions_recorded=False)
    assert s.age_group is None
    assert s.admission is None
    assert [s.level(d) for d in ("gender", "age_group", "smoking", "admission")] == [None] * 4
    assert s.level("diagnosis") == "NotAvailable"


def test_loaders(tmp_path):
    p = tmp_path / "patients.csv"
    p.write_text("patient_id,dob,gender,ethnicity,trust\nP1,1980-01-01,M,White British,SLAM\nP2,,,,Oxford\n")
    rows = load_patients(p)
    assert rows[0].gender is Gender.MALE and rows[1].dob is None and rows[1].gender is Gender.UNKNOWN
    p.write_text("patient_id,dob,gender,ethnicity,trust\nP1,,,,X\nP1,,,,X\n")
    with pytest.raises(SchemaError, match="duplicate"):
        load_patients(p)
    d = tmp_path / "dx.csv"
    d.write_text("patient_id,date,icd10\nP1,2010-01-01,XYZ\n")
    with pytest.raises(SchemaError, match=":2:"):
        load_diagnoses(d)
    s = tmp_path / "smoking.csv"
    s.write_text("patient_id,date,status\nP1,2010-01-01,sometimes\n")
    with pytest.raises(SchemaError):
        load_smoking(s)
