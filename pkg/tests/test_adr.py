import datetime as dt

import pytest
from hypothesis import given, strategies as st

from conftest import days
from oracles import bucket_by_enumeration
from pharmatimeline.adr import (BUCKETS, AdrEvent, BucketRule, MonthBucket, assign_buckets, build_adr_timeline,
                                month_bucket, select_cohort, write_adr_events)
from pharmatimeline.episodes import MedicationEpisode, active_drugs
from pharmatimeline.extraction import DailyEvent, MentionKind

JAN1 = dt.date(2011, 1, 1)


def ep(generic, start, stop, pid="P", n=2):
    return MedicationEpisode(pid, generic, start, stop, n if start != stop else 1)


def d(month, day):
    return dt.date(2011, month, day)


def test_concurrent_drugs():
    eps = [ep("clozapine", d(1, 1), d(2, 15)), ep("lithium", d(2, 1), d(3, 1))]
    ades = [DailyEvent("P", day, MentionKind.ADE, "sedation") for day in (d(1, 30), d(2, 10), d(4, 1))]
    out = build_adr_timeline(ades, eps)
    assert [e.concurrent_drugs for e in out] == [
        frozenset({"clozapine"}), frozenset({"clozapine", "lithium"}), frozenset()]
    with pytest.raises(ValueError):
        build_adr_timeline([DailyEvent("P", JAN1, MentionKind.DRUG, "x")], eps)


@pytest.mark.parametrize("delta, label", [
    (0, "M+1"), (29, "M+1"), (30, "M+2"), (59, "M+2"), (60, "M+3"), (89, "M+3"), (90, None),
    (-1, "M-1"), (-30, "M-1"), (-31, "M-2"), (-60, "M-2"), (-61, "M-3"), (-90, "M-3"), (-91, None),
])
def test_bucket_edges(delta, label):
    b = month_bucket(JAN1, JAN1 + dt.timedelta(delta))
    assert (b.value if b else None) == label


@given(st.integers(-400, 400))
def test_bucket_matches_enumeration(delta):
    b = month_bucket(JAN1, JAN1 + dt.timedelta(delta))
    assert (b.value if b else None) == bucket_by_enumeration(JAN1, JAN1 + dt.timedelta(delta))


def test_bucket_partition_of_window():
    counts = {b: 0 for b in BUCKETS}
    for delta in range(-90, 90):
        counts[month_bucket(JAN1, JAN1 + dt.timedelta(delta))] += 1
    assert set(counts.values()) == {30}


def test_bucket_rule_variants():
    shifted = BucketRule(index_day_in_first_month=False)
    assert month_bucket(JAN1, JAN1, shifted) is MonthBucket("M-1")
    assert month_bucket(JAN1, JAN1 + dt.timedelta(1), shifted) is MonthBucket("M+1")
    weeks = BucketRule(month_length_days=7)
    assert month_bucket(JAN1, JAN1 + dt.timedelta(20), weeks) is MonthBucket("M+3")
    assert month_bucket(JAN1, JAN1 + dt.timedelta(21), weeks) is None


def test_bucket_enum_helpers():
    assert [b.offset for b in BUCKETS] == [-3, -2, -1, 1, 2, 3]
    assert [b.after_index for b in BUCKETS] == [False] * 3 + [True] * 3


def test_assign_buckets_strict_attribution():
    events = [AdrEvent("P", "sedation", JAN1 + dt.timedelta(5), frozenset()),
              AdrEvent("P", "sedation", JAN1 + dt.timedelta(6), frozenset({"clozapine"})),
              AdrEvent("P", "sedation", JAN1 - dt.timedelta(5), frozenset())]
    loose = [e.interval for e in assign_buckets(events, JAN1)]
    strict = [e.interval for e in assign_buckets(events, JAN1, strict_drug="clozapine")]
    m1, mm1 = MonthBucket("M+1"), MonthBucket("M-1")
    assert loose == [m1, m1, mm1]
    # pre-index events never need the drug
    assert strict == [None, m1, mm1]


def test_select_cohort_examples():
    episodes = {
        "A": [ep("clozapine", d(1, 1), d(6, 1), "A")],
        "B": [ep("clozapine", d(1, 1), d(1, 20), "B")],
        "C": [ep("clozapine", d(1, 1), d(2, 10), "C"), ep("clozapine", d(3, 1), d(5, 15), "C")],
        "D": [ep("olanzapine", d(1, 1), d(9, 1), "D")],
    }
    members = {m.patient_id: m for m in select_cohort(["A", "B", "C", "D", "E"], episodes)}
    assert set(members) == {"A", "B", "C"}
    assert members["A"].qualifying and members["A"].index_date == d(1, 1)
    assert not members["B"].qualifying
    assert members["C"].qualifying and members["C"].coverage_end == d(5, 15)


def test_select_cohort_chain_breaks_on_long_gap():
    eps = [ep("clozapine", d(1, 1), d(2, 10)), ep("clozapine", d(4, 1), d(9, 1))]
    (m,) = select_cohort(["P"], eps)  # flat list form
    assert not m.qualifying and m.coverage_end == d(2, 10)
    (m,) = select_cohort(["P"], eps, max_gap_days=60)
    assert m.qualifying


@pytest.mark.parametrize("gap, end", [(42, 200), (43, 50)])
def test_select_cohort_chain_gap_boundary(gap, end):
    eps = [ep("clozapine", *days(JAN1, 0, 50)), ep("clozapine", *days(JAN1, 50 + gap, 200))]
    (m,) = select_cohort(["P"], eps)
    assert m.coverage_end == JAN1 + dt.timedelta(end)


def test_select_cohort_exact_threshold():
    (m,) = select_cohort(["P"], [ep("clozapine", JAN1, JAN1 + dt.timedelta(90))])
    assert m.qualifying
    (m,) = select_cohort(["P"], [ep("clozapine", JAN1, JAN1 + dt.timedelta(89))])
    assert not m.qualifying


@given(st.lists(st.tuples(st.integers(0, 500), st.integers(0, 60)), min_size=1, max_size=8))
def test_coverage_chain_oracle(spans):
    # walk the covered days in order; coverage ends before the first jump of more than 42 days
    eps = []
    for start, length in spans:
        s = JAN1 + dt.timedelta(start)
        eps.append(ep("clozapine", s, s + dt.timedelta(length)))
    eps = merge(eps)
    (m,) = select_cohort(["P"], eps)
    covered = {day for e in eps for day in range(*window(e))}
    index = min(covered)
    last = index
    for day in sorted(covered):
        if day - last > 42:
            break
        last = day
    assert (m.coverage_end - JAN1).days == last
    assert m.qualifying == (last - index >= 90)


def window(e):
    return (e.start - JAN1).days, (e.stop - JAN1).days + 1


def merge(eps):
    # episodes of one drug never overlap in practice
    eps = sorted(eps)
    out = [eps[0]]
    for e in eps[1:]:
        if e.start <= out[-1].stop:
            out[-1] = ep("clozapine", out[-1].start, max(out[-1].stop, e.stop))
        else:
            out.append(e)
    return out


def test_concurrency_against_linear_scan():
    eps = [ep("a", *days(JAN1, 0, 10)), ep("b", *days(JAN1, 5, 20)), ep("a", *days(JAN1, 60, 70))]
    ades = [DailyEvent("P", day, MentionKind.ADE, "x") for day in days(JAN1, *range(-3, 75))]
    for ev in build_adr_timeline(ades, eps):
        assert ev.concurrent_drugs == frozenset(active_drugs(eps, ev.date))


def test_write_adr_events(tmp_path):
    events = assign_buckets([AdrEvent("P", "tremor", JAN1, frozenset({"b", "a"}))], JAN1)
    write_adr_events(events, tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text().splitlines()[1] == "P,tremor,2011-01-01,M+1,a|b"
