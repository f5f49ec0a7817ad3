"""Slow, obviously-correct reference implementations used by the tests."""

import datetime as dt
import math

from scipy import integrate


def segment_by_union_find(dates, max_gap, inclusive=True):
    """Episodes as connected components of the "within threshold" graph.

    Every pair of distinct dates within the threshold is linked, so this
    does not rely on sorting or on consecutive gaps. Returns sorted
    (start, stop, count).
    """
    uniq = sorted(set(dates))
    parent = list(range(len(uniq)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(uniq)):
        for j in range(i + 1, len(uniq)):
            gap = abs((uniq[j] - uniq[i]).days)
            if gap <= max_gap if inclusive else gap < max_gap:
                parent[find(i)] = find(j)
    groups = {}
    for i, d in enumerate(uniq):
        groups.setdefault(find(i), []).append(d)
    return sorted((min(g), max(g), len(g)) for g in groups.values())


def chi2_sf_by_quadrature(x, df):
    """Upper tail of the chi-square distribution by numerical integration of its density."""
    k = df / 2.0

    def pdf(t):
        if t <= 0:
            return 0.0
        return math.exp((k - 1) * math.log(t) - t / 2 - k * math.log(2) - math.lgamma(k))

    lower, _ = integrate.quad(pdf, 0, x, limit=200)
    return 1.0 - lower


def bucket_by_enumeration(index, event, month=30):
    """Month label by walking the calendar of 30-day blocks around the index."""
    blocks = {}
    for k in range(1, 4):
        for off in range((k - 1) * month, k * month):
            blocks[off] = f"M+{k}"
        for off in range(-k * month, -(k - 1) * month):
            blocks[off] = f"M-{k}"
    return blocks.get((event - index).days)


def age_by_counting(dob, on):
    """Completed years by stepping birthdays forward."""
    years = 0
    while True:
        y = dob.year + years + 1
        try:
            birthday = dob.replace(year=y)
        except ValueError:  # 29 February in a common year
            birthday = dt.date(y, 3, 1)
        if birthday > on:
            return years
        years += 1
