"""Turning scattered drug mentions into treatment episodes.

Clinical notes mention a drug whenever someone writes about it, under
whatever name they prefer. This demo maps brand names to generics,
collapses each day to one observation, and joins observations into
episodes wherever consecutive dates are at most 42 days apart.

    python demos/01_medication_episodes.py
"""

import datetime as dt

from pharmatimeline.episodes import EpisodeThreshold, Timeline, build_episodes
from pharmatimeline.extraction import ClinicalDocument, collapse_daily, extract_mentions
from pharmatimeline.lexicon import default_ade_lexicon, default_drug_lexicon

drugs = default_drug_lexicon()
ades = default_ade_lexicon()

notes = [
    ("2013-01-07", "Started Clozaril 12.5mg, titrating slowly."),
    ("2013-01-07", "Evening review: clozapine given, tolerating."),
    ("2013-01-28", "Continues Denzapine 150mg."),
    ("2013-03-11", "Zaponex 300mg nocte, plus olanzapine stopped."),
    ("2013-04-22", "Clozapine 350mg. Bloods normal."),  # 42 days later: same episode
    ("2013-06-04", "Restarted clozapine after a break."),  # 43 days later: new episode
]

docs = [ClinicalDocument("P001", f"D{i}", dt.date.fromisoformat(d), text) for i, (d, text) in enumerate(notes)]
mentions = [m for doc in docs for m in extract_mentions(doc, drugs, ades)]

print("Mentions found in the notes:")
for m in mentions:
    print(f"  {m.date}  {m.surface!r:>14} -> {m.canonical:<11} {m.polarity.value}")

# olanzapine appears with "stopped" but no negation cue, so it still counts;
# the cue list is configurable when a site writes notes differently
daily = [e for e in collapse_daily(mentions) if e.kind.value == "Drug"]
print(f"\n{len(mentions)} mentions collapse to {len(daily)} drug-days.")

episodes = build_episodes(daily)
print("\nEpisodes with the default 42-day rule:")
for e in episodes:
    print(f"  {e.generic:<11} {e.start} .. {e.stop}  evidence on {e.evidence_count} day(s)")

strict = build_episodes(daily, EpisodeThreshold(42, inclusive=False))
print(f"\nReading the gap as 'strictly less than 42 days' gives {len(strict)} episodes instead of "
      f"{len(episodes)}.")

timeline = Timeline(episodes)
for probe in ("2013-02-15", "2013-05-20"):
    day = dt.date.fromisoformat(probe)
    print(f"Active on {probe}: {sorted(timeline.active_on(day)) or 'nothing'}")
