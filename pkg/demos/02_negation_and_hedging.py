"""Which adverse-event mentions count?

A note saying "no evidence of tremor" mentions tremor but reports its
absence. Each lexicon match gets a polarity from a short look-back window:
negation cues make it Negated, speculative cues make it Hedged, and a full
stop, semicolon or "but" closes the window. Only Positive mentions reach
the prevalence tables unless hedged mentions are switched on.

    python demos/02_negation_and_hedging.py
"""

import datetime as dt

from pharmatimeline.extraction import ClinicalDocument, CueConfig, collapse_daily, extract_mentions
from pharmatimeline.lexicon import default_ade_lexicon, default_drug_lexicon

drugs = default_drug_lexicon()
ades = default_ade_lexicon()
day = dt.date(2015, 9, 14)

text = ("Seen in clinic. No evidence of tremor. Denies headache. Discussed risk of seizures "
        "on higher doses. Complains of sedation in the mornings. Not constipated but drowsy "
        "after lunch; suspected hypersalivation at night.")
doc = ClinicalDocument("P042", "D1", day, text)

print(text, "\n")
for m in extract_mentions(doc, drugs, ades):
    print(f"  {m.surface!r:<17} -> {m.canonical:<16} {m.polarity.value}")

print("\nKept for analysis:", [e.canonical for e in collapse_daily(extract_mentions(doc, drugs, ades))])
print("Kept when hedged mentions count:",
      [e.canonical for e in collapse_daily(extract_mentions(doc, drugs, ades), include_hedged=True)])

# a narrower window lets distant cues go
narrow = CueConfig(window_tokens=1)
far = ClinicalDocument("P042", "D2", day, "No current problems with tremor.")
print("\nWindow of 5 words:", extract_mentions(far, drugs, ades)[0].polarity.value)
print("Window of 1 word: ", extract_mentions(far, drugs, ades, narrow)[0].polarity.value)
