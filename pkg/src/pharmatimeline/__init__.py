"""Medication episodes, ADR timelines and stratified prevalence statistics
from dated clinical text."""

__version__ = "0.1.0"

from .adr import AdrEvent, MonthBucket, build_adr_timeline, month_bucket, select_cohort  # noqa: E402
from .episodes import EpisodeThreshold, MedicationEpisode, active_drugs, build_episodes  # noqa: E402
from .extraction import (ClinicalDocument, CueConfig, DailyEvent, Mention, Polarity,  # noqa: E402
                         classify_polarity, collapse_daily, extract_mentions)
from .lexicon import (default_ade_lexicon, default_drug_lexicon, default_sider_reference,  # noqa: E402
                      load_ade_dictionary, load_drug_dictionary, load_sider_reference, map_to_generic)
from .stats import (bonferroni, chi_square, chi_square_pvalue, cohen_kappa, ppv_fdr,  # noqa: E402
                    prevalence_table)

__all__ = [
    "__version__",
    "AdrEvent", "MonthBucket", "build_adr_timeline", "month_bucket", "select_cohort",
    "EpisodeThreshold", "MedicationEpisode", "active_drugs", "build_episodes",
    "ClinicalDocument", "CueConfig", "DailyEvent", "Mention", "Polarity",
    "classify_polarity", "collapse_daily", "extract_mentions",
    "default_ade_lexicon", "default_drug_lexicon", "default_sider_reference",
    "load_ade_dictionary", "load_drug_dictionary", "load_sider_reference", "map_to_generic",
    "bonferroni", "chi_square", "chi_square_pvalue", "cohen_kappa", "ppv_fdr", "prevalence_table",
]
