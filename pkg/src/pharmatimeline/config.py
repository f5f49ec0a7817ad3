"""YAML run configuration.

Relative input paths are resolved against the directory holding the config
file. Unknown keys are rejected so that typos do not silently fall back to
defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from ._io import SchemaError
from .adr import BucketRule
from .cohort import DEFAULT_ETHNICITY_MAP, StrataOptions
from .episodes import EpisodeThreshold
from .extraction import CueConfig

__all__ = ["InputPaths", "RunConfig", "load_config", "ANALYSIS_DIMENSIONS"]

ANALYSIS_DIMENSIONS = ("gender", "ethnicity", "age_group", "smoking", "admission")


@dataclass(frozen=True)
class InputPaths:
    documents: Optional[str] = None
    patients: Optional[str] = None
    admissions: Optional[str] = None
    diagnoses: Optional[str] = None
    smoking: Optional[str] = None
    prescriptions: Optional[str] = None
    # bundled dictionaries are used when these are unset
    drugs: Optional[str] = None
    ades: Optional[str] = None
    sider: Optional[str] = None

    REQUIRED = ("documents", "patients")


@dataclass(frozen=True)
class RunConfig:
    inputs: InputPaths = field(default_factory=InputPaths)
    base_dir: str = "."
    drug: str = "clozapine"
    max_gap_days: int = 42
    per_drug_gap_days: dict[str, int] = field(default_factory=dict)
    gap_inclusive: bool = True
    month_length_days: int = 30
    index_day_in_first_month: bool = True
    min_treatment_days: int = 90
    bonferroni_m: Optional[int] = None
    strict_attribution: bool = False
    count_hedged: bool = False
    # how a SIDER row with only one bound is read: "point" or "open"
    sider_one_sided: str = "point"
    seed: int = 0
    validation_sample_size: int = 300
    dimensions: tuple[str, ...] = ANALYSIS_DIMENSIONS
    ethnicity_map: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_ETHNICITY_MAP))
    cues: dict[str, Any] = field(default_factory=dict)
    strata: dict[str, Any] = field(default_factory=dict)
    synth: dict[str, Any] = field(default_factory=dict)
    out_dir: str = "out"

    def __post_init__(self):
        for name in ("max_gap_days", "month_length_days", "min_treatment_days", "validation_sample_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.bonferroni_m is not None and self.bonferroni_m < 1:
            raise ValueError("bonferroni_m must be positive")
        if self.sider_one_sided not in ("point", "open"):
            raise ValueError(f"sider_one_sided must be 'point' or 'open', got {self.sider_one_sided!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        bad = [d for d in self.dimensions if d not in ANALYSIS_DIMENSIONS + ("diagnosis",)]
        if bad:
            raise ValueError(f"unknown dimension(s): {', '.join(bad)}")
        # construct once so bad values fail at load time
        self.cue_config()
        self.strata_options()
        self.threshold()
        self.bucket_rule()

    def path(self, name: str) -> Optional[Path]:
        value = getattr(self.inputs, name)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def output_dir(self) -> Path:
        p = Path(self.out_dir)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def threshold(self) -> EpisodeThreshold:
        return EpisodeThreshold(self.max_gap_days, dict(self.per_drug_gap_days), self.gap_inclusive)

    def bucket_rule(self) -> BucketRule:
        return BucketRule(self.month_length_days, self.index_day_in_first_month)

    def cue_config(self) -> CueConfig:
        return CueConfig.from_mapping(self.cues)

    def strata_options(self) -> StrataOptions:
        return StrataOptions(**self.strata)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def hash(self) -> str:
        """SHA-256 of the settings that influence results (not base or output dirs)."""
        data = asdict(self)
        data.pop("base_dir")
        data.pop("out_dir")
        blob = json.dumps(data, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise SchemaError(f"invalid YAML: {exc}", path) from None
    if not isinstance(raw, Mapping):
        raise SchemaError("config must be a mapping", path)
    return config_from_mapping(raw, base_dir=str(path.parent))


def config_from_mapping(raw: Mapping, base_dir: str = ".") -> RunConfig:
    known = {f.name for f in fields(RunConfig)} - {"base_dir"}
    unknown = set(raw) - known
    if unknown:
        raise SchemaError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    data = dict(raw)
    inputs = data.pop("inputs", None) or {}
    input_names = {f.name for f in fields(InputPaths)}
    bad = set(inputs) - input_names
    if bad:
        raise SchemaError(f"unknown input(s): {', '.join(sorted(bad))}")
    if "dimensions" in data:
        data["dimensions"] = tuple(data["dimensions"])
    try:
        return RunConfig(inputs=InputPaths(**{k: (None if v is None else str(v)) for k, v in inputs.items()}),
                         base_dir=base_dir, **data)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad config value: {exc}") from None
