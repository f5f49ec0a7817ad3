"""Command line entry point: ``pharmatimeline <subcommand> --config run.yaml``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from ._io import SchemaError, read_csv
from .config import RunConfig, load_config
from .pipeline import (PipelineError, load_inputs, manifest_hash, run_pipeline, run_stages,
                       write_report)
from .stats import UndefinedKappaError, cohen_kappa, ppv_fdr
from .synthdata import SynthSpec, generate

log = logging.getLogger("pharmatimeline")

EXIT_MISSING = 3
EXIT_SCHEMA = 4

# subcommand -> (last stage to run, stages whose files are written)
STAGE_COMMANDS = {
    "extract": ("extract", ("extract",)),
    "episodes": ("episodes", ("episodes",)),
    "adr": ("adr", ("adr",)),
    "prevalence": ("prevalence", ("prevalence",)),
    "stats": ("stats", ("stats",)),
    "compare-sider": ("compare", ("compare",)),
    "validate-sample": ("compare", ("validate",)),
}


def _setup_logging() -> None:
    level = os.environ.get("PHARMATIMELINE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _load(args) -> RunConfig:
    if args.config is None:
        raise PipelineError("--config is required for this subcommand")
    path = Path(args.config)
    if not path.is_file():
        err = PipelineError(f"config file not found: {path}")
        err.exit_code = EXIT_MISSING
        raise err
    cfg = load_config(path)
    return cfg.with_overrides(seed=args.seed, strict_attribution=True if args.strict_attribution else None)


def cmd_synth(args) -> int:
    data = {}
    if args.config:
        data = dict(load_config(args.config).synth)
    if args.preset:
        data["preset"] = args.preset
    if args.seed is not None:
        data["seed"] = args.seed
    if args.n_patients is not None:
        data["n_patients"] = args.n_patients
    try:
        spec = SynthSpec.from_mapping(data)
    except ValueError as exc:
        raise SchemaError(f"synth: {exc}") from None
    out = Path(args.out or "synth")
    corpus = generate(spec)
    paths = corpus.write(out)
    run_cfg = {
        "inputs": {name: p.name for name, p in paths.items()},
        "seed": spec.seed,
        "out_dir": "report",
    }
    (out / "config.yaml").write_text(yaml.safe_dump(run_cfg, sort_keys=True), encoding="utf-8")
    print(f"wrote {len(corpus.patients)} patients, {len(corpus.documents)} documents to {out}"
          f" ({len(corpus.qualifying)} planted qualifying)")
    return 0


def cmd_stage(args) -> int:
    cfg = _load(args)
    through, stages = STAGE_COMMANDS[args.command]
    if args.command == "validate-sample" and args.score:
        return _score(Path(args.score))
    if args.command == "validate-sample" and args.n is not None:
        cfg = cfg.with_overrides(validation_sample_size=args.n)
    inputs = load_inputs(cfg)
    res = run_stages(inputs, cfg, through)
    if args.command == "validate-sample" and len(res.validation_sample) < cfg.validation_sample_size:
        raise PipelineError(f"cannot sample {cfg.validation_sample_size} events; "
                            f"only {len(res.validation_sample)} drug-linked events exist")
    written = write_report(res, args.out or cfg.output_dir(), inputs.sider, stages)
    for w in res.warnings:
        log.warning(w)
    for name, path in written.items():
        print(f"wrote {path}")
    return 0


def _yes(value: str) -> Optional[bool]:
    v = value.strip().lower()
    if v in ("y", "yes", "1", "true", "tp"):
        return True
    if v in ("n", "no", "0", "false", "fp"):
        return False
    return None


def _score(path: Path) -> int:
    """PPV/FDR and, with a second annotator, agreement and kappa for a filled worksheet."""
    rows = [row for _, row in read_csv(path, ("ade_verdict", "drug_verdict"))]
    verdicts, pairs = [], {"ade": [], "drug": []}
    for row in rows:
        a, d = _yes(row["ade_verdict"]), _yes(row["drug_verdict"])
        if a is None or d is None:
            continue
        verdicts.append(a and d)
        for key in ("ade", "drug"):
            other = _yes(row.get(f"{key}_verdict_b", "") or "")
            if other is not None:
                pairs[key].append((a if key == "ade" else d, other))
    metrics = ppv_fdr(verdicts)
    report = {"n": len(verdicts), "ppv": metrics.ppv, "fdr": metrics.fdr}
    for key, pr in pairs.items():
        if pr:
            table = np.zeros((2, 2), dtype=int)
            for x, y in pr:
                table[int(not x), int(not y)] += 1
            agree = 100.0 * np.trace(table) / table.sum()
            try:
                kappa = cohen_kappa(table).kappa
            except UndefinedKappaError:
                kappa = None  # one label everywhere: chance agreement is 1
            report[f"{key}_percent_agreement"] = agree
            report[f"{key}_kappa"] = kappa
    print(json.dumps(report, indent=2))
    return 0


def cmd_run(args) -> int:
    cfg = _load(args)
    res, manifest = run_pipeline(cfg, args.out)
    for w in res.warnings:
        log.info(w)
    print(f"manifest {manifest} sha256={manifest_hash(manifest)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("--seed", type=int, help="random seed (overrides config)")
    common.add_argument("--strict-attribution", action="store_true",
                        help="count post-index events only when the study drug is active")

    parser = argparse.ArgumentParser(prog="pharmatimeline", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--preset", choices=["table3_oxford"])
    p.add_argument("--n-patients", type=int)
    p.set_defaults(func=cmd_synth)

    helps = {
        "extract": "write mentions.csv",
        "episodes": "write episodes.csv",
        "adr": "write cohort.csv and adr_events.csv",
        "prevalence": "write prevalence.csv",
        "stats": "write chisq_per_trust.csv and chisq_combined.csv",
        "compare-sider": "write sider_compare.csv",
        "validate-sample": "write validation_sample.csv, or score a filled one with --score",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        if name == "validate-sample":
            p.add_argument("--n", type=int, help="sample size (default from config, 300)")
            p.add_argument("--score", help="filled worksheet to score instead of sampling")
        p.set_defaults(func=cmd_stage)

    p = sub.add_parser("run", parents=[common], help="full pipeline and manifest")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
