import datetime as dt
import time

import pytest

from pharmatimeline.cli import main
from pharmatimeline.config import load_config
from pharmatimeline.extraction import DailyEvent, MentionKind
from pharmatimeline.pipeline import run_pipeline

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def drug_events(patient, generic, dates):
    return [DailyEvent(patient, d, MentionKind.DRUG, generic) for d in dates]


def days(start, *offsets):
    return [start + dt.timedelta(days=o) for o in offsets]


class Bundle:
    """A synthesized corpus plus one full pipeline run over it."""

    def __init__(self, root, synth_args):
        self.root = root
        self.corpus_dir = root / "corpus"
        t0 = time.perf_counter()
        assert main(["synth", "--out", str(self.corpus_dir), *synth_args]) == 0
        self.config_path = self.corpus_dir / "config.yaml"
        self.config = load_config(self.config_path)
        self.report_dir = root / "report"
        self.results, self.manifest = run_pipeline(self.config, self.report_dir)
        self.seconds = time.perf_counter() - t0


@pytest.fixture(scope="session")
def synth2000(tmp_path_factory):
    return Bundle(tmp_path_factory.mktemp("synth2000"), ["--n-patients", "2000", "--seed", "7"])


@pytest.fixture(scope="session")
def table3(tmp_path_factory):
    return Bundle(tmp_path_factory.mktemp("table3"), ["--preset", "table3_oxford"])


@pytest.fixture(scope="session")
def small(tmp_path_factory):
    return Bundle(tmp_path_factory.mktemp("small"), ["--n-patients", "150", "--seed", "3"])
