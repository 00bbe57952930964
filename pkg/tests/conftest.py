import copy
import json
from decimal import Decimal
from pathlib import Path

import pytest

from homoclinic.driver import parse_config, run_pipeline

ROOT = Path(__file__).resolve().parents[1]
PUBLISHED_CONFIG = ROOT / "configs" / "lorenz84_published.json"
PROOF_CONFIG = ROOT / "configs" / "lorenz84.json"

# filled by test_acceptance, printed once at the end of the session
ACCEPTANCE_LINES = {}


def load_raw(path):
    return json.loads(Path(path).read_text(), parse_float=Decimal, parse_int=Decimal)


def config_with(path, **model):
    raw = copy.deepcopy(load_raw(path))
    for k, v in model.items():
        raw["model"][k] = v
    return parse_config(raw)


@pytest.fixture(scope="session")
def published_cfg():
    return parse_config(load_raw(PUBLISHED_CONFIG))


@pytest.fixture(scope="session")
def proof_cfg():
    return parse_config(load_raw(PROOF_CONFIG))


@pytest.fixture(scope="session")
def proof_pipeline(proof_cfg):
    """Full proof with the verifiable constants (about half a minute)."""
    return run_pipeline(proof_cfg)


@pytest.fixture(scope="session")
def published_pipeline(published_cfg):
    return run_pipeline(published_cfg)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
