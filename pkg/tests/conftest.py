import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from optexplain.model import validate_model
from optexplain.omif import parse_model

MODELS_DIR = ROOT / "dataset" / "models"
DATASET_DIR = ROOT / "dataset"

ALL_FIXTURES = ("prod", "infprod", "knapsack", "facility", "transport", "inftransport")
LP_FIXTURES = ("prod", "transport")
MILP_FIXTURES = ("knapsack", "facility")
INFEASIBLE_FIXTURES = ("infprod", "inftransport")


def fixture_text(name: str) -> str:
    return (MODELS_DIR / f"{name}.omif").read_text(encoding="utf-8")


def load_fixture(name: str):
    result = parse_model(fixture_text(name))
    assert result.ok, [d.render() for d in result.diagnostics]
    report = validate_model(result.model)
    assert report.ok, [(v.path, v.message) for v in report.violations]
    return result.model


@pytest.fixture
def prod():
    return load_fixture("prod")


@pytest.fixture
def infprod():
    return load_fixture("infprod")


@pytest.fixture
def knapsack():
    return load_fixture("knapsack")


@pytest.fixture
def facility():
    return load_fixture("facility")


@pytest.fixture
def transport():
    return load_fixture("transport")


@pytest.fixture
def inftransport():
    return load_fixture("inftransport")
