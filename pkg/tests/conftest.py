import json
from pathlib import Path

import numpy as np
import pytest

from corrdecay import _backend

ROOT = Path(__file__).resolve().parents[1]
MODELS = ROOT / "models"


@pytest.fixture(params=_backend.available())
def kernel(request):
    """Every kernel backend importable in this environment."""
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def models_dir():
    return MODELS


@pytest.fixture
def write_model(tmp_path):
    def _write(doc, name="model.json"):
        path = tmp_path / name
        path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
        return path

    return _write


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def report_criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def _report(number, name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  [{number:2d}] {name}: {detail}"
        lines[number] = line
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
