import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hsigraph import kernels  # noqa: E402

BACKENDS = [kernels.python_backend] + ([kernels.compiled_backend] if kernels.compiled_backend else [])


@pytest.fixture(params=BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def backend(request, monkeypatch):
    """Route every kernel call through one backend for the duration of a test."""
    mod = request.param
    for name in ("slic_iterate", "label_components", "knn_rows", "project_rows"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return mod


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    setattr(item, f"rep_{rep.when}", rep)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported by name")
