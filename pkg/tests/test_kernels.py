import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsigraph import kernels

py = kernels.python_backend
cy = kernels.compiled_backend
needs_compiled = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def test_env_override_selects_python():
    code = "from hsigraph import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, HSIGRAPH_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


@needs_compiled
class TestParity:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(3, 40), st.integers(1, 8), st.booleans())
    def test_knn_rows(self, seed, n, k, ties):
        if n <= k + 1:
            n = k + 2
        rng = np.random.default_rng(seed)
        Z = rng.integers(0, 3, (n, n)).astype(float) if ties else rng.random((n, n)) * 10
        Z = Z + Z.T
        np.fill_diagonal(Z, 0)
        i1, w1 = py.knn_rows(Z, k)
        i2, w2 = cy.knn_rows(Z, k)
        np.testing.assert_array_equal(i1, i2)
        assert w1.tobytes() == w2.tobytes()

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.lists(st.integers(1, 12), min_size=1, max_size=10))
    def test_project_rows(self, seed, lengths):
        rng = np.random.default_rng(seed)
        indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        v = np.round(rng.standard_normal(indptr[-1]), int(rng.integers(1, 6)))
        assert py.project_rows(indptr, v).tobytes() == cy.project_rows(indptr, v).tobytes()

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(3, 20), st.integers(3, 20))
    def test_label_components(self, seed, h, w):
        labels = np.random.default_rng(seed).integers(0, 3, (h, w)).astype(np.int64)
        c1, n1 = py.label_components(labels)
        c2, n2 = cy.label_components(labels)
        assert n1 == n2
        np.testing.assert_array_equal(c1, c2)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(4, 24), st.integers(4, 24), st.integers(1, 12))
    def test_slic_iterate(self, seed, h, w, K):
        from hsigraph.superpixels import _grid_centers
        rng = np.random.default_rng(seed)
        img = rng.random((h, w)) * 100
        cy_, cx_, step = _grid_centers(h, w, K)
        centers = np.column_stack([cy_, cx_, img[cy_.astype(int), cx_.astype(int)]])
        c1, c2 = centers.copy(), centers.copy()
        l1 = py.slic_iterate(img, c1, step, 10.0, 10)
        l2 = cy.slic_iterate(img, c2, step, 10.0, 10)
        np.testing.assert_array_equal(l1, l2)
        assert c1.tobytes() == c2.tobytes()


def test_pipeline_identical_across_backends(monkeypatch):
    from hsigraph.data_io import generate_synthetic_scene
    from hsigraph.evaluation import sample_training_labels
    from hsigraph.pipelines import builtin_config, run_pmgl
    if cy is None:
        pytest.skip("compiled kernels not built")
    cube, gt = generate_synthetic_scene(30, 30, 6, 3, 0.1, 1)
    cfg = builtin_config("synthetic").replace(superpixel_count=40)
    train = sample_training_labels(gt, 4, 0)
    results = []
    for mod in (py, cy):
        for name in ("slic_iterate", "label_components", "knn_rows", "project_rows"):
            monkeypatch.setattr(kernels, name, getattr(mod, name))
        pred, diag = run_pmgl(cube, train, cfg, gt.num_classes)
        results.append((pred, diag["scores"]))
    np.testing.assert_array_equal(results[0][0], results[1][0])
    assert results[0][1].tobytes() == results[1][1].tobytes()
