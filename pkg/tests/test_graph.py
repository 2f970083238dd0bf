import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import sparse

from hsigraph.graph import (
    AffinityGraph,
    GraphLearnConfig,
    check_graph,
    combine,
    feature_weight_update,
    knn_graph_closed_form,
    laplacian,
    masked_graph_update,
    random_walk_normalize,
    simplex_project,
    symmetrize,
    view_residual,
    write_edge_list,
)

from oracles import knn_row_qp, laplacian_quadratic_direct, simplex_project_bisect


def _random_Z(rng, n, d=3):
    X = rng.standard_normal((n, d))
    Z = ((X[:, None] - X[None]) ** 2).sum(-1)
    np.fill_diagonal(Z, 0)
    return Z


def _graph(dense, symmetric):
    return AffinityGraph(sparse.csr_matrix(np.asarray(dense, dtype=float)), symmetric)


class TestKnn:
    def test_k1(self, backend):
        Z = np.array([[0, 1, 3], [1, 0, 2], [3, 2, 0]], dtype=float)
        W = knn_graph_closed_form(Z, 1).toarray()
        np.testing.assert_array_equal(W[0], [0, 1, 0])

    def test_k2_example(self, backend):
        Z = np.array([[0, 1, 2, 4], [1, 0, 1, 1], [2, 1, 0, 1], [4, 1, 1, 0]], dtype=float)
        W = knn_graph_closed_form(Z, 2).toarray()
        np.testing.assert_allclose(W[0], [0, 0.6, 0.4, 0], atol=1e-15)
        ref, alpha = knn_row_qp(Z[0], 0, 2)
        assert alpha == 2.5
        np.testing.assert_allclose(W[0], ref, atol=1e-12)

    def test_uniform_fallback(self, backend):
        Z = np.ones((5, 5)) - np.eye(5)
        W = knn_graph_closed_form(Z, 3).toarray()
        # ties go to the smaller index
        np.testing.assert_allclose(W[0], [0, 1 / 3, 1 / 3, 1 / 3, 0], atol=1e-15)
        np.testing.assert_allclose(W[4], [1 / 3, 1 / 3, 1 / 3, 0, 0], atol=1e-15)

    def test_insufficient(self):
        with pytest.raises(ValueError, match="insufficient nodes for k edges"):
            knn_graph_closed_form(np.zeros((3, 3)), 2)

    def test_oracle_rows(self, backend, rng):
        for _ in range(40):
            n = int(rng.integers(8, 30))
            k = int(rng.integers(1, 6))
            Z = _random_Z(rng, n)
            W = knn_graph_closed_form(Z, k).toarray()
            for i in range(n):
                ref, _ = knn_row_qp(Z[i], i, k)
                assert np.abs(W[i] - ref).max() <= 1e-9

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(3, 25), st.integers(1, 6))
    def test_row_invariants(self, seed, n, k):
        if n <= k + 1:
            n = k + 2
        rng = np.random.default_rng(seed)
        # integer distances produce many ties
        Z = rng.integers(0, 4, size=(n, n)).astype(float)
        Z = Z + Z.T
        np.fill_diagonal(Z, 0)
        G = knn_graph_closed_form(Z, k)
        check_graph(G, k=k)
        W = G.toarray()
        for i in range(n):
            nz = np.flatnonzero(W[i])
            assert nz.size <= k
            d = Z[i, nz]
            order = np.argsort(d, kind="stable")
            assert np.all(np.diff(W[i, nz][order]) <= 1e-15)

    def test_accepts_feature_distance_matrix(self, rng):
        from hsigraph.superpixels import pairwise_sq_distances
        X = rng.random((9, 2))
        a = knn_graph_closed_form(pairwise_sq_distances(X), 3).toarray()
        b = knn_graph_closed_form(pairwise_sq_distances(X).values, 3).toarray()
        np.testing.assert_array_equal(a, b)


class TestStructure:
    def test_symmetrize(self):
        S = _graph([[0, 1], [1, 0]], False)
        np.testing.assert_array_equal(symmetrize(S).toarray(), S.toarray())
        W = np.zeros((3, 3))
        W[0, 2] = 0.5
        np.testing.assert_array_equal(symmetrize(_graph(W, False)).toarray()[[0, 2], [2, 0]], [0.25, 0.25])

    def test_laplacian(self, rng):
        L, D = laplacian(_graph([[0, 1], [1, 0]], True))
        np.testing.assert_array_equal(L.toarray(), [[1, -1], [-1, 1]])
        G = symmetrize(knn_graph_closed_form(_random_Z(rng, 30), 5))
        L, _ = laplacian(G)
        assert np.abs(L @ np.ones(30)).max() <= 1e-12
        x = rng.standard_normal(30)
        assert x @ (L @ x) == pytest.approx(laplacian_quadratic_direct(G.toarray(), x), rel=1e-12)
        with pytest.raises(ValueError):
            laplacian(_graph([[0, 1], [0, 0]], False))

    def test_random_walk(self, rng):
        P = random_walk_normalize(_graph([[0, 2, 2], [2, 0, 0], [2, 0, 0]], True)).toarray()
        np.testing.assert_array_equal(P[0], [0, 0.5, 0.5])
        G = symmetrize(knn_graph_closed_form(_random_Z(rng, 25), 4))
        P = random_walk_normalize(G)
        v = np.ones(25)
        for _ in range(5):
            v = P @ v
            assert np.abs(v - 1).max() <= 1e-12
        with pytest.raises(ValueError, match="zero-degree"):
            random_walk_normalize(_graph([[0, 0], [0, 0]], True))

    def test_combine(self):
        a = _graph([[0, 1], [1, 0]], True)
        np.testing.assert_array_equal(combine([a, a], [0.25, 0.5]).toarray(), [[0, 0.75], [0.75, 0]])

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GraphLearnConfig(k=0)
        with pytest.raises(ValueError):
            GraphLearnConfig(gamma2=-1)

    def test_edge_list(self, tmp_path):
        write_edge_list(_graph([[0, 0.5], [0.5, 0]], True), tmp_path / "e.txt")
        assert (tmp_path / "e.txt").read_text().split("\n")[0] == "0 1 0.5"


def _kkt_ok(c, v, sel, tol=1e-10):
    if abs(c.sum() - 1) > tol or c.min() < -tol:
        return False
    off = np.setdiff1d(np.arange(v.size), sel)
    if np.any(c[off] != 0):
        return False
    pos = sel[c[sel] > 0]
    mu = np.mean(c[pos] - v[pos])
    return np.abs(c[sel] - np.maximum(v[sel] + mu, 0)).max() <= tol


class TestSimplex:
    @pytest.mark.parametrize("v,expected", [
        ([0.5, 0.5], [0.5, 0.5]),
        ([1.5, -0.5], [1.0, 0.0]),
        ([0.6, 0.6], [0.5, 0.5]),
    ])
    def test_examples(self, backend, v, expected):
        np.testing.assert_allclose(simplex_project(v), expected, atol=1e-15)

    def test_support(self, backend):
        out = simplex_project([5.0, 0.2, 0.1], support=np.array([False, True, True]))
        np.testing.assert_allclose(out, [0, 0.55, 0.45], atol=1e-15)
        with pytest.raises(ValueError):
            simplex_project([1.0, 2.0], support=np.array([False, False]))

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.integers(2, 40), elements=st.floats(-1e3, 1e3)), st.integers(0, 2**32 - 1))
    def test_kkt_property(self, v, seed):
        rng = np.random.default_rng(seed)
        mask = rng.random(v.size) < 0.6
        mask[rng.integers(v.size)] = True
        for support in (None, mask):
            c = simplex_project(v, support)
            sel = np.arange(v.size) if support is None else np.flatnonzero(support)
            assert _kkt_ok(c, v, sel, tol=1e-10 * max(1.0, np.abs(v).max()))
            ref = simplex_project_bisect(v, sel)
            assert np.abs(c - ref).max() <= 1e-9 * max(1.0, np.abs(v).max())


class TestMaskedUpdate:
    def test_feasible_fixed_point(self, rng):
        base = symmetrize(knn_graph_closed_form(_random_Z(rng, 12), 3))
        # two row-stochastic views sharing base's support
        W = base.weights.tocsr()
        rows = []
        for seed in (1, 2):
            R = W.copy()
            R.data = np.random.default_rng(seed).random(R.nnz) + 0.1
            R = sparse.diags(1 / np.asarray(R.sum(axis=1)).ravel()) @ R
            rows.append(AffinityGraph(sparse.csr_matrix(R), False))
        c = np.array([0.3, 0.7])
        out = masked_graph_update(rows, c, np.zeros((12, 12)), 0.0, base)
        expected = (0.3 * rows[0].weights + 0.7 * rows[1].weights).toarray()
        np.testing.assert_allclose(out.toarray(), expected, atol=1e-14)

    def test_pseudo_label_removes_edge(self, backend):
        A = _graph([[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]], False)
        ZF = np.array([[0, 0, 2], [0, 0, 0], [2, 0, 0]], dtype=float)
        out = masked_graph_update([A], [1.0], ZF, 1.0, A).toarray()
        np.testing.assert_allclose(out[0], [0, 1, 0], atol=1e-15)
        np.testing.assert_allclose(out[1], [0.5, 0, 0.5], atol=1e-15)

    def test_constraints(self, backend, rng):
        n = 20
        views = [knn_graph_closed_form(_random_Z(rng, n), 4) for _ in range(3)]
        mask = symmetrize(combine(views, [1 / 3] * 3))
        ZF = _random_Z(rng, n, 2)
        out = masked_graph_update([symmetrize(v) for v in views], [0.2, 0.3, 0.5], ZF, 5.0, mask)
        check_graph(out)
        support = mask.toarray() > 0
        assert not np.any((out.toarray() > 0) & ~support)

    def test_errors(self):
        A = _graph([[0, 1], [0, 0]], False)
        with pytest.raises(ValueError, match="empty row support"):
            masked_graph_update([A], [1.0], np.zeros((2, 2)), 1.0, A)
        with pytest.raises(ValueError):
            masked_graph_update([A], [0.0], np.zeros((2, 2)), 1.0, A)


class TestFeatureWeights:
    def test_residual(self):
        A = _graph([[0, 1], [1, 0]], True)
        assert view_residual(A, A) == 0
        B = _graph([[0, 0.7], [1, 0]], True)
        assert view_residual(A, B) == pytest.approx(0.09, abs=1e-15)

    def test_residual_brute(self, rng):
        a, b = rng.random((6, 6)), rng.random((6, 6))
        assert view_residual(_graph(a, False), _graph(b, False)) == pytest.approx(((a - b) ** 2).sum(), rel=1e-13)

    @pytest.mark.parametrize("r,g2,expected", [
        ([0, 0], 3.0, [0.5, 0.5]),
        ([2, 4], 1.0, [1.0, 0.0]),
        ([1, 2], 10.0, [0.525, 0.475]),
    ])
    def test_examples(self, r, g2, expected):
        np.testing.assert_allclose(feature_weight_update(r, g2), expected, atol=1e-15)

    def test_limits(self):
        r = np.array([3.0, 1.0, 1.0, 7.0])
        np.testing.assert_allclose(feature_weight_update(r, 1e-9), [0, 0.5, 0.5, 0], atol=1e-12)
        np.testing.assert_allclose(feature_weight_update(r, 1e9), 0.25, atol=1e-6)

    def test_bad_gamma(self):
        with pytest.raises(ValueError):
            feature_weight_update([1, 2], 0)
