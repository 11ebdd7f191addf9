import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from romfom.errors import BoundsError, RowInferenceError
from romfom.regression import RegConfig
from romfom.sfom import (
    AdjacencyGraph,
    PoolingPolicy,
    build_index_sets,
    evaluate_sparse_rhs,
    infer_sfom,
    infer_sfom_row,
    load_sparse_model,
    save_sparse_model,
)

NU, DZ = 0.01, 0.02


def heat_operator(n, periodic):
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    A = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
    if periodic:
        A[0, -1] = A[-1, 0] = 1.0
    return NU / DZ**2 * A


def heat_data(n, periodic, seed=0, n_traj=4, per_traj=15, dt=1e-3):
    """Snapshots of the semi-discrete heat equation with exact derivatives."""
    rng = np.random.default_rng(seed)
    A = heat_operator(n, periodic)
    Phi = expm(A * dt)
    cols = []
    for _ in range(n_traj):
        x = rng.standard_normal(n)
        for _ in range(per_traj):
            cols.append(x)
            x = Phi @ x
    X = np.array(cols).T
    return A, X, A @ X


def test_index_sets():
    g = AdjacencyGraph.path(8, periodic=True)
    s = build_index_sets(g, 3)
    assert s.Q.size == 3 and s.E_size == 6
    assert s.Q.size + s.E_size + 1 == 10
    iso = AdjacencyGraph([[]])
    s = build_index_sets(iso, 0, r=4)
    assert s.E_size == 1 and s.G_size == 4
    s = build_index_sets(AdjacencyGraph.grid2d(4, 4), 5)
    assert s.Q.size == 5 and s.E_size == 15
    with pytest.raises(BoundsError):
        build_index_sets(g, 8)


def test_graph_validation_and_roundtrip():
    with pytest.raises(BoundsError):
        AdjacencyGraph([[1], [2]])
    g = AdjacencyGraph.grid2d(3, 4)
    assert AdjacencyGraph.from_dict(g.to_dict()) == g
    assert AdjacencyGraph.from_dict(g.to_dict()).geometry == g.geometry


def test_subgraph_marks_cut_rows():
    g = AdjacencyGraph.path(10, periodic=True)
    sub = g.subgraph(np.arange(5, 10))
    assert sub.n == 5
    np.testing.assert_array_equal(sub.neighbors[0], [0, 1])
    assert sub.geometry[0] != sub.geometry[2]
    assert sub.geometry[1] == sub.geometry[2] == (-1, 0, 1)


def test_heat_stencil_oracle():
    _, X, dX = heat_data(40, periodic=True)
    g = AdjacencyGraph.path(40, periodic=True)
    row = infer_sfom_row(7, X, None, dX[7], g, {"linear"}, RegConfig())
    np.testing.assert_allclose(row.beta_linear, [25.0, -50.0, 25.0], rtol=1e-6)
    assert row.beta_coupling_linear.size == 0 and row.beta_coupling_bilinear.size == 0


def test_scalar_decay():
    t = np.linspace(0, 2, 50)
    x = np.exp(-t)[None, :]
    M = infer_sfom(AdjacencyGraph([[0]]), x, None, [], {"linear"}, RegConfig(), -x)
    assert M.rows[0].beta_linear[0] == pytest.approx(-1.0, abs=1e-8)


def test_path_graph_operator_recovery():
    A, X, dX = heat_data(10, periodic=False)
    g = AdjacencyGraph.path(10)
    M = infer_sfom(g, X, None, [], {"linear"}, RegConfig(), dX)
    np.testing.assert_allclose(M.assemble_linear().toarray(), A, atol=1e-6 * np.abs(A).max())


def test_interior_rows_have_no_coupling(rng):
    _, X, dX = heat_data(10, periodic=False)
    Xhat = rng.standard_normal((2, X.shape[1]))
    M = infer_sfom(AdjacencyGraph.path(10), X, Xhat, [0], {"linear", "quadratic"},
                   RegConfig(eta1=1e-6), dX)
    assert M.rows[0].beta_coupling_linear.size == 2
    assert M.rows[0].beta_coupling_bilinear.size == 2 * 2
    for row in M.rows[1:]:
        assert row.beta_coupling_linear.size == 0
        assert row.beta_coupling_quad.size == 0
        assert row.beta_coupling_bilinear.size == 0
    np.testing.assert_array_equal(M.assemble_coupling_linear()[1:], 0.0)
    np.testing.assert_array_equal(M.interface_rows, [0])


def test_empty_interface_has_no_coupling_anywhere():
    _, X, dX = heat_data(6, periodic=False)
    M = infer_sfom(AdjacencyGraph.path(6), X, None, [], {"linear", "quadratic"},
                   RegConfig(eta1=1e-6), dX)
    assert M.r == 0
    assert all(row.beta_coupling_linear.size == 0 for row in M.rows)


def test_row_order_independence():
    _, X, dX = heat_data(12, periodic=True)
    g = AdjacencyGraph.path(12, periodic=True)
    reg = RegConfig(eta1=1e-4, eta2=1e-3)
    M = infer_sfom(g, X, None, [], {"linear", "quadratic"}, reg, dX)
    for i in np.random.default_rng(3).permutation(12):
        row = infer_sfom_row(int(i), X, None, dX, g, {"linear", "quadratic"}, reg)
        np.testing.assert_array_equal(row.beta, M.rows[i].beta)


def test_parallel_rows_match_serial():
    _, X, dX = heat_data(12, periodic=True)
    g = AdjacencyGraph.path(12, periodic=True)
    reg = RegConfig(eta1=1e-4)
    pol = PoolingPolicy(size=3, seed=5)
    M1 = infer_sfom(g, X, None, [], {"linear"}, reg, dX, pooling=pol)
    M4 = infer_sfom(g, X, None, [], {"linear"}, reg, dX, pooling=pol, workers=4)
    for a, b in zip(M1.rows, M4.rows):
        np.testing.assert_array_equal(a.beta, b.beta)


def test_assembled_nonzeros_bounded():
    _, X, dX = heat_data(12, periodic=False)
    g = AdjacencyGraph.path(12)
    M = infer_sfom(g, X, None, [], {"linear"}, RegConfig(eta1=1e-6), dX)
    assert M.assemble_linear().nnz <= sum(q.size for q in g.neighbors)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.floats(1e-6, 1e-2), st.floats(1e-6, 1.0))
def test_self_coefficient_moves_left(seed, eta1, eta2):
    _, X, dX = heat_data(8, periodic=True, seed=seed, n_traj=2, per_traj=10)
    dX = dX + np.random.default_rng(seed).standard_normal(dX.shape)
    g = AdjacencyGraph.path(8, periodic=True)
    M0 = infer_sfom(g, X, None, [], {"linear", "quadratic"}, RegConfig(eta1=eta1), dX)
    M1 = infer_sfom(g, X, None, [], {"linear", "quadratic"}, RegConfig(eta1=eta1, eta2=eta2), dX)
    for a, b in zip(M0.rows, M1.rows):
        assert b.self_coefficient <= a.self_coefficient + 1e-12


def test_pooling_equals_unpooled_for_constant_stencil():
    _, X, dX = heat_data(16, periodic=True)
    g = AdjacencyGraph.path(16, periodic=True)
    plain = infer_sfom(g, X, None, [], {"linear"}, RegConfig(), dX)
    pooled = infer_sfom(g, X, None, [], {"linear"}, RegConfig(), dX,
                        pooling=PoolingPolicy(size=5, seed=1))
    for a, b in zip(plain.rows, pooled.rows):
        np.testing.assert_allclose(b.beta, a.beta, rtol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 8), st.integers(2, 30), st.booleans())
def test_pooling_policy_choices(seed, size, n, shared):
    pol = PoolingPolicy(size=size, seed=seed, shared=shared)
    cands = np.arange(n)
    for i in (0, n // 2, n - 1):
        pick = pol.choose(i, cands)
        assert i not in pick
        assert pick.size == min(size, n - 1)
        assert np.unique(pick).size == pick.size
        assert set(pick) <= set(cands)
        np.testing.assert_array_equal(pick, pol.choose(i, cands[::-1]))


def test_shared_pooling_uses_one_draw():
    pol = PoolingPolicy(size=5, seed=0)
    cands = np.arange(100)
    picks = [set(pol.choose(i, cands)) for i in range(100)]
    common = set.intersection(*[p for i, p in enumerate(picks) if i not in picks[0]])
    assert common == picks[0]


def test_pooling_rejects_mismatched_geometry():
    _, X, dX = heat_data(6, periodic=False)
    g = AdjacencyGraph.path(6)
    with pytest.raises(ValueError):
        infer_sfom_row(2, X, None, dX, g, {"linear"}, RegConfig(), pooled_rows=[0])


def test_rank_deficient_row_reports_index():
    X = np.ones((3, 10))
    with pytest.raises(RowInferenceError) as exc:
        infer_sfom(AdjacencyGraph.path(3), X, None, [], {"linear"}, RegConfig(), X)
    assert exc.value.row == 0


def test_global_lcurve_selection():
    _, X, dX = heat_data(20, periodic=True)
    dX = dX + 1e-2 * np.random.default_rng(0).standard_normal(dX.shape)
    reg = RegConfig(eta1_grid=np.logspace(-8, -3, 6), eta2_ratios=[50])
    M = infer_sfom(AdjacencyGraph.path(20, periodic=True), X, None, [], {"linear", "quadratic"},
                   reg, dX, subsample=5)
    info = M.fit_info
    assert len(info["lcurve"]) == 6
    assert info["eta2"] == pytest.approx(50 * info["eta1"])
    assert len(info["subsample"]) == 5


def test_per_row_selection():
    _, X, dX = heat_data(6, periodic=True)
    reg = RegConfig(eta1_grid=[1e-6, 1e-4], eta2_ratios=[1.0])
    M = infer_sfom(AdjacencyGraph.path(6, periodic=True), X, None, [], {"linear"}, reg, dX,
                   selection="per_row")
    assert sorted(M.fit_info["per_row"]) == list(range(6))


def test_rhs_examples():
    _, X, dX = heat_data(30, periodic=True)
    g = AdjacencyGraph.path(30, periodic=True)
    M = infer_sfom(g, X, None, [], {"linear"}, RegConfig(), dX)
    x = np.sin(2 * np.pi * np.arange(30) / 30)
    np.testing.assert_allclose(evaluate_sparse_rhs(M, x), M.assemble_linear() @ x, atol=1e-12)
    Z = infer_sfom(g, X, None, [], {"linear"}, RegConfig(), np.zeros_like(X))
    np.testing.assert_array_equal(evaluate_sparse_rhs(Z, x), 0.0)
    C = infer_sfom(AdjacencyGraph([[0]]), np.ones((1, 4)), None, [], {"constant"}, RegConfig(),
                   np.full((1, 4), 3.0))
    assert evaluate_sparse_rhs(C, np.zeros(1))[0] == pytest.approx(3.0, abs=1e-14)


def test_save_load_roundtrip(tmp_path, rng):
    _, X, dX = heat_data(8, periodic=False)
    Xhat = rng.standard_normal((2, X.shape[1]))
    M = infer_sfom(AdjacencyGraph.path(8), X, Xhat, [0, 7], {"linear", "quadratic", "constant"},
                   RegConfig(eta1=1e-4, eta2=1e-3), dX, pooling=PoolingPolicy(2, 3))
    save_sparse_model(M, tmp_path / "f")
    L = load_sparse_model(tmp_path / "f")
    assert L.r == M.r and L.structure == M.structure and L.graph == M.graph
    for a, b in zip(M.rows, L.rows):
        np.testing.assert_array_equal(a.beta, b.beta)
        np.testing.assert_array_equal(a.Q, b.Q)
        assert a.interface == b.interface
    assert sp.issparse(L.assemble_linear())
