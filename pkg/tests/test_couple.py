import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from romfom import pipeline
from romfom.couple import (
    CoupledModel,
    DomainDecomposition,
    blend_overlap,
    decompose,
    infer_coupled,
    load_coupled_model,
    save_coupled_model,
)
from romfom.data import SnapshotSet
from romfom.errors import ConfigError
from romfom.regression import RegConfig
from romfom.sfom import AdjacencyGraph, PoolingPolicy


def tridiagonal_system(n, seed=0):
    rng = np.random.default_rng(seed)
    A = np.diag(-2.0 - rng.uniform(0, 1, n))
    A += np.diag(rng.uniform(0.2, 1.0, n - 1), 1) + np.diag(rng.uniform(0.2, 1.0, n - 1), -1)
    return A


def linear_snapshots(A, seed=0, n_traj=5, per_traj=20, dt=0.05):
    rng = np.random.default_rng(seed)
    Phi = expm(A * dt)
    cols = []
    for _ in range(n_traj):
        x = rng.standard_normal(A.shape[0])
        for _ in range(per_traj):
            cols.append(x)
            x = Phi @ x
    X = np.array(cols).T
    return SnapshotSet(X, np.arange(X.shape[1]) * dt, dXdt=A @ X)


# Decomposition
def test_chain_interface():
    dd = decompose(AdjacencyGraph.path(10), range(5, 10), [5])
    np.testing.assert_array_equal(dd.interface_ids, [5])
    assert dd.n_I == 1
    np.testing.assert_array_equal(dd.rom_ids, range(6))
    np.testing.assert_array_equal(dd.blend, [0.5])


def test_burgers_split_sizes(burgers_cfg, pipeline_cfg):
    dd = pipeline.build_decomposition(pipeline_cfg, burgers_cfg.graph(), burgers_cfg)
    assert (dd.n_R, dd.n_F) == (250, 250)
    # Periodic grid: both ends of the full-order block touch the reduced block.
    np.testing.assert_array_equal(dd.interface_ids, [250, 499])


def test_grid_interface_column():
    g = AdjacencyGraph.grid2d(10, 10)
    fom = [i * 10 + j for i in range(10) for j in range(5, 10)]
    dd = decompose(g, fom)
    np.testing.assert_array_equal(dd.interface_ids, [i * 10 + 5 for i in range(10)])


def test_decompose_rejections():
    g = AdjacencyGraph.path(6)
    with pytest.raises(ConfigError):
        decompose(g, [])
    with pytest.raises(ConfigError):
        decompose(g, range(6))
    with pytest.raises(ConfigError):
        decompose(g, [3, 9])
    with pytest.raises(ConfigError):
        decompose(g, [3, 4, 5], [2])
    with pytest.raises(ConfigError):
        decompose(g, [3, 4, 5], [4])  # not adjacent to the reduced block
    with pytest.raises(ConfigError):
        decompose(g, [3, 4, 5], [3, 3])


def test_ordered_blend_weights():
    dd = decompose(AdjacencyGraph.path(12), range(4, 12), [4, 5, 6, 7, 8])
    np.testing.assert_allclose(dd.blend, [0, 0.25, 0.5, 0.75, 1.0])
    rom, fom = np.full(5, 4.0), np.full(5, 8.0)
    out = blend_overlap(rom, fom, dd)
    assert out[0] == 4.0 and out[-1] == 8.0
    assert out[1] == pytest.approx(5.0)


def test_distance_blend_weights():
    dd = decompose(AdjacencyGraph.path(10), range(4, 10), [4, 5, 6], blend_rule="distance")
    np.testing.assert_allclose(dd.blend, [0.25, 0.5, 0.75])


def test_decomposition_dict_roundtrip():
    dd = decompose(AdjacencyGraph.path(10), range(4, 10), [4, 5])
    dd2 = DomainDecomposition.from_dict(dd.to_dict())
    for name in ("rom_ids", "fom_ids", "interface_ids", "overlap_ids", "blend"):
        np.testing.assert_array_equal(getattr(dd2, name), getattr(dd, name))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_blend_bounded_and_consensual(m, seed):
    rng = np.random.default_rng(seed)
    dd = decompose(AdjacencyGraph.path(12), range(5, 12), list(range(5, 5 + m)))
    a, b = rng.standard_normal(m), rng.standard_normal(m)
    out = blend_overlap(a, b, dd)
    assert np.all(out >= np.minimum(a, b) - 1e-15) and np.all(out <= np.maximum(a, b) + 1e-15)
    np.testing.assert_allclose(blend_overlap(a, a, dd), a, atol=1e-15)


# Inference
def test_synthetic_coupled_linear_recovery():
    n, n_F = 12, 5
    A = tridiagonal_system(n)
    S = linear_snapshots(A)
    g = AdjacencyGraph.path(n)
    dd = decompose(g, range(n - n_F, n))
    M = infer_coupled(S, g, dd, r=dd.n_R, structure={"linear"})
    V, R, F, I = M.basis.V, dd.rom_ids, dd.fom_ids, dd.interface_ids
    blocks = [
        (M.rom.core.A, V.T @ A[np.ix_(R, R)] @ V),
        (M.rom.A_RI, V.T @ A[np.ix_(R, I)]),
        (M.fom.assemble_linear().toarray(), A[np.ix_(F, F)]),
        (M.fom.assemble_coupling_linear(), A[np.ix_(F, R)] @ V),
    ]
    for got, want in blocks:
        assert np.linalg.norm(got - want) <= 1e-7 * np.linalg.norm(want)


def test_global_modes():
    A = tridiagonal_system(10)
    S = linear_snapshots(A)
    g = AdjacencyGraph.path(10)
    Mo = infer_coupled(S, g, r=10, structure={"linear"}, mode="global_opinf")
    assert Mo.fom is None and Mo.rom is not None and Mo.rom.n_I == 0
    Ms = infer_coupled(S, g, structure={"linear"}, mode="global_sfom")
    assert Ms.rom is None and Ms.basis is None
    np.testing.assert_allclose(Ms.fom.assemble_linear().toarray(), A, atol=1e-7)
    with pytest.raises(ConfigError):
        infer_coupled(S, g, structure={"linear"})
    with pytest.raises(ConfigError):
        infer_coupled(S, g, structure={"linear"}, mode="bogus")


def random_coupled_model(overlap=(), inputs=False, seed=0):
    rng = np.random.default_rng(seed)
    n, T = 14, 80
    X = rng.standard_normal((n, T))
    U = rng.standard_normal((1, T)) if inputs else None
    S = SnapshotSet(X, np.arange(T) * 0.1, U=U, dXdt=rng.standard_normal((n, T)))
    g = AdjacencyGraph.path(n, periodic=True)
    dd = decompose(g, range(7, 14), overlap)
    structure = {"linear", "quadratic", "constant"} | ({"input"} if inputs else set())
    imap = [[0]] * n if inputs else None
    return infer_coupled(S, g, dd, r=3, structure=structure, reg_R=RegConfig(eta1=1e-2),
                         reg_F=RegConfig(eta1=1e-2, eta2=1e-3), pooling=PoolingPolicy(2, 1),
                         input_map=imap)


@pytest.mark.parametrize("overlap,inputs", [((), False), ((7, 8), False), ((7,), True)])
def test_compiled_rhs_matches_blockwise(overlap, inputs):
    M = random_coupled_model(overlap, inputs)
    rng = np.random.default_rng(9)
    uf = (lambda t: np.array([np.sin(t)])) if inputs else (lambda t: None)
    fast, slow = M.joint_rhs(uf), M.joint_rhs(uf, compiled=False)
    for _ in range(5):
        y = rng.standard_normal(M.r + M.decomposition.n_F)
        a, b = fast(0.3, y), slow(0.3, y)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(b).max())


def test_reconstruct_without_overlap_is_partition():
    M = random_coupled_model()
    dd = M.decomposition
    rng = np.random.default_rng(2)
    Xhat, X_F = rng.standard_normal((M.r, 4)), rng.standard_normal((dd.n_F, 4))
    X = M.reconstruct(Xhat, X_F)
    np.testing.assert_array_equal(X[dd.fom_ids], X_F)
    np.testing.assert_allclose(X[dd.rom_ids], M.basis.V @ Xhat)
    assert np.all(np.isfinite(X))


def test_reconstruct_with_overlap_blends():
    M = random_coupled_model((7, 8))
    dd = M.decomposition
    rng = np.random.default_rng(2)
    Xhat, X_F = rng.standard_normal((M.r, 2)), rng.standard_normal((dd.n_F, 2))
    X = M.reconstruct(Xhat, X_F)
    rom_vals = (M.basis.V @ Xhat)[np.searchsorted(dd.rom_ids, dd.overlap_ids)]
    np.testing.assert_array_equal(X[7], rom_vals[0])  # weight 0 end
    np.testing.assert_array_equal(X[8], X_F[1])  # weight 1 end


def test_save_load_roundtrip(tmp_path):
    M = random_coupled_model((7, 8), inputs=True)
    save_coupled_model(M, tmp_path / "m")
    L = load_coupled_model(tmp_path / "m")
    assert isinstance(L, CoupledModel) and L.mode == M.mode and L.input_dim == 1
    np.testing.assert_array_equal(L.basis.V, M.basis.V)
    np.testing.assert_array_equal(L.decomposition.blend, M.decomposition.blend)
    y = np.random.default_rng(0).standard_normal(M.r + M.decomposition.n_F)
    uf = lambda t: np.array([1.0])
    np.testing.assert_allclose(L.joint_rhs(uf)(0.0, y), M.joint_rhs(uf)(0.0, y), rtol=1e-13)


def test_burgers_operators_stable(burgers_model):
    from romfom.diagnostics import stability_check
    assert stability_check(burgers_model.rom.core.A)["stable"]
    assert stability_check(burgers_model.fom.assemble_linear())["stable"]
