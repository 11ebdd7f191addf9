"""Domain decomposition and the coupled reduced/sparse full-order model.

The domain is split into a reduced subdomain (POD + OpInf) and a full-order
subdomain (per-DOF sparse stencils). Interface DOFs are the full-order DOFs
with a graph neighbour outside the full-order set: their values drive the
reduced model, and their own stencils receive the reduced coordinates.
Optional overlap DOFs belong to both sides and are blended on output.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .data import estimate_time_derivative, load_matrix, save_matrix
from .errors import ConfigError, ShapeError
from .opinf import (
    CoupledReducedModel,
    evaluate_reduced_rhs,
    infer_opinf_coupled,
    load_reduced_model,
    save_reduced_model,
)
from .pod import ReducedBasis, compute_basis, project
from .regression import RegConfig
from .sfom import (
    PoolingPolicy,
    evaluate_sparse_rhs,
    infer_sfom,
    load_sparse_model,
    save_sparse_model,
)

__all__ = ["MODES", "DomainDecomposition", "decompose", "blend_overlap", "CoupledModel",
           "JointOperator", "as_coupled", "infer_coupled", "save_coupled_model",
           "load_coupled_model"]

MODES = ("coupled", "global_opinf", "global_sfom")


@dataclass(frozen=True, eq=False)
class DomainDecomposition:
    """Index sets of a two-way split of ``n`` DOFs.

    ``blend`` gives, for each overlap DOF (same order as ``overlap_ids``),
    the weight of the full-order value in the reconstructed state.
    """

    n: int
    rom_ids: np.ndarray
    fom_ids: np.ndarray
    interface_ids: np.ndarray
    overlap_ids: np.ndarray
    blend: np.ndarray

    @property
    def n_R(self):
        return self.rom_ids.size

    @property
    def n_F(self):
        return self.fom_ids.size

    @property
    def n_I(self):
        return self.interface_ids.size

    def fom_local(self, ids):
        """Positions of global DOFs ``ids`` inside ``fom_ids``."""
        pos = np.searchsorted(self.fom_ids, ids)
        return pos.astype(int)

    def to_dict(self):
        return {"n": int(self.n), "fom_ids": self.fom_ids.tolist(),
                "overlap_ids": self.overlap_ids.tolist(),
                "interface_ids": self.interface_ids.tolist(),
                "blend": self.blend.tolist()}

    @classmethod
    def from_dict(cls, d):
        n = int(d["n"])
        fom = np.asarray(d["fom_ids"], dtype=int)
        overlap = np.asarray(d.get("overlap_ids", []), dtype=int)
        rom = np.union1d(np.setdiff1d(np.arange(n), fom), overlap)
        return cls(n, rom, fom, np.asarray(d["interface_ids"], dtype=int), overlap,
                   np.asarray(d.get("blend", [0.5] * overlap.size), dtype=np.float64))


def _hop_distance(g, sources, allowed):
    """Graph distance from ``sources`` moving only through ``allowed`` DOFs."""
    mask = np.zeros(g.n, dtype=bool)
    mask[allowed] = True
    mask[sources] = True
    rows, cols = [], []
    for i in np.flatnonzero(mask):
        for j in g.neighbors[i]:
            if mask[j] and j != i:
                rows.append(i)
                cols.append(j)
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(g.n, g.n))
    dist = shortest_path(adj, unweighted=True, indices=sources)
    return dist.min(axis=0)


def decompose(g, fom_ids, overlap_ids=(), blend_rule="ordered"):
    """Split the DOFs of ``g`` into reduced and full-order subdomains.

    Parameters
    ----------
    g : AdjacencyGraph
        Graph of the full problem.
    fom_ids : sequence of int
        DOFs simulated by the sparse full-order model.
    overlap_ids : sequence of int, optional
        Ordered subset of ``fom_ids`` also covered by the reduced basis,
        starting next to the reduced-only DOFs.
    blend_rule : {"ordered", "distance"}
        ``"ordered"``: the overlap must be a chain (each DOF adjacent to the
        previous one, the first adjacent to a reduced-only DOF) and blend
        weights run linearly from 0 to 1 along it; a single overlap DOF gets
        0.5. ``"distance"``: any connected strip, with weight ``d / (d_max + 1)``
        for hop distance ``d`` from the reduced-only DOFs.

    Returns
    -------
    DomainDecomposition
        Interface DOFs are the full-order DOFs with a neighbour outside
        ``fom_ids``.
    """
    n = g.n
    fom = np.unique(np.asarray(fom_ids, dtype=int))
    if fom.size == 0:
        raise ConfigError("the full-order subdomain is empty")
    if fom.size == n:
        raise ConfigError("the full-order subdomain covers the whole domain")
    if fom[0] < 0 or fom[-1] >= n:
        raise ConfigError(f"fom_ids outside [0, {n})")
    overlap = np.asarray(overlap_ids, dtype=int).ravel()
    if np.unique(overlap).size != overlap.size:
        raise ConfigError("overlap_ids contains duplicates")
    if np.setdiff1d(overlap, fom).size:
        raise ConfigError("overlap_ids must be a subset of fom_ids")
    rom_only = np.setdiff1d(np.arange(n), fom)
    in_fom = np.zeros(n, dtype=bool)
    in_fom[fom] = True
    interface = np.array([i for i in fom if np.any(~in_fom[g.neighbors[i]])], dtype=int)

    blend = np.zeros(0)
    if overlap.size and blend_rule == "ordered":
        prev = rom_only
        for j in overlap:
            if not np.isin(g.neighbors[j], prev).any():
                raise ConfigError(f"overlap DOF {j} is not adjacent to the previous one")
            prev = [j]
        m = overlap.size
        blend = np.full(1, 0.5) if m == 1 else np.arange(m) / (m - 1.0)
    elif overlap.size and blend_rule == "distance":
        dist = _hop_distance(g, rom_only, overlap)[overlap]
        if not np.all(np.isfinite(dist)):
            bad = overlap[~np.isfinite(dist)].tolist()
            raise ConfigError(f"overlap DOFs {bad} are disconnected from the reduced subdomain")
        blend = dist / (dist.max() + 1.0)
    elif overlap.size:
        raise ConfigError(f"unknown blend rule {blend_rule!r}")
    rom = np.union1d(rom_only, overlap)
    return DomainDecomposition(n, rom, fom, interface, overlap, blend)


def blend_overlap(rom_recon, fom_vals, dd):
    """Blend ``(1 - s) * rom_recon + s * fom_vals`` over the overlap DOFs."""
    rom_recon = np.asarray(rom_recon, dtype=np.float64)
    fom_vals = np.asarray(fom_vals, dtype=np.float64)
    m = dd.overlap_ids.size
    if rom_recon.shape[:1] != (m,) or fom_vals.shape != rom_recon.shape:
        raise ShapeError(f"expected {m} overlap values, got {rom_recon.shape} and {fom_vals.shape}")
    s = dd.blend.reshape((m,) + (1,) * (rom_recon.ndim - 1))
    return (1 - s) * rom_recon + s * fom_vals


@dataclass(eq=False)
class CoupledModel:
    """Reduced model on ``rom_ids`` joined to a sparse model on ``fom_ids``.

    In the global modes one side is absent: ``rom``/``basis`` are None for
    ``global_sfom`` and ``fom`` is None for ``global_opinf``.
    """

    decomposition: DomainDecomposition
    rom: CoupledReducedModel
    basis: ReducedBasis
    fom: object
    mode: str = "coupled"
    input_dim: int = 0

    @property
    def n(self):
        return self.decomposition.n

    @property
    def r(self):
        return 0 if self.rom is None else self.rom.r

    @property
    def iface_local(self):
        dd = self.decomposition
        return dd.fom_local(dd.interface_ids)

    def initial_state(self, x0):
        """Joint state ``[V^T x0_R; x0_F]``."""
        dd = self.decomposition
        parts = []
        if self.rom is not None:
            parts.append(project(x0[dd.rom_ids], self.basis))
        if self.fom is not None:
            parts.append(x0[dd.fom_ids])
        return np.concatenate(parts)

    def joint_rhs(self, uf, compiled=True):
        """Right-hand side ``f(t, y)`` of the joint state.

        By default the model is first flattened into a :class:`JointOperator`
        (one sparse product per call). ``compiled=False`` evaluates the
        reduced and sparse halves separately, stencil block by block.
        """
        if compiled:
            op = self.compile()
            return lambda t, y: op(y, uf(t))
        r = self.r
        rom, fom = self.rom, self.fom
        iface = self.iface_local

        def rhs(t, y):
            u = uf(t)
            if fom is None:
                return evaluate_reduced_rhs(rom, y, None, u)
            if rom is None:
                return evaluate_sparse_rhs(fom, y, None, u)
            xhat, x_F = y[:r], y[r:]
            return np.concatenate([evaluate_reduced_rhs(rom, xhat, x_F[iface], u),
                                   evaluate_sparse_rhs(fom, x_F, xhat, u)])

        return rhs

    def compile(self):
        """Flatten both halves into one quadratic system in ``[xhat; x_F]``."""
        if getattr(self, "_op", None) is None:
            self._op = _compile_joint(self)
        return self._op

    def reconstruct(self, Xhat, X_F):
        """Full states from reduced coordinates and full-order values."""
        dd = self.decomposition
        m = Xhat.shape[1] if self.rom is not None else X_F.shape[1]
        out = np.zeros((dd.n, m))
        if self.rom is not None:
            out[dd.rom_ids] = self.basis.V @ Xhat
        if self.fom is not None:
            rom_vals = out[dd.overlap_ids].copy()
            out[dd.fom_ids] = X_F
            if dd.overlap_ids.size:
                out[dd.overlap_ids] = blend_overlap(rom_vals, out[dd.overlap_ids], dd)
        return out


class JointOperator:
    """``f(y, u) = L y + H (y[P] * y[Q]) + B u + c`` with sparse ``L`` and ``H``.

    ``L`` and ``H`` are stored side by side as one matrix ``K = [L | H]`` so
    an evaluation costs a single sparse product on ``[y; y[P] * y[Q]]``.
    """

    def __init__(self, N, lin, quad, inp, const, k):
        (li, lj, lv), (qi, qp, qq, qv) = lin, quad
        pairs = {}
        cols = np.empty(len(qp), dtype=int)
        for t, (a, b) in enumerate(zip(qp, qq)):
            key = (a, b) if a <= b else (b, a)
            cols[t] = pairs.setdefault(key, len(pairs))
        keys = np.array(list(pairs), dtype=int).reshape(-1, 2)
        self.P, self.Q = keys[:, 0], keys[:, 1]
        self.N = N
        self.K = csr_matrix((np.concatenate([lv, qv]),
                             (np.concatenate([li, qi]), np.concatenate([lj, N + cols]))),
                            shape=(N, N + len(pairs)))
        self.K.sum_duplicates()
        bi, bj, bv = inp
        self.B = csr_matrix((bv, (bi, bj)), shape=(N, k)) if k else None
        self.c = const
        self._z = np.empty(N + len(pairs))

    @property
    def L(self):
        return self.K[:, : self.N]

    @property
    def H(self):
        return self.K[:, self.N:]

    def __call__(self, y, u=None):
        z = self._z
        z[: self.N] = y
        np.multiply(y[self.P], y[self.Q], out=z[self.N:])
        out = self.K @ z
        out += self.c
        if self.B is not None:
            out += self.B @ u
        return out


def _compile_joint(M):
    r = M.r
    iface = M.iface_local
    N = r + (M.fom.n_F if M.fom is not None else 0)
    lin = ([], [], [])
    quad = ([], [], [], [])
    inp = ([], [], [])
    const = np.zeros(N)

    def add_lin(row, cols, vals):
        lin[0].append(np.full(len(cols), row))
        lin[1].append(np.asarray(cols, dtype=int))
        lin[2].append(np.asarray(vals, dtype=np.float64))

    def add_quad(row, p, q, vals):
        quad[0].append(np.full(len(p), row))
        quad[1].append(np.asarray(p, dtype=int))
        quad[2].append(np.asarray(q, dtype=int))
        quad[3].append(np.asarray(vals, dtype=np.float64))

    def add_inp(row, cols, vals):
        inp[0].append(np.full(len(cols), row))
        inp[1].append(np.asarray(cols, dtype=int))
        inp[2].append(np.asarray(vals, dtype=np.float64))

    if M.rom is not None:
        core = M.rom.core
        xi = r + iface  # joint positions of the interface DOFs
        ti, tj = np.triu_indices(r)
        si, sj = np.triu_indices(iface.size)
        bi = np.repeat(np.arange(r), iface.size)
        bj = np.tile(xi, r)
        for i in range(r):
            add_lin(i, np.arange(r), core.A[i])
            add_lin(i, xi, M.rom.A_RI[i])
            if "quadratic" in core.structure:
                add_quad(i, ti, tj, core.Hc[i])
                add_quad(i, xi[si], xi[sj], M.rom.H_RII[i])
                add_quad(i, bi, bj, M.rom.H_RRI[i])
            if core.input_dim:
                add_inp(i, np.arange(core.input_dim), core.B[i])
        const[:r] = core.c
    if M.fom is not None:
        rt_i, rt_j = np.triu_indices(r)
        for row in M.fom.rows:
            y = r + row.row
            Q = r + row.Q
            if row.beta_linear.size:
                add_lin(y, Q, row.beta_linear)
            if row.beta_quad.size:
                a, b = np.triu_indices(Q.size)
                add_quad(y, Q[a], Q[b], row.beta_quad)
            if row.beta_coupling_linear.size:
                add_lin(y, np.arange(r), row.beta_coupling_linear)
            if row.beta_coupling_quad.size:
                add_quad(y, rt_i, rt_j, row.beta_coupling_quad)
            if row.beta_coupling_bilinear.size:
                add_quad(y, np.repeat(Q, r), np.tile(np.arange(r), Q.size),
                         row.beta_coupling_bilinear)
            if row.beta_input.size:
                add_inp(y, row.L, row.beta_input)
            const[y] = row.beta_const

    def cat(parts, dtype):
        return np.concatenate(parts) if parts else np.empty(0, dtype=dtype)

    return JointOperator(
        N,
        tuple(cat(p, d) for p, d in zip(lin, (int, int, float))),
        tuple(cat(p, d) for p, d in zip(quad, (int, int, int, float))),
        tuple(cat(p, d) for p, d in zip(inp, (int, int, float))),
        const,
        M.input_dim,
    )


def _global_decomposition(n, mode):
    empty = np.empty(0, dtype=int)
    if mode == "global_opinf":
        return DomainDecomposition(n, np.arange(n), empty, empty, empty, np.empty(0))
    return DomainDecomposition(n, empty, np.arange(n), empty, empty, np.empty(0))


def as_coupled(M):
    """Wrap a stand-alone sparse model as a ``global_sfom`` coupled model."""
    return CoupledModel(_global_decomposition(M.n_F, "global_sfom"), None, None, M,
                        "global_sfom", M.k)


def infer_coupled(S, g, dd=None, r=None, energy=None, structure=("linear", "quadratic"),
                  reg_R=None, reg_F=None, pooling=None, mode="coupled", input_map=None,
                  selection="global", subsample=20, seed=0, workers=1):
    """Fit both halves of a coupled model from one snapshot set.

    Parameters
    ----------
    S : SnapshotSet
        Training data. Time derivatives are estimated from the snapshots
        when ``S.dXdt`` is None.
    g : AdjacencyGraph
        Graph of the full problem.
    dd : DomainDecomposition
        Required in ``"coupled"`` mode; ignored in the global modes.
    r, energy :
        Basis size or retained energy fraction for the reduced side.
    structure : set of str
        Terms used by both sides.
    reg_R, reg_F : RegConfig
        Regularization of the reduced and sparse regressions.
    pooling : PoolingPolicy, optional
    mode : {"coupled", "global_opinf", "global_sfom"}

    Returns
    -------
    CoupledModel
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
    n = S.n
    if g.n != n:
        raise ShapeError(f"graph has {g.n} DOFs, snapshots have {n} rows")
    structure = frozenset(structure)
    reg_R = reg_R or RegConfig()
    reg_F = reg_F or RegConfig()
    pooling = pooling or PoolingPolicy()
    dX = S.dXdt if S.dXdt is not None else estimate_time_derivative(S.X, S.times)
    U = S.U if S.k else None
    k = S.k if "input" in structure else 0
    if mode != "coupled":
        dd = _global_decomposition(n, mode)
    elif dd is None:
        raise ConfigError("coupled mode needs a domain decomposition")

    rom = basis = fom = None
    Xhat = None
    if dd.n_R:
        basis = compute_basis(S.X[dd.rom_ids], r=r, energy=energy)
        Xhat = project(S.X[dd.rom_ids], basis)
        dXhat = project(dX[dd.rom_ids], basis)
        rom = infer_opinf_coupled(Xhat, S.X[dd.interface_ids], U, dXhat, structure, reg_R,
                                  interface_ids=dd.interface_ids)
    if dd.n_F:
        sub = g.subgraph(dd.fom_ids)
        local_map = None if input_map is None else [input_map[i] for i in dd.fom_ids]
        fom = infer_sfom(sub, S.X[dd.fom_ids], Xhat, dd.fom_local(dd.interface_ids),
                         structure, reg_F, dX[dd.fom_ids], pooling=pooling, U=U,
                         input_map=local_map, selection=selection, subsample=subsample,
                         seed=seed, workers=workers)
    return CoupledModel(dd, rom, basis, fom, mode, k)


def save_coupled_model(M, directory):
    """Write a coupled model bundle: manifest, decomposition, basis, halves."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"format_version": 1, "mode": M.mode, "input_dim": M.input_dim,
                "r": M.r, "has_rom": M.rom is not None, "has_fom": M.fom is not None}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    (directory / "decomposition.json").write_text(json.dumps(M.decomposition.to_dict(), indent=2))
    if M.rom is not None:
        save_matrix(directory / "basis.fmat", M.basis.V)
        save_matrix(directory / "sigma.fmat", M.basis.sigma[:, None])
        save_reduced_model(M.rom, directory / "rom")
    if M.fom is not None:
        save_sparse_model(M.fom, directory / "fom")


def load_coupled_model(directory):
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    dd = DomainDecomposition.from_dict(json.loads((directory / "decomposition.json").read_text()))
    rom = basis = fom = None
    if manifest["has_rom"]:
        basis = ReducedBasis(load_matrix(directory / "basis.fmat"),
                             load_matrix(directory / "sigma.fmat").ravel())
        rom = load_reduced_model(directory / "rom")
    if manifest["has_fom"]:
        fom = load_sparse_model(directory / "fom")
    return CoupledModel(dd, rom, basis, fom, manifest["mode"], manifest["input_dim"])
