"""Sparse full-order model inference on an adjacency graph.

Every DOF ``i`` gets its own small least-squares problem whose unknowns are
the stencil coefficients acting on the graph neighbourhood ``Q_i``:

    dx_i/dt = a_i . x_Q + h_i . q(x_Q) + b_i . u_L + c_i
              + [i in interface] (coupling terms in the reduced coordinates)

Rows are independent, so they can be solved in any order or in parallel.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .data import load_matrix, save_matrix
from .errors import BoundsError, RomFomError, RowInferenceError, ShapeError
from .regression import (
    FeatureBlockSpec,
    LCurvePoint,
    bilinear_features,
    l_curve_select,
    quadratic_unique_features,
    quadratic_unique_vector,
    solve_gershgorin_ls,
)

__all__ = [
    "AdjacencyGraph",
    "IndexSets",
    "PoolingPolicy",
    "SparseRow",
    "SparseQuadModel",
    "build_index_sets",
    "infer_sfom_row",
    "infer_sfom",
    "evaluate_sparse_rhs",
    "save_sparse_model",
    "load_sparse_model",
]


# Graph =======================================================================
class AdjacencyGraph:
    """Neighbourhoods ``Q_i`` (ascending, always containing ``i``).

    ``geometry`` holds one hashable key per DOF describing its stencil
    shape; only DOFs with equal keys may pool data. The default key is the
    tuple of index offsets ``Q_i - i``, which is congruence on regularly
    numbered meshes.
    """

    def __init__(self, neighbors, geometry=None):
        nbrs = []
        n = len(neighbors)
        for i, q in enumerate(neighbors):
            q = np.unique(np.append(np.asarray(q, dtype=int), i))
            if q.size and (q[0] < 0 or q[-1] >= n):
                raise BoundsError(f"neighbour of DOF {i} out of range [0, {n})")
            nbrs.append(q)
        self.neighbors = tuple(nbrs)
        if geometry is None:
            geometry = [tuple((q - i).tolist()) for i, q in enumerate(self.neighbors)]
        if len(geometry) != n:
            raise ShapeError(f"{len(geometry)} geometry keys for {n} DOFs")
        self.geometry = tuple(geometry)

    @property
    def n(self):
        return len(self.neighbors)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        return (isinstance(other, AdjacencyGraph) and self.n == other.n
                and all(np.array_equal(a, b) for a, b in zip(self.neighbors, other.neighbors)))

    @classmethod
    def from_edges(cls, n, edges):
        nbrs = [[i] for i in range(n)]
        for a, b in edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        return cls(nbrs)

    @classmethod
    def path(cls, n, periodic=False):
        """1D chain with a 3-point stencil, optionally wrapped.

        Wrapped rows keep their own geometry keys: their sorted stencils
        list the neighbours in a different order than interior rows do.
        """
        nbrs = []
        for i in range(n):
            q = [i - 1, i, i + 1]
            nbrs.append([j % n for j in q] if periodic else [j for j in q if 0 <= j < n])
        return cls(nbrs)

    @classmethod
    def grid2d(cls, nx, ny):
        """5-point stencil on an ``nx`` by ``ny`` grid, index ``i * ny + j``."""
        nbrs = []
        geometry = []
        for i in range(nx):
            for j in range(ny):
                q = [(i, j)]
                for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    if 0 <= i + di < nx and 0 <= j + dj < ny:
                        q.append((i + di, j + dj))
                nbrs.append([a * ny + b for a, b in q])
                geometry.append(tuple(sorted((a - i, b - j) for a, b in q)))
        return cls(nbrs, geometry)

    def subgraph(self, ids):
        """Induced graph on ``ids`` (local indices follow the order of ``ids``).

        Geometry keys of DOFs that lose neighbours are recomputed from local
        offsets so they no longer pool with intact stencils.
        """
        ids = np.asarray(ids, dtype=int)
        local = {int(g): k for k, g in enumerate(ids)}
        nbrs, geometry = [], []
        for k, g in enumerate(ids):
            q_full = self.neighbors[g]
            q = [local[int(j)] for j in q_full if int(j) in local]
            nbrs.append(q)
            if len(q) == len(q_full):
                geometry.append(self.geometry[g])
            else:
                geometry.append(("cut",) + tuple(sorted(j - k for j in q)))
        return AdjacencyGraph(nbrs, geometry)

    def to_dict(self):
        return {"n": self.n, "neighbors": [q.tolist() for q in self.neighbors],
                "geometry": [list(g) for g in self.geometry]}

    @classmethod
    def from_dict(cls, d):
        geometry = [tuple(tuple(x) if isinstance(x, list) else x for x in g)
                    for g in d["geometry"]] if "geometry" in d else None
        return cls(d["neighbors"], geometry)


@dataclass(frozen=True)
class IndexSets:
    Q: np.ndarray
    E_size: int
    L: np.ndarray
    G_size: int


def build_index_sets(g, i, r=0, input_map=None):
    """Stencil, quadratic, input and bilinear index-set sizes of DOF ``i``."""
    if not 0 <= i < g.n:
        raise BoundsError(f"DOF {i} out of range [0, {g.n})")
    Q = g.neighbors[i]
    L = np.asarray(input_map[i] if input_map is not None else [], dtype=int)
    return IndexSets(Q, Q.size * (Q.size + 1) // 2, L, Q.size * r)


# Models ======================================================================
@dataclass(eq=False)
class SparseRow:
    """Inferred stencil of one DOF, split by feature block."""

    row: int
    Q: np.ndarray
    L: np.ndarray
    interface: bool
    spec: FeatureBlockSpec
    beta: np.ndarray

    def block(self, kind):
        sl = self.spec.block_slice(kind)
        return np.zeros(0) if sl is None else self.beta[sl]

    beta_linear = property(lambda self: self.block("linear"))
    beta_quad = property(lambda self: self.block("quadratic_unique"))
    beta_input = property(lambda self: self.block("input"))
    beta_coupling_linear = property(lambda self: self.block("coupling_linear"))
    beta_coupling_quad = property(lambda self: self.block("coupling_quadratic"))
    beta_coupling_bilinear = property(lambda self: self.block("coupling_bilinear"))

    @property
    def beta_const(self):
        c = self.block("constant")
        return float(c[0]) if c.size else 0.0

    @property
    def self_coefficient(self):
        return float(self.beta[self.spec.diag_index]) if self.spec.diag_index is not None else 0.0


@dataclass(eq=False)
class SparseQuadModel:
    """Collection of per-DOF stencils over a full-order subdomain."""

    graph: AdjacencyGraph
    rows: list
    r: int = 0
    k: int = 0
    structure: frozenset = frozenset({"linear", "quadratic", "input", "constant"})
    fit_info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.structure = frozenset(self.structure)
        if len(self.rows) != self.graph.n:
            raise ShapeError(f"{len(self.rows)} rows for a graph with {self.graph.n} DOFs")
        self._compiled = None

    @property
    def n_F(self):
        return self.graph.n

    @property
    def interface_rows(self):
        return np.array([row.row for row in self.rows if row.interface], dtype=int)

    def assemble_linear(self):
        """Sparse ``A_FF`` scattered from the linear stencil blocks."""
        ii, jj, vv = [], [], []
        for row in self.rows:
            a = row.beta_linear
            if a.size:
                ii.append(np.full(a.size, row.row))
                jj.append(row.Q)
                vv.append(a)
        if not vv:
            return sp.csr_matrix((self.n_F, self.n_F))
        return sp.csr_matrix((np.concatenate(vv), (np.concatenate(ii), np.concatenate(jj))),
                             shape=(self.n_F, self.n_F))

    def assemble_coupling_linear(self):
        """Dense ``A_FR`` (zero outside interface rows)."""
        A = np.zeros((self.n_F, self.r))
        for row in self.rows:
            if row.interface and row.beta_coupling_linear.size:
                A[row.row] = row.beta_coupling_linear
        return A

    # Fast evaluation: rows sharing a layout are evaluated as one array op.
    def _compile(self):
        groups = {}
        for row in self.rows:
            key = (row.Q.size, row.L.size, row.interface,
                   tuple((b.kind, b.size) for b in row.spec.blocks))
            groups.setdefault(key, []).append(row)
        compiled = []
        for (nq, nl, _, layout), rows in groups.items():
            entry = {
                "rows": np.array([row.row for row in rows]),
                "Q": np.array([row.Q for row in rows]).reshape(len(rows), nq),
                "L": np.array([row.L for row in rows], dtype=int).reshape(len(rows), nl),
            }
            for kind, _size in layout:
                entry[kind] = np.array([row.block(kind) for row in rows])
            if "coupling_bilinear" in entry:
                entry["coupling_bilinear"] = entry["coupling_bilinear"].reshape(len(rows), nq, -1)
            if "quadratic_unique" in entry:
                entry["tri"] = np.triu_indices(nq)
            compiled.append(entry)
        self._compiled = compiled
        return compiled


def evaluate_sparse_rhs(M, x_F, xhat_R=None, u=None):
    """Time derivative of every DOF of a sparse model at one state."""
    x_F = np.asarray(x_F, dtype=np.float64)
    if x_F.shape != (M.n_F,):
        raise ShapeError(f"x_F has shape {x_F.shape}, expected ({M.n_F},)")
    if M.r:
        xhat_R = np.asarray(xhat_R, dtype=np.float64)
        if xhat_R.shape != (M.r,):
            raise ShapeError(f"xhat_R has shape {xhat_R.shape}, expected ({M.r},)")
    if M.k:
        u = np.asarray(u, dtype=np.float64).ravel()
    compiled = M._compiled if M._compiled is not None else M._compile()
    out = np.zeros(M.n_F)
    for e in compiled:
        XQ = x_F[e["Q"]]
        acc = np.zeros(len(e["rows"]))
        if "linear" in e:
            acc += np.einsum("gq,gq->g", e["linear"], XQ)
        if "quadratic_unique" in e:
            ti, tj = e["tri"]
            acc += np.einsum("gq,gq->g", e["quadratic_unique"], XQ[:, ti] * XQ[:, tj])
        if "coupling_linear" in e:
            acc += e["coupling_linear"] @ xhat_R
        if "coupling_quadratic" in e:
            acc += e["coupling_quadratic"] @ quadratic_unique_vector(xhat_R)
        if "coupling_bilinear" in e:
            acc += np.einsum("gq,gq->g", e["coupling_bilinear"] @ xhat_R, XQ)
        if "input" in e:
            acc += np.einsum("gl,gl->g", e["input"], u[e["L"]])
        if "constant" in e:
            acc += e["constant"][:, 0]
        out[e["rows"]] = acc
    return out


# Inference ===================================================================
@dataclass(frozen=True)
class PoolingPolicy:
    """Concatenate data from ``size`` random rows of identical stencil geometry.

    With ``shared`` (the default) one random set of rows per geometry class
    is drawn from ``seed`` and appended to every row of that class (a row
    in the set gets the next drawn row instead of itself). Otherwise each
    row ``i`` draws its own set from ``(seed, i)``. Either way the choice
    does not depend on how rows are split over workers. Interface rows
    never pool, since their coupling coefficients are specific to each row.
    """

    size: int = 0
    seed: int = 0
    shared: bool = True

    def choose(self, i, candidates):
        candidates = np.asarray(candidates, dtype=int)
        if self.size <= 0:
            return np.empty(0, dtype=int)
        if self.shared:
            # Permutation of the sorted class depends only on seed and class.
            order = np.random.default_rng(self.seed).permutation(np.sort(candidates))
            picks = [c for c in order if c != i][: self.size]
            return np.sort(np.asarray(picks, dtype=int))
        candidates = np.sort(candidates[candidates != i])
        if candidates.size == 0:
            return np.empty(0, dtype=int)
        rng = np.random.default_rng([self.seed, i])
        take = min(self.size, candidates.size)
        return np.sort(rng.choice(candidates, size=take, replace=False))


def _row_layout(nq, nl, r, coupled, structure, reg, diag):
    lin = "linear" in structure
    quad = "quadratic" in structure
    sizes = [
        ("linear", nq if lin else 0),
        ("quadratic_unique", nq * (nq + 1) // 2 if quad else 0),
        ("coupling_linear", r if coupled and lin else 0),
        ("coupling_quadratic", r * (r + 1) // 2 if coupled and quad else 0),
        ("coupling_bilinear", nq * r if coupled and quad else 0),
        ("input", nl if "input" in structure else 0),
        ("constant", 1 if "constant" in structure else 0),
    ]
    return FeatureBlockSpec.from_sizes(sizes, reg, diag_index=diag if lin else None)


def _row_data(Q, L, X_F, Xhat_R, U, coupled, structure):
    XQ = X_F[Q]
    blocks = []
    if "linear" in structure:
        blocks.append(XQ)
    if "quadratic" in structure:
        blocks.append(quadratic_unique_features(XQ))
    if coupled:
        if "linear" in structure:
            blocks.append(Xhat_R)
        if "quadratic" in structure:
            blocks += [quadratic_unique_features(Xhat_R), bilinear_features(XQ, Xhat_R)]
    if "input" in structure:
        blocks.append(U[L])
    if "constant" in structure:
        blocks.append(np.ones((1, X_F.shape[1])))
    return np.vstack([b for b in blocks if b.shape[0] > 0])


@dataclass
class _RowProblem:
    row: int
    Q: np.ndarray
    L: np.ndarray
    interface: bool
    spec: FeatureBlockSpec
    D: np.ndarray
    y: np.ndarray


def _prepare_row(i, X_F, Xhat_R, dX_F, g, structure, reg, pooled_rows=(),
                 interface=False, U=None, input_map=None):
    n_T = X_F.shape[1]
    r = Xhat_R.shape[0] if (interface and Xhat_R is not None) else 0
    if interface and r == 0:
        raise ShapeError(f"row {i} is an interface row but no reduced data were given")
    U = np.empty((0, n_T)) if U is None else U
    sets = build_index_sets(g, i, r, input_map)
    L = sets.L if "input" in structure else np.empty(0, dtype=int)
    diag = int(np.searchsorted(sets.Q, i))
    spec = _row_layout(sets.Q.size, L.size, r, interface, structure, reg, diag)
    Ds = [_row_data(sets.Q, L, X_F, Xhat_R, U, interface, structure)]
    ys = [dX_F[i]]
    for p in pooled_rows:
        p = int(p)
        if g.geometry[p] != g.geometry[i]:
            raise ValueError(f"row {p} cannot pool with row {i}: stencil geometry differs")
        Lp = np.asarray(input_map[p] if input_map is not None else [], dtype=int)
        if "input" not in structure:
            Lp = np.empty(0, dtype=int)
        if Lp.size != L.size:
            raise ValueError(f"row {p} cannot pool with row {i}: input sets differ in size")
        Ds.append(_row_data(g.neighbors[p], Lp, X_F, Xhat_R, U, interface, structure))
        ys.append(dX_F[p])
    return _RowProblem(i, sets.Q, L, interface, spec, np.hstack(Ds), np.concatenate(ys)[None, :])


def infer_sfom_row(i, X_F, Xhat_R, dX, g, structure, reg, pooled_rows=None,
                   interface=False, U=None, input_map=None):
    """Infer the stencil of DOF ``i``.

    Parameters
    ----------
    i : int
        Row (DOF) index within the full-order subdomain.
    X_F : (n_F, n_T) ndarray
        Full-order snapshots.
    Xhat_R : (r, n_T) ndarray or None
        Reduced coordinates; only used when ``interface`` is set.
    dX : ndarray
        Derivative data, either the full ``(n_F, n_T)`` matrix or just the
        row of DOF ``i`` (the latter only without pooling).
    g : AdjacencyGraph
    structure : set of str
    reg : RegConfig
        Fixed weights ``eta1``/``eta2``.
    pooled_rows : sequence of int, optional
        Rows of congruent geometry whose data are appended to row ``i``'s.
    interface : bool
        Adds the coupling blocks in the reduced coordinates.

    Returns
    -------
    SparseRow
    """
    X_F = np.atleast_2d(np.asarray(X_F, dtype=np.float64))
    dX = np.atleast_2d(np.asarray(dX, dtype=np.float64))
    pooled_rows = () if pooled_rows is None else pooled_rows
    if dX.shape[0] == 1 and X_F.shape[0] != 1:
        if len(pooled_rows):
            raise ShapeError("pooling needs the full derivative matrix")
        full = np.zeros_like(X_F)
        full[i] = dX[0]
        dX = full
    if dX.shape != X_F.shape:
        raise ShapeError(f"derivative shape {dX.shape} differs from X_F shape {X_F.shape}")
    prob = _prepare_row(i, X_F, Xhat_R, dX, g, frozenset(structure), reg, pooled_rows,
                        interface, U, input_map)
    return _solve_row(prob, reg.eta1, reg.eta2, reg)


def _solve_row(prob, eta1, eta2, reg):
    beta = solve_gershgorin_ls(prob.D, prob.y, reg, prob.spec, eta1=eta1, eta2=eta2)[0]
    return SparseRow(prob.row, prob.Q, prob.L, prob.interface, prob.spec, beta)


def _row_stats(prob, eta1, eta2, reg):
    beta = solve_gershgorin_ls(prob.D, prob.y, reg, prob.spec, eta1=eta1, eta2=eta2)[0]
    return float(np.sum((beta @ prob.D - prob.y[0]) ** 2)), float(beta @ beta)


def _global_lcurve(problems, reg):
    points = []
    for e1, e2 in reg.candidates():
        sq_err = sq_norm = 0.0
        for prob in problems:
            try:
                err, nrm = _row_stats(prob, e1, e2, reg)
            except RomFomError as exc:
                raise RowInferenceError(prob.row, exc) from exc
            sq_err += err
            sq_norm += nrm
        points.append(LCurvePoint(e1, e2, np.sqrt(sq_err), np.sqrt(sq_norm)))
    return points


def infer_sfom(g, X_F, Xhat_R, interface_set, structure, reg, dX_F,
               pooling=None, U=None, input_map=None, selection="global",
               subsample=20, seed=0, workers=1):
    """Infer one stencil per DOF of ``g``.

    Parameters
    ----------
    g : AdjacencyGraph
        Graph of the full-order subdomain (local indexing).
    X_F, dX_F : (n_F, n_T) ndarray
        Snapshots and time derivatives.
    Xhat_R : (r, n_T) ndarray or None
        Reduced coordinates feeding the interface rows.
    interface_set : sequence of int
        Rows that receive coupling terms.
    structure : set of str
    reg : RegConfig
        Fixed weights, or a grid for L-curve selection.
    pooling : PoolingPolicy, optional
    selection : {"global", "per_row"}
        With a grid, either one pair chosen on ``subsample`` random rows and
        used everywhere, or an L-curve per row.
    workers : int
        Threads used for the final per-row solves.

    Returns
    -------
    SparseQuadModel
        ``fit_info`` records the chosen weights and the L-curve points.
    """
    structure = frozenset(structure)
    X_F = np.atleast_2d(np.asarray(X_F, dtype=np.float64))
    dX_F = np.atleast_2d(np.asarray(dX_F, dtype=np.float64))
    n_F, n_T = X_F.shape
    if g.n != n_F:
        raise ShapeError(f"graph has {g.n} DOFs, X_F has {n_F} rows")
    if dX_F.shape != X_F.shape:
        raise ShapeError(f"dX_F shape {dX_F.shape} differs from X_F shape {X_F.shape}")
    interface = np.zeros(n_F, dtype=bool)
    iface = np.asarray(interface_set if interface_set is not None else [], dtype=int)
    if iface.size and (iface.min() < 0 or iface.max() >= n_F):
        raise BoundsError(f"interface rows outside [0, {n_F})")
    interface[iface] = True
    if Xhat_R is not None:
        Xhat_R = np.atleast_2d(np.asarray(Xhat_R, dtype=np.float64))
    r = Xhat_R.shape[0] if (Xhat_R is not None and interface.any()) else 0
    if U is not None:
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    pooling = pooling or PoolingPolicy()

    by_geometry = {}
    for i in range(n_F):
        if not interface[i]:
            by_geometry.setdefault(g.geometry[i], []).append(i)

    def problem(i):
        pooled = () if interface[i] else pooling.choose(i, by_geometry[g.geometry[i]])
        try:
            return _prepare_row(i, X_F, Xhat_R, dX_F, g, structure, reg, pooled,
                                bool(interface[i]), U, input_map)
        except RomFomError as exc:
            raise RowInferenceError(i, exc) from exc

    info = {"selection": selection if reg.has_grid else "fixed",
            "pooling": {"size": pooling.size, "seed": pooling.seed, "shared": pooling.shared}}
    per_row_choice = None
    if not reg.has_grid:
        eta1, eta2 = reg.eta1, reg.eta2
        info["lcurve"] = []
    elif selection == "global":
        rng = np.random.default_rng(seed)
        picks = np.sort(rng.choice(n_F, size=min(subsample, n_F), replace=False))
        # Interface rows are few but structurally distinct; always include them.
        picks = np.union1d(picks, np.flatnonzero(interface))
        points = _global_lcurve([problem(i) for i in picks], reg)
        chosen = l_curve_select(points)
        eta1, eta2 = chosen.eta1, chosen.eta2
        info["lcurve"] = [p.to_dict() for p in points]
        info["subsample"] = picks.tolist()
    elif selection == "per_row":
        per_row_choice = {}
        eta1 = eta2 = None
    else:
        raise ValueError(f"unknown selection {selection!r}")
    info["eta1"], info["eta2"] = eta1, eta2

    def solve(i):
        prob = problem(i)
        try:
            if per_row_choice is None:
                return _solve_row(prob, eta1, eta2, reg)
            chosen = l_curve_select(_global_lcurve([prob], reg))
            per_row_choice[i] = (chosen.eta1, chosen.eta2)
            return _solve_row(prob, chosen.eta1, chosen.eta2, reg)
        except RomFomError as exc:
            raise RowInferenceError(i, exc) from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(solve, range(n_F)))
    else:
        rows = [solve(i) for i in range(n_F)]
    if per_row_choice is not None:
        info["per_row"] = {int(i): list(v) for i, v in sorted(per_row_choice.items())}
    k = U.shape[0] if (U is not None and "input" in structure) else 0
    return SparseQuadModel(g, rows, r, k, structure, info)


# Serialization ===============================================================
def save_sparse_model(M, directory):
    """JSON manifest plus one FMAT payload of concatenated row coefficients."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lengths = [row.beta.size for row in M.rows]
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(int)
    payload = np.concatenate([row.beta for row in M.rows]) if M.rows else np.zeros(0)
    save_matrix(directory / "coefficients.fmat", payload[None, :])
    manifest = {
        "format_version": 1,
        "n_F": M.n_F,
        "r": M.r,
        "k": M.k,
        "structure": sorted(M.structure),
        "graph": M.graph.to_dict(),
        "interface": M.interface_rows.tolist(),
        "offsets": offsets.tolist(),
        "rows": [
            {"L": row.L.tolist(),
             "diag_index": row.spec.diag_index,
             "blocks": [[b.kind, b.size, b.reg_scale] for b in row.spec.blocks]}
            for row in M.rows
        ],
        "seed": M.fit_info.get("pooling", {}).get("seed"),
        "fit_info": M.fit_info,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_jsonable))


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def load_sparse_model(directory):
    from .regression import FeatureBlock

    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    payload = load_matrix(directory / "coefficients.fmat").ravel()
    g = AdjacencyGraph.from_dict(manifest["graph"])
    iface = set(manifest["interface"])
    off = manifest["offsets"]
    rows = []
    for i, meta in enumerate(manifest["rows"]):
        spec = FeatureBlockSpec(tuple(FeatureBlock(*b) for b in meta["blocks"]),
                                meta["diag_index"])
        rows.append(SparseRow(i, g.neighbors[i], np.asarray(meta["L"], dtype=int),
                              i in iface, spec, payload[off[i]:off[i + 1]].copy()))
    return SparseQuadModel(g, rows, manifest["r"], manifest["k"], manifest["structure"],
                           manifest.get("fit_info", {}))
