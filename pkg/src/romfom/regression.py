"""Polynomial feature blocks and regularized least-squares solvers.

The central routine is :func:`solve_gershgorin_ls`, which solves

    (D D^T + eta1 S) beta = D y^T - eta2 e_m

for every target row ``y`` of ``Y``. ``S`` is a diagonal scaling built from
per-block factors and ``e_m`` selects the self-coefficient of the linear
operator row being inferred. Pushing that coefficient towards negative values
moves the corresponding Gershgorin disk center into the left half plane.
"""

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as la
from scipy.linalg import lapack

from .errors import ConditioningError, ShapeError

__all__ = [
    "BLOCK_KINDS",
    "FeatureBlock",
    "FeatureBlockSpec",
    "RegConfig",
    "LCurvePoint",
    "quadratic_unique_features",
    "quadratic_unique_vector",
    "bilinear_features",
    "solve_gershgorin_ls",
    "lcurve_points",
    "l_curve_select",
    "logspace_grid",
]

BLOCK_KINDS = (
    "linear",
    "quadratic_unique",
    "input",
    "constant",
    "coupling_linear",
    "coupling_quadratic",
    "coupling_bilinear",
)

# Scale-lookup fallbacks: a "quadratic" factor applies to every second-order
# block unless that block kind has its own entry.
_FAMILY = {
    "quadratic_unique": "quadratic",
    "coupling_quadratic": "quadratic",
    "coupling_bilinear": "quadratic",
    "coupling_linear": "linear",
}


# Feature lifts ===============================================================
def quadratic_unique_features(Z):
    """Unique pairwise products ``Z_i * Z_j`` (i <= j) of the rows of ``Z``.

    Rows are ordered lexicographically in (i, j): for two rows ``[a, b]``
    the output rows are ``[a*a, a*b, b*b]``.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        return quadratic_unique_vector(Z)
    m = Z.shape[0]
    if m == 0:
        return np.empty((0, Z.shape[1]))
    i, j = np.triu_indices(m)
    return Z[i] * Z[j]


def quadratic_unique_vector(z):
    z = np.asarray(z, dtype=np.float64)
    i, j = np.triu_indices(z.shape[-1])
    return z[..., i] * z[..., j]


def bilinear_features(Z1, Z2):
    """All products ``Z1_i * Z2_j``, row index ``i * m2 + j``."""
    Z1 = np.asarray(Z1, dtype=np.float64)
    Z2 = np.asarray(Z2, dtype=np.float64)
    if Z1.ndim == 1 and Z2.ndim == 1:
        return np.outer(Z1, Z2).ravel()
    if Z1.shape[1] != Z2.shape[1]:
        raise ShapeError(f"column counts differ: {Z1.shape[1]} vs {Z2.shape[1]}")
    return (Z1[:, None, :] * Z2[None, :, :]).reshape(-1, Z1.shape[1])


# Problem description =========================================================
@dataclass(frozen=True)
class FeatureBlock:
    kind: str
    size: int
    reg_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.size < 0:
            raise ValueError("block sizes must be nonnegative")
        if not self.reg_scale > 0:
            raise ValueError("reg_scale must be positive")


@dataclass(frozen=True)
class FeatureBlockSpec:
    """Ordered layout of the unknown vector.

    ``diag_index`` is the position of the self-coefficient inside the
    linear block. It may be a single int (shared by every target row),
    a sequence with one entry per target row, or None.
    """

    blocks: tuple
    diag_index: object = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if self.diag_index is None:
            return
        lin = self.block_slice("linear")
        idx = np.atleast_1d(np.asarray(self.diag_index))
        if lin is None or np.any(idx < lin.start) or np.any(idx >= lin.stop):
            raise ValueError(f"diag_index {self.diag_index} outside the linear block")

    @property
    def size(self):
        return sum(b.size for b in self.blocks)

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum([b.size for b in self.blocks])]).astype(int)

    def block_slice(self, kind):
        off = 0
        for b in self.blocks:
            if b.kind == kind:
                return slice(off, off + b.size)
            off += b.size
        return None

    def scale_vector(self):
        """Diagonal of ``S``: each block's reg_scale repeated over its entries."""
        if not self.blocks:
            return np.empty(0)
        return np.repeat([b.reg_scale for b in self.blocks], [b.size for b in self.blocks])

    def split(self, beta):
        """Dictionary ``kind -> coefficients`` for a solution (rows x m)."""
        beta = np.asarray(beta)
        out = {}
        for b, lo, hi in zip(self.blocks, self.offsets[:-1], self.offsets[1:]):
            out[b.kind] = beta[..., lo:hi]
        return out

    @classmethod
    def from_sizes(cls, sizes, reg, diag_index=None):
        """Build from ``[(kind, size), ...]`` pulling scales from a RegConfig."""
        blocks = [FeatureBlock(k, s, reg.scale_for(k)) for k, s in sizes if s > 0]
        return cls(tuple(blocks), diag_index)


@dataclass(frozen=True)
class RegConfig:
    """Regularization weights and optional search grids.

    Parameters
    ----------
    eta1 : float
        Tikhonov weight used when no grid is given.
    eta2 : float
        Gershgorin (diagonal) weight used when no grid is given.
    eta1_grid : sequence of float
        Candidate Tikhonov weights for L-curve selection.
    eta2_ratios : sequence of float, optional
        Candidate eta2 values expressed as multiples of eta1.
    eta2_grid : sequence of float, optional
        Candidate eta2 values in absolute terms (mutually exclusive with
        ``eta2_ratios``).
    scales : mapping
        Per-block regularization factors keyed by block kind. A key
        ``"quadratic"`` covers every second-order block.
    """

    eta1: float = 0.0
    eta2: float = 0.0
    eta1_grid: Sequence[float] = ()
    eta2_ratios: Sequence[float] = None
    eta2_grid: Sequence[float] = None
    scales: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "eta1_grid", tuple(float(e) for e in self.eta1_grid))
        if self.eta2_ratios is not None:
            object.__setattr__(self, "eta2_ratios", tuple(float(e) for e in self.eta2_ratios))
        if self.eta2_grid is not None:
            object.__setattr__(self, "eta2_grid", tuple(float(e) for e in self.eta2_grid))
        object.__setattr__(self, "scales", dict(self.scales))
        if self.eta2_ratios is not None and self.eta2_grid is not None:
            raise ValueError("give eta2_ratios or eta2_grid, not both")
        values = [self.eta1, self.eta2, *self.eta1_grid, *(self.eta2_ratios or ()),
                  *(self.eta2_grid or ()), *self.scales.values()]
        if any(not np.isfinite(v) or v < 0 for v in values):
            raise ValueError("regularization weights must be finite and nonnegative")

    @property
    def has_grid(self):
        return len(self.eta1_grid) > 0

    def scale_for(self, kind):
        if kind in self.scales:
            return float(self.scales[kind])
        return float(self.scales.get(_FAMILY.get(kind, kind), 1.0))

    def candidates(self):
        """All (eta1, eta2) pairs to test; a single pair without a grid."""
        if not self.has_grid:
            return [(float(self.eta1), float(self.eta2))]
        out = []
        for e1 in self.eta1_grid:
            if self.eta2_grid is not None:
                out.extend((e1, e2) for e2 in self.eta2_grid)
            elif self.eta2_ratios is not None:
                out.extend((e1, rho * e1) for rho in self.eta2_ratios)
            else:
                out.append((e1, float(self.eta2)))
        return out

    def fixed(self, eta1, eta2):
        """Copy with the grid dropped and the weights pinned."""
        return RegConfig(eta1=eta1, eta2=eta2, scales=self.scales)

    def to_dict(self):
        return {
            "eta1": self.eta1,
            "eta2": self.eta2,
            "eta1_grid": list(self.eta1_grid),
            "eta2_ratios": None if self.eta2_ratios is None else list(self.eta2_ratios),
            "eta2_grid": None if self.eta2_grid is None else list(self.eta2_grid),
            "scales": dict(self.scales),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        grid = d.pop("eta1_grid", None)
        if isinstance(grid, Mapping):
            grid = logspace_grid(grid["min"], grid["max"], grid["num"])
        return cls(eta1_grid=grid or (), **d)


def logspace_grid(lo, hi, num):
    """``num`` logarithmically spaced values between ``lo`` and ``hi``."""
    lo, hi = sorted((float(lo), float(hi)))
    return tuple(np.logspace(np.log10(lo), np.log10(hi), int(num)))


# Solvers =====================================================================
def _diag_matrix(spec, m, q, eta2):
    """The ``eta2 * E`` term, one column per target row."""
    E = np.zeros((m, q))
    if spec is None or spec.diag_index is None or eta2 == 0:
        return E
    idx = np.asarray(spec.diag_index)
    if idx.ndim == 0:
        idx = np.full(q, int(idx))
    if idx.size != q:
        raise ShapeError(f"{idx.size} diag indices for {q} target rows")
    E[idx, np.arange(q)] = eta2
    return E


def _cholesky_solve(G, rhs):
    try:
        factor = la.cho_factor(G, lower=False, check_finite=False)
    except la.LinAlgError:
        raise ConditioningError(
            "regularized normal matrix is not positive definite",
            np.linalg.cond(G),
        ) from None
    # LAPACK estimate of the reciprocal 1-norm condition number.
    rcond, info = lapack.dpocon(factor[0], np.abs(G).sum(axis=0).max())
    if info != 0 or rcond < np.finfo(float).eps:
        raise ConditioningError(
            "regularized normal matrix is numerically singular",
            1.0 / rcond if rcond > 0 else np.inf,
        )
    return la.cho_solve(factor, rhs, check_finite=False)


def solve_gershgorin_ls(D, Y, reg, spec=None, eta1=None, eta2=None):
    """Gershgorin-regularized least squares for every row of ``Y``.

    Parameters
    ----------
    D : (m, n_T) ndarray
        Data (feature) matrix.
    Y : (q, n_T) ndarray
        Targets, one row per independent problem.
    reg : RegConfig
        Supplies ``eta1``/``eta2`` unless they are overridden by keyword.
    spec : FeatureBlockSpec, optional
        Block layout for the scaling ``S`` and the diagonal position.
        Without it every scale is one and no diagonal penalty is applied.

    Returns
    -------
    (q, m) ndarray
        One solution row per target row.

    Notes
    -----
    With ``eta1 == eta2 == 0`` the problem is solved as plain least
    squares through an orthogonal factorization of ``D^T`` rather than
    the normal equations, which would square the condition number.
    """
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    m, n_T = D.shape
    if Y.shape[1] != n_T:
        raise ShapeError(f"D has {n_T} columns but Y has {Y.shape[1]}")
    if spec is not None and spec.size != m:
        raise ShapeError(f"block layout describes {spec.size} unknowns, D has {m} rows")
    eta1 = reg.eta1 if eta1 is None else eta1
    eta2 = reg.eta2 if eta2 is None else eta2
    if eta1 < 0 or eta2 < 0:
        raise ValueError("regularization weights must be nonnegative")
    q = Y.shape[0]

    if eta1 == 0 and eta2 == 0:
        # Rank cutoff as in numpy.linalg.matrix_rank.
        cond = max(m, n_T) * np.finfo(np.float64).eps
        beta, _, rank, sv = la.lstsq(D.T, Y.T, cond=cond, lapack_driver="gelsd",
                                     check_finite=False)
        if rank < m:
            cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
            raise ConditioningError(f"data matrix has rank {rank} < {m} unknowns", cond**2)
        return beta.T

    scale = spec.scale_vector() if spec is not None else np.ones(m)
    G = D @ D.T
    G[np.diag_indices_from(G)] += eta1 * scale
    rhs = D @ Y.T - _diag_matrix(spec, m, q, eta2)
    return _cholesky_solve(G, rhs).T


# L-curve =====================================================================
@dataclass(frozen=True)
class LCurvePoint:
    eta1: float
    eta2: float
    fit_error: float
    solution_norm: float

    def to_dict(self):
        return {"eta1": self.eta1, "eta2": self.eta2,
                "fit_error": self.fit_error, "solution_norm": self.solution_norm}


def lcurve_points(D, Y, reg, spec=None):
    """Solve for every candidate pair of ``reg``.

    Returns a list of ``(LCurvePoint, solution)`` tuples where the fit
    error is the Frobenius norm of the residual and the solution norm is
    the Frobenius norm of the unknowns.
    """
    out = []
    for e1, e2 in reg.candidates():
        beta = solve_gershgorin_ls(D, Y, reg, spec, eta1=e1, eta2=e2)
        err = float(np.linalg.norm(beta @ D - Y))
        out.append((LCurvePoint(e1, e2, err, float(np.linalg.norm(beta))), beta))
    return out


def _get(c, name):
    return c[name] if isinstance(c, Mapping) else getattr(c, name)


def l_curve_select(candidates):
    """Pick the candidate whose normalized (error, norm) pair is nearest 0.

    Both axes are divided by their maximum over the candidates. Ties go to
    the larger ``eta1`` (stronger regularization), then the larger ``eta2``.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no L-curve candidates")
    err = np.array([_get(c, "fit_error") for c in candidates], dtype=float)
    nrm = np.array([_get(c, "solution_norm") for c in candidates], dtype=float)
    if not (np.all(np.isfinite(err)) and np.all(np.isfinite(nrm))):
        raise ValueError("L-curve errors and norms must be finite")
    if np.any(err < 0) or np.any(nrm < 0):
        raise ValueError("L-curve errors and norms must be nonnegative")
    err_n = err / err.max() if err.max() > 0 else err
    nrm_n = nrm / nrm.max() if nrm.max() > 0 else nrm
    dist = np.hypot(err_n, nrm_n)
    best = dist.min()
    tied = [i for i in range(len(candidates)) if dist[i] <= best * (1 + 1e-12)]
    pick = max(tied, key=lambda i: (_get(candidates[i], "eta1"), _get(candidates[i], "eta2")))
    return candidates[pick]
