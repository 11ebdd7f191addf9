"""Operator Inference for quadratic reduced models, optionally coupled.

A reduced model has the form

    dxhat/dt = A xhat + Hc q(xhat) + B u + c

where ``q`` lists the unique products ``xhat_i xhat_j`` (i <= j). The coupled
variant adds interface inputs ``x_I`` taken from a neighbouring full-order
subdomain:

    ... + A_RI x_I + H_RII q(x_I) + H_RRI (xhat kron x_I)
"""

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import load_matrix, save_matrix
from .errors import ShapeError
from .regression import (
    FeatureBlockSpec,
    bilinear_features,
    l_curve_select,
    lcurve_points,
    quadratic_unique_features,
    quadratic_unique_vector,
    solve_gershgorin_ls,
)

__all__ = [
    "STRUCTURE_TERMS",
    "QuadModel",
    "CoupledReducedModel",
    "compress_H",
    "expand_Hc",
    "infer_opinf",
    "infer_opinf_coupled",
    "evaluate_reduced_rhs",
    "save_reduced_model",
    "load_reduced_model",
]

STRUCTURE_TERMS = frozenset({"linear", "quadratic", "input", "constant"})


def _structure(structure):
    s = frozenset(structure)
    unknown = s - STRUCTURE_TERMS
    if unknown:
        raise ValueError(f"unknown structure terms {sorted(unknown)}")
    return s


def compress_H(H):
    """Compressed quadratic operator from a full ``p x m^2`` one.

    The coefficient of ``x_i x_j`` (i < j) is the sum of the two Kronecker
    positions, so ``compress_H(H) @ q(x) == H @ kron(x, x)``.
    """
    H = np.atleast_2d(H)
    m = int(round(np.sqrt(H.shape[1])))
    if m * m != H.shape[1]:
        raise ShapeError(f"H has {H.shape[1]} columns, not a perfect square")
    H3 = H.reshape(H.shape[0], m, m)
    i, j = np.triu_indices(m)
    return np.where(i == j, H3[:, i, j], H3[:, i, j] + H3[:, j, i])


def expand_Hc(Hc):
    """Symmetric full ``p x m^2`` operator with ``compress_H(expand_Hc(Hc)) == Hc``."""
    Hc = np.atleast_2d(Hc)
    s = Hc.shape[1]
    m = int(round((np.sqrt(8 * s + 1) - 1) / 2))
    if m * (m + 1) // 2 != s:
        raise ShapeError(f"Hc has {s} columns, not a triangular number")
    i, j = np.triu_indices(m)
    H3 = np.zeros((Hc.shape[0], m, m))
    half = np.where(i == j, 1.0, 0.5)
    H3[:, i, j] += half * Hc
    H3[:, j, i] += np.where(i == j, 0.0, 0.5) * Hc
    return H3.reshape(Hc.shape[0], m * m)


def _as_rows(a, p):
    if a is None:
        return np.zeros((p, 0))
    a = np.asarray(a, dtype=np.float64)
    return np.zeros((p, 0)) if a.size == 0 else a.reshape(p, -1)


@dataclass(eq=False)
class QuadModel:
    """Operators of ``dx/dt = A x + Hc q(x) + B u + c`` (absent terms are zero)."""

    A: np.ndarray
    Hc: np.ndarray
    B: np.ndarray
    c: np.ndarray
    structure: frozenset = STRUCTURE_TERMS
    fit_info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        p = self.A.shape[0]
        if self.A.shape != (p, p):
            raise ShapeError(f"A must be square, got {self.A.shape}")
        self.Hc = _as_rows(self.Hc, p)
        if self.Hc.shape[1] not in (0, p * (p + 1) // 2):
            raise ShapeError(f"Hc has {self.Hc.shape[1]} columns for order {p}")
        if self.Hc.shape[1] == 0:
            self.Hc = np.zeros((p, p * (p + 1) // 2))
        self.B = _as_rows(self.B, p)
        self.c = np.asarray(self.c, dtype=np.float64).reshape(p)
        self.structure = _structure(self.structure)

    @property
    def order(self):
        return self.A.shape[0]

    @property
    def input_dim(self):
        return self.B.shape[1]

    @classmethod
    def zeros(cls, p, k=0, structure=STRUCTURE_TERMS):
        return cls(np.zeros((p, p)), np.zeros((p, p * (p + 1) // 2)),
                   np.zeros((p, k)), np.zeros(p), structure)

    def rhs(self, x, u=None):
        """Right-hand side at state ``x`` (vector or one state per column)."""
        x = np.asarray(x, dtype=np.float64)
        out = self.A @ x + self.c.reshape((-1,) + (1,) * (x.ndim - 1))
        if "quadratic" in self.structure:
            out = out + self.Hc @ (quadratic_unique_features(x) if x.ndim == 2
                                   else quadratic_unique_vector(x))
        if self.input_dim:
            if u is None:
                raise ShapeError(f"model expects {self.input_dim} inputs")
            out = out + self.B @ np.asarray(u, dtype=np.float64)
        return out


@dataclass(eq=False)
class CoupledReducedModel:
    """Reduced model driven by interface values of a full-order subdomain."""

    core: QuadModel
    A_RI: np.ndarray
    H_RII: np.ndarray
    H_RRI: np.ndarray
    interface_ids: np.ndarray

    def __post_init__(self):
        r = self.core.order
        self.interface_ids = np.asarray(self.interface_ids, dtype=int).ravel()
        n_I = self.interface_ids.size
        if np.unique(self.interface_ids).size != n_I:
            raise ValueError("interface_ids must be unique")
        self.A_RI = np.asarray(self.A_RI, dtype=np.float64).reshape(r, n_I)
        self.H_RII = np.asarray(self.H_RII, dtype=np.float64).reshape(r, n_I * (n_I + 1) // 2)
        self.H_RRI = np.asarray(self.H_RRI, dtype=np.float64).reshape(r, r * n_I)

    @property
    def r(self):
        return self.core.order

    @property
    def n_I(self):
        return self.interface_ids.size

    @property
    def fit_info(self):
        return self.core.fit_info


# Inference ===================================================================
def _reduced_layout(r, n_I, k, structure, reg):
    lin = "linear" in structure
    quad = "quadratic" in structure
    sizes = [
        ("linear", r if lin else 0),
        ("coupling_linear", n_I if lin else 0),
        ("quadratic_unique", r * (r + 1) // 2 if quad else 0),
        ("coupling_quadratic", n_I * (n_I + 1) // 2 if quad else 0),
        ("coupling_bilinear", r * n_I if quad else 0),
        ("input", k if "input" in structure else 0),
        ("constant", 1 if "constant" in structure else 0),
    ]
    diag = np.arange(r) if lin else None
    return FeatureBlockSpec.from_sizes(sizes, reg, diag_index=diag)


def _reduced_data(Xhat, X_I, U, structure):
    blocks = []
    if "linear" in structure:
        blocks += [Xhat, X_I]
    if "quadratic" in structure:
        blocks += [quadratic_unique_features(Xhat), quadratic_unique_features(X_I),
                   bilinear_features(Xhat, X_I)]
    if "input" in structure:
        blocks.append(U)
    if "constant" in structure:
        blocks.append(np.ones((1, Xhat.shape[1])))
    return np.vstack([b for b in blocks if b.shape[0] > 0])


def _solve_with_selection(D, Y, reg, spec):
    """Fixed weights, or the L-curve choice over the grid of ``reg``."""
    if not reg.has_grid:
        beta = solve_gershgorin_ls(D, Y, reg, spec)
        info = {"eta1": float(reg.eta1), "eta2": float(reg.eta2), "lcurve": []}
        return beta, info
    results = lcurve_points(D, Y, reg, spec)
    points = [p for p, _ in results]
    chosen = l_curve_select(points)
    beta = results[points.index(chosen)][1]
    info = {"eta1": chosen.eta1, "eta2": chosen.eta2,
            "lcurve": [p.to_dict() for p in points]}
    return beta, info


def infer_opinf_coupled(Xhat_R, X_I, U_R, dXhat_R, structure, reg, interface_ids=None):
    """Infer a reduced model with interface coupling inputs.

    Parameters
    ----------
    Xhat_R : (r, n_T) ndarray
        Projected snapshots of the reduced subdomain.
    X_I : (n_I, n_T) ndarray
        Full-order snapshots of the interface DOFs (may have zero rows).
    U_R : (k, n_T) ndarray or None
        Inputs acting on the reduced subdomain.
    dXhat_R : (r, n_T) ndarray
        Time derivatives of ``Xhat_R``.
    structure : set of str
        Subset of {"linear", "quadratic", "input", "constant"}.
    reg : RegConfig
        Weights or search grid. The Gershgorin term acts on ``A_RR[i, i]``
        for each reduced row ``i``.
    interface_ids : sequence of int, optional
        Full-order indices of the rows of ``X_I``.

    Returns
    -------
    CoupledReducedModel
    """
    structure = _structure(structure)
    Xhat_R = np.atleast_2d(np.asarray(Xhat_R, dtype=np.float64))
    r, n_T = Xhat_R.shape
    dXhat_R = np.atleast_2d(np.asarray(dXhat_R, dtype=np.float64))
    if dXhat_R.shape != Xhat_R.shape:
        raise ShapeError(f"dXhat shape {dXhat_R.shape} differs from Xhat shape {Xhat_R.shape}")
    X_I = np.empty((0, n_T)) if X_I is None else np.atleast_2d(np.asarray(X_I, dtype=np.float64))
    if X_I.size == 0:
        X_I = np.empty((0, n_T))
    if X_I.shape[1] != n_T:
        raise ShapeError(f"X_I has {X_I.shape[1]} columns, expected {n_T}")
    n_I = X_I.shape[0]
    if interface_ids is None:
        interface_ids = np.arange(n_I)
    interface_ids = np.asarray(interface_ids, dtype=int).ravel()
    if interface_ids.size != n_I:
        raise ShapeError(f"{interface_ids.size} interface ids for {n_I} interface rows")
    U_R = np.empty((0, n_T)) if U_R is None else np.atleast_2d(np.asarray(U_R, dtype=np.float64))
    if U_R.size == 0:
        U_R = np.empty((0, n_T))
    if U_R.shape[1] != n_T:
        raise ShapeError(f"U_R has {U_R.shape[1]} columns, expected {n_T}")
    k = U_R.shape[0] if "input" in structure else 0

    spec = _reduced_layout(r, n_I, k, structure, reg)
    D = _reduced_data(Xhat_R, X_I, U_R, structure)
    if n_T < spec.size:
        warnings.warn(
            f"underdetermined OpInf problem: {n_T} snapshots for {spec.size} unknowns",
            stacklevel=2,
        )
    beta, info = _solve_with_selection(D, dXhat_R, reg, spec)
    info["unknowns"] = spec.size
    info["blocks"] = [[b.kind, b.size, b.reg_scale] for b in spec.blocks]

    parts = spec.split(beta)
    empty = np.zeros((r, 0))
    core = QuadModel(
        parts.get("linear", np.zeros((r, r))),
        parts.get("quadratic_unique", empty),
        parts.get("input", np.zeros((r, k))),
        parts.get("constant", np.zeros((r, 1))).ravel(),
        structure,
        info,
    )
    return CoupledReducedModel(
        core,
        parts.get("coupling_linear", np.zeros((r, n_I))),
        parts.get("coupling_quadratic", np.zeros((r, n_I * (n_I + 1) // 2))),
        parts.get("coupling_bilinear", np.zeros((r, r * n_I))),
        interface_ids,
    )


def infer_opinf(Xhat, U, dXhat, structure, reg):
    """Infer ``A, Hc, B, c`` of an uncoupled reduced model by least squares.

    Equivalent to :func:`infer_opinf_coupled` with an empty interface.
    """
    return infer_opinf_coupled(Xhat, None, U, dXhat, structure, reg).core


def evaluate_reduced_rhs(M, xhat, x_I=None, u=None):
    """Time derivative of the reduced coordinates of a coupled model.

    Accepts single states (vectors) or one state per column.
    """
    xhat = np.asarray(xhat, dtype=np.float64)
    if xhat.shape[0] != M.r:
        raise ShapeError(f"xhat has {xhat.shape[0]} entries, model order is {M.r}")
    out = M.core.rhs(xhat, u)
    if M.n_I == 0:
        return out
    x_I = np.asarray(x_I, dtype=np.float64)
    if x_I.shape[0] != M.n_I:
        raise ShapeError(f"x_I has {x_I.shape[0]} entries, expected {M.n_I}")
    out = out + M.A_RI @ x_I
    if "quadratic" in M.core.structure:
        if xhat.ndim == 1:
            out = out + M.H_RII @ quadratic_unique_vector(x_I) \
                + M.H_RRI @ np.outer(xhat, x_I).ravel()
        else:
            out = out + M.H_RII @ quadratic_unique_features(x_I) \
                + M.H_RRI @ bilinear_features(xhat, x_I)
    return out


# Serialization ===============================================================
def save_reduced_model(M, directory):
    """Write a (coupled) reduced model as FMAT operator files plus manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(M, QuadModel):
        M = CoupledReducedModel(M, np.zeros((M.order, 0)), np.zeros((M.order, 0)),
                                np.zeros((M.order, 0)), [])
    core = M.core
    for name, arr in [("A", core.A), ("Hc", core.Hc), ("B", core.B), ("c", core.c[:, None]),
                      ("A_RI", M.A_RI), ("H_RII", M.H_RII), ("H_RRI", M.H_RRI)]:
        save_matrix(directory / f"{name}.fmat", arr)
    manifest = {
        "format_version": 1,
        "order": core.order,
        "input_dim": core.input_dim,
        "structure": sorted(core.structure),
        "blocks": core.fit_info.get("blocks", []),
        "interface_ids": M.interface_ids.tolist(),
        "fit_info": core.fit_info,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))


def load_reduced_model(directory):
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())

    def mat(name):
        return load_matrix(directory / f"{name}.fmat")

    core = QuadModel(mat("A"), mat("Hc"), mat("B"), mat("c").ravel(),
                     manifest["structure"], manifest.get("fit_info", {}))
    return CoupledReducedModel(core, mat("A_RI"), mat("H_RII"), mat("H_RRI"),
                               manifest["interface_ids"])
