"""Truncated POD bases and singular-value decay indicators."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import DegenerateDataError, RankError, ShapeError

__all__ = ["ReducedBasis", "GapIndicator", "compute_basis", "project", "gap_indicator"]


@dataclass(frozen=True, eq=False)
class ReducedBasis:
    """Leading left singular vectors ``V`` (n x r) of a snapshot matrix.

    ``sigma`` keeps every singular value of the data so that the retained
    energy of any truncation can be queried after the fact.
    """

    V: np.ndarray
    sigma: np.ndarray

    @property
    def r(self):
        return self.V.shape[1]

    @property
    def n(self):
        return self.V.shape[0]

    @property
    def energy(self):
        """Fraction of squared singular values captured by the first r modes."""
        s2 = self.sigma**2
        return float(s2[: self.r].sum() / s2.sum())

    def reconstruct(self, Xhat):
        return self.V @ Xhat


def _svd(X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.size == 0:
        raise DegenerateDataError("empty snapshot matrix")
    if not np.any(X):
        raise DegenerateDataError("snapshot matrix is identically zero")
    U, s, _ = la.svd(X, full_matrices=False, lapack_driver="gesdd")
    return U, s


def _rank_for_energy(sigma, fraction):
    cumulative = np.cumsum(sigma**2) / np.sum(sigma**2)
    # Relative slack so fraction=1.0 is reachable despite rounding in cumsum.
    return int(np.searchsorted(cumulative, fraction - 1e-14) + 1)


def compute_basis(X, r=None, energy=None):
    """POD basis of the (uncentered) snapshot matrix ``X``.

    Exactly one of ``r`` (fixed rank) or ``energy`` (minimal rank whose
    cumulative squared singular values reach the given fraction) must be set.

    Parameters
    ----------
    X : (n, n_T) ndarray
        Snapshot matrix.
    r : int, optional
        Number of basis vectors.
    energy : float in (0, 1], optional
        Target retained energy fraction.

    Returns
    -------
    ReducedBasis
    """
    if (r is None) == (energy is None):
        raise ValueError("specify exactly one of r or energy")
    U, sigma = _svd(X)
    if energy is not None:
        if not 0 < energy <= 1:
            raise ValueError(f"energy fraction must lie in (0, 1], got {energy}")
        r = _rank_for_energy(sigma, energy)
    r = int(r)
    if r < 1:
        raise ValueError(f"r must be positive, got {r}")
    if r > sigma.size:
        raise RankError(f"r={r} exceeds min(n, n_T)={sigma.size}")
    return ReducedBasis(np.ascontiguousarray(U[:, :r]), sigma)


def project(X, basis):
    """Reduced coordinates ``V^T X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != basis.n:
        raise ShapeError(f"X has {X.shape[0]} rows, basis has {basis.n}")
    return basis.V.T @ X


@dataclass(frozen=True)
class GapIndicator:
    """Normalized r-th singular values of two subdomain snapshot matrices.

    ``ratio > 1`` means the second (full-order) subdomain decays more
    slowly. ``saturated`` flags a zero reduced-side decay (ratio = inf).
    """

    decay_R: float
    decay_F: float
    ratio: float
    saturated: bool = False


def gap_indicator(X_R, X_F, r):
    """Compare the decay ``sigma_r / sigma_1`` of two snapshot matrices.

    Raises
    ------
    RankError
        If ``r`` exceeds the number of singular values of either matrix.
    """
    decays = []
    for name, X in (("X_R", X_R), ("X_F", X_F)):
        s = la.svdvals(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        if r < 1 or r > s.size:
            raise RankError(f"r={r} exceeds the {s.size} singular values of {name}")
        if s[0] == 0:
            raise DegenerateDataError(f"{name} is identically zero")
        decays.append(float(s[r - 1] / s[0]))
    decay_R, decay_F = decays
    # Singular values below roundoff of sigma_1 count as zero.
    tol = 1e-13
    dR = 0.0 if decay_R < tol else decay_R
    dF = 0.0 if decay_F < tol else decay_F
    if dR == 0.0:
        return GapIndicator(dR, dF, np.inf if dF > 0 else 1.0, saturated=True)
    return GapIndicator(dR, dF, dF / dR)
