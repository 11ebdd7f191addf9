"""Spectra, Gershgorin disks, stability verdicts and error metrics."""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .data import save_matrix
from .errors import DegenerateDataError, ShapeError

__all__ = ["DiskSet", "gershgorin_disks", "eigenvalues", "stability_check", "relative_error",
           "projection_baseline", "save_disks", "save_spectrum", "DENSE_LIMIT"]

DENSE_LIMIT = 2000


@dataclass(frozen=True, eq=False)
class DiskSet:
    """Gershgorin disks (one per row) and the eigenvalues that were computed.

    ``sampled`` is True when only a subset of the spectrum is available.
    """

    centers: np.ndarray
    radii: np.ndarray
    eigenvalues: np.ndarray
    sampled: bool = False

    def contains(self, z, tol=1e-8):
        """Whether ``z`` lies in the union of the disks."""
        return bool(np.any(np.abs(z - self.centers) <= self.radii + tol * (1 + np.abs(z))))


def _square(A):
    if sp.issparse(A):
        A = A.tocsr()
    else:
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {A.shape}")
    return A


def eigenvalues(A, dense_limit=DENSE_LIMIT, n_sample=30):
    """Eigenvalues of ``A``; all of them up to ``dense_limit`` rows.

    Above the limit, ``n_sample`` eigenvalues of largest real part are
    computed with ARPACK (those decide stability).

    Returns
    -------
    eigs : ndarray of complex
    sampled : bool
    """
    A = _square(A)
    p = A.shape[0]
    if p <= dense_limit:
        dense = A.toarray() if sp.issparse(A) else A
        return la.eigvals(dense), False
    k = min(n_sample, p - 2)
    return spla.eigs(sp.csr_matrix(A), k=k, which="LR", return_eigenvectors=False), True


def gershgorin_disks(A, dense_limit=DENSE_LIMIT, n_sample=30):
    """Disk centers ``A_ii`` and radii ``sum_{j != i} |A_ij|`` plus eigenvalues.

    If the eigensolver fails, a warning is issued and the disks are still
    returned with an empty eigenvalue array.
    """
    A = _square(A)
    if sp.issparse(A):
        centers = A.diagonal()
        radii = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(centers)
    else:
        centers = np.diag(A).copy()
        radii = np.abs(A).sum(axis=1) - np.abs(centers)
    radii = np.maximum(radii, 0.0)
    try:
        eigs, sampled = eigenvalues(A, dense_limit, n_sample)
    except (la.LinAlgError, spla.ArpackError) as exc:
        warnings.warn(f"eigensolver failed: {exc}", stacklevel=2)
        eigs, sampled = np.empty(0, dtype=complex), True
    return DiskSet(centers, radii, eigs, sampled)


def stability_check(A, margin=0.0, dense_limit=DENSE_LIMIT):
    """``stable`` is True iff every eigenvalue satisfies ``Re(lambda) < -margin``.

    Returns
    -------
    dict
        ``{"stable": bool, "max_real_part": float}``
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    eigs, _ = eigenvalues(A, dense_limit)
    if eigs.size == 0:
        return {"stable": True, "max_real_part": -np.inf}
    mx = float(np.max(eigs.real))
    return {"stable": bool(mx < -margin), "max_real_part": mx}


def relative_error(prediction, reference, normalization="frobenius"):
    """Error of ``prediction`` relative to ``reference``.

    ``"frobenius"`` gives ``||P - R||_F / ||R||_F``. ``"per_step_mean_state"``
    gives, per column, ``mean|P - R| / mean|R|``.
    """
    P = np.asarray(prediction, dtype=np.float64)
    R = np.asarray(reference, dtype=np.float64)
    if P.shape != R.shape:
        raise ShapeError(f"prediction shape {P.shape} differs from reference shape {R.shape}")
    if normalization == "frobenius":
        nrm = np.linalg.norm(R)
        if nrm == 0:
            raise DegenerateDataError("reference has zero norm; relative error undefined")
        return float(np.linalg.norm(P - R) / nrm)
    if normalization == "per_step_mean_state":
        R2 = R.reshape(R.shape[0], -1)
        denom = np.mean(np.abs(R2), axis=0)
        if np.any(denom == 0):
            raise DegenerateDataError("a reference column is zero; relative error undefined")
        return np.mean(np.abs(P.reshape(R2.shape) - R2), axis=0) / denom
    raise ValueError(f"unknown normalization {normalization!r}")


def projection_baseline(X_test, basis):
    """Best relative error attainable inside ``span(V)``: ``||X - V V^T X|| / ||X||``."""
    X = np.asarray(X_test, dtype=np.float64)
    if X.shape[0] != basis.n:
        raise ShapeError(f"X_test has {X.shape[0]} rows, basis has {basis.n}")
    return relative_error(basis.V @ (basis.V.T @ X), X)


def save_disks(disks, path):
    """CSV with one ``center,radius`` row per disk."""
    save_matrix(path, np.column_stack([disks.centers, disks.radii]), format="csv")


def save_spectrum(eigs, path):
    """CSV with one ``re,im`` row per eigenvalue."""
    eigs = np.asarray(eigs)
    save_matrix(path, np.column_stack([eigs.real, eigs.imag]).reshape(-1, 2), format="csv")
