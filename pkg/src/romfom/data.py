"""Snapshot containers, matrix file I/O, and time differentiation."""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BoundsError, InsufficientDataError, ParseError, ShapeError

__all__ = [
    "SnapshotSet",
    "TimeGrid",
    "load_matrix",
    "save_matrix",
    "estimate_time_derivative",
    "split_train_test",
]

FMAT_MAGIC = b"FMAT"
_HEADER = struct.Struct("<4sQQ")


# File formats ================================================================
def save_matrix(path, A, format=None):
    """Write a real matrix to ``path`` as FMAT (binary) or CSV.

    The format is taken from the file suffix unless given explicitly.
    One-dimensional arrays are stored as a single column.
    """
    path = Path(path)
    fmt = format or _format_from_suffix(path)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ShapeError(f"expected a matrix, got array with ndim={A.ndim}")
    if fmt == "fmat":
        with open(path, "wb") as f:
            f.write(_HEADER.pack(FMAT_MAGIC, A.shape[0], A.shape[1]))
            f.write(A.astype("<f8").tobytes(order="F"))
    elif fmt == "csv":
        np.savetxt(path, A, delimiter=",", fmt="%.17g")
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def load_matrix(path, format=None):
    """Read a matrix written by :func:`save_matrix` (or any headerless CSV).

    Raises
    ------
    ParseError
        Malformed FMAT header, truncated payload, or ragged CSV rows.
    """
    path = Path(path)
    fmt = format or _format_from_suffix(path)
    if fmt == "fmat":
        return _read_fmat(path.read_bytes(), path)
    if fmt == "csv":
        return _read_csv(path.read_text(), path)
    raise ValueError(f"unknown matrix format {fmt!r}")


def _format_from_suffix(path):
    suffix = path.suffix.lower().lstrip(".")
    if suffix in ("fmat", "csv"):
        return suffix
    raise ValueError(f"cannot infer matrix format from {path.name!r}; pass format=")


def _read_fmat(buf, path):
    if len(buf) < _HEADER.size:
        raise ParseError(f"{path}: file too short for FMAT header")
    magic, rows, cols = _HEADER.unpack_from(buf)
    if magic != FMAT_MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}, expected {FMAT_MAGIC!r}")
    payload = len(buf) - _HEADER.size
    # Guard the product before it overflows the size check below.
    if rows and cols > payload // 8 // rows + 1:
        raise ParseError(f"{path}: dimensions {rows}x{cols} exceed payload of {payload} bytes")
    if rows * cols * 8 != payload:
        raise ParseError(
            f"{path}: header declares {rows}x{cols} values but payload holds {payload} bytes"
        )
    data = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size, count=rows * cols)
    return data.reshape((rows, cols), order="F").astype(np.float64)


def _read_csv(text, path):
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(tok) for tok in line.split(",")])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(
                f"{path}:{lineno}: ragged row with {len(rows[-1])} entries, "
                f"expected {len(rows[0])}"
            )
    if not rows:
        return np.empty((0, 0))
    return np.array(rows, dtype=np.float64)


# Snapshot containers =========================================================
@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t0, t0 + dt, ..., t0 + (count - 1) dt``."""

    t0: float
    dt: float
    count: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.count < 2:
            raise ValueError(f"count must be at least 2, got {self.count}")

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.count)

    @property
    def t_end(self):
        return self.t0 + self.dt * (self.count - 1)

    @classmethod
    def from_horizon(cls, t0, dt, T):
        """Grid covering ``[t0, T]`` with step ``dt`` (endpoint included)."""
        count = int(round((T - t0) / dt)) + 1
        return cls(float(t0), float(dt), count)


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """State snapshots ``X`` (n x n_T), inputs ``U`` (k x n_T) and times.

    ``dXdt`` holds time-derivative data when available; see
    :meth:`with_derivative`.
    """

    X: np.ndarray
    times: np.ndarray
    U: np.ndarray = field(default=None)
    dXdt: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        times = np.asarray(self.times, dtype=np.float64).ravel()
        n_T = X.shape[1]
        if times.size != n_T:
            raise ShapeError(f"{times.size} times for {n_T} snapshot columns")
        if n_T > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        U = self.U
        if U is None:
            U = np.empty((0, n_T))
        U = np.asarray(U, dtype=np.float64)
        if U.ndim == 1:
            U = U[None, :]
        if U.shape[1] != n_T:
            raise ShapeError(f"U has {U.shape[1]} columns, expected {n_T}")
        dX = self.dXdt
        if dX is not None:
            dX = np.asarray(dX, dtype=np.float64)
            if dX.shape != X.shape:
                raise ShapeError(f"dXdt shape {dX.shape} differs from X shape {X.shape}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "dXdt", dX)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def n_T(self):
        return self.X.shape[1]

    @property
    def k(self):
        return self.U.shape[0]

    @property
    def is_uniform(self):
        if self.n_T < 3:
            return True
        steps = np.diff(self.times)
        mean = steps.mean()
        return bool(np.max(np.abs(steps - mean)) < 1e-12 * mean)

    def with_derivative(self):
        """Return a copy with ``dXdt`` filled in by finite differences."""
        if self.dXdt is not None:
            return self
        return SnapshotSet(self.X, self.times, self.U,
                           estimate_time_derivative(self.X, self.times))

    def columns(self, mask):
        """Sub-set of columns selected by a boolean mask or index array."""
        return SnapshotSet(
            self.X[:, mask],
            self.times[mask],
            self.U[:, mask],
            None if self.dXdt is None else self.dXdt[:, mask],
        )

    def rows(self, ids):
        """Restriction of the state to the DOFs ``ids`` (inputs unchanged)."""
        ids = np.asarray(ids, dtype=int)
        return SnapshotSet(
            self.X[ids],
            self.times,
            self.U,
            None if self.dXdt is None else self.dXdt[ids],
        )


# Operations ==================================================================
def estimate_time_derivative(X, times):
    """Second-order finite-difference estimate of dX/dt along columns.

    Central differences at interior columns and second-order one-sided
    differences at the first and last column. Non-uniform grids are
    handled through divided differences.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    times = np.asarray(times, dtype=np.float64).ravel()
    if X.shape[1] < 3:
        raise InsufficientDataError(
            f"need at least 3 snapshots to differentiate, got {X.shape[1]}"
        )
    if times.size != X.shape[1]:
        raise ShapeError(f"{times.size} times for {X.shape[1]} columns")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    return np.gradient(X, times, axis=1, edge_order=2)


def split_train_test(S, t_split):
    """Partition snapshots into ``times <= t_split`` and the remainder."""
    if not (S.times[0] < t_split < S.times[-1]):
        raise BoundsError(
            f"t_split={t_split} outside ({S.times[0]}, {S.times[-1]})"
        )
    train = S.times <= t_split
    return S.columns(train), S.columns(~train)
