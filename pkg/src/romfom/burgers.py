"""Reference data for the periodic 1D viscous Burgers equation.

The state ``w(z, t)`` on ``[0, L)`` obeys

    w_t + c w w_z = nu w_zz

so a positive hump travels towards ``z = L``. Space is discretized with
central differences (advection in skew-symmetric form, which conserves the
discrete mass exactly) and time with classical RK4.
"""

import json
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import SnapshotSet, save_matrix
from .errors import ConfigError
from .sfom import AdjacencyGraph
from .simulate import integrate

__all__ = ["BurgersConfig", "initial_condition", "burgers_rhs", "simulate_reference",
           "save_reference", "split_at"]


@dataclass(frozen=True)
class BurgersConfig:
    """Physical and numerical parameters.

    Snapshots are stored at every solver step ``t = dt, 2 dt, ..., T``;
    set ``include_initial`` to prepend the state at ``t = 0``.
    """

    c: float = 0.5
    nu: float = 1e-2
    L: float = 10.0
    dz: float = 2e-2
    dt: float = 2.5e-2
    T: float = 18.0
    gauss_center: float = None
    gauss_width: float = 1.2
    cos_amps: tuple = (0.1, 0.1)
    include_initial: bool = False

    def __post_init__(self):
        object.__setattr__(self, "cos_amps", tuple(self.cos_amps))
        ratio = self.L / self.dz
        if not (self.L > 0 and self.dz > 0) or abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError(f"dz={self.dz} does not divide L={self.L}")
        if not (self.dt > 0 and self.T > 0):
            raise ConfigError("dt and T must be positive")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ConfigError(f"dt={self.dt} does not divide T={self.T}")
        if self.nu < 0:
            raise ConfigError("viscosity must be nonnegative")
        if self.gauss_width <= 0:
            raise ConfigError("gauss_width must be positive")

    @property
    def n(self):
        return int(round(self.L / self.dz))

    @property
    def steps(self):
        return int(round(self.T / self.dt))

    @property
    def z(self):
        return self.dz * np.arange(self.n)

    @property
    def center(self):
        return self.L / 2 if self.gauss_center is None else self.gauss_center

    def graph(self):
        """Periodic 3-point adjacency of the grid."""
        return AdjacencyGraph.path(self.n, periodic=True)

    def to_dict(self):
        d = asdict(self)
        d["cos_amps"] = list(self.cos_amps)
        return d


def split_at(cfg, a, overlap=0):
    """Decompose the grid into a reduced part ``z < a`` and a full-order part.

    ``overlap`` full-order DOFs starting at ``a`` are shared with the
    reduced side.
    """
    from .couple import decompose

    j = int(np.ceil(a / cfg.dz - 1e-9))
    if not 0 < j < cfg.n:
        raise ConfigError(f"split point a={a} leaves an empty subdomain")
    return decompose(cfg.graph(), np.arange(j, cfg.n), np.arange(j, j + overlap))


def initial_condition(cfg, z=None):
    """Gaussian hump plus two periodic cosine disturbances."""
    z = cfg.z if z is None else np.asarray(z, dtype=np.float64)
    w = np.exp(-((z - cfg.center) ** 2) / cfg.gauss_width)
    for k, amp in enumerate(cfg.cos_amps, start=1):
        w = w + amp * np.cos(2 * np.pi * k * z / cfg.L)
    return w


def burgers_rhs(w, cfg):
    """Semi-discrete right-hand side with periodic wrap.

    ``w`` is a state vector or a matrix with one state per column.
    """
    wp = np.roll(w, -1, axis=0)
    wm = np.roll(w, 1, axis=0)
    # Skew-symmetric split: (1/3) [ (w^2)_z + w w_z ].
    adv = ((wp * wp - wm * wm) + w * (wp - wm)) / (6.0 * cfg.dz)
    diff = (wp - 2.0 * w + wm) / cfg.dz**2
    return -cfg.c * adv + cfg.nu * diff


def simulate_reference(cfg=None, w0=None):
    """Run the reference solver and return the snapshot set.

    ``dXdt`` holds the exact semi-discrete right-hand side at each stored
    state. A warning is issued when the advective CFL number exceeds one.
    """
    cfg = cfg or BurgersConfig()
    w0 = initial_condition(cfg) if w0 is None else np.asarray(w0, dtype=np.float64)
    cfl = cfg.dt * np.max(np.abs(w0)) * cfg.c / cfg.dz
    if cfl > 1:
        warnings.warn(f"advective CFL number {cfl:.2f} exceeds 1", stacklevel=2)
    times, W, diverged_at = integrate(lambda t, w: burgers_rhs(w, cfg), w0,
                                      0.0, cfg.dt, cfg.steps + 1)
    if diverged_at is not None:
        warnings.warn(f"reference solution diverged at t={diverged_at:.4g}", stacklevel=2)
    if not cfg.include_initial:
        times, W = times[1:], W[:, 1:]
    # States just before a divergence may overflow the right-hand side.
    with np.errstate(over="ignore", invalid="ignore"):
        dXdt = burgers_rhs(W, cfg)
    return SnapshotSet(W, times, dXdt=dXdt)


def save_reference(S, cfg, directory):
    """Write ``X.fmat``, ``times.csv`` and ``config.json`` to ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(directory / "X.fmat", S.X)
    save_matrix(directory / "times.csv", S.times[:, None])
    (directory / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
