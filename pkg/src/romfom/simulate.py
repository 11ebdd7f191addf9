"""Explicit RK4 time integration of reduced, sparse and coupled models.

A step whose stages or result are non-finite stops the run: the trajectory
is truncated at the last finite state and the failure time is recorded.
"""

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import TimeGrid, save_matrix
from .errors import DivergenceError, ShapeError

__all__ = ["Trajectory", "rk4_step", "integrate", "simulate_reduced", "simulate_sparse",
           "simulate_coupled", "save_trajectory"]


@dataclass(eq=False)
class Trajectory:
    """States at the output times.

    ``states`` has one column per entry of ``times``. ``reduced_states``
    holds the reduced coordinates when the model has any. ``diverged_at``
    is the time of the failed step, or None for a complete run.
    """

    times: np.ndarray
    states: np.ndarray
    reduced_states: np.ndarray = None
    diverged_at: float = None
    wall_time: float = 0.0

    @property
    def diverged(self):
        return self.diverged_at is not None


def rk4_step(rhs, x, t, dt):
    """One classical Runge-Kutta step of ``dx/dt = rhs(t, x)``.

    Raises
    ------
    DivergenceError
        If any stage evaluation or the new state is non-finite. ``stage``
        is 1-4 for the stages and 5 for the combined update.
    """
    k1 = rhs(t, x)
    k2 = rhs(t + dt / 2, x + (dt / 2) * k1)
    k3 = rhs(t + dt / 2, x + (dt / 2) * k2)
    k4 = rhs(t + dt, x + dt * k3)
    x_new = x + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    # Non-finite stages always poison x_new, so one check suffices on the
    # fast path; the failing stage is located only after a failure.
    if not np.isfinite(x_new.sum()):
        for stage, k in enumerate((k1, k2, k3, k4), start=1):
            if not np.all(np.isfinite(k)):
                raise DivergenceError(stage, t)
        raise DivergenceError(5, t)
    return x_new


def integrate(rhs, x0, t0, dt, count):
    """March ``count - 1`` RK4 steps from ``x0`` at ``t0``.

    Returns
    -------
    times : (m,) ndarray
    states : (len(x0), m) ndarray
        ``m == count`` unless the run diverged.
    diverged_at : float or None
    """
    x = np.array(x0, dtype=np.float64)
    times = t0 + dt * np.arange(count)
    out = np.empty((x.size, count))
    out[:, 0] = x
    diverged_at = None
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, count):
            try:
                x = rk4_step(rhs, x, times[j - 1], dt)
            except DivergenceError:
                diverged_at = float(times[j])
                times, out = times[:j], out[:, :j]
                break
            out[:, j] = x
    return times, out, diverged_at


def _grid(grid):
    if isinstance(grid, TimeGrid):
        return grid
    t0, dt, count = grid
    return TimeGrid(t0, dt, count)


def _input(u, k):
    if k == 0:
        return lambda t: None
    if u is None:
        raise ShapeError(f"model expects {k} inputs")
    if callable(u):
        return u
    const = np.asarray(u, dtype=np.float64).ravel()
    return lambda t: const


def simulate_reduced(M, x0, grid, u=None, basis=None):
    """Integrate an uncoupled reduced model.

    Parameters
    ----------
    M : QuadModel
    x0 : ndarray
        Reduced initial state, or a full state when ``basis`` is given.
    grid : TimeGrid or (t0, dt, count)
    u : callable or ndarray, optional
        Input as a function of time, or a constant input vector.
    basis : ReducedBasis, optional
        If given, ``x0`` is projected and ``states`` are reconstructed.
    """
    grid = _grid(grid)
    x0 = np.asarray(x0, dtype=np.float64)
    if basis is not None:
        x0 = basis.V.T @ x0
    if x0.shape != (M.order,):
        raise ShapeError(f"x0 has shape {x0.shape}, model order is {M.order}")
    uf = _input(u, M.input_dim)
    start = time.perf_counter()
    times, Xhat, div = integrate(lambda t, x: M.rhs(x, uf(t)), x0, grid.t0, grid.dt, grid.count)
    wall = time.perf_counter() - start
    states = basis.V @ Xhat if basis is not None else Xhat
    return Trajectory(times, states, Xhat, div, wall)


def simulate_sparse(M, x0, grid, u=None):
    """Integrate an uncoupled sparse full-order model."""
    from .couple import as_coupled

    grid = _grid(grid)
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (M.n_F,):
        raise ShapeError(f"x0 has shape {x0.shape}, expected ({M.n_F},)")
    rhs = as_coupled(M).joint_rhs(_input(u, M.k))
    start = time.perf_counter()
    times, X, div = integrate(rhs, x0, grid.t0, grid.dt, grid.count)
    return Trajectory(times, X, None, div, time.perf_counter() - start)


def simulate_coupled(M, x0, grid, u=None):
    """Integrate a coupled model from a full initial state.

    The joint state ``[xhat_R; x_F]`` is marched in time; the full state is
    reconstructed once at the end (reduced part lifted with the basis,
    overlap DOFs blended). ``wall_time`` covers the time loop only.
    """
    grid = _grid(grid)
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (M.n,):
        raise ShapeError(f"x0 has shape {x0.shape}, expected ({M.n},)")
    y0 = M.initial_state(x0)
    rhs = M.joint_rhs(_input(u, M.input_dim))
    start = time.perf_counter()
    times, Y, div = integrate(rhs, y0, grid.t0, grid.dt, grid.count)
    wall = time.perf_counter() - start
    Xhat = Y[: M.r]
    return Trajectory(times, M.reconstruct(Xhat, Y[M.r:]), Xhat, div, wall)


def save_trajectory(traj, directory):
    """Write ``states.fmat``, ``times.csv`` and ``status.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(directory / "states.fmat", traj.states)
    save_matrix(directory / "times.csv", np.asarray(traj.times)[:, None])
    if traj.reduced_states is not None:
        save_matrix(directory / "reduced_states.fmat", traj.reduced_states)
    status = {"diverged": traj.diverged, "diverged_at": traj.diverged_at,
              "steps": int(len(traj.times)), "wall_time": traj.wall_time}
    (directory / "status.json").write_text(json.dumps(status, indent=2))
