"""Configuration schema and end-to-end experiment drivers.

A pipeline config is a JSON document (``version`` 1). Every section is
optional; missing keys fall back to :data:`DEFAULT_CONFIG`, the periodic
Burgers experiment. Sections:

``data``
    ``{"burgers": {...}}`` to generate reference data, or
    ``{"snapshots": path, "times": path, "inputs": path?, "graph": ...}``
    where ``graph`` is ``{"path": {"n": int, "periodic": bool}}``,
    ``{"grid2d": {"nx": int, "ny": int}}`` or ``{"file": path}``.
``train``
    ``{"t_split": float, "derivatives": "finite_difference" | "provided"}``
``decomposition``
    ``{"mode": "coupled" | "global_opinf" | "global_sfom",``
    ``"a": float, "overlap": int}`` (1D split coordinate) or
    ``{"fom_ids": [...], "overlap_ids": [...]}``.
``basis``
    ``{"r": int}`` or ``{"energy": float}``.
``structure``
    List of terms.
``regularization``
    ``{"rom": RegConfig dict, "fom": RegConfig dict}``.
``sfom``
    ``{"pooling": int, "shared_pooling": bool, "selection": "global" | "per_row",``
    ``"subsample": int}``.
``simulation``
    ``{"timing_runs": int}``.
"""

import copy
import gc
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .burgers import BurgersConfig, simulate_reference
from .couple import MODES, decompose, infer_coupled
from .data import SnapshotSet, load_matrix, split_train_test
from .diagnostics import relative_error, stability_check
from .errors import ConfigError, RomFomError
from .pod import gap_indicator
from .regression import RegConfig
from .sfom import AdjacencyGraph, PoolingPolicy
from .simulate import integrate, simulate_coupled

__all__ = ["CONFIG_VERSION", "DEFAULT_CONFIG", "load_config", "merge_config", "load_data",
           "build_decomposition", "train", "evaluate", "model_report", "interface_grid",
           "sweep_interface"]

CONFIG_VERSION = 1

DEFAULT_CONFIG = {
    "version": CONFIG_VERSION,
    "data": {"burgers": {}},
    "train": {"t_split": 9.0, "derivatives": "finite_difference"},
    "decomposition": {"mode": "coupled", "a": 5.0, "overlap": 0},
    "basis": {"r": 10},
    "structure": ["linear", "quadratic"],
    "regularization": {
        "rom": {"eta1_grid": {"min": 1e-3, "max": 1.0, "num": 20}, "eta2_ratios": [0.05],
                "scales": {"quadratic": 200.0}},
        "fom": {"eta1_grid": {"min": 1e-8, "max": 1e-3, "num": 20}, "eta2_ratios": [50.0],
                "scales": {"quadratic": 10.0}},
    },
    "sfom": {"pooling": 5, "shared_pooling": True, "selection": "global", "subsample": 20},
    "simulation": {"timing_runs": 5},
}

_SECTIONS = set(DEFAULT_CONFIG)


def merge_config(overrides=None):
    """Defaults updated section by section with ``overrides``."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    overrides = overrides or {}
    unknown = set(overrides) - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    version = overrides.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    for key, value in overrides.items():
        if key == "data" and value:
            # Data sources are alternatives; replace rather than merge.
            cfg[key] = copy.deepcopy(value)
        elif key == "decomposition" and ("fom_ids" in value):
            cfg[key] = {"mode": value.get("mode", "coupled"), **copy.deepcopy(value)}
        elif key == "basis" and value:
            cfg[key] = copy.deepcopy(value)
        elif isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(copy.deepcopy(value))
        else:
            cfg[key] = copy.deepcopy(value)
    _validate(cfg)
    return cfg


def _validate(cfg):
    dec = cfg["decomposition"]
    if dec.get("mode", "coupled") not in MODES:
        raise ConfigError(f"decomposition.mode must be one of {MODES}")
    basis = cfg["basis"]
    if ("r" in basis) == ("energy" in basis):
        raise ConfigError("basis needs exactly one of 'r' or 'energy'")
    if cfg["train"].get("derivatives", "finite_difference") not in ("finite_difference",
                                                                    "provided"):
        raise ConfigError("train.derivatives must be 'finite_difference' or 'provided'")
    for side in ("rom", "fom"):
        RegConfig.from_dict(cfg["regularization"].get(side, {}))
    if "burgers" in cfg["data"]:
        BurgersConfig(**cfg["data"]["burgers"])
    elif "snapshots" not in cfg["data"]:
        raise ConfigError("data needs either 'burgers' or 'snapshots'")


def load_config(path=None):
    """Read a JSON config file (or defaults when ``path`` is None)."""
    if path is None:
        return merge_config()
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return merge_config(raw)


def _graph_from(spec, n, base):
    if spec is None:
        return AdjacencyGraph.path(n)
    if "path" in spec:
        return AdjacencyGraph.path(spec["path"]["n"], spec["path"].get("periodic", False))
    if "grid2d" in spec:
        return AdjacencyGraph.grid2d(spec["grid2d"]["nx"], spec["grid2d"]["ny"])
    if "file" in spec:
        return AdjacencyGraph.from_dict(json.loads((base / spec["file"]).read_text()))
    raise ConfigError(f"unknown graph specification {sorted(spec)}")


def load_data(cfg, base="."):
    """Snapshot set, graph and (for Burgers) the generator config."""
    data = cfg["data"]
    base = Path(base)
    if "burgers" in data:
        bc = BurgersConfig(**data["burgers"])
        return simulate_reference(bc), bc.graph(), bc
    X = load_matrix(base / data["snapshots"])
    times = load_matrix(base / data["times"]).ravel()
    U = load_matrix(base / data["inputs"]) if data.get("inputs") else None
    dX = load_matrix(base / data["derivatives"]) if data.get("derivatives") else None
    S = SnapshotSet(X, times, U, dX)
    g = _graph_from(data.get("graph"), S.n, base)
    if g.n != S.n:
        raise ConfigError(f"graph has {g.n} DOFs, snapshots have {S.n} rows")
    return S, g, None


def build_decomposition(cfg, g, bc=None, a=None):
    """Domain decomposition from the config (``a`` overrides the split point)."""
    dec = cfg["decomposition"]
    if dec.get("mode", "coupled") != "coupled":
        return None
    if "fom_ids" in dec:
        return decompose(g, dec["fom_ids"], dec.get("overlap_ids", ()))
    a = dec.get("a") if a is None else a
    if a is None:
        raise ConfigError("decomposition needs 'fom_ids' or a split coordinate 'a'")
    dz = bc.dz if bc is not None else dec.get("dz", 1.0)
    j = int(np.ceil(a / dz - 1e-9))
    if not 0 < j < g.n:
        raise ConfigError(f"split point a={a} leaves an empty subdomain")
    width = int(dec.get("overlap", 0))
    return decompose(g, np.arange(j, g.n), np.arange(j, min(j + width, g.n)))


def _training_set(cfg, S):
    t_split = cfg["train"].get("t_split")
    train = S if t_split is None else split_train_test(S, t_split)[0]
    if cfg["train"].get("derivatives", "finite_difference") == "finite_difference":
        train = SnapshotSet(train.X, train.times, train.U if train.k else None)
    elif train.dXdt is None:
        raise ConfigError("train.derivatives = 'provided' but the data carry no derivatives")
    return train


def train(cfg, S, g, dd, seed=0, workers=1):
    """Fit the model described by ``cfg`` on the training part of ``S``."""
    tr = _training_set(cfg, S)
    basis = cfg["basis"]
    sf = cfg["sfom"]
    return infer_coupled(
        tr, g, dd,
        r=basis.get("r"), energy=basis.get("energy"),
        structure=cfg["structure"],
        reg_R=RegConfig.from_dict(cfg["regularization"]["rom"]),
        reg_F=RegConfig.from_dict(cfg["regularization"]["fom"]),
        pooling=PoolingPolicy(int(sf.get("pooling", 0)), seed, bool(sf.get("shared_pooling", True))),
        mode=cfg["decomposition"].get("mode", "coupled"),
        selection=sf.get("selection", "global"),
        subsample=int(sf.get("subsample", 20)),
        seed=seed, workers=workers,
    )


def _input_function(S):
    if not S.k:
        return None
    times, U = S.times, S.U
    return lambda t: np.array([np.interp(t, times, row) for row in U])


def evaluate(cfg, M, S, timing_runs=1):
    """Simulate ``M`` over the times of ``S`` and score the test window.

    The run starts from the first snapshot. Returns the trajectory and a
    dict with the test-window relative error (``inf`` when the run
    diverged) and the wall time. With ``timing_runs > 1`` the first run
    is a warm-up and the wall time is the best of ``timing_runs`` further
    runs.
    """
    grid = (S.times[0], S.times[1] - S.times[0], S.n_T)
    u = _input_function(S)
    traj = simulate_coupled(M, S.X[:, 0], grid, u)
    runs = [traj]
    if timing_runs > 1 and not traj.diverged:
        # Timed repeats follow an untimed warm-up and, as in timeit, run
        # with the garbage collector paused.
        enabled = gc.isenabled()
        gc.disable()
        try:
            runs = [simulate_coupled(M, S.X[:, 0], grid, u) for _ in range(timing_runs)]
        finally:
            if enabled:
                gc.enable()
    t_split = cfg["train"].get("t_split")
    mask = S.times > t_split if t_split is not None else np.ones(S.n_T, dtype=bool)
    if traj.diverged:
        err = np.inf
    else:
        err = relative_error(traj.states[:, mask], S.X[:, mask])
    return traj, {"test_error": err, "wall_time": float(min(r.wall_time for r in runs)),
                  "diverged_at": traj.diverged_at}


def model_report(M, S=None, cfg=None):
    """Chosen weights, L-curve points, stability verdicts, gap indicator."""
    rep = {"mode": M.mode, "r": M.r, "decomposition": M.decomposition.to_dict()}
    if M.rom is not None:
        info = M.rom.fit_info
        rep["rom"] = {"eta1": info["eta1"], "eta2": info["eta2"], "lcurve": info["lcurve"],
                      "energy": M.basis.energy,
                      "stability": stability_check(M.rom.core.A)}
    if M.fom is not None:
        info = M.fom.fit_info
        rep["fom"] = {"eta1": info["eta1"], "eta2": info["eta2"], "lcurve": info["lcurve"],
                      "pooling": info["pooling"], "selection": info["selection"],
                      "stability": stability_check(M.fom.assemble_linear())}
    if S is not None and M.rom is not None and M.fom is not None:
        tr = _training_set(cfg, S) if cfg is not None else S
        dd = M.decomposition
        rom_only = np.setdiff1d(dd.rom_ids, dd.overlap_ids)
        try:
            gi = gap_indicator(tr.X[rom_only], tr.X[dd.fom_ids], M.r)
            rep["gap_indicator"] = {"decay_R": gi.decay_R, "decay_F": gi.decay_F,
                                    "ratio": gi.ratio, "saturated": gi.saturated}
        except RomFomError as exc:
            rep["gap_indicator"] = {"error": str(exc)}
    if cfg is not None:
        rep["config"] = cfg
    return rep


def _sweep_point(cfg, S, g, bc, a, repeats, seed):
    """Train and score every repeat at one split point; keep timing jobs."""
    dd = build_decomposition(cfg, g, bc, a=a)
    errs, stable, jobs = [], [], []
    for rep in range(repeats):
        try:
            M = train(cfg, S, g, dd, seed=seed + rep)
        except RomFomError:
            errs.append(np.inf)
            stable.append(False)
            continue
        _, res = evaluate(cfg, M, S, timing_runs=1)
        errs.append(res["test_error"])
        ok = bool(np.isfinite(res["test_error"]))
        ok = ok and stability_check(M.rom.core.A)["stable"]
        ok = ok and stability_check(M.fom.assemble_linear())["stable"]
        stable.append(bool(ok))
        if np.isfinite(res["test_error"]):
            jobs.append((M.compile(), M.initial_state(S.X[:, 0])))
    return errs, stable, jobs


def _time_jobs(jobs, grid, timing_runs):
    """Best-of-``timing_runs`` wall time of each job, measured round-robin.

    Interleaving spreads slow drifts of machine load evenly over all jobs,
    and the minimum discards runs slowed by other processes (as in
    ``timeit``). One untimed pass warms up; the garbage collector is paused
    throughout.
    """
    t0, dt, count = grid
    times = [[] for _ in jobs]
    enabled = gc.isenabled()
    gc.disable()
    try:
        for run in range(timing_runs + 1):
            for j, (op, y0) in enumerate(jobs):
                start = time.perf_counter()
                integrate(lambda t, y: op(y), y0, t0, dt, count)
                if run:
                    times[j].append(time.perf_counter() - start)
    finally:
        if enabled:
            gc.enable()
    return [float(np.min(t)) for t in times]


def interface_grid(a_min, a_max, step):
    """Split coordinates ``a_min, a_min + step, ...`` not exceeding ``a_max``."""
    if step <= 0 or a_max < a_min:
        raise ConfigError("need step > 0 and a_max >= a_min")
    count = int(np.floor((a_max - a_min) / step + 1e-9)) + 1
    return np.round(a_min + step * np.arange(count), 12)


def sweep_interface(cfg, a_min, a_max, step, repeats, seed=0, workers=1, data=None):
    """Retrain and resimulate the coupled model for each split point ``a``.

    Each repeat reseeds the sFOM pooling with ``seed + repeat``. Runs that
    diverge or fail are recorded, never raised. Errors are scored on the
    test window. Wall times cover the time loop of the simulation and are
    measured after all models are trained, round-robin over every model
    (see ``simulation.timing_runs``), always on a single thread.

    Returns
    -------
    list of dict
        One entry per ``a`` with ``mean_error``, ``std_error``,
        ``wall_time`` (mean over repeats of the per-model best time),
        ``std_wall_time``, ``stable_flag``, ``n_diverged`` and ``errors``.
    """
    values = interface_grid(a_min, a_max, step)
    S, g, bc = data if data is not None else load_data(cfg)
    timing_runs = max(1, int(cfg["simulation"].get("timing_runs", 5)))
    if S.k:
        raise ConfigError("the interface sweep supports autonomous data only")

    def point(a):
        return _sweep_point(cfg, S, g, bc, a, repeats, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(point, values))
    else:
        results = [point(a) for a in values]

    jobs = [job for _, _, js in results for job in js]
    grid = (S.times[0], S.times[1] - S.times[0], S.n_T)
    walls = iter(_time_jobs(jobs, grid, timing_runs))
    rows = []
    for a, (errs, stable, js) in zip(values, results):
        w = np.array([next(walls) for _ in js])
        errs = np.asarray(errs)
        finite = errs[np.isfinite(errs)]
        rows.append({
            "a": float(a),
            "mean_error": float(finite.mean()) if finite.size else np.inf,
            "std_error": float(finite.std()) if finite.size else np.nan,
            "wall_time": float(w.mean()) if w.size else np.nan,
            "std_wall_time": float(w.std()) if w.size else np.nan,
            "stable_flag": bool(all(stable)),
            "n_diverged": int(np.sum(~np.isfinite(errs))),
            "errors": errs.tolist(),
        })
    return rows
