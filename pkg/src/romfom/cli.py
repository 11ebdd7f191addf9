"""Command-line driver: ``romfom <command> [options]``.

Commands write their artifacts below ``--out`` (default ``./romfom-out``):

generate         reference snapshots (``data/X.fmat``, ``data/times.csv``)
decompose        ``decomposition.json``, gap indicator, singular values
infer            model bundle (``model/``) and ``report.json``
simulate         trajectory (``trajectory/``) and error CSVs vs the data
diagnose         spectra and Gershgorin disks of the linear operators
sweep-interface  error and timing versus split coordinate ``a``
cost             cost-model estimates and speedup grids

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O or parse error.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import scipy.linalg as la

from . import pipeline
from .burgers import BurgersConfig, save_reference, simulate_reference
from .costmodel import CostParams, offline_costs, offline_ratios, online_speedup, speedup_grid
from .couple import load_coupled_model, save_coupled_model
from .diagnostics import gershgorin_disks, relative_error, save_disks, save_spectrum, \
    stability_check
from .errors import ConfigError, ParseError, RomFomError
from .pod import gap_indicator
from .simulate import save_trajectory

__all__ = ["main", "build_parser", "cmd_generate", "cmd_decompose", "cmd_infer",
           "cmd_simulate", "cmd_diagnose", "cmd_sweep_interface", "cmd_cost"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_rows(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


# Commands =====================================================================
def cmd_generate(cfg, out, T=None, dt=None, include_initial=None):
    """Run the Burgers reference solver and write the snapshots."""
    params = dict(cfg["data"].get("burgers", {}))
    for key, val in (("T", T), ("dt", dt), ("include_initial", include_initial)):
        if val is not None:
            params[key] = val
    bc = BurgersConfig(**params)
    S = simulate_reference(bc)
    save_reference(S, bc, out / "data")
    return S


def cmd_decompose(cfg, out, a=None):
    S, g, bc = pipeline.load_data(cfg)
    dd = pipeline.build_decomposition(cfg, g, bc, a=a)
    if dd is None:
        raise ConfigError("decompose needs decomposition.mode = 'coupled'")
    _write_json(out / "decomposition.json", dd.to_dict())
    tr = pipeline._training_set(cfg, S)
    rom_only = np.setdiff1d(dd.rom_ids, dd.overlap_ids)
    summary = {"n_R": dd.n_R, "n_F": dd.n_F, "n_I": dd.n_I}
    r = cfg["basis"].get("r")
    if r is not None:
        gi = gap_indicator(tr.X[rom_only], tr.X[dd.fom_ids], r)
        summary["gap_indicator"] = {"r": r, "decay_R": gi.decay_R, "decay_F": gi.decay_F,
                                    "ratio": gi.ratio, "saturated": gi.saturated}
    sR = la.svdvals(tr.X[rom_only])
    sF = la.svdvals(tr.X[dd.fom_ids])
    m = max(sR.size, sF.size)

    def pad(s):
        return np.pad(s / s[0], (0, m - s.size), constant_values=np.nan)

    _write_rows(out / "singular_values.csv", ["index", "rom_normalized", "fom_normalized"],
                [(i + 1, a_, b_) for i, (a_, b_) in enumerate(zip(pad(sR), pad(sF)))])
    _write_json(out / "decomposition_summary.json", summary)
    return dd, summary


def cmd_infer(cfg, out, seed=0, workers=1):
    S, g, bc = pipeline.load_data(cfg)
    dd = pipeline.build_decomposition(cfg, g, bc)
    M = pipeline.train(cfg, S, g, dd, seed=seed, workers=workers)
    save_coupled_model(M, out / "model")
    report = pipeline.model_report(M, S, cfg)
    report["seed"] = seed
    _write_json(out / "report.json", report)
    for side in ("rom", "fom"):
        if side in report and report[side]["lcurve"]:
            _write_rows(out / f"lcurve_{side}.csv",
                        ["eta1", "eta2", "fit_error", "solution_norm"],
                        [(p["eta1"], p["eta2"], p["fit_error"], p["solution_norm"])
                         for p in report[side]["lcurve"]])
    return M, report


def cmd_simulate(cfg, out, model_dir, with_reference=True):
    model_dir = Path(model_dir)
    if not (model_dir / "manifest.json").is_file():
        raise FileNotFoundError(f"no model bundle at {model_dir}")
    M = load_coupled_model(model_dir)
    S, _, _ = pipeline.load_data(cfg)
    if S.n != M.n:
        raise ConfigError(f"model has {M.n} DOFs, data have {S.n}")
    traj, res = pipeline.evaluate(cfg, M, S, timing_runs=1)
    save_trajectory(traj, out / "trajectory")
    summary = {"diverged_at": traj.diverged_at, "wall_time": res["wall_time"],
               "columns": int(traj.states.shape[1])}
    if with_reference:
        m = traj.states.shape[1]
        per_step = relative_error(traj.states, S.X[:, :m], "per_step_mean_state")
        fro = [relative_error(traj.states[:, j], S.X[:, j]) for j in range(m)]
        _write_rows(out / "error.csv", ["t", "relative_l2", "mean_abs_over_mean_state"],
                    zip(traj.times, fro, per_step))
        summary["test_error"] = res["test_error"]
    _write_json(out / "simulation.json", summary)
    return traj, summary


def cmd_diagnose(out, model_dir, dense_limit=2000):
    M = load_coupled_model(Path(model_dir))
    verdicts = {}
    ops = {}
    if M.rom is not None:
        ops["A_RR"] = M.rom.core.A
    if M.fom is not None:
        ops["A_FF"] = M.fom.assemble_linear()
    for name, A in ops.items():
        disks = gershgorin_disks(A, dense_limit=dense_limit)
        save_disks(disks, out / f"disks_{name}.csv")
        save_spectrum(disks.eigenvalues, out / f"spectrum_{name}.csv")
        verdicts[name] = {**stability_check(A, dense_limit=dense_limit),
                          "sampled": disks.sampled}
    _write_json(out / "stability.json", verdicts)
    return verdicts


def cmd_sweep_interface(cfg, out, a_min, a_max, step, repeats, seed=0, workers=1):
    rows = pipeline.sweep_interface(cfg, a_min, a_max, step, repeats, seed, workers)
    _write_rows(out / "sweep_interface.csv",
                ["a", "mean_error", "std_error", "wall_time", "std_wall_time", "stable_flag",
                 "n_diverged"],
                [(r["a"], r["mean_error"], r["std_error"], r["wall_time"], r["std_wall_time"],
                  int(r["stable_flag"]), r["n_diverged"]) for r in rows])
    return rows


def cmd_cost(out, params):
    p = CostParams(**params)
    summary = {"params": {k: getattr(p, k) for k in p.__dataclass_fields__},
               "offline_costs": offline_costs(p), "offline_ratios": offline_ratios(p),
               "online_speedup": online_speedup(p)}
    _write_json(out / "cost.json", summary)
    fractions = np.round(np.linspace(0.1, 1.0, 10), 10)
    _write_rows(out / "online_speedup_vs_nF.csv", ["n_F/n", "online_speedup"],
                speedup_grid(p, "n_F/n", fractions).tolist())
    rg = np.arange(1, 11, dtype=float)
    _write_rows(out / "offline_vs_global_opinf.csv", ["n_F/n", "r_g/r", "ratio"],
                speedup_grid(p, "n_F/n", fractions, "r_g/r", rg, "vs_global_opinf").tolist())
    rn = np.round(np.linspace(0.01, 0.1, 10), 10)
    _write_rows(out / "offline_vs_global_sfom.csv", ["n_F/n", "r/n", "ratio"],
                speedup_grid(p, "n_F/n", fractions, "r/n", rn, "vs_global_sfom").tolist())
    return summary


# Argument parsing ==============================================================
def _common(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", type=Path, default=default(None),
                        help="JSON pipeline config (defaults: Burgers experiment)")
    parser.add_argument("--out", type=Path, default=default(Path("romfom-out")),
                        help="output directory")
    parser.add_argument("--seed", type=int, default=default(0), help="pooling/subsample seed")
    parser.add_argument("--workers", type=int, default=default(1), help="worker threads")


def build_parser():
    parser = argparse.ArgumentParser(prog="romfom", description=__doc__.split("\n")[0])
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _common(p, suppress=True)
        return p

    p = add("generate", "generate Burgers reference snapshots")
    p.add_argument("--T", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--include-initial", action="store_true", default=None,
                   help="also store the state at t = 0")
    p = add("decompose", "split the domain and report the gap indicator")
    p.add_argument("--a", type=float, help="split coordinate (1D grids)")
    add("infer", "fit a coupled (or global) model")
    p = add("simulate", "simulate a fitted model over the data horizon")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--no-reference", action="store_true", help="skip the error report")
    p = add("diagnose", "spectra, disks and stability of the linear operators")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--dense-limit", type=int, default=2000)
    p = add("sweep-interface", "vary the split coordinate a")
    p.add_argument("--a-min", type=float, default=3.5)
    p.add_argument("--a-max", type=float, default=5.5)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--repeats", type=int, default=10)
    p = add("cost", "cost-model estimates")
    for name, typ, default in (("n", int, 500), ("n-F", int, 250), ("r", int, 10),
                               ("s", int, 3), ("k", int, 2), ("n-I", str, "2"),
                               ("n-T", int, 360), ("r-g", int, None), ("d", int, 1)):
        p.add_argument(f"--{name}", type=typ, default=default)
    p.add_argument("--interface-rule", choices=("surface", "power"), default="surface",
                   help="estimate used when --n-I is 'auto'")
    return parser


def _run(args):
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "cost":
        n_I = None if args.n_I == "auto" else int(args.n_I)
        params = {"n": args.n, "n_F": args.n_F, "r": args.r, "s": args.s, "k": args.k,
                  "n_I": n_I, "n_T": args.n_T, "r_g": args.r_g, "d": args.d,
                  "interface_rule": args.interface_rule}
        res = cmd_cost(out, params)
        print(f"online speedup {res['online_speedup']:.4g}")
        return
    if args.command == "diagnose":
        for name, v in cmd_diagnose(out, args.model, args.dense_limit).items():
            print(f"{name}: max Re(lambda) = {v['max_real_part']:.4g}, "
                  f"{'stable' if v['stable'] else 'NOT stable'}")
        return
    cfg = pipeline.load_config(args.config)
    if args.command == "generate":
        S = cmd_generate(cfg, out, args.T, args.dt, args.include_initial)
        print(f"wrote {S.n} x {S.n_T} snapshots to {out / 'data'}")
    elif args.command == "decompose":
        dd, summary = cmd_decompose(cfg, out, args.a)
        print(json.dumps(summary, default=_json_default))
    elif args.command == "infer":
        _, report = cmd_infer(cfg, out, args.seed, args.workers)
        for side in ("rom", "fom"):
            if side in report:
                st = report[side]["stability"]
                print(f"{side}: eta1 = {report[side]['eta1']:.3g}, "
                      f"max Re(lambda) = {st['max_real_part']:.4g}")
    elif args.command == "simulate":
        _, summary = cmd_simulate(cfg, out, args.model, not args.no_reference)
        print(json.dumps(summary, default=_json_default))
    elif args.command == "sweep-interface":
        rows = cmd_sweep_interface(cfg, out, args.a_min, args.a_max, args.step, args.repeats,
                                   args.seed, args.workers)
        print(f"wrote {len(rows)} rows to {out / 'sweep_interface.csv'}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _run(args)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RomFomError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
