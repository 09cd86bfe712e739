"""Command-line lab: run, convergence, selftest, flocking.

Exit codes: 0 success, 1 config/precondition error, 2 vacuum detected,
3 numeric fault, 4 I/O failure, 5 report criteria not met.  Each report
path writes line-delimited JSON plus rendered figures side by side.
"""

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plots
from .config import RunConfig, parse_config
from .diagnostics import DiagnosticsEngine, decay_fit
from .errors import ConfigError, ParameterError, TorusGasError, VacuumError
from .selftest import run_selftest
from .spectral import TWO_PI, Grid
from .timestepping import (STATUS_COMPLETED, STATUS_FAULT, STATUS_VACUUM,
                           initial_data, run, stable_dt)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VACUUM = 2
EXIT_FAULT = 3
EXIT_IO = 4
EXIT_UNMET = 5

_STATUS_EXIT = {STATUS_COMPLETED: EXIT_OK, STATUS_VACUUM: EXIT_VACUUM, STATUS_FAULT: EXIT_FAULT}

OUTDIR_ENV = "TORUSGAS_OUTDIR"


def _outdir(config: RunConfig) -> Path:
    path = config.output.path or os.environ.get(OUTDIR_ENV) or "torusgas_out"
    return Path(path)


def _load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config(text)


def _prepared(config: RunConfig):
    init = initial_data(config.init.preset, config.grid, seed=config.init.seed,
                        epsilon=config.init.epsilon, mode=config.init.mode,
                        rho_bar=config.model.rho_bar)
    params = config.model
    if params.gamma == 1.0:
        # the log-pressure potential is referenced to the mass average
        params = replace(params, rho_bar=init.mass() / TWO_PI)
    return init, params


def _execute(config: RunConfig):
    init, params = _prepared(config)
    engine = DiagnosticsEngine(
        config.grid, params, force=config.force,
        hierarchy_depth=config.diagnostics.hierarchy_depth,
        double_integral_cadence=config.diagnostics.double_integral_cadence,
    )
    t0 = time.perf_counter()
    traj = run(init, params, config.control, config.force, observer=engine.observe)
    wall = time.perf_counter() - t0
    engine.finalize()
    return traj, engine.records, wall


def _write_jsonl(path: Path, rows):
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def _snapshot_rows(config, traj):
    times = np.array(traj.times)
    rows = []
    for t_req in config.output.snapshot_times:
        idx = int(np.argmin(np.abs(times - t_req)))
        st = traj.states[idx]
        rows.append({
            "n": st.grid.n,
            "length": st.grid.length,
            "t": st.t,
            "rho": [float(v) for v in st.rho],
            "u": [float(v) for v in st.u],
        })
    return rows


def cmd_run(config: RunConfig) -> int:
    traj, records, wall = _execute(config)
    outdir = _outdir(config)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        _write_jsonl(outdir / "diagnostics.jsonl", (r.to_dict() for r in records))
        if config.output.snapshot_times:
            _write_jsonl(outdir / "snapshots.jsonl", _snapshot_rows(config, traj))
        summary = {
            "status": traj.status,
            "exit_code": _STATUS_EXIT[traj.status],
            "detail": traj.fault_detail,
            "wall_time_s": wall,
            "n_steps": traj.n_steps,
            "n_records": len(records),
            "extrema": {
                "min_rho": min(r.min_rho for r in records),
                "max_abs_u": max(float(np.max(np.abs(st.u))) for st in traj.states),
                "mass_initial": records[0].mass,
                "mass_final": records[-1].mass,
                "energy_initial": records[0].energy,
                "energy_final": records[-1].energy,
            },
        }
        (outdir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                             encoding="utf-8")
        plots.render_run_report(records, outdir / "report.png")
    except OSError as exc:
        print(f"output failure: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"status={traj.status} steps={traj.n_steps} records={len(records)} "
          f"wall={wall:.2f}s -> {outdir}")
    return _STATUS_EXIT[traj.status]


def cmd_convergence(config: RunConfig, levels: int) -> int:
    if levels < 3:
        raise ConfigError(f"convergence study needs >= 3 grid levels, got {levels}")
    base_n = config.grid.n
    base_interval = config.control.t_final / 6.0
    names = ("energy_balance_resid", "bd_balance_resid", "x_transport_resid")
    ns, table = [], {name: [] for name in names}
    status = STATUS_COMPLETED
    for lvl in range(levels):
        n = base_n * 2**lvl
        cfg = replace(config, grid=Grid(n))
        init, params = _prepared(cfg)
        dt = stable_dt(init, params, cfg.control)
        rec_every = max(1, round(base_interval * 4.0**-lvl / dt))
        cfg = replace(cfg, control=replace(cfg.control, record_every=rec_every))
        traj, records, _ = _execute(cfg)
        if traj.status != STATUS_COMPLETED:
            status = traj.status
            break
        interior = [r for r in records if r.energy_balance_resid is not None]
        if not interior:
            raise ConfigError("convergence run produced no interior records; "
                              "increase control.t_final")
        ns.append(n)
        for name in names:
            table[name].append(max(getattr(r, name) for r in interior))
    if status != STATUS_COMPLETED:
        print(f"convergence run failed with status {status}")
        return _STATUS_EXIT[status]

    floor = 1e-12
    report_rows, success = [], True
    print(f"{'n':>6} " + " ".join(f"{name:>22}" for name in names))
    for i, n in enumerate(ns):
        print(f"{n:>6} " + " ".join(f"{table[name][i]:>22.3e}" for name in names))
    orders = {}
    for name in names:
        vals = table[name]
        if all(v < floor for v in vals):
            orders[name] = "floor"
            continue
        monotone = all(b < a for a, b in zip(vals, vals[1:]))
        obs = [math.log2(a / b) for a, b in zip(vals, vals[1:])]
        orders[name] = obs
        success = success and monotone and min(obs) >= 2.0
    print("observed orders:", {k: (v if v == "floor" else [f"{o:.2f}" for o in v])
                               for k, v in orders.items()})

    outdir = _outdir(config)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        rows = [{"n": n, **{name: table[name][i] for name in names}} for i, n in enumerate(ns)]
        _write_jsonl(outdir / "convergence.jsonl", rows)
        (outdir / "convergence_report.json").write_text(
            json.dumps({"levels": ns, "residuals": table, "orders":
                        {k: v if v == "floor" else list(v) for k, v in orders.items()},
                        "success": success}, indent=2) + "\n", encoding="utf-8")
        plots.render_convergence_report(ns, table, outdir / "convergence.png")
    except OSError as exc:
        print(f"output failure: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"convergence {'success' if success else 'NOT met'} -> {outdir}")
    return EXIT_OK if success else EXIT_UNMET


def cmd_flocking(config: RunConfig) -> int:
    if config.model.gamma != 1.0:
        print("flocking study requires the linear pressure law gamma = 1", file=sys.stderr)
        return EXIT_CONFIG
    if config.model.c_nl <= 0:
        print("flocking study requires an active nonlocal channel c_nl > 0 "
              "(the decay mechanism is the alignment dissipation)", file=sys.stderr)
        return EXIT_CONFIG
    if not config.force.is_zero:
        print("flocking study requires zero external force", file=sys.stderr)
        return EXIT_CONFIG
    if config.control.t_final < 100.0:
        print("flocking study requires control.t_final >= 100", file=sys.stderr)
        return EXIT_CONFIG

    traj, records, wall = _execute(config)
    if traj.status != STATUS_COMPLETED:
        print(f"flocking run failed with status {traj.status}: {traj.fault_detail}")
        return _STATUS_EXIT[traj.status]

    full = [r for r in records if r.velocity_variance is not None]
    first, last = full[0], full[-1]
    initial_metric = first.velocity_variance + first.l1_dist**2
    final_metric = last.velocity_variance + last.l1_dist**2
    sup_stat, nonincreasing = decay_fit([r.t for r in records],
                                        [r.energy for r in records])
    fraction = final_metric / initial_metric if initial_metric > 0 else 0.0
    success = nonincreasing and fraction <= 0.05

    outdir = _outdir(config)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        _write_jsonl(outdir / "flocking.jsonl",
                     ({"t": r.t, "energy": r.energy,
                       "velocity_variance": r.velocity_variance,
                       "l1_dist": r.l1_dist} for r in full))
        with (outdir / "flocking_series.txt").open("w", encoding="utf-8") as fh:
            for r in records:
                fh.write(f"{r.t!r} {r.energy!r}\n")
        (outdir / "flocking_report.json").write_text(json.dumps({
            "sup_energy_t_over_logt": sup_stat,
            "energy_nonincreasing": nonincreasing,
            "initial_metric": initial_metric,
            "final_metric": final_metric,
            "final_fraction": fraction,
            "success": success,
            "wall_time_s": wall,
        }, indent=2) + "\n", encoding="utf-8")
        plots.render_flocking_report([r.t for r in full], [r.energy for r in full],
                                     [r.velocity_variance for r in full],
                                     [r.l1_dist for r in full],
                                     outdir / "flocking.png")
    except OSError as exc:
        print(f"output failure: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"flocking {'success' if success else 'NOT met'}: "
          f"final metric fraction {fraction:.3%}, sup E*t/ln t = {sup_stat:.4g}, "
          f"nonincreasing={nonincreasing} -> {outdir}")
    return EXIT_OK if success else EXIT_UNMET


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="torusgas", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one configuration and emit diagnostics")
    p_run.add_argument("--config", required=True, help="path to a JSON run config")

    p_conv = sub.add_parser("convergence", help="balance-residual refinement study")
    p_conv.add_argument("--config", required=True)
    p_conv.add_argument("--levels", type=int, default=3, help="number of grid doublings (>= 3)")

    p_self = sub.add_parser("selftest", help="run the built-in invariant suites")
    p_self.add_argument("--filter", default=None, help="only run suites whose name contains this")
    p_self.add_argument("--inject-fault", default=None, choices=("kernel_norm",),
                        help="deliberately corrupt a constant (harness test hook)")

    p_flock = sub.add_parser("flocking", help="long-time alignment decay study")
    p_flock.add_argument("--config", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return run_selftest(args.filter, fault=args.inject_fault)
        config = _load_config(args.config)
        if args.command == "run":
            return cmd_run(config)
        if args.command == "convergence":
            return cmd_convergence(config, args.levels)
        return cmd_flocking(config)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VacuumError as exc:
        print(f"vacuum: {exc}", file=sys.stderr)
        return EXIT_VACUUM
    except TorusGasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
