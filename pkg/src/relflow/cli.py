"""Command-line interface.

    relflow simulate  <config.json>   integrate the configured scenario
    relflow verify    <config.json>   weak-strong budget + dissipative suite
    relflow sweep     <config.json>   regularization-strength sweep
    relflow calibrate <config.json>   estimate the entropy-bound constants
    relflow mollify-test <config.json>  mollifier convergence + Young checks

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 runtime/config error.
Outputs (CSV + JSON, with figures alongside) land in the config's
output_dir.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import report as figs
from .errors import RelflowError
from .fields import Grid, write_snapshot
from .harness import (
    ExperimentConfig,
    calibrate_constants,
    run_dissipative_suite,
    run_eps_sweep,
    run_simulation,
    run_weak_strong,
)
from .mollify import MollifierSpec, mollify_convergence_report, young_convolution_check
from .solver import manufactured_pair


def _outdir(config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(config: ExperimentConfig) -> int:
    out = _outdir(config)
    traj, _ = run_simulation(config)
    traj.ledger_csv(out / "ledger.csv")
    snapdir = out / "snapshots"
    snapdir.mkdir(exist_ok=True)
    for idx in (0, len(traj.states) - 1):
        s = traj.states[idx]
        comps = np.concatenate([s.rho.values[None], s.m.values])
        write_snapshot(snapdir / f"snap_{idx:06d}.bin", s.t, comps, s.grid)
    figs.render_ledger(traj.ledger, out / "ledger.png")
    _write_json(
        out / "summary.json",
        {
            "scenario": config.scenario,
            "samples": len(traj.states),
            "final_time": traj.states[-1].t,
            "final_mass": traj.ledger[-1]["mass"],
            "final_energy": traj.ledger[-1]["energy"],
        },
    )
    return 0


def cmd_verify(config: ExperimentConfig) -> int:
    out = _outdir(config)
    ws = run_weak_strong(config)
    ws.report.to_csv(out / "weak_strong.csv")
    _write_json(out / "weak_strong.json", ws.to_dict())
    figs.render_entropy(ws.report, out / "weak_strong.png")

    suite = run_dissipative_suite(config)
    for label, rep in suite.reports:
        rep.to_csv(out / f"suite_{label}.csv")
        figs.render_entropy(rep, out / f"suite_{label}.png")
    _write_json(out / "suite.json", suite.to_dict())
    ok = ws.passed and suite.passed
    return 0 if ok else 1


def cmd_sweep(config: ExperimentConfig) -> int:
    out = _outdir(config)
    sweep = run_eps_sweep(config)
    sweep.to_csv(out / "sweep.csv")
    sweep.to_json(out / "sweep.json")
    figs.render_sweep(sweep, out / "sweep.png")
    return 0 if sweep.passed else 1


def cmd_calibrate(config: ExperimentConfig) -> int:
    out = _outdir(config)
    result = calibrate_constants(config)
    _write_json(out / "constants.json", result.to_dict())
    return 0


def cmd_mollify_test(config: ExperimentConfig) -> int:
    out = _outdir(config)
    deltas = sorted(config.mollify_deltas, reverse=True)
    # the widths set the 1-D lattice: need delta >= 2h and delta >= 2*dt
    n = 512
    while 2.0 * (2.0 * np.pi / n) > min(deltas):
        n *= 2
    grid = Grid(1, n)
    pair = manufactured_pair(replace(config.recipe, kind="acoustic"), grid)
    dt = min(deltas) / 2.5
    times = np.arange(0.0, config.solver.t_end + 2.0 * max(deltas) + dt, dt)
    mrep = mollify_convergence_report(
        pair.density_fn, pair.density_rate_fn, grid, times,
        [MollifierSpec(d) for d in deltas],
    )
    mrep.to_csv(out / "mollify.csv")
    _write_json(out / "mollify.json", mrep.to_dict())
    figs.render_mollify(mrep, out / "mollify.png")

    rng = np.random.default_rng(config.seed)
    from .fields import random_band_limited

    young_rows = []
    worst_slack = np.inf
    for k in range(20):
        f = random_band_limited(grid, rng, max_mode=6)
        g = random_band_limited(grid, rng, max_mode=6)
        p = float(rng.choice([1.0, 2.0, 3.0, np.inf]))
        lhs, rhs = young_convolution_check(f, g, p)
        young_rows.append((p, lhs, rhs))
        worst_slack = min(worst_slack, rhs - lhs)
    with open(out / "young.csv", "w") as fh:
        fh.write("p,conv_norm,product_bound\n")
        for p, lhs, rhs in young_rows:
            fh.write(f"{p!r},{lhs!r},{rhs!r}\n")

    bounded = all(e <= b for e, b in zip(mrep.errors, mrep.bounds))
    ok = bounded and mrep.slope >= 0.9 and worst_slack >= -1e-10
    return 0 if ok else 1


_COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "calibrate": cmd_calibrate,
    "mollify-test": cmd_mollify_test,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="relflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="experiment config (JSON)")
    args = parser.parse_args(argv)
    try:
        config = ExperimentConfig.from_json(args.config)
        code = _COMMANDS[args.command](config)
    except (RelflowError, OSError, KeyError, json.JSONDecodeError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
