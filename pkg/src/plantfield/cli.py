"""Batch command-line front-end.

Four subcommands cover the full workflow: ``simulate`` runs a finite
population and writes its trajectories, ``train-meanfield`` fits the
stagewise surrogate, ``converge`` measures the distance between finite
runs and the surrogate over growing N, and ``potential-dump`` tabulates
the surrogate flow against the trait surfaces on a position grid.

Every output is deterministic for a fixed seed and carries a header
with the resolved-config hash.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from .config import (
    ConfigError,
    build_experiment_config,
    load_config_file,
    resolve_config,
)
from .initial import sample_mu0, samples_to_state, surface_eval
from .meanfield import (
    export_r2_csv,
    flow_eval_many,
    load_model,
    load_model_dict,
    save_model,
    train,
)
from .metrics import ZMetricWeights, convergence_experiment, export_distances_csv
from .population import IntegrationDivergedError, export_trajectory_csv, integrate
from .solver import StepSizeUnderflowError
from .textio import write_csv

__all__ = ["main"]


def _resolved_flat(args) -> dict:
    overrides = load_config_file(args.config) if args.config else {}
    flat = resolve_config(overrides)
    if getattr(args, "n", None) is not None:
        flat["sim.n"] = args.n
    if getattr(args, "seed", None) is not None:
        flat["seed"] = args.seed
    return flat


def _out_dir(args):
    from pathlib import Path

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _canonical_json_text(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def cmd_simulate(args) -> int:
    flat = _resolved_flat(args)
    ec = build_experiment_config(flat)
    out = _out_dir(args)
    header = f"config_sha256={ec.sha256} seed={ec.seed}"

    samples = sample_mu0(ec.mu0, ec.n)
    state0 = samples_to_state(samples)
    traj = integrate(ec.params, state0, ec.solver)

    export_trajectory_csv(traj, out / "trajectory.csv", comments=[header])
    diag = traj.diagnostics
    doc = {
        "command": "simulate",
        "config_sha256": ec.sha256,
        "seed": ec.seed,
        "n": ec.n,
        "t_end": ec.solver.t_end,
        "n_accepted_steps": diag.n_accepted_steps,
        "n_clamped": diag.n_clamped,
        "min_size": float(diag.min_sizes.min()),
        "max_size": float(diag.max_sizes.max()),
        "min_c_index": float(diag.min_c_index.min()),
        "max_c_index": float(diag.max_c_index.max()),
        "snapshots": [
            {
                "t": float(traj.times[k]),
                "min_size": float(diag.min_sizes[k]),
                "max_size": float(diag.max_sizes[k]),
                "min_c_index": float(diag.min_c_index[k]),
                "max_c_index": float(diag.max_c_index[k]),
            }
            for k in range(len(traj.times))
        ],
    }
    with open(out / "diagnostics.json", "w", encoding="utf-8", newline="") as fh:
        fh.write(_canonical_json_text(doc))
    return 0


def cmd_train_meanfield(args) -> int:
    flat = _resolved_flat(args)
    ec = build_experiment_config(flat)
    out = _out_dir(args)
    header = f"config_sha256={ec.sha256} seed={ec.seed}"

    try:
        mu0_train = replace(
            ec.mu0,
            s0_law="uniform",
            s0_min=ec.train.s0_min,
            s0_max=ec.train.s0_max,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    model = train(
        mu0_train,
        ec.params,
        dt=ec.train.dt,
        T=ec.train.T,
        N=ec.train.N,
        K=ec.train.K,
        d3=ec.train.d3,
        d5=ec.train.d5,
        seed=ec.seed,
    )
    save_model(model, out / "model.json", config_sha256=ec.sha256)
    export_r2_csv(model, out / "r2.csv", comments=[header])
    return 0


def _parse_n_list(text: str) -> list:
    try:
        values = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"invalid n-list {text!r}") from exc
    if not values:
        raise ConfigError("n-list is empty")
    if any(n < 2 for n in values):
        raise ConfigError("population sizes must be at least 2")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("n-list must be strictly increasing")
    return values


def _load_model_checked(path):
    try:
        return load_model(path), load_model_dict(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"model file not found: {path}") from exc
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid model file {path}: {exc}") from exc


def cmd_converge(args) -> int:
    flat = _resolved_flat(args)
    ec = build_experiment_config(flat)
    out = _out_dir(args)
    header = f"config_sha256={ec.sha256} seed={ec.seed}"

    n_list = _parse_n_list(args.n_list)
    model, _ = _load_model_checked(args.model)

    snap_dt = flat["solver.snapshot_dt"]
    n_snaps = int(np.floor(model.T / snap_dt + 1e-9))
    t_grid = np.arange(n_snaps + 1) * snap_dt
    if t_grid[-1] < model.T - 1e-9:
        t_grid = np.append(t_grid, model.T)
    else:
        t_grid[-1] = model.T

    weights = ZMetricWeights(
        s_m=model.params.s_m,
        ell=flat["metric.ell"],
        tau_r=flat["metric.tau_r"],
    )
    reports = convergence_experiment(
        model.mu0_cfg,
        model.params,
        model,
        n_list,
        t_grid,
        seed=ec.seed,
        weights=weights,
        solver_template=ec.solver,
        self_comparison=args.self_comparison,
    )
    export_distances_csv(reports, out / "distances.csv", comments=[header])
    return 0


def _parse_grid(text: str):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 5:
        raise ConfigError(
            "grid must be 'x1min,x1max,x2min,x2max,steps' (5 fields)"
        )
    try:
        x1min, x1max, x2min, x2max = (float(p) for p in parts[:4])
        steps = int(parts[4])
    except ValueError as exc:
        raise ConfigError(f"invalid grid {text!r}") from exc
    if steps < 0:
        raise ConfigError("grid steps must be nonnegative")
    if x1min > x1max or x2min > x2max:
        raise ConfigError("grid bounds must satisfy min <= max")
    return x1min, x1max, x2min, x2max, steps


def cmd_potential_dump(args) -> int:
    model, mdict = _load_model_checked(args.model)
    out = _out_dir(args)
    sha = mdict.get("config_sha256") or "unknown"
    header = f"config_sha256={sha} seed={model.seed}"
    x1min, x1max, x2min, x2max, steps = _parse_grid(args.grid)

    columns = ["x1", "x2", "S_bar", "gamma_bar", "s_inf", "extrapolated"]
    if steps == 0:
        write_csv(out / "potential_surface.csv", columns, [], comments=[header])
        return 0

    ax1 = np.linspace(x1min, x1max, steps)
    ax2 = np.linspace(x2min, x2max, steps)
    pts = np.array([(a, b) for a in ax1 for b in ax2])
    mu0 = model.mu0_cfg
    s_bar_vals = np.atleast_1d(surface_eval(mu0.S_surface, pts))
    g_bar_vals = np.atleast_1d(surface_eval(mu0.gamma_surface, pts))
    s_init = np.full(pts.shape[0], mu0.s0_mid)
    s_inf = flow_eval_many(
        model, model.T, s_init, pts, s_bar_vals, g_bar_vals
    )
    # Positions beyond twice the spread were essentially unseen in training.
    extrapolated = (pts**2).sum(axis=1) > (2.0 * mu0.L) ** 2

    rows = (
        (
            float(pts[i, 0]),
            float(pts[i, 1]),
            float(s_bar_vals[i]),
            float(g_bar_vals[i]),
            float(s_inf[i]),
            int(extrapolated[i]),
        )
        for i in range(pts.shape[0])
    )
    write_csv(out / "potential_surface.csv", columns, rows, comments=[header])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plantfield",
        description=(
            "Simulate competing plant populations, train the mean-field "
            "surrogate, and diagnose convergence."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one finite population")
    p.add_argument("--config", help="key-value config file")
    p.add_argument("--n", type=int, help="population size override")
    p.add_argument("--seed", type=int, help="seed override")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train-meanfield", help="fit the stage surrogate")
    p.add_argument("--config", help="key-value config file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train_meanfield)

    p = sub.add_parser("converge", help="distance trend over population sizes")
    p.add_argument("--config", help="key-value config file")
    p.add_argument("--model", required=True, help="trained model JSON")
    p.add_argument(
        "--n-list", default="50,100,200,400", help="comma-separated sizes"
    )
    p.add_argument(
        "--self-comparison",
        action="store_true",
        help="compare each run against itself (all distances zero)",
    )
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser(
        "potential-dump", help="tabulate the surrogate flow on a grid"
    )
    p.add_argument("--model", required=True, help="trained model JSON")
    p.add_argument(
        "--grid", required=True, help="x1min,x1max,x2min,x2max,steps"
    )
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_potential_dump)
    return parser


def _join_grid_value(argv):
    """Let ``--grid -2,2,-2,2,5`` parse: join the pair with '=' so the
    leading dash of a negative bound is not read as an option prefix."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--grid":
            val = next(it, None)
            out.append(tok if val is None else f"--grid={val}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(_join_grid_value(argv))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (
        IntegrationDivergedError,
        StepSizeUnderflowError,
        FloatingPointError,
        OverflowError,
        np.linalg.LinAlgError,
        ValueError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
