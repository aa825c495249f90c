"""Command-line interface.

Subcommands:
  plan        lattice positions CSV + frequency plan JSON
  fit         kernel density model from a sample CSV
  solve       one association run (partition CSV + summary JSON)
  experiment  sweep / CDF / drift / convergence run from a scenario file
  oracle      brute-force small-instance solver check

Exit codes: 0 success, 2 configuration/validation error, 3 solver infeasible.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import association, density as density_mod, harness, lattice, spectrum
from .channel import ChannelParams, DroneBS, Network
from .geometry import Box, VoxelGrid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _add_common(parser: argparse.ArgumentParser, config_required: bool = False):
    parser.add_argument("--config", type=Path, required=config_required,
                        help="scenario TOML file (defaults Table-driven when omitted)")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--grid", type=str, default=None, help="voxel resolution nx,ny,nz")


def _load_scenario(args) -> harness.Scenario:
    scenario = harness.load_scenario(args.config) if args.config else harness.Scenario()
    if args.seed is not None:
        scenario = replace(scenario, seed=int(args.seed))
    if args.grid:
        try:
            shape = tuple(int(v) for v in args.grid.split(","))
        except ValueError:
            raise harness.ScenarioError(f"--grid: expected nx,ny,nz integers, got {args.grid!r}")
        if len(shape) != 3:
            raise harness.ScenarioError(f"--grid: expected three axis counts, got {args.grid!r}")
        scenario = replace(scenario, grid_shape=shape)
    return scenario


def _cmd_plan(args) -> int:
    scenario = _load_scenario(args)
    deployment = harness.build_deployment(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lattice.write_positions_csv(out / "positions.csv", list(deployment.positions))
    plan = spectrum.frequency_plan_json(deployment.reuse, [list(g) for g in deployment.groups])
    (out / "frequency_plan.json").write_text(plan)
    hex_d, square_d = lattice.neighbor_distances(deployment.spec)
    print(f"stations: {len(deployment.positions)}")
    print(f"neighbor distances: hex {hex_d:.3f} m, square {square_d:.3f} m")
    print(f"reuse factor {deployment.reuse.factor}: {len(deployment.groups)} co-channel group(s)")
    print(f"wrote {out / 'positions.csv'} and {out / 'frequency_plan.json'}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    scenario = _load_scenario(args)
    if args.samples is not None:
        samples = density_mod.load_samples_csv(args.samples)
    else:
        samples = harness.sample_pool(scenario, scenario.users)
    model = harness.fit_density(scenario, samples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "density_model.json").write_text(density_mod.model_to_json(model))
    print(f"fitted on {len(samples)} samples; bandwidths {model.bandwidths.tolist()} m^2")
    print(f"wrote {out / 'density_model.json'}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    scenario = _load_scenario(args)
    deployment = harness.build_deployment(scenario)
    samples = harness.sample_pool(scenario, scenario.users)
    model = harness.fit_density(scenario, samples)
    ws = association.AssociationWorkspace(deployment.grid, deployment.network, scenario.channel, model)
    schemes = ("ot", "sinr") if args.scheme == "both" else (args.scheme,)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    infeasible = False
    for scheme in schemes:
        if scheme == "sinr":
            part = association.baseline_sinr_partition(
                deployment.grid, deployment.network, model, scenario.channel, scenario.users,
                workspace=ws,
            )
            terms = association.evaluate_objective(
                part, deployment.grid, deployment.network, model, scenario.channel,
                scenario.users, workspace=ws,
            )
            trace = []
        else:
            part, terms, trace = association.solve_association(
                deployment.grid, deployment.network, model, scenario.channel, scenario.users,
                max_iters=scenario.solver_max_iters, tol=scenario.solver_tol, workspace=ws,
            )
        association.write_partition_csv(out / f"partition_{scheme}.csv", deployment.grid, part)
        (out / f"solution_{scheme}.json").write_text(
            association.solution_summary_json(part, terms, trace)
        )
        if not np.isfinite(terms.total):
            infeasible = True
        print(f"{scheme}: objective {terms.total:.6g} s, per-user {terms.per_user:.6g} s, "
              f"iterations {len(trace)}")
    print(f"wrote partition and summary files under {out}")
    return EXIT_SOLVER if infeasible else EXIT_OK


def _cmd_experiment(args) -> int:
    scenario = _load_scenario(args)
    if args.scheme != "both" and scenario.experiment.kind == "sweep":
        scenario = replace(scenario, experiment=replace(scenario.experiment, schemes=(args.scheme,)))
    result = harness.run_scenario(scenario, out_dir=args.out)
    print(f"{scenario.experiment.kind}: {len(result.rows)} rows")
    paths = result.write(args.out)
    print(f"wrote {paths['csv']} and {paths['json']}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    """Solve a tiny two-station instance and compare against exhaustive search."""
    box = Box((0, 0, 0), (800, 400, 400))
    grid = VoxelGrid(box=box, shape=(4, 2, 2))
    stations = (
        DroneBS(id=0, position=(200.0, 200.0, 200.0), backhaul_rate=1.0e8),
        DroneBS(id=1, position=(600.0, 200.0, 200.0), backhaul_rate=2.0e8),
    )
    network = Network(stations=stations)
    params = ChannelParams()
    uniform = density_mod.UniformDensity(box)
    users = 200.0
    ws = association.AssociationWorkspace(grid, network, params, uniform)
    _, terms, _ = association.solve_association(
        grid, network, uniform, params, users, workspace=ws
    )
    best, _ = association.exhaustive_minimum(grid, network, uniform, params, users, workspace=ws)
    gap = abs(terms.total - best) / best
    print(f"solver objective:     {terms.total!r}")
    print(f"exhaustive minimum:   {best!r}")
    print(f"relative gap:         {gap:.3e}")
    if gap <= 1e-12:
        print("oracle check PASSED")
        return EXIT_OK
    print("oracle check FAILED")
    return EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aether3d",
                                     description="3D aerial network planning and cell association")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="generate station positions and the frequency plan")
    _add_common(p)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("fit", help="fit the user-density model")
    _add_common(p)
    p.add_argument("--samples", type=Path, default=None, help="sample CSV (overrides scenario source)")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("solve", help="run one association solve")
    _add_common(p)
    p.add_argument("--scheme", choices=["ot", "sinr", "both"], default="both")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("experiment", help="run the scenario's experiment")
    _add_common(p, config_required=True)
    p.add_argument("--scheme", choices=["ot", "sinr", "both"], default="both")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("oracle", help="brute-force check of the solver on a tiny instance")
    p.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except harness.ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
