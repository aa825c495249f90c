"""Scenario configuration and experiment orchestration.

Scenarios are TOML files describing the service box, the station lattice,
radio constants, the user-density source, solver settings, and one experiment
(a sweep, an SINR CDF, a density-staleness run, or a single convergence run).
Results are CSV tables plus a JSON summary; identical scenario + seed yields
byte-identical output files.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import association, density as density_mod, lattice, spectrum
from .channel import ChannelParams, DroneBS, Network, dbm_per_hz_to_w_per_hz, sinr_map
from .geometry import Box, VoxelGrid

THREADS_ENV = "AETHER3D_THREADS"

SWEEP_VARIABLES = ("users", "bandwidth", "packet_bits")
EXPERIMENT_KINDS = ("sweep", "sinr_cdf", "drift", "convergence")
SCHEMES = ("ot", "sinr")


class ScenarioError(ValueError):
    """Configuration validation failure; the message names the offending field."""


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str = "sweep"
    variable: str = "users"
    values: tuple = (100, 200, 300, 400, 500)
    schemes: tuple[str, ...] = ("ot", "sinr")
    reference_cell: int = -1              # sinr_cdf: station index; -1 = nearest box center
    reuse_factors: tuple[int, ...] = (1, 8)   # sinr_cdf
    window_minutes: tuple = (0.0, 10.0, 15.0, 20.0)  # drift


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one experiment."""

    seed: int = 1
    box: Box = field(default_factory=lambda: Box((0, 0, 0), (3000, 3000, 3000)))
    grid_shape: tuple[int, int, int] = (48, 48, 48)
    # lattice
    edge_length: float = 400.0
    a_range: tuple[int, int] = (-1, 1)
    b_range: tuple[int, int] = (-1, 1)
    c_range: tuple[int, int] = (0, 1)
    reference: tuple[float, float, float] | None = None  # None = center deployment in box
    # channel / radio
    channel: ChannelParams = field(default_factory=ChannelParams)
    tx_power: float = 0.5
    bandwidth: float = 1e7
    backhaul_base_mbps: float = 100.0  # station number n (1-based) gets (base + n) Mb/s
    compute_speed: float = 1e14
    station_overrides: tuple = ()      # (station_id, field, value) triples
    # users / density
    users: int = 200
    density_kind: str = "truncated_gaussian"   # or "samples"
    density_mean: tuple[float, float, float] = (1000.0, 1000.0, 1000.0)
    density_std: tuple[float, float, float] = (600.0, 600.0, 600.0)
    drift_rate: float = 10.0           # m/min added to each mean component
    samples_path: str | None = None
    bandwidth_grid: tuple[float, float, int] = (1e2, 1e6, 15)  # m^2 candidate span
    # solver
    solver_max_iters: int = 20
    solver_tol: float = 1e-4
    experiment: ExperimentSpec = field(default_factory=ExperimentSpec)

    def bandwidth_candidates(self) -> list[np.ndarray]:
        low, high, count = self.bandwidth_grid
        return density_mod.default_bandwidth_grid(low, high, int(count))

    def truth_spec(self) -> density_mod.TruncatedGaussianSpec:
        return density_mod.TruncatedGaussianSpec(
            mean=self.density_mean, std=self.density_std, box=self.box, drift_rate=self.drift_rate
        )


# ----------------------------------------------------------------------------
# TOML loading / validation
# ----------------------------------------------------------------------------

def _get(section: dict, name: str, where: str, default, caster):
    if name not in section:
        if default is _REQUIRED:
            raise ScenarioError(f"{where}.{name}: required field is missing")
        return default
    try:
        return caster(section[name])
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}.{name}: {exc}") from None


_REQUIRED = object()


def _positive(kind=float):
    def cast(value):
        v = kind(value)
        if v <= 0:
            raise ValueError("must be positive")
        return v
    return cast


def _int_pair(value):
    lo, hi = (int(v) for v in value)
    return (lo, hi)


def _triple(value):
    a, b, c = (float(v) for v in value)
    return (a, b, c)


def load_scenario(path) -> Scenario:
    """Parse and validate a TOML scenario file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: not valid TOML ({exc})") from None
    return scenario_from_mapping(data)


def scenario_from_mapping(data: dict) -> Scenario:
    base = Scenario()
    seed = _get(data, "seed", "scenario", base.seed, int)

    space = data.get("space", {})
    box_corners = _get(space, "box", "space", None, lambda v: v)
    box = base.box if box_corners is None else Box(box_corners[0], box_corners[1])
    grid_shape = _get(space, "grid", "space", base.grid_shape, lambda v: tuple(int(n) for n in v))
    if len(grid_shape) != 3 or any(n < 2 for n in grid_shape):
        raise ScenarioError("space.grid: needs three axis counts, each at least 2")

    lat = data.get("lattice", {})
    edge_length = _get(lat, "edge_length", "lattice", base.edge_length, _positive())
    a_range = _get(lat, "a_range", "lattice", base.a_range, _int_pair)
    b_range = _get(lat, "b_range", "lattice", base.b_range, _int_pair)
    c_range = _get(lat, "c_range", "lattice", base.c_range, _int_pair)
    for name, rng in (("a_range", a_range), ("b_range", b_range), ("c_range", c_range)):
        if rng[1] < rng[0]:
            raise ScenarioError(f"lattice.{name}: empty index range {list(rng)}")
    reference = _get(lat, "reference", "lattice", None, _triple)

    chan = data.get("channel", {})
    noise_dbm = _get(chan, "noise_psd_dbm_hz", "channel", None, float)
    noise = dbm_per_hz_to_w_per_hz(noise_dbm) if noise_dbm is not None else _get(
        chan, "noise_psd_w_hz", "channel", base.channel.noise_psd, _positive()
    )
    try:
        channel = ChannelParams(
            carrier_frequency=_get(chan, "carrier_frequency_hz", "channel",
                                   base.channel.carrier_frequency, _positive()),
            path_loss_exponent=_get(chan, "path_loss_exponent", "channel",
                                    base.channel.path_loss_exponent, _positive()),
            path_loss_constant=_get(chan, "path_loss_constant", "channel",
                                    base.channel.path_loss_constant, _positive()),
            noise_psd=noise,
            channel_gain=_get(chan, "channel_gain", "channel", base.channel.channel_gain, float),
            packet_bits=_get(chan, "packet_bits", "channel", base.channel.packet_bits, _positive()),
            reuse_factor=_get(chan, "reuse_factor", "channel", base.channel.reuse_factor, _positive(int)),
        )
    except ValueError as exc:
        raise ScenarioError(f"channel: {exc}") from None

    radio = data.get("radio", {})
    overrides = []
    for i, entry in enumerate(radio.get("override", [])):
        if "id" not in entry:
            raise ScenarioError(f"radio.override[{i}].id: required field is missing")
        sid = int(entry["id"])
        for key, value in entry.items():
            if key == "id":
                continue
            if key not in ("tx_power", "bandwidth", "backhaul_rate", "compute_speed"):
                raise ScenarioError(f"radio.override[{i}].{key}: unknown station field")
            overrides.append((sid, key, float(value)))

    users_sec = data.get("users", {})
    dens = users_sec.get("density", {})
    density_kind = _get(dens, "kind", "users.density", base.density_kind, str)
    if density_kind not in ("truncated_gaussian", "samples"):
        raise ScenarioError(
            f"users.density.kind: unknown kind {density_kind!r} "
            "(expected 'truncated_gaussian' or 'samples')"
        )
    samples_path = _get(dens, "path", "users.density", None, str)
    if density_kind == "samples":
        if samples_path is None:
            raise ScenarioError("users.density.path: required when kind = 'samples'")
        if not Path(samples_path).exists():
            raise ScenarioError(f"users.density.path: file not found: {samples_path}")

    est = data.get("estimator", {})
    grid_cfg = est.get("bandwidth_grid", {})
    bw_grid = (
        _get(grid_cfg, "min", "estimator.bandwidth_grid", base.bandwidth_grid[0], _positive()),
        _get(grid_cfg, "max", "estimator.bandwidth_grid", base.bandwidth_grid[1], _positive()),
        _get(grid_cfg, "count", "estimator.bandwidth_grid", base.bandwidth_grid[2], _positive(int)),
    )
    if bw_grid[1] < bw_grid[0]:
        raise ScenarioError("estimator.bandwidth_grid.max: must be at least the minimum")

    solver = data.get("solver", {})

    exp = data.get("experiment", {})
    kind = _get(exp, "kind", "experiment", "sweep", str)
    if kind not in EXPERIMENT_KINDS:
        raise ScenarioError(f"experiment.kind: unknown kind {kind!r} (expected one of {EXPERIMENT_KINDS})")
    variable = _get(exp, "variable", "experiment", "users", str)
    if variable not in SWEEP_VARIABLES:
        raise ScenarioError(
            f"experiment.variable: unknown sweep variable {variable!r} (expected one of {SWEEP_VARIABLES})"
        )
    values = tuple(_get(exp, "values", "experiment", ExperimentSpec().values, lambda v: [float(x) for x in v]))
    if kind == "sweep" and len(values) == 0:
        raise ScenarioError("experiment.values: sweep needs at least one value")
    schemes = tuple(_get(exp, "schemes", "experiment", ("ot", "sinr"), lambda v: [str(s) for s in v]))
    for s in schemes:
        if s not in SCHEMES:
            raise ScenarioError(f"experiment.schemes: unknown scheme {s!r} (expected subset of {SCHEMES})")
    experiment = ExperimentSpec(
        kind=kind,
        variable=variable,
        values=values,
        schemes=schemes,
        reference_cell=_get(exp, "reference_cell", "experiment", -1, int),
        reuse_factors=tuple(_get(exp, "reuse_factors", "experiment", (1, 8), lambda v: [int(x) for x in v])),
        window_minutes=tuple(_get(exp, "window_minutes", "experiment",
                                  ExperimentSpec().window_minutes, lambda v: [float(x) for x in v])),
    )

    return Scenario(
        seed=seed,
        box=box,
        grid_shape=grid_shape,
        edge_length=edge_length,
        a_range=a_range,
        b_range=b_range,
        c_range=c_range,
        reference=reference,
        channel=channel,
        tx_power=_get(radio, "tx_power_w", "radio", base.tx_power, _positive()),
        bandwidth=_get(radio, "bandwidth_hz", "radio", base.bandwidth, _positive()),
        backhaul_base_mbps=_get(radio, "backhaul_base_mbps", "radio", base.backhaul_base_mbps, _positive()),
        compute_speed=_get(radio, "compute_speed", "radio", base.compute_speed, _positive()),
        station_overrides=tuple(overrides),
        users=_get(users_sec, "count", "users", base.users, _positive(int)),
        density_kind=density_kind,
        density_mean=_get(dens, "mean", "users.density", base.density_mean, _triple),
        density_std=_get(dens, "std", "users.density", base.density_std, _triple),
        drift_rate=_get(dens, "drift_rate", "users.density", base.drift_rate, float),
        samples_path=samples_path,
        bandwidth_grid=bw_grid,
        solver_max_iters=_get(solver, "max_iterations", "solver", base.solver_max_iters, _positive(int)),
        solver_tol=_get(solver, "tolerance", "solver", base.solver_tol, _positive()),
        experiment=experiment,
    )


# ----------------------------------------------------------------------------
# Deployment construction
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Deployment:
    spec: lattice.LatticeSpec
    positions: tuple[lattice.BasePosition, ...]
    reuse: spectrum.ReuseSolution
    groups: tuple[tuple[int, ...], ...]
    network: Network
    grid: VoxelGrid


def _reuse_solution_for(q: int, edge_length: float) -> spectrum.ReuseSolution:
    bound = max(5, int(round(q ** (1 / 3))) + 1)
    for sol in spectrum.enumerate_reuse_factors(q_max=q, search_bound=bound, edge_length=edge_length):
        if sol.factor == q:
            return sol
    feasible = [s.factor for s in spectrum.enumerate_reuse_factors(q_max=max(q, 64), search_bound=5,
                                                                   edge_length=edge_length)]
    raise ScenarioError(f"channel.reuse_factor: {q} is not a feasible reuse factor (feasible: {feasible})")


def build_deployment(scenario: Scenario, reuse_factor: int | None = None,
                     bandwidth: float | None = None) -> Deployment:
    """Instantiate lattice, frequency plan, stations, and grid from a scenario."""
    if scenario.reference is not None:
        reference = np.asarray(scenario.reference, dtype=float)
    else:
        reference = lattice.centered_reference(
            scenario.edge_length, scenario.a_range, scenario.b_range, scenario.c_range, scenario.box
        )
    spec = lattice.LatticeSpec(
        edge_length=scenario.edge_length,
        reference=reference,
        a_range=scenario.a_range,
        b_range=scenario.b_range,
        c_range=scenario.c_range,
        box=scenario.box,
    )
    positions = tuple(lattice.generate_positions(spec))
    q = reuse_factor if reuse_factor is not None else scenario.channel.reuse_factor
    reuse = _reuse_solution_for(q, scenario.edge_length)
    groups = tuple(tuple(g) for g in spectrum.cochannel_groups(reuse, list(positions)))
    group_of = {}
    for gi, members in enumerate(groups):
        for m in members:
            group_of[m] = gi
    band = bandwidth if bandwidth is not None else scenario.bandwidth
    stations = [
        DroneBS(
            id=i,
            position=p.position,
            tx_power=scenario.tx_power,
            bandwidth=band,
            backhaul_rate=(scenario.backhaul_base_mbps + i + 1) * 1e6,
            compute_speed=scenario.compute_speed,
            frequency_group=group_of[i],
        )
        for i, p in enumerate(positions)
    ]
    for sid, key, value in scenario.station_overrides:
        if not 0 <= sid < len(stations):
            raise ScenarioError(f"radio.override.id: station {sid} does not exist (0..{len(stations) - 1})")
        stations[sid] = replace(stations[sid], **{key: value})
    network = Network(stations=tuple(stations), groups=groups)
    grid = VoxelGrid(box=scenario.box, shape=scenario.grid_shape)
    return Deployment(spec=spec, positions=positions, reuse=reuse, groups=groups,
                      network=network, grid=grid)


def _derive_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(k) for k in keys)))


_POOL_KEY, _DRIFT_KEY = 101, 303


def sample_pool(scenario: Scenario, count: int) -> density_mod.SampleSet:
    """Seed-fixed user location pool; sweep points take prefixes of it."""
    if scenario.density_kind == "samples":
        samples = density_mod.load_samples_csv(scenario.samples_path)
        if len(samples) < count:
            raise ScenarioError(
                f"users.density.path: file holds {len(samples)} samples, need {count}"
            )
        return samples
    return density_mod.sample_truncated_gaussian(
        scenario.truth_spec(), count, rng=_derive_rng(scenario.seed, _POOL_KEY)
    )


def fit_density(scenario: Scenario, samples: density_mod.SampleSet) -> density_mod.DensityModel:
    return density_mod.select_bandwidth(samples, scenario.bandwidth_candidates(), scenario.box)


# ----------------------------------------------------------------------------
# Experiments
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentResult:
    kind: str
    header: tuple[str, ...]
    rows: tuple[tuple, ...]
    summary: dict

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([_format_cell(v) for v in row])
        return buf.getvalue()

    def json_text(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True)

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.kind}.csv"
        json_path = out / "summary.json"
        csv_path.write_text(self.csv_text(), newline="")
        json_path.write_text(self.json_text())
        return {"csv": csv_path, "json": json_path}


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _run_points(point_fn, n_points: int):
    threads = _thread_count()
    if threads == 1 or n_points <= 1:
        return [point_fn(i) for i in range(n_points)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(point_fn, range(n_points)))


def _solve_schemes(scenario: Scenario, deployment: Deployment, model, users: float,
                   schemes, params: ChannelParams):
    """Baseline and/or solver results sharing one workspace.

    Returns {scheme: (partition, terms, trace)}; the baseline has an empty trace.
    """
    ws = association.AssociationWorkspace(deployment.grid, deployment.network, params, model)
    out = {}
    for scheme in schemes:
        if scheme == "sinr":
            part = association.baseline_sinr_partition(
                deployment.grid, deployment.network, model, params, users, workspace=ws
            )
            terms = association.evaluate_objective(
                part, deployment.grid, deployment.network, model, params, users, workspace=ws
            )
            out[scheme] = (part, terms, [])
        else:
            part, terms, trace = association.solve_association(
                deployment.grid, deployment.network, model, params, users,
                max_iters=scenario.solver_max_iters, tol=scenario.solver_tol, workspace=ws,
            )
            out[scheme] = (part, terms, trace)
    return out


SWEEP_HEADER = (
    "variable", "value", "scheme", "users",
    "avg_total_latency_s", "avg_transmission_s", "avg_backhaul_s", "avg_computation_s",
    "objective_s", "iterations", "relabel_fraction", "converged",
)


def run_sweep(scenario: Scenario) -> ExperimentResult:
    exp = scenario.experiment
    values = list(exp.values)
    if exp.variable == "users":
        pool = sample_pool(scenario, int(max(values)))
    else:
        pool = sample_pool(scenario, scenario.users)
        shared_model = fit_density(scenario, density_mod.SampleSet(pool.points[: scenario.users]))

    def point(i: int):
        value = values[i]
        users = int(value) if exp.variable == "users" else scenario.users
        bandwidth = value if exp.variable == "bandwidth" else None
        params = scenario.channel
        if exp.variable == "packet_bits":
            params = replace(params, packet_bits=float(value))
        deployment = build_deployment(scenario, bandwidth=bandwidth)
        if exp.variable == "users":
            model = fit_density(scenario, density_mod.SampleSet(pool.points[:users]))
        else:
            model = shared_model
        solved = _solve_schemes(scenario, deployment, model, users, exp.schemes, params)
        rows, traces = [], {}
        for scheme in exp.schemes:
            _, terms, trace = solved[scheme]
            tx, bh, cp = terms.split_per_user()
            converged = bool(trace) and trace[-1].relabel_fraction < scenario.solver_tol
            rows.append((
                exp.variable, value, scheme, users,
                terms.per_user, tx, bh, cp,
                terms.total, len(trace),
                trace[-1].relabel_fraction if trace else 0.0,
                converged if scheme == "ot" else True,
            ))
            if trace:
                traces[scheme] = [
                    {"iteration": r.iteration, "objective": r.objective,
                     "relabel_fraction": r.relabel_fraction}
                    for r in trace
                ]
        return rows, traces

    results = _run_points(point, len(values))
    rows = tuple(row for point_rows, _ in results for row in point_rows)
    summary = {
        "experiment": "sweep",
        "variable": exp.variable,
        "values": values,
        "schemes": list(exp.schemes),
        "seed": scenario.seed,
        "rows": [dict(zip(SWEEP_HEADER, row)) for row in rows],
        "traces": [traces for _, traces in results],
    }
    if set(exp.schemes) >= {"ot", "sinr"}:
        reductions = []
        for point_rows, _ in results:
            by_scheme = {row[2]: row for row in point_rows}
            base = by_scheme["sinr"][4]
            prop = by_scheme["ot"][4]
            reductions.append((base - prop) / base)
        summary["latency_reduction"] = {
            "per_point": reductions,
            "mean": float(np.mean(reductions)),
        }
    return ExperimentResult(kind="sweep", header=SWEEP_HEADER, rows=rows, summary=summary)


CDF_HEADER = ("reuse_factor", "sinr", "cdf")


def sinr_cdf(grid: VoxelGrid, cell: int, positions, network: Network, params: ChannelParams,
             reuse_factors) -> ExperimentResult:
    """Empirical SINR CDF over one cell's voxels for each reuse factor.

    The cell is the nearest-center region of the chosen station; for every
    reuse factor the stations are regrouped and the SINR of the reference
    station is evaluated at the cell's voxel centers.
    """
    positions = list(positions)
    if not 0 <= cell < len(positions):
        raise ScenarioError(f"experiment.reference_cell: station {cell} does not exist")
    labels = lattice.nearest_cell_map(grid.centers, positions)
    cell_points = grid.centers[labels == cell]
    rows = []
    edge = _infer_edge_length(positions)
    for q in reuse_factors:
        solution = _reuse_solution_for(int(q), edge)
        groups = tuple(tuple(g) for g in spectrum.cochannel_groups(solution, positions))
        regrouped = Network(stations=network.stations, groups=groups)
        gamma = sinr_map(cell_points, regrouped, params)[:, cell]
        order = np.sort(gamma)
        n = len(order)
        for i, g in enumerate(order):
            rows.append((int(q), float(g), (i + 1) / n))
    summary = {
        "experiment": "sinr_cdf",
        "cell": cell,
        "reuse_factors": [int(q) for q in reuse_factors],
        "voxels_in_cell": int(len(cell_points)),
    }
    return ExperimentResult(kind="sinr_cdf", header=CDF_HEADER, rows=tuple(rows), summary=summary)


def _infer_edge_length(positions) -> float:
    d = [np.linalg.norm(p.position - positions[0].position) for p in positions[1:]]
    d = [v for v in d if v > 0]
    if not d:
        raise ScenarioError("lattice: deployment has a single station; cannot infer edge length")
    return min(d) / np.sqrt(6.0)


def run_sinr_cdf(scenario: Scenario) -> ExperimentResult:
    deployment = build_deployment(scenario)
    cell = scenario.experiment.reference_cell
    if cell < 0:
        cell = lattice.nearest_cell(scenario.box.center, list(deployment.positions))
    result = sinr_cdf(deployment.grid, cell, deployment.positions, deployment.network,
                      scenario.channel, scenario.experiment.reuse_factors)
    summary = dict(result.summary)
    summary["seed"] = scenario.seed
    return ExperimentResult(kind=result.kind, header=result.header, rows=result.rows, summary=summary)


DRIFT_HEADER = (
    "window_minutes", "drift_rate_m_per_min",
    "stale_avg_latency_s", "fresh_avg_latency_s", "additional_latency_s",
)


def drift_experiment(scenario: Scenario, drift_rate: float | None = None,
                     window_minutes=None) -> ExperimentResult:
    """Latency cost of serving with a stale density estimate.

    For each report window T: fit a model on locations sampled at the window
    start, solve the partition, then score it against the TRUE (drifted)
    distribution at the window end.  The reference solves on same-seed samples
    drawn from the drifted distribution, so zero drift gives exactly zero
    additional latency.
    """
    rate = scenario.drift_rate if drift_rate is None else float(drift_rate)
    windows = list(scenario.experiment.window_minutes if window_minutes is None else window_minutes)
    start_spec = replace(scenario.truth_spec(), drift_rate=rate)
    deployment = build_deployment(scenario)
    users = scenario.users

    # The stale side never changes: locations are sampled once at the window
    # start and the partition built from them is reused for every window length.
    stale_samples = density_mod.sample_truncated_gaussian(
        start_spec, users, rng=_derive_rng(scenario.seed, _DRIFT_KEY)
    )
    stale_model = fit_density(scenario, stale_samples)
    stale_part, _, _ = association.solve_association(
        deployment.grid, deployment.network, stale_model, scenario.channel, users,
        max_iters=scenario.solver_max_iters, tol=scenario.solver_tol,
    )

    def point(i: int):
        minutes = windows[i]
        end_spec = start_spec.drifted(minutes)
        fresh_samples = density_mod.sample_truncated_gaussian(
            end_spec, users, rng=_derive_rng(scenario.seed, _DRIFT_KEY)
        )
        fresh_model = fit_density(scenario, fresh_samples)
        fresh_part, _, _ = association.solve_association(
            deployment.grid, deployment.network, fresh_model, scenario.channel, users,
            max_iters=scenario.solver_max_iters, tol=scenario.solver_tol,
        )
        truth_ws = association.AssociationWorkspace(
            deployment.grid, deployment.network, scenario.channel, end_spec
        )
        latencies = {}
        for tag, part in (("stale", stale_part), ("fresh", fresh_part)):
            terms = association.evaluate_objective(
                part, deployment.grid, deployment.network, end_spec, scenario.channel, users,
                workspace=truth_ws,
            )
            latencies[tag] = terms.per_user
        return (
            minutes, rate, latencies["stale"], latencies["fresh"],
            latencies["stale"] - latencies["fresh"],
        )

    rows = tuple(_run_points(point, len(windows)))
    summary = {
        "experiment": "drift",
        "drift_rate_m_per_min": rate,
        "window_minutes": windows,
        "seed": scenario.seed,
        "rows": [dict(zip(DRIFT_HEADER, row)) for row in rows],
    }
    return ExperimentResult(kind="drift", header=DRIFT_HEADER, rows=rows, summary=summary)


CONVERGENCE_HEADER = ("iteration", "objective_s", "relabel_fraction")


def run_convergence(scenario: Scenario) -> ExperimentResult:
    deployment = build_deployment(scenario)
    pool = sample_pool(scenario, scenario.users)
    model = fit_density(scenario, pool)
    _, terms, trace = association.solve_association(
        deployment.grid, deployment.network, model, scenario.channel, scenario.users,
        max_iters=scenario.solver_max_iters, tol=scenario.solver_tol,
    )
    rows = tuple((r.iteration, r.objective, r.relabel_fraction) for r in trace)
    summary = {
        "experiment": "convergence",
        "seed": scenario.seed,
        "iterations": len(trace),
        "converged": bool(trace) and trace[-1].relabel_fraction < scenario.solver_tol,
        "objective": terms.total,
        "per_user": terms.per_user,
    }
    return ExperimentResult(kind="convergence", header=CONVERGENCE_HEADER, rows=rows, summary=summary)


def run_scenario(scenario_or_path, out_dir=None, seed: int | None = None) -> ExperimentResult:
    """Execute a scenario's experiment; optionally write CSV + JSON artifacts."""
    if isinstance(scenario_or_path, (str, Path)):
        scenario = load_scenario(scenario_or_path)
    else:
        scenario = scenario_or_path
    if seed is not None:
        scenario = replace(scenario, seed=int(seed))
    kind = scenario.experiment.kind
    if kind == "sweep":
        result = run_sweep(scenario)
    elif kind == "sinr_cdf":
        result = run_sinr_cdf(scenario)
    elif kind == "drift":
        result = drift_experiment(scenario)
    elif kind == "convergence":
        result = run_convergence(scenario)
    else:  # pragma: no cover - load_scenario rejects unknown kinds
        raise ScenarioError(f"experiment.kind: unknown kind {kind!r}")
    if out_dir is not None:
        result.write(out_dir)
    return result
