"""3D cell association: latency-optimal partitions and the max-SINR baseline.

The service box is discretized into voxels; a partition labels every voxel
with exactly one serving station.  The latency objective being minimized is

    sum_n [ max(K_n, 1) * integral_{cell n} u_n(v) f(v) dv
            + beta * K_n / C_n + g_n(beta * K_n) ],

with K_n = users * (cell n's density mass), u_n(v) the full-band packet
latency beta / (B_n log2(1 + SINR_n(v))), C_n the backhaul rate, and g_n the
compute-latency model.  The max(., 1) floor is the bandwidth-sharing guard: a
cell expected to hold fewer than one user gives a visiting user the whole
band, it does not divide by a fraction (without the floor, shipping slivers
of load to arbitrarily distant stations would look free).  The optimal
partition assigns each point to the station with the smallest marginal cost

    score_n(v) = [K_n >= 1] * A_n + (max(K_n, 1) / users) * u_n(v)
                 + beta / C_n + beta * g_n'(beta * K_n),

where A_n is the current cell's integral of u_n against the density.  The
solver iterates that rule from the max-SINR labeling, with two stabilizers:
the rule is evaluated on damped masses and cell integrals (a per-voxel,
per-station state in [0, 1] that fades a voxel's cell contribution in or out
at rate 1 - 1/t instead of switching abruptly), and every proposed relabel
passes a strict-descent guard that accepts a flip only if the exact objective
decreases, so the iteration terminates at a partition no single-voxel move
can improve.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, ComputationModel, Network, QUADRATIC_COMPUTE, sinr_map, unit_transmission_latency_map
from .geometry import VoxelGrid

# Relative slack allowed between the density's quadrature mass and 1 before a
# caller-supplied density is rejected as not normalized over the box.
DENSITY_MASS_TOLERANCE = 0.05


@dataclass(frozen=True)
class Partition:
    """A labeling of voxels to stations plus per-station expected user counts."""

    labels: np.ndarray           # (n_voxels,) station index per voxel
    masses: np.ndarray           # (n_stations,) expected users; sums to the user count
    damping: np.ndarray | None = None  # (n_stations, n_voxels) solver state in [0, 1]


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    relabel_fraction: float
    masses: np.ndarray           # damped masses used for the iteration's scores


@dataclass(frozen=True)
class ObjectiveTerms:
    """Per-station objective breakdown in seconds."""

    cell_unit_cost: np.ndarray   # integral of u_n * f over cell n (load-free)
    transmission: np.ndarray     # max(K_n, 1) * cell_unit_cost_n
    backhaul: np.ndarray         # beta * K_n / C_n
    computation: np.ndarray      # g_n(beta * K_n)
    users: float
    infinite_voxels: np.ndarray  # voxels with infinite unit cost and positive mass

    @property
    def total(self) -> float:
        return float(self.transmission.sum() + self.backhaul.sum() + self.computation.sum())

    @property
    def per_user(self) -> float:
        """Average total latency per user: objective / user count."""
        return self.total / self.users

    def split_per_user(self) -> tuple[float, float, float]:
        return (
            float(self.transmission.sum()) / self.users,
            float(self.backhaul.sum()) / self.users,
            float(self.computation.sum()) / self.users,
        )


@dataclass(frozen=True)
class AuditResult:
    satisfied_fraction: float
    violations: np.ndarray
    slack: float


class AssociationWorkspace:
    """Precomputed per-scenario arrays shared by the solver, baseline, and audits.

    Building one is the expensive step (SINR over every voxel/station pair and
    the density on the grid); reuse it across calls with the same grid,
    network, channel params, and density.
    """

    def __init__(self, grid: VoxelGrid, network: Network, params: ChannelParams, density):
        self.grid = grid
        self.network = network
        self.params = params
        centers = grid.centers
        if hasattr(density, "grid_pdf"):
            values = np.asarray(density.grid_pdf(grid), dtype=float)
        else:
            values = np.asarray(density.pdf(centers), dtype=float)
        raw_mass = float(values.sum() * grid.voxel_volume)
        if not np.isfinite(raw_mass) or abs(raw_mass - 1.0) > DENSITY_MASS_TOLERANCE:
            raise ValueError(
                f"density integrates to {raw_mass:.4g} over the box; "
                "normalize it over the domain before solving"
            )
        weights = values * grid.voxel_volume
        self.weights = weights / weights.sum()  # exact unit mass on the grid
        self.sinr = sinr_map(centers, network, params)
        self.unit_tx = unit_transmission_latency_map(centers, network, params)
        self.backhaul_rates = np.array([bs.backhaul_rate for bs in network.stations])
        self.compute_speeds = np.array([bs.compute_speed for bs in network.stations])

    @property
    def shape(self) -> tuple[int, int]:
        return self.unit_tx.shape

    def masses_from_labels(self, labels: np.ndarray, users: float) -> np.ndarray:
        n_stations = len(self.network)
        return users * np.bincount(labels, weights=self.weights, minlength=n_stations)

    def cell_unit_costs(self, labels: np.ndarray) -> np.ndarray:
        """Integral of each station's unit latency over its own cell."""
        n_voxels, n_stations = self.shape
        own = self.unit_tx[np.arange(n_voxels), labels]
        with np.errstate(invalid="ignore"):
            contrib = np.where(self.weights > 0, own * self.weights, 0.0)
        return np.bincount(labels, weights=contrib, minlength=n_stations)

    def damped_cell_unit_costs(self, damping: np.ndarray) -> np.ndarray:
        """Cell integrals against the damped soft membership (1 - damping).

        Equals cell_unit_costs(labels) whenever the damping state is the hard
        cell indicator, e.g. at the solver's first iteration and in the limit.
        """
        with np.errstate(invalid="ignore"):
            weighted = np.where(self.weights[:, None] > 0, self.unit_tx * self.weights[:, None], 0.0)
        return np.einsum("sv,vs->s", 1.0 - damping, weighted)


def _resolve_workspace(workspace, grid, network, params, density) -> AssociationWorkspace:
    if workspace is not None:
        return workspace
    return AssociationWorkspace(grid, network, params, density)


def _scores_for_rows(workspace: AssociationWorkspace, unit_tx_rows: np.ndarray,
                     masses: np.ndarray, cell_unit_cost: np.ndarray, users: float,
                     compute: ComputationModel) -> np.ndarray:
    beta = workspace.params.packet_bits
    marginal = beta * np.asarray(compute.marginal(beta * masses, workspace.compute_speeds))
    sharing = (masses >= 1.0).astype(float)
    loaded = (np.maximum(masses, 1.0) / users)[None, :] * unit_tx_rows
    return (sharing * cell_unit_cost)[None, :] + loaded \
        + (beta / workspace.backhaul_rates)[None, :] + marginal[None, :]


def association_scores(workspace: AssociationWorkspace, masses: np.ndarray,
                       cell_unit_cost: np.ndarray, users: float,
                       compute: ComputationModel = QUADRATIC_COMPUTE) -> np.ndarray:
    """Assignment score of every station at every voxel, (n_voxels, n_stations).

    Lower is better; a voxel's optimal label is the argmin row-wise.  Stations
    with infinite cell cost or unit latency score +inf at the affected voxels.

    Every term is the objective's marginal cost per expected user routed to the
    station: the cell integral (absent below the one-user floor, where extra
    load does not dilute anyone's share), the load-weighted unit latency,
    beta/C from the backhaul term, and beta * g'(beta * K) from the compute
    term (beta is the bits-per-user chain factor).
    """
    return _scores_for_rows(workspace, workspace.unit_tx, masses, cell_unit_cost, users, compute)


def prefers(workspace: AssociationWorkspace, voxel: int, candidate: int, rival: int,
            masses: np.ndarray, cell_unit_cost: np.ndarray, users: float,
            compute: ComputationModel = QUADRATIC_COMPUTE) -> bool:
    """Pairwise form of the assignment rule: does the voxel prefer `candidate`?"""
    beta = workspace.params.packet_bits
    scores = []
    for station in (candidate, rival):
        marginal = float(
            np.asarray(compute.marginal(beta * masses[station], workspace.compute_speeds[station]))
        )
        scores.append(
            (1.0 if masses[station] >= 1.0 else 0.0) * cell_unit_cost[station]
            + (max(masses[station], 1.0) / users) * workspace.unit_tx[voxel, station]
            + beta / workspace.backhaul_rates[station]
            + beta * marginal
        )
    return scores[0] <= scores[1]


def baseline_sinr_partition(grid: VoxelGrid, network: Network, density,
                            params: ChannelParams, users: float,
                            workspace: AssociationWorkspace | None = None) -> Partition:
    """Max-SINR association: every voxel goes to its strongest station.

    Ties break to the lowest station index.  Masses are accumulated from the
    density over each cell.
    """
    ws = _resolve_workspace(workspace, grid, network, params, density)
    labels = np.argmax(ws.sinr, axis=1)
    return Partition(labels=labels, masses=ws.masses_from_labels(labels, users))


def _evaluate_labels(ws: AssociationWorkspace, labels: np.ndarray, users: float,
                     compute: ComputationModel) -> ObjectiveTerms:
    beta = ws.params.packet_bits
    masses = ws.masses_from_labels(labels, users)
    cell_cost = ws.cell_unit_costs(labels)
    n_voxels = ws.shape[0]
    own = ws.unit_tx[np.arange(n_voxels), labels]
    infinite = np.flatnonzero(np.isinf(own) & (ws.weights > 0))
    # Bandwidth-sharing floor: a cell below one expected user serves at the
    # full-band latency (cell_cost is zero when the cell holds no mass at all).
    transmission = np.maximum(masses, 1.0) * cell_cost
    return ObjectiveTerms(
        cell_unit_cost=cell_cost,
        transmission=transmission,
        backhaul=beta * masses / ws.backhaul_rates,
        computation=np.asarray(compute.latency(beta * masses, ws.compute_speeds), dtype=float),
        users=users,
        infinite_voxels=infinite,
    )


def evaluate_objective(partition: Partition, grid: VoxelGrid, network: Network, density,
                       params: ChannelParams, users: float,
                       compute: ComputationModel = QUADRATIC_COMPUTE,
                       workspace: AssociationWorkspace | None = None) -> ObjectiveTerms:
    """Latency objective of a partition, broken down per station.

    Any voxel whose serving station has infinite unit latency there (zero
    SINR) makes the objective +inf and is listed in infinite_voxels.
    """
    ws = _resolve_workspace(workspace, grid, network, params, density)
    return _evaluate_labels(ws, np.asarray(partition.labels), users, compute)


class _LiveLoads:
    """Exact per-station masses and cell integrals, updated flip by flip."""

    def __init__(self, ws: AssociationWorkspace, labels: np.ndarray, users: float):
        self.ws = ws
        self.users = users
        self.masses = ws.masses_from_labels(labels, users).copy()
        self.cell_cost = ws.cell_unit_costs(labels).copy()
        with np.errstate(invalid="ignore"):
            self.unit_mass = np.where(
                ws.weights[:, None] > 0, ws.unit_tx * ws.weights[:, None], 0.0
            )

    def station_objective(self, station: int, mass: float, cost: float,
                          compute: ComputationModel) -> float:
        beta = self.ws.params.packet_bits
        load = beta * mass
        return (
            max(mass, 1.0) * cost
            + load / self.ws.backhaul_rates[station]
            + float(compute.latency(load, self.ws.compute_speeds[station]))
        )

    def try_flip(self, voxel: int, source: int, target: int, labels: np.ndarray,
                 compute: ComputationModel) -> bool:
        """Apply voxel -> target iff it strictly decreases the objective."""
        if source == target:
            return False
        moved = self.users * self.ws.weights[voxel]
        new_source_cost = self.cell_cost[source] - self.unit_mass[voxel, source]
        new_target_cost = self.cell_cost[target] + self.unit_mass[voxel, target]
        before = (
            self.station_objective(source, self.masses[source], self.cell_cost[source], compute)
            + self.station_objective(target, self.masses[target], self.cell_cost[target], compute)
        )
        after = (
            self.station_objective(source, self.masses[source] - moved, new_source_cost, compute)
            + self.station_objective(target, self.masses[target] + moved, new_target_cost, compute)
        )
        if not after < before:
            return False
        labels[voxel] = target
        self.masses[source] -= moved
        self.masses[target] += moved
        self.cell_cost[source] = new_source_cost
        self.cell_cost[target] = new_target_cost
        return True


_SWEEP_CHUNK = 4096
_SWEEP_LIMIT = 500


def _descent_relabel(ws: AssociationWorkspace, labels: np.ndarray, loads: _LiveLoads,
                     users: float, compute: ComputationModel,
                     proposal_scores: np.ndarray | None) -> int:
    """One relabel pass: propose per-voxel targets, accept strictly improving flips.

    Proposals come from the given score table (the damped assignment rule) or,
    when None, from the live-load scores per chunk.  Flips are applied in
    voxel order against the exact running loads, so every accepted move lowers
    the true objective.  Returns the number of accepted flips.
    """
    accepted = 0
    for start in range(0, labels.shape[0], _SWEEP_CHUNK):
        stop = min(start + _SWEEP_CHUNK, labels.shape[0])
        if proposal_scores is None:
            scores = _scores_for_rows(ws, ws.unit_tx[start:stop], loads.masses,
                                      loads.cell_cost, users, compute)
        else:
            scores = proposal_scores[start:stop]
        proposed = np.argmin(scores, axis=1)
        candidates = np.flatnonzero(proposed != labels[start:stop])
        for offset in candidates:
            voxel = start + int(offset)
            if loads.try_flip(voxel, int(labels[voxel]), int(proposed[offset]), labels, compute):
                accepted += 1
    return accepted


def solve_association(grid: VoxelGrid, network: Network, density, params: ChannelParams,
                      users: float, max_iters: int = 20, tol: float = 1e-4,
                      compute: ComputationModel = QUADRATIC_COMPUTE,
                      workspace: AssociationWorkspace | None = None,
                      initial_labels: np.ndarray | None = None,
                      ) -> tuple[Partition, ObjectiveTerms, list[IterationRecord]]:
    """Descent-guarded fixed-point iteration for the latency-minimal partition.

    Starts from the max-SINR labeling with damping state zero.  Each iteration
    t updates the damping state (rate 1 - 1/t; the first iteration pins it to
    the cell indicator) and evaluates the assignment rule on the damped
    masses and cell costs; the resulting relabel proposals, and then further
    live-load proposals, are swept through a strict-descent guard that accepts
    a flip only if it lowers the exact objective, updating the true masses and
    cell integrals as it goes.  Sweeps repeat until the labeling is
    single-move stable for the current loads, which makes each iteration a
    load-reconciliation step and guarantees termination (the objective
    strictly decreases with every accepted flip).  Unguarded simultaneous
    relabeling oscillates instead: a nearly-empty cell prices itself below
    every rival and the best-response dynamics never settle.

    Stops after the first iteration that relabels fewer than `tol` of the
    voxels, or after `max_iters` iterations.  Returns the final partition
    (masses recomputed from the labels), its objective breakdown, and the
    per-iteration trace (objective, relabel fraction, damped mass vector).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    ws = _resolve_workspace(workspace, grid, network, params, density)
    n_voxels, n_stations = ws.shape
    if initial_labels is None:
        labels = np.argmax(ws.sinr, axis=1)
    else:
        labels = np.asarray(initial_labels, dtype=int).copy()
        if labels.shape != (n_voxels,):
            raise ValueError("initial_labels must have one entry per voxel")
    damping = np.zeros((n_stations, n_voxels))
    station_ids = np.arange(n_stations)
    loads = _LiveLoads(ws, labels, users)
    trace: list[IterationRecord] = []

    for t in range(1, max_iters + 1):
        keep = 1.0 - 1.0 / t
        member = labels[None, :] == station_ids[:, None]
        damping = np.where(member, keep * damping, 1.0 - keep * (1.0 - damping))
        damped_masses = users * ((1.0 - damping) @ ws.weights)
        damped_cost = ws.damped_cell_unit_costs(damping)
        start_labels = labels.copy()
        proposal_scores = association_scores(ws, damped_masses, damped_cost, users, compute)
        for sweep in range(_SWEEP_LIMIT):
            accepted = _descent_relabel(ws, labels, loads, users, compute, proposal_scores)
            proposal_scores = None  # follow-up sweeps propose from the live loads
            if accepted == 0:
                break
        relabel_fraction = float(np.mean(labels != start_labels))
        objective = _evaluate_labels(ws, labels, users, compute).total
        trace.append(IterationRecord(t, objective, relabel_fraction, damped_masses.copy()))
        if relabel_fraction < tol:
            break

    partition = Partition(labels=labels, masses=ws.masses_from_labels(labels, users), damping=damping)
    return partition, _evaluate_labels(ws, labels, users, compute), trace


def audit_optimality(partition: Partition, grid: VoxelGrid, network: Network, density,
                     params: ChannelParams, users: float, slack: float = 1e-9,
                     compute: ComputationModel = QUADRATIC_COMPUTE,
                     workspace: AssociationWorkspace | None = None) -> AuditResult:
    """Post-hoc check of the optimality condition on a converged partition.

    Masses and cell costs are recomputed from the final labels (not from the
    solver's damped state), then every voxel's own score is compared against
    the best rival score with the given slack in seconds.
    """
    ws = _resolve_workspace(workspace, grid, network, params, density)
    labels = np.asarray(partition.labels)
    masses = ws.masses_from_labels(labels, users)
    cell_cost = ws.cell_unit_costs(labels)
    scores = association_scores(ws, masses, cell_cost, users, compute)
    own = scores[np.arange(ws.shape[0]), labels]
    best = scores.min(axis=1)
    bad = np.flatnonzero(~(own <= best + slack))
    return AuditResult(
        satisfied_fraction=1.0 - len(bad) / ws.shape[0],
        violations=bad,
        slack=slack,
    )


def exhaustive_minimum(grid: VoxelGrid, network: Network, density, params: ChannelParams,
                       users: float, compute: ComputationModel = QUADRATIC_COMPUTE,
                       workspace: AssociationWorkspace | None = None,
                       limit: int = 2 ** 20) -> tuple[float, np.ndarray]:
    """Exact objective minimum over every possible labeling (tiny instances only).

    Enumerates all n_stations ** n_voxels labelings in chunks; refuses
    instances beyond `limit`.  Independent of the solver: useful as a
    brute-force oracle.
    """
    ws = _resolve_workspace(workspace, grid, network, params, density)
    n_voxels, n_stations = ws.shape
    total = n_stations ** n_voxels
    if total > limit:
        raise ValueError(f"{total} labelings exceed the exhaustive-search limit {limit}")
    beta = ws.params.packet_bits
    with np.errstate(invalid="ignore"):
        unit_w = np.where(ws.weights[:, None] > 0, ws.unit_tx * ws.weights[:, None], 0.0)
    radix = n_stations ** np.arange(n_voxels, dtype=np.int64)
    best_objective = np.inf
    best_labels = None
    chunk = 4096
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        labels = (codes[:, None] // radix[None, :]) % n_stations
        onehot = (labels[:, :, None] == np.arange(n_stations)[None, None, :]).astype(float)
        mass_frac = np.einsum("cvn,v->cn", onehot, ws.weights)
        k = users * mass_frac
        cost = np.einsum("cvn,vn->cn", onehot, unit_w)
        transmission = np.maximum(k, 1.0) * cost
        objective = (
            transmission.sum(axis=1)
            + (beta * k / ws.backhaul_rates[None, :]).sum(axis=1)
            + np.asarray(compute.latency(beta * k, ws.compute_speeds[None, :])).sum(axis=1)
        )
        i = int(np.argmin(objective))
        if objective[i] < best_objective:
            best_objective = float(objective[i])
            best_labels = labels[i].copy()
    return best_objective, best_labels


def write_partition_csv(path, grid: VoxelGrid, partition: Partition) -> None:
    """Export a partition as CSV: voxel index, center coordinates, label."""
    centers = grid.centers
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["voxel", "x", "y", "z", "label"])
        for i, label in enumerate(np.asarray(partition.labels)):
            writer.writerow([i, *(repr(float(v)) for v in centers[i]), int(label)])


def solution_summary_json(partition: Partition, terms: ObjectiveTerms,
                          trace: list[IterationRecord]) -> str:
    """Summary JSON: mass vector, objective breakdown, and iteration trace."""
    payload = {
        "masses": np.asarray(partition.masses).tolist(),
        "objective": {
            "total": terms.total,
            "per_user": terms.per_user,
            "transmission": terms.transmission.tolist(),
            "backhaul": terms.backhaul.tolist(),
            "computation": terms.computation.tolist(),
            "infinite_voxels": terms.infinite_voxels.tolist(),
        },
        "trace": [
            {
                "iteration": rec.iteration,
                "objective": rec.objective,
                "relabel_fraction": rec.relabel_fraction,
                "masses": rec.masses.tolist(),
            }
            for rec in trace
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)
