"""Integer frequency reuse planning for the truncated-octahedron deployment.

A reuse factor q is feasible when a cluster of q cells can itself be tiled as
one larger truncated octahedron.  Writing the coupling form of an integer
triple t as

    F(t) = 3 (t1^2 + t2^2 + t3^2) - 2 (t1 t2 + t1 t3 + t2 t3),

both of the following must hold for the same positive integer q:

    q^2 = F(n)^3 / 27    (co-channel neighbor across a hexagonal face)
    q^2 = F(m)^3 / 64    (co-channel neighbor across a square face)

with reuse distances D_l = R sqrt(2 F(n)) and D_u = R sqrt(2 F(m)), so that
(D_l / (sqrt(6) R))^3 = (D_u / (2 sqrt(2) R))^3 = q.  All feasibility checks
run in exact integer arithmetic.

For q > 1, stations are colored into q co-channel groups by their index
triple's residue class modulo the sublattice spanned by the cyclic
permutations of the hex witness triple.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .lattice import BasePosition, INDEX_TO_CARTESIAN


@dataclass(frozen=True)
class ReuseSolution:
    """One feasible reuse factor with its witness triples and reuse distances."""

    factor: int
    hex_triple: tuple[int, int, int]
    square_triple: tuple[int, int, int]
    hex_reuse_distance: float     # D_l, meters (for the given edge length)
    square_reuse_distance: float  # D_u, meters
    edge_length: float


def coupling_form(triple) -> int:
    """3*sum(t_i^2) - 2*sum_{i<j}(t_i t_j), exact integer."""
    t1, t2, t3 = (int(v) for v in triple)
    return 3 * (t1 * t1 + t2 * t2 + t3 * t3) - 2 * (t1 * t2 + t1 * t3 + t2 * t3)


def _reuse_factor(form: int, divisor: int) -> int | None:
    """Positive integer q with q^2 = form^3 / divisor, or None."""
    if form <= 0:
        return None
    cube = form ** 3
    if cube % divisor != 0:
        return None
    square = cube // divisor
    q = math.isqrt(square)
    if q * q != square or q < 1:
        return None
    return q


def _canonical_witnesses(search_bound: int, divisor: int) -> dict[int, tuple[int, int, int]]:
    """Map q -> canonical witness triple for one branch of the feasibility system.

    Canonical = smallest squared norm, then lexicographically largest, which
    picks (1,0,0) / (1,1,0) style representatives.
    """
    witnesses: dict[int, tuple[int, int, int]] = {}
    span = range(-search_bound, search_bound + 1)
    for triple in itertools.product(span, repeat=3):
        q = _reuse_factor(coupling_form(triple), divisor)
        if q is None:
            continue
        norm = sum(v * v for v in triple)
        best = witnesses.get(q)
        if best is not None:
            best_norm = sum(v * v for v in best)
            if (best_norm, tuple(-v for v in best)) <= (norm, tuple(-v for v in triple)):
                continue
        witnesses[q] = triple
    return witnesses


def enumerate_reuse_factors(q_max: int, search_bound: int = 5, edge_length: float = 1.0) -> list[ReuseSolution]:
    """All feasible reuse factors q <= q_max with witnesses in [-bound, bound]^3.

    A factor is reported only if both branches of the feasibility system admit
    a witness for the same q.  Returns solutions sorted by q; empty list when
    none exist within the search bound.
    """
    if q_max < 1:
        raise ValueError("q_max must be a positive integer")
    if search_bound < 1:
        raise ValueError("search_bound must be a positive integer")
    hex_wit = _canonical_witnesses(search_bound, 27)
    sq_wit = _canonical_witnesses(search_bound, 64)
    solutions = []
    for q in sorted(set(hex_wit) & set(sq_wit)):
        if q > q_max:
            continue
        n = hex_wit[q]
        m = sq_wit[q]
        d_l = edge_length * math.sqrt(2.0 * coupling_form(n))
        d_u = edge_length * math.sqrt(2.0 * coupling_form(m))
        solutions.append(ReuseSolution(q, n, m, d_l, d_u, edge_length))
    return solutions


def _cyclic_permutation_basis(triple) -> np.ndarray:
    t1, t2, t3 = triple
    return np.array([[t1, t2, t3], [t3, t1, t2], [t2, t3, t1]], dtype=np.int64)


def _adjugate(mat: np.ndarray) -> np.ndarray:
    cof = np.empty((3, 3), dtype=np.int64)
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(mat, i, axis=0), j, axis=1)
            cof[i, j] = (-1) ** (i + j) * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
    return cof.T


def _infer_index_step(positions: list[BasePosition]) -> float:
    """Infer sqrt(2)*R from positions and verify all of them fit one lattice."""
    base = positions[0]
    step = None
    for p in positions[1:]:
        didx = np.asarray(p.index_triple) - np.asarray(base.index_triple)
        offset = INDEX_TO_CARTESIAN @ didx.astype(float)
        norm = np.linalg.norm(offset)
        if norm > 0:
            step = float(np.linalg.norm(p.position - base.position) / norm)
            break
    if step is None:
        raise ValueError("cannot infer lattice scale: all index triples coincide")
    for p in positions:
        didx = np.asarray(p.index_triple) - np.asarray(base.index_triple)
        expect = base.position + step * (INDEX_TO_CARTESIAN @ didx.astype(float))
        if not np.allclose(expect, p.position, rtol=1e-9, atol=1e-6):
            raise ValueError("positions do not lie on a single lattice (mismatched spec)")
    return step


def cochannel_groups(solution: ReuseSolution, positions: list[BasePosition]) -> list[list[int]]:
    """Partition station indices into co-channel groups for the reuse factor.

    q=1 puts every station in one group.  For q>1, stations share a group when
    their index triples differ by an element of the sublattice spanned by the
    cyclic permutations of the hex witness; that sublattice has index exactly
    q, so at most q groups appear.  Groups are ordered by their lowest station
    index.
    """
    if not positions:
        raise ValueError("position list is empty")
    _infer_index_step(positions)
    if solution.factor == 1:
        return [list(range(len(positions)))]

    basis = _cyclic_permutation_basis(solution.hex_triple)
    det = int(round(np.linalg.det(basis.astype(float))))
    if det == 0:
        raise ValueError(f"witness {solution.hex_triple} spans a degenerate sublattice")
    if abs(det) != solution.factor:
        raise ValueError(
            f"witness {solution.hex_triple} spans a sublattice of index {abs(det)}, "
            f"not {solution.factor}"
        )
    adj = _adjugate(basis)
    groups: dict[tuple[int, int, int], list[int]] = {}
    for i, p in enumerate(positions):
        idx = np.asarray(p.index_triple, dtype=np.int64)
        key = tuple((adj @ idx) % abs(det))
        groups.setdefault(key, []).append(i)
    return sorted(groups.values(), key=lambda members: members[0])


def cochannel_set(solution: ReuseSolution, reference: BasePosition, positions: list[BasePosition]) -> list[int]:
    """Indices of stations sharing the reference station's frequency band."""
    groups = cochannel_groups(solution, positions)
    ref_index = None
    for i, p in enumerate(positions):
        if p.index_triple == reference.index_triple:
            ref_index = i
            break
    if ref_index is None:
        raise ValueError("reference station is not in the deployment (mismatched spec)")
    for members in groups:
        if ref_index in members:
            return [i for i in members if i != ref_index]
    raise AssertionError("groups do not cover the deployment")


def frequency_plan_json(solution: ReuseSolution, groups: list[list[int]]) -> str:
    """Serialize a reuse plan as JSON: {q, witnesses, groups}."""
    payload = {
        "q": solution.factor,
        "witnesses": {
            "hex": list(solution.hex_triple),
            "square": list(solution.square_triple),
        },
        "reuse_distances": {
            "hex": solution.hex_reuse_distance,
            "square": solution.square_reuse_distance,
        },
        "edge_length": solution.edge_length,
        "groups": groups,
    }
    return json.dumps(payload, indent=2, sort_keys=True)
