import json
import math

import numpy as np
import pytest

from aether3d.lattice import LatticeSpec, first_tier_offsets, generate_positions
from aether3d.spectrum import (
    ReuseSolution,
    cochannel_groups,
    cochannel_set,
    coupling_form,
    enumerate_reuse_factors,
    frequency_plan_json,
)


def test_factor_one_witnesses():
    sols = {s.factor: s for s in enumerate_reuse_factors(q_max=1)}
    assert sols[1].hex_triple == (1, 0, 0)
    assert sols[1].square_triple == (1, 1, 0)


def test_factor_eight_witnesses():
    sols = {s.factor: s for s in enumerate_reuse_factors(q_max=8)}
    assert sols[8].hex_triple == (2, 0, 0)
    assert sols[8].square_triple == (2, 2, 0)


def test_feasibility_is_exact_integer_arithmetic():
    for sol in enumerate_reuse_factors(q_max=64):
        hex_form = coupling_form(sol.hex_triple)
        square_form = coupling_form(sol.square_triple)
        assert hex_form ** 3 == 27 * sol.factor ** 2
        assert square_form ** 3 == 64 * sol.factor ** 2


def test_factors_are_cubes_within_bound():
    factors = [s.factor for s in enumerate_reuse_factors(q_max=200, search_bound=6)]
    assert factors == [1, 8, 27, 64, 125]


def test_reuse_distance_cube_law():
    for sol in enumerate_reuse_factors(q_max=64, edge_length=400.0):
        assert (sol.hex_reuse_distance / (math.sqrt(6) * 400.0)) ** 3 == pytest.approx(
            sol.factor, rel=1e-9
        )
        assert (sol.square_reuse_distance / (2 * math.sqrt(2) * 400.0)) ** 3 == pytest.approx(
            sol.factor, rel=1e-9
        )


def test_invalid_inputs_rejected():
    with pytest.raises(ValueError):
        enumerate_reuse_factors(q_max=0)
    with pytest.raises(ValueError):
        enumerate_reuse_factors(q_max=1, search_bound=0)


def _default_positions(edge=400.0):
    return generate_positions(LatticeSpec(edge_length=edge, reference=(0.0, 0.0, 0.0)))


def test_factor_one_interferes_with_everyone():
    positions = _default_positions()
    sol = enumerate_reuse_factors(q_max=1, edge_length=400.0)[0]
    others = cochannel_set(sol, positions[0], positions)
    assert others == list(range(1, 18))


def test_first_tier_cochannel_offsets_include_unit_step():
    # for reuse factor one, the nearest co-channel cells are the face neighbors
    offsets = first_tier_offsets(400.0)
    step = np.sqrt(2.0) * 400.0 * np.array([1.0, -1.0, 1.0])
    assert any(np.allclose(o, step) for o in offsets)


def test_published_cochannel_offset_table_matches_lattice():
    # 16-column reference table for a unit-edge reference cell at the origin;
    # two columns are duplicates, leaving the 14 face neighbors.
    columns = np.sqrt(2.0) * np.array([
        (1, -1, 1), (1, 1, -1), (-1, 1, 1), (1, 1, -1), (1, 1, 1), (-1, -1, -1),
        (-1, 1, -1), (-1, -1, 1), (1, -1, -1), (-1, -1, 1),
        (2, 0, 0), (0, 2, 0), (0, 0, 2), (-2, 0, 0), (0, -2, 0), (0, 0, -2),
    ], dtype=float)
    distinct = {tuple(np.round(c, 9)) for c in columns}
    assert len(distinct) == 14
    ours = {tuple(np.round(o, 9)) for o in first_tier_offsets(1.0)}
    assert distinct == ours


def test_factor_eight_groups_cover_and_respect_reuse_distance():
    positions = _default_positions()
    sol = next(s for s in enumerate_reuse_factors(q_max=8, edge_length=400.0) if s.factor == 8)
    groups = cochannel_groups(sol, positions)
    flat = sorted(i for g in groups for i in g)
    assert flat == list(range(18))
    assert len(groups) <= 8
    pts = np.array([p.position for p in positions])
    floor = min(sol.hex_reuse_distance, sol.square_reuse_distance) - 1e-6
    for members in groups:
        for i in members:
            for j in members:
                if i < j:
                    assert np.linalg.norm(pts[i] - pts[j]) >= floor


def test_factor_27_groups_respect_reuse_distance_on_larger_patch():
    spec = LatticeSpec(100.0, (0, 0, 0), (-3, 3), (-3, 3), (-3, 3))
    positions = generate_positions(spec)
    sol = next(s for s in enumerate_reuse_factors(q_max=27, edge_length=100.0) if s.factor == 27)
    groups = cochannel_groups(sol, positions)
    assert len(groups) == 27
    pts = np.array([p.position for p in positions])
    floor = min(sol.hex_reuse_distance, sol.square_reuse_distance) - 1e-6
    for members in groups:
        for i in members:
            for j in members:
                if i < j:
                    assert np.linalg.norm(pts[i] - pts[j]) >= floor


def test_cochannel_set_excludes_reference():
    positions = _default_positions()
    sol = next(s for s in enumerate_reuse_factors(q_max=8, edge_length=400.0) if s.factor == 8)
    groups = cochannel_groups(sol, positions)
    ref = positions[5]
    others = cochannel_set(sol, ref, positions)
    assert 5 not in others
    group_of_5 = next(g for g in groups if 5 in g)
    assert sorted(others + [5]) == sorted(group_of_5)


def test_mismatched_lattice_rejected():
    positions = _default_positions()
    corrupted = list(positions)
    bad = corrupted[3]
    corrupted[3] = type(bad)(bad.index_triple, bad.position + np.array([10.0, 0.0, 0.0]))
    sol = enumerate_reuse_factors(q_max=1, edge_length=400.0)[0]
    with pytest.raises(ValueError, match="mismatched"):
        cochannel_set(sol, corrupted[0], corrupted)


def test_unknown_reference_rejected():
    positions = _default_positions()
    sol = enumerate_reuse_factors(q_max=1, edge_length=400.0)[0]
    stranger = type(positions[0])((9, 9, 9), (1.0, 2.0, 3.0))
    with pytest.raises(ValueError, match="mismatched"):
        cochannel_set(sol, stranger, positions)


def test_frequency_plan_json_shape():
    positions = _default_positions()
    sol = next(s for s in enumerate_reuse_factors(q_max=8, edge_length=400.0) if s.factor == 8)
    groups = cochannel_groups(sol, positions)
    payload = json.loads(frequency_plan_json(sol, groups))
    assert payload["q"] == 8
    assert payload["witnesses"]["hex"] == [2, 0, 0]
    assert payload["witnesses"]["square"] == [2, 2, 0]
    assert sorted(i for g in payload["groups"] for i in g) == list(range(18))
