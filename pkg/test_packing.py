import math

import numpy as np
import pytest

import utils
from geometry import diameter, make_disc, make_regular_ngon, min_width
from packing import (CERTIFICATE_KEYS, Configuration, DegenerateCellError, density,
                     estimate_density_mc, evaluate_batch, neighbor_pairs, neighbor_reach, verify,
                     violation)
from symmetry import CellParams, decode_batch, dof_layout, get_group


def test_hexagonal_tiling_is_exact(hex_tiling):
    report = verify(hex_tiling)
    assert report.feasible
    assert report.density == pytest.approx(1.0, abs=1e-9)
    assert report.violation <= 1e-9
    assert report.contacts == 3
    assert report.coordination == 6.0


def test_square_tiling_is_exact(square_tiling):
    report = verify(square_tiling)
    assert report.feasible
    assert report.density == pytest.approx(1.0, abs=1e-9)
    # two edge neighbours and two corner neighbours per half plane
    assert report.contacts == 4


def test_triangular_disc_lattice(disc_lattice):
    report = verify(disc_lattice)
    assert report.feasible
    assert report.density == pytest.approx(math.pi / math.sqrt(12.0), abs=1e-9)
    assert report.coordination == 6.0


def test_shrunk_cell_is_infeasible(hex_tiling):
    shrunk = hex_tiling.with_cell(a=hex_tiling.cell.a * 0.99, b=hex_tiling.cell.b * 0.99)
    report = verify(shrunk)
    assert not report.feasible
    assert report.violation > 0
    assert report.density > 1.0


def test_coincident_copies_in_p2():
    pentagon = make_regular_ngon(5)
    c = Configuration(get_group("p2"), CellParams(10.0, 10.0, math.pi / 2), (0.0, 0.0), 0.0, pentagon)
    assert violation(c) >= 0.5 * diameter(pentagon)


def test_violation_grows_as_cell_shrinks(disc_lattice):
    values = [violation(disc_lattice.with_cell(a=2.0 * f, b=2.0 * f)) for f in (1.0, 0.98, 0.95, 0.9)]
    assert values[0] == pytest.approx(0.0, abs=1e-12)
    assert all(later >= earlier for earlier, later in zip(values, values[1:]))
    assert values[-1] > 0


def test_density_is_scale_invariant(hex_tiling):
    assert density(hex_tiling.scaled(2.5)) == pytest.approx(density(hex_tiling), rel=1e-12)
    assert verify(hex_tiling.scaled(2.5)).feasible


def test_degenerate_cell():
    c = Configuration(get_group("p1"), CellParams(0.0, 1.0, math.pi / 2), (0.0, 0.0), 0.0,
                      make_regular_ngon(4))
    with pytest.raises(DegenerateCellError):
        density(c)
    assert issubclass(DegenerateCellError, ValueError)


def test_negative_tau_rejected(square_tiling):
    with pytest.raises(ValueError):
        verify(square_tiling, tau=-1.0)


def test_cell_must_match_crystal_system():
    with pytest.raises(ValueError):
        Configuration(get_group("p4"), CellParams(1.0, 2.0, math.pi / 2), (0.0, 0.0), 0.0,
                      make_regular_ngon(4))


class TestCertificate:
    def test_round_trip(self, hex_tiling):
        data = hex_tiling.to_certificate()
        assert set(data) == set(CERTIFICATE_KEYS)
        again = Configuration.from_certificate(data)
        assert density(again) == density(hex_tiling)
        assert verify(again).feasible

    def test_disc_certificate(self, disc_lattice):
        data = disc_lattice.to_certificate()
        assert data["n"] == "disc"
        assert Configuration.from_certificate(data).shape.is_disc

    def test_truncated_values_snap_to_constraints(self):
        data = {"group": "p6", "n": 6, "circumradius": 1.0, "a": 1.7320508, "b": 1.73205081,
                "gamma_rad": 2.0943951, "frac_x": 0.0, "frac_y": 0.0, "rotation_rad": 0.0}
        c = Configuration.from_certificate(data)
        assert c.cell.b == c.cell.a
        assert c.cell.gamma == pytest.approx(2 * math.pi / 3)

    def test_missing_key(self, hex_tiling):
        data = hex_tiling.to_certificate()
        del data["gamma_rad"]
        with pytest.raises(ValueError, match="gamma_rad"):
            Configuration.from_certificate(data)

    def test_constraint_violation(self):
        data = {"group": "p4", "n": 4, "circumradius": 1.0, "a": 1.0, "b": 1.5,
                "gamma_rad": math.pi / 2, "frac_x": 0.0, "frac_y": 0.0, "rotation_rad": 0.0}
        with pytest.raises(ValueError):
            Configuration.from_certificate(data)


def test_neighbor_pair_count():
    i, j, offsets = neighbor_pairs(2, 5)
    assert len(i) == 1 + 12 * 4
    assert offsets.shape == (49, 2)
    with pytest.raises(ValueError):
        neighbor_pairs(2, 4)


def test_batch_matches_single_evaluation():
    group = get_group("p2gg")
    layout = dof_layout(group, 5)
    rng = np.random.default_rng(1)
    poses = decode_batch(rng.uniform(0, 2 * math.pi, (50, layout.count)), layout)
    densities, violations = evaluate_batch(group, layout.shape, poses)
    for k in (0, 17, 49):
        c = Configuration.from_batch(group, layout.shape, poses, k)
        assert density(c) == pytest.approx(densities[k], rel=1e-12)
        assert violation(c) == pytest.approx(violations[k], rel=1e-9, abs=1e-12)


def test_monte_carlo_density(disc_lattice):
    estimate = estimate_density_mc(disc_lattice, samples=90_000, seed=2)
    assert estimate == pytest.approx(math.pi / math.sqrt(12.0), abs=2e-3)


def test_monte_carlo_density_of_overlap_free_pentagons():
    pentagon = make_regular_ngon(5)
    c = Configuration(get_group("p2"), CellParams(3.0, 3.5, 1.4), (0.25, 0.25), 0.1, pentagon)
    assert verify(c).feasible
    assert estimate_density_mc(c, samples=90_000, seed=4) == pytest.approx(density(c), abs=2e-3)


def test_neighbor_pairs_per_axis():
    i, _, offsets = neighbor_pairs(2, (3, 5))
    assert len(i) == 1 + 7 * 4
    assert set(map(tuple, offsets[1:].astype(int))) == {(0, 1), (0, 2)} | {(1, v) for v in range(-2, 3)}
    with pytest.raises(ValueError):
        neighbor_pairs(1, (3, 4))


def test_neighbor_reach_follows_cell_heights():
    assert neighbor_reach(1.0, 1.0, math.pi / 2, 2.0) == (3, 3)
    assert neighbor_reach(2.0, 2.0, math.pi / 3, 2.0) == (2, 2)
    # heights a·sinγ = 3.47 and b·sinγ = 0.858
    assert neighbor_reach(6.928, 1.7104, 2.6163, 2.0) == (1, 3)
    assert neighbor_reach(np.array([1.0, 4.0]), np.array([4.0, 1.0]), np.full(2, math.pi / 2), 2.0) == (3, 3)


def test_overlap_beyond_two_cells_detected():
    triangle = make_regular_ngon(3)
    c = Configuration(get_group("p2"), CellParams(6.928094573924308, 1.7104004399547927, 2.616312469037845),
                      (0.28118, 0.89810), 1.66401, triangle)
    report = verify(c)
    assert not report.feasible
    assert report.violation > 0
    assert violation(c) == pytest.approx(violation(c, block=15), abs=1e-12)


def test_thin_cell_disc_overlap():
    # 3·a2 - a1 = (1.5, 0.3) is a lattice vector shorter than the disc diameter
    a2 = np.array([23.0 / 6.0, 0.1])
    cell = CellParams(10.0, float(np.hypot(*a2)), float(np.arctan2(a2[1], a2[0])))
    c = Configuration(get_group("p1"), cell, (0.0, 0.0), 0.0, make_disc(1.0))
    assert violation(c) >= 2.0 - math.hypot(1.5, 0.3)
    assert not verify(c).feasible


@pytest.mark.parametrize("name, n", [("p1", 3), ("p2", 3), ("p2", 4), ("cm", 3), ("c2mm", 4), ("pg", 5)])
def test_violation_independent_of_block(name, n):
    group = get_group(name)
    shape = make_regular_ngon(n)
    rng = np.random.default_rng(21)
    layouts = [dof_layout(group, n),
               dof_layout(group, n, lengths=(min_width(shape), 8.0), gamma=(0.3, math.pi - 0.3))]
    for layout in layouts:
        poses = decode_batch(rng.uniform(0, 2 * math.pi, (200, layout.count)), layout)
        _, default = evaluate_batch(group, shape, poses)
        _, seven = evaluate_batch(group, shape, poses, block=7)
        _, wide = evaluate_batch(group, shape, poses, block=15)
        assert np.allclose(default, seven, rtol=1e-12, atol=1e-12)
        assert np.allclose(default, wide, rtol=1e-12, atol=1e-12)


def _rebased(c, m):
    """The same packing described by the basis B·m, rotated so its first vector lies on the x-axis."""
    m = np.asarray(m, dtype=float)
    basis = c.cell.basis @ m
    (x0, y0), (x1, y1) = basis[:, 0], basis[:, 1]
    phi = math.atan2(y0, x0)
    gamma = math.atan2(x0 * y1 - y0 * x1, x0 * x1 + y0 * y1)
    frac = np.linalg.solve(m, np.asarray(c.centroid))
    return Configuration(c.group, CellParams(math.hypot(x0, y0), math.hypot(x1, y1), gamma),
                         (float(frac[0]), float(frac[1])), c.motif_rotation - phi, c.shape)


UNIMODULAR = [((1, 1), (0, 1)), ((2, 1), (1, 1)), ((1, 0), (-3, 1)), ((1, 0), (5, 1))]


@pytest.mark.parametrize("m", UNIMODULAR)
@pytest.mark.parametrize("scale", [1.0, 0.9])
def test_density_and_violation_invariant_under_rebasing(m, scale):
    pentagon = make_regular_ngon(5)
    c = Configuration(get_group("p2"), CellParams(3.0 * scale, 3.5 * scale, 1.4), (0.25, 0.3), 0.1, pentagon)
    other = _rebased(c, m)
    assert density(other) == pytest.approx(density(c), rel=1e-12)
    assert violation(other) == pytest.approx(violation(c), rel=1e-9, abs=1e-9)
    assert verify(other).feasible == verify(c).feasible


def test_monte_carlo_density_of_thin_cell(hex_tiling):
    thin = _rebased(hex_tiling, ((1, 0), (5, 1)))
    assert thin.cell.b * math.sin(thin.cell.gamma) < 0.5
    assert verify(thin).feasible
    assert estimate_density_mc(thin, samples=40_000, seed=6) == pytest.approx(1.0, abs=2e-3)


def test_certificate_survives_json(tmp_path):
    group = get_group("p2gg")
    layout = dof_layout(group, 7)
    poses = decode_batch(np.random.default_rng(8).uniform(0, 2 * math.pi, (1, layout.count)), layout)
    c = Configuration.from_batch(group, layout.shape, poses, 0)
    path = str(tmp_path / "cert.json")
    utils.save_json(path, c.to_certificate())
    again = Configuration.from_certificate(utils.load_json(path))
    assert density(again) == pytest.approx(density(c), rel=0.0, abs=1e-12)
    assert violation(again) == pytest.approx(violation(c), abs=1e-12)
