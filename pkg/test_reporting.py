import math
import xml.etree.ElementTree as ET

import pandas as pd
import pytest

import utils
from geometry import make_regular_ngon
from packing import Configuration
from reference_table import COLUMNS, class_label, density_classes, reference_density
from reporting import (CELL_COLOR, OVERLAP_COLOR, PALETTE, class_bound_checks, compare_with_reference,
                       density_series, density_table, load_results, ratio_report, render_svg)
from symmetry import GROUP_NAMES, CellParams, get_group

NS = {"svg": "http://www.w3.org/2000/svg"}


def _published(n_values=COLUMNS, groups=GROUP_NAMES):
    return {(g, n): reference_density(g, n) for g in groups for n in n_values}


def _fills(svg):
    root = ET.fromstring(svg)
    shapes = root.findall("svg:g/svg:polygon", NS) + root.findall("svg:g/svg:circle", NS)
    return root, {s.get("fill") for s in shapes}


class TestRenderSvg:
    def test_deterministic_and_parseable(self, hex_tiling):
        first = render_svg(hex_tiling)
        assert first == render_svg(hex_tiling)
        assert first.startswith(b"<?xml")
        root = ET.fromstring(first)
        assert root.find("svg:title", NS).text == "p1 6-gon 3x3 cells"

    def test_single_orbit_copy_uses_one_color(self, square_tiling):
        root, fills = _fills(render_svg(square_tiling, 2, 4))
        assert fills == {PALETTE[0]}
        assert len(root.findall("svg:g/svg:polygon", NS)) == 8
        cells = [p for p in root.findall("svg:polygon", NS) if p.get("stroke") == CELL_COLOR]
        assert len(cells) == 1

    def test_colors_follow_operation_index(self):
        c = Configuration(get_group("p2mm"), CellParams(4.0, 5.0, math.pi / 2), (0.25, 0.25), 0.0,
                          make_regular_ngon(5))
        _, fills = _fills(render_svg(c, 1, 1))
        assert fills == set(PALETTE[:4])

    @pytest.mark.parametrize("name", ["cm", "c2mm"])
    def test_centered_cell_is_dashed(self, name):
        c = Configuration(get_group(name), CellParams(3.0, 3.0, 1.2), (0.2, 0.1), 0.0,
                          make_regular_ngon(5))
        root = ET.fromstring(render_svg(c, 1, 1))
        dashed = [p for p in root.findall("svg:polygon", NS) if p.get("stroke-dasharray")]
        assert len(dashed) == 1

    def test_overlaps_outlined_in_red(self, hex_tiling):
        shrunk = hex_tiling.with_cell(a=1.6, b=1.6)
        root = ET.fromstring(render_svg(shrunk, 2, 2))
        assert any(p.get("stroke") == OVERLAP_COLOR for p in root.findall("svg:g/svg:polygon", NS))
        root = ET.fromstring(render_svg(hex_tiling, 2, 2))
        assert not any(p.get("stroke") == OVERLAP_COLOR for p in root.iter())

    def test_disc_drawn_as_circles(self, disc_lattice):
        root = ET.fromstring(render_svg(disc_lattice, 2, 2))
        assert len(root.findall("svg:g/svg:circle", NS)) == 4

    def test_cell_count_validated(self, hex_tiling):
        with pytest.raises(ValueError):
            render_svg(hex_tiling, 0, 2)


class TestReferenceTable:
    def test_lookups(self):
        assert reference_density("p2", 5) == 0.92131
        assert reference_density("P6MM", "disc") == 0.486
        assert reference_density("p6mm", None) == 0.486
        assert reference_density("p1", 30) is None
        with pytest.raises(ValueError):
            reference_density("p7", 5)

    def test_classes_partition_groups(self):
        members = [g for cls in density_classes() for g in cls]
        assert sorted(members) == sorted(GROUP_NAMES)
        assert class_label("pg") == "p2-class"
        assert class_label("p6") == "p6-class"


class TestChecks:
    def test_ratio_identities_on_published_values(self):
        report = ratio_report(_published([6, 8, 12]))
        assert len(report) == 5
        assert (report["abs_error"] < 1e-4).all()

    def test_ratio_uses_best_of_class(self):
        results = _published([6, 8, 12])
        results[("p2", 6)] = 0.5
        report = ratio_report(results)
        # p2gg and pg still carry the hexagon tiling
        assert report.loc[0, "numerator"] == pytest.approx(0.99999)

    def test_ratio_restricted_to_shapes(self):
        results = _published([6, 8])
        report = ratio_report(results, n_values=[6, 8])
        assert list(report["n"]) == [6, 6, 8]

    def test_ratio_missing_inputs_listed(self):
        results = _published([6, 8, 12])
        del results[("p31m", 12)]
        del results[("p4mm", 8)]
        with pytest.raises(ValueError, match="p4mm n=8, p31m n=12"):
            ratio_report(results)

    def test_class_bounds_hold_on_published_values(self):
        checks = class_bound_checks(_published())
        assert checks["holds"].all()
        # pg <= p2 and pg <= p2gg for every column, plus p1 <= p2 for even n and disc
        assert len(checks) == 2 * 24 + 12

    def test_class_bound_violation_detected(self):
        checks = class_bound_checks({("pg", 5): 0.93, ("p2", 5): 0.92, ("p1", 5): 0.95})
        assert list(checks["relation"]) == ["pg <= p2"]
        assert not checks["holds"].any()


class TestTables:
    def test_density_table_truncates(self):
        results = {("p2", 5): 0.921319, ("pg", 5): 0.9213, ("p2", "disc"): math.pi / math.sqrt(12.0)}
        table = density_table(results)
        assert list(table.columns) == ["5", "disc"]
        assert list(table.index) == ["p2", "pg"]
        assert table.loc["p2", "5"] == "0.92131"
        assert table.loc["p2", "disc"] == "0.90689"
        assert table.loc["pg", "disc"] == ""

    def test_comparison_with_published(self):
        frame = compare_with_reference({("p2", 5): 0.92, ("p1", 40): 0.9})
        row = frame[frame["group"] == "p2"].iloc[0]
        assert row["delta"] == pytest.approx(0.92 - 0.92131)
        assert pd.isna(frame[frame["group"] == "p1"].iloc[0]["published"])

    def test_density_series_labels(self):
        frame = density_series({("p4", 6): 0.8, ("p2", 7): 0.89, ("p2", 5): 0.92, ("p2", "disc"): 0.9})
        assert list(frame["group"]) == ["p2", "p2", "p4"]
        assert list(frame["n"]) == [5, 7, 6]
        assert list(frame["class"]) == ["p2-class", "p2-class", "p2mg-class"]


def test_load_results(tmp_path, hex_tiling):
    record = {"certificate": hex_tiling.to_certificate(), "report": {"density": 1.0}}
    utils.save_json(str(tmp_path / "p1_6.json"), record)
    (tmp_path / "broken.json").write_text("{not json")
    (tmp_path / "p1_6_trace.csv").write_text("round\n0\n")
    assert load_results(str(tmp_path)) == {("p1", 6): 1.0}


@pytest.mark.parametrize("value, expected", [
    (0.921319, 0.92131), (0.99999999999, 0.99999), (1.0, 1.0), (0.486, 0.486), (-0.123456, -0.12345),
])
def test_truncate(value, expected):
    assert utils.truncate(value) == pytest.approx(expected, abs=1e-12)
