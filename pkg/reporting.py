"""
Output side of the packing tools: SVG drawings of packings, CSV/JSON
exports of search results, the per-n density table, and the density-ratio
and class-bound checks run over a directory of results.
"""

import glob
import logging
import math
import os
import xml.etree.ElementTree as ET
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import utils
from geometry import penetration_depth
from packing import Configuration, contact_tolerance, violation
from reference_table import class_label, class_of, density_classes, reference_density
from symmetry import GROUP_NAMES

logger = logging.getLogger(__name__)

SVG_NS = "http://www.w3.org/2000/svg"

# Fill color of orbit copy k (operation order); documented in README.md
PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295",
)
CELL_COLOR = "#1f3fbf"
OVERLAP_COLOR = "#ff0000"
STROKE_COLOR = "#2c3e50"

# (label, n, numerator group, denominator group, target); the numerator is the
# best density over the numerator group's class
RATIO_IDENTITIES = (
    ("hexagon p2-class / p6", 6, "p2", "p6", 7.0 / 6.0),
    ("hexagon p2-class / p3m1", 6, "p2", "p3m1", 1.5),
    ("octagon p4gm-class / p4mm", 8, "p4gm", "p4mm", (3.0 + 2.0 * math.sqrt(2.0)) / 4.0),
    ("dodecagon p2mg-class / p31m", 12, "p2mg", "p31m", 2.0 * math.sqrt(3.0) / 3.0),
    ("dodecagon p2mg-class / p6mm", 12, "p2mg", "p6mm", math.sqrt(3.0)),
)

ResultKey = Tuple[str, object]


def _fmt(value: float) -> str:
    text = f"{value:.6f}"
    return "0.000000" if text == "-0.000000" else text


def _points(coords: Iterable) -> str:
    return " ".join(f"{_fmt(x)},{_fmt(-y)}" for x, y in coords)


def conventional_cell(c: Configuration) -> Optional[np.ndarray]:
    """Corners of the centered rectangular cell of cm / c2mm, else None.

    The rhombic basis vectors have equal length, so their sum and difference
    are orthogonal and span the conventional cell.
    """
    if not c.group.centered:
        return None
    a1, a2 = c.cell.basis[:, 0], c.cell.basis[:, 1]
    u, w = a1 - a2, a1 + a2
    return np.array([np.zeros(2), u, u + w, w])


def render_svg(c: Configuration, cells_x: int = 3, cells_y: int = 3,
               tau: Optional[float] = None) -> bytes:
    """
    Draw cells_x × cells_y translated copies of the orbit.

    Copies are filled by operation index, the primitive cell is outlined in
    blue (the centered cell of cm / c2mm dashed), and when the packing is
    infeasible every overlapping copy gets a red outline.

    Args:
        c: Configuration to draw
        cells_x: Cells along the first lattice vector
        cells_y: Cells along the second lattice vector
        tau: Overlap tolerance; defaults to the contact tolerance

    Returns:
        UTF-8 SVG document, byte-identical for identical input
    """
    if cells_x < 1 or cells_y < 1:
        raise ValueError(f"Need at least one cell in each direction, got {cells_x}x{cells_y}")
    tau = contact_tolerance(c.shape) if tau is None else tau
    basis = c.cell.basis
    copies = c.orbit()

    drawn = []
    for u in range(cells_x):
        for v in range(cells_y):
            shift = basis @ np.array([u, v], dtype=float)
            for k, copy in enumerate(copies):
                drawn.append((k, copy.moved(np.asarray(copy.center) + shift,
                                            None if copy.is_disc else copy.rotation)))

    overlapping = set()
    if violation(c) > tau:
        for i in range(len(drawn)):
            for j in range(i + 1, len(drawn)):
                if penetration_depth(drawn[i][1], drawn[j][1]) > tau:
                    overlapping.update((i, j))
        logger.warning(f"Render: {len(overlapping)} overlapping copies highlighted")

    cell = np.array([np.zeros(2), basis[:, 0], basis[:, 0] + basis[:, 1], basis[:, 1]])
    conventional = conventional_cell(c)
    extent = [cell]
    if conventional is not None:
        extent.append(conventional)
    radius = c.shape.circumradius
    for _, s in drawn:
        extent.append(np.array(s.center)[None, :] + radius * np.array([[-1, -1], [1, 1]]))
    extent = np.vstack(extent)
    margin = 0.05 * float((extent.max(axis=0) - extent.min(axis=0)).max()) + radius * 0.1
    lo = extent.min(axis=0) - margin
    hi = extent.max(axis=0) + margin
    width, height = hi - lo
    stroke = _fmt(0.01 * radius)

    ET.register_namespace("", SVG_NS)
    root = ET.Element("svg", {
        "xmlns": SVG_NS,
        "viewBox": f"{_fmt(lo[0])} {_fmt(-hi[1])} {_fmt(width)} {_fmt(height)}",
        "width": str(int(math.ceil(600 * width / max(width, height)))),
        "height": str(int(math.ceil(600 * height / max(width, height)))),
    })
    ET.SubElement(root, "title").text = (
        f"{c.group.name} {'disc' if c.shape.is_disc else f'{c.shape.n}-gon'} "
        f"{cells_x}x{cells_y} cells")
    shapes = ET.SubElement(root, "g", {"stroke": STROKE_COLOR, "stroke-width": stroke})
    for index, (k, s) in enumerate(drawn):
        attrs = {"fill": PALETTE[k % len(PALETTE)]}
        if index in overlapping:
            attrs.update({"stroke": OVERLAP_COLOR, "stroke-width": _fmt(0.05 * radius)})
        if s.is_disc:
            attrs.update({"cx": _fmt(s.center[0]), "cy": _fmt(-s.center[1]), "r": _fmt(radius)})
            ET.SubElement(shapes, "circle", attrs)
        else:
            attrs["points"] = _points(s.vertices)
            ET.SubElement(shapes, "polygon", attrs)

    ET.SubElement(root, "polygon", {
        "points": _points(cell), "fill": "none", "stroke": CELL_COLOR,
        "stroke-width": _fmt(0.03 * radius)})
    if conventional is not None:
        ET.SubElement(root, "polygon", {
            "points": _points(conventional), "fill": "none", "stroke": CELL_COLOR,
            "stroke-width": _fmt(0.02 * radius), "stroke-dasharray": f"{_fmt(0.1 * radius)} {_fmt(0.06 * radius)}"})
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def trace_csv(trace: pd.DataFrame) -> str:
    return trace.to_csv(index=False)


def result_record(result, group: str, n) -> dict:
    """JSON payload of one search: the certificate, its report and run data."""
    record = result.to_dict()
    record.update({"group": group, "n": "disc" if n is None else n})
    return record


def load_results(directory: str) -> Dict[ResultKey, float]:
    """
    Read every result JSON in `directory`.

    Returns:
        (group, n) -> density, with n an int or "disc"
    """
    results: Dict[ResultKey, float] = {}
    for path in sorted(glob.glob(os.path.join(directory, "*.json"))):
        try:
            data = utils.load_json(path)
            certificate = data["certificate"]
            key = (certificate["group"], certificate["n"])
            results[key] = float(data["report"]["density"])
        except (ValueError, KeyError, TypeError) as e:
            logger.warning(f"Results: skipping {path}: {e}")
    return results


def _density(value) -> float:
    if hasattr(value, "report"):
        return value.report.density
    return float(value)


def density_table(results: Mapping[ResultKey, object]) -> pd.DataFrame:
    """Wide table, groups as rows in class order and n as columns, truncated to 5 decimals."""
    columns = sorted({n for _, n in results}, key=lambda n: (n == "disc", n if n != "disc" else 0))
    order = [g for members in density_classes() for g in members]
    rows = {}
    for group in order:
        if not any((group, n) in results for n in columns):
            continue
        rows[group] = [utils.format_truncated(_density(results[(group, n)])) if (group, n) in results else ""
                       for n in columns]
    return pd.DataFrame.from_dict(rows, orient="index", columns=[str(n) for n in columns])


def compare_with_reference(results: Mapping[ResultKey, object]) -> pd.DataFrame:
    """Measured vs published densities; `published` is empty outside the table."""
    records = []
    for (group, n), value in sorted(results.items(), key=lambda item: (str(item[0][1]), item[0][0])):
        measured = _density(value)
        published = reference_density(group, n)
        records.append({
            "group": group,
            "n": n,
            "density": measured,
            "published": published,
            "delta": None if published is None else measured - published,
        })
    return pd.DataFrame.from_records(records, columns=["group", "n", "density", "published", "delta"])


def density_series(results: Mapping[ResultKey, object]) -> pd.DataFrame:
    """Density against n per group, labelled with the group's density class."""
    records = [{"group": group, "class": class_label(group), "n": n, "density": _density(value)}
               for (group, n), value in results.items() if n != "disc"]
    frame = pd.DataFrame.from_records(records, columns=["group", "class", "n", "density"])
    if frame.empty:
        return frame
    frame["group_order"] = frame["group"].map(GROUP_NAMES.index)
    frame = frame.sort_values(["group_order", "n"]).drop(columns="group_order")
    return frame.reset_index(drop=True)


def _class_best(results: Mapping[ResultKey, object], group: str, n) -> Optional[float]:
    values = [_density(results[(g, n)]) for g in class_of(group) if (g, n) in results]
    return max(values) if values else None


def ratio_report(results: Mapping[ResultKey, object], n_values: Optional[Sequence] = None) -> pd.DataFrame:
    """
    Measured density ratios against their closed-form targets.

    Args:
        results: (group name, n) -> density, report or search result
        n_values: Only check identities for these shapes (default all)

    Raises:
        ValueError: listing every missing (group, n) input
    """
    missing = []
    records = []
    for label, n, numerator_group, denominator_group, target in RATIO_IDENTITIES:
        if n_values is not None and n not in n_values:
            continue
        numerator = _class_best(results, numerator_group, n)
        if numerator is None:
            missing.append(f"{class_label(numerator_group)} n={n}")
        if (denominator_group, n) not in results:
            missing.append(f"{denominator_group} n={n}")
        if numerator is None or (denominator_group, n) not in results:
            continue
        denominator = _density(results[(denominator_group, n)])
        measured = numerator / denominator
        records.append({
            "identity": label,
            "n": n,
            "numerator": numerator,
            "denominator": denominator,
            "measured": measured,
            "target": target,
            "abs_error": abs(measured - target),
        })
    if missing:
        raise ValueError("Missing results for ratio checks: " + ", ".join(missing))
    return pd.DataFrame.from_records(records, columns=[
        "identity", "n", "numerator", "denominator", "measured", "target", "abs_error"])


def class_bound_checks(results: Mapping[ResultKey, object], tol: float = 1e-9) -> pd.DataFrame:
    """
    Structural lower bounds between groups for every n present.

    A pg packing converts to p2 and p2gg packings of equal density, and a
    centrally symmetric motif (even n, disc) turns any p1 packing into a p2
    one; so densest pg <= p2, pg <= p2gg, and p1 <= p2 for those shapes.
    """
    records = []
    for n in sorted({n for _, n in results}, key=str):
        relations = [("pg", "p2"), ("pg", "p2gg")]
        if n == "disc" or int(n) % 2 == 0:
            relations.append(("p1", "p2"))
        for lhs, rhs in relations:
            if (lhs, n) not in results or (rhs, n) not in results:
                continue
            left, right = _density(results[(lhs, n)]), _density(results[(rhs, n)])
            records.append({"n": n, "relation": f"{lhs} <= {rhs}", "lhs": left, "rhs": right,
                            "holds": bool(left <= right + tol)})
    return pd.DataFrame.from_records(records, columns=["n", "relation", "lhs", "rhs", "holds"])
