"""
Packing evaluation: density, overlap violation and feasibility of a
single-orbit periodic configuration.

A configuration places one motif in the primitive cell of a plane group; the
packing is its orbit under the group. Violation sums penetration depths of
every orbit copy in the central cell against the copies in the surrounding
block of cells, each unordered pair (modulo lattice translation) once.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

import config
from geometry import (Shape, area, diameter, make_disc, make_regular_ngon, pair_depths,
                      to_shapely, TWO_PI)
from symmetry import (CellParams, PlaneGroupSpec, PoseBatch, cartesian_ops, cell_basis,
                      check_cell, constrain_cell, expand_orbit, get_group, orbit_fractional)

CERTIFICATE_KEYS = ("group", "n", "circumradius", "a", "b", "gamma_rad",
                    "frac_x", "frac_y", "rotation_rad")


class DegenerateCellError(ValueError):
    """Raised when a cell has non-positive area."""


def _check_cells(a, b, gamma) -> np.ndarray:
    cell_area = np.asarray(a * b * np.sin(gamma), dtype=float)
    bad = ~(np.asarray(a) > 0) | ~(np.asarray(b) > 0) | ~(cell_area > 0)
    if np.any(bad):
        raise DegenerateCellError(
            f"Degenerate cell: a={np.asarray(a)[bad]!r}, b={np.asarray(b)[bad]!r}, "
            f"gamma={np.asarray(gamma)[bad]!r}")
    return cell_area


@dataclass(frozen=True)
class Configuration:
    group: PlaneGroupSpec
    cell: CellParams
    centroid: Tuple[float, float]
    motif_rotation: float
    shape: Shape

    def __post_init__(self):
        check_cell(self.group, self.cell)
        cx, cy = (float(v) % 1.0 for v in self.centroid)
        object.__setattr__(self, "centroid", (cx if cx < 1.0 else 0.0, cy if cy < 1.0 else 0.0))
        rotation = 0.0 if self.shape.is_disc else float(self.motif_rotation) % (TWO_PI / self.shape.n)
        object.__setattr__(self, "motif_rotation", rotation)

    @property
    def n(self) -> Optional[int]:
        return None if self.shape.is_disc else self.shape.n

    @classmethod
    def from_batch(cls, group: PlaneGroupSpec, shape: Shape, poses: PoseBatch, index: int):
        return cls(group,
                   CellParams(float(poses.a[index]), float(poses.b[index]), float(poses.gamma[index])),
                   (float(poses.centroid[index, 0]), float(poses.centroid[index, 1])),
                   float(poses.rotation[index]),
                   shape)

    def as_batch(self) -> PoseBatch:
        return PoseBatch(np.array([self.cell.a]), np.array([self.cell.b]),
                         np.array([self.cell.gamma]), np.array([self.centroid], dtype=float),
                         np.array([self.motif_rotation]))

    def orbit(self):
        return expand_orbit(self.group, self.cell, self.centroid, self.motif_rotation, self.shape)

    def scaled(self, factor: float) -> "Configuration":
        """Same packing with the motif and both cell lengths scaled."""
        shape = replace(self.shape, circumradius=self.shape.circumradius * factor)
        cell = CellParams(self.cell.a * factor, self.cell.b * factor, self.cell.gamma)
        return replace(self, cell=cell, shape=shape)

    def with_cell(self, **changes) -> "Configuration":
        return replace(self, cell=replace(self.cell, **changes))

    def to_certificate(self) -> dict:
        return {
            "group": self.group.name,
            "n": "disc" if self.shape.is_disc else self.shape.n,
            "circumradius": self.shape.circumradius,
            "a": self.cell.a,
            "b": self.cell.b,
            "gamma_rad": self.cell.gamma,
            "frac_x": self.centroid[0],
            "frac_y": self.centroid[1],
            "rotation_rad": self.motif_rotation,
        }

    @classmethod
    def from_certificate(cls, data: dict) -> "Configuration":
        """
        Rebuild a configuration from its flat JSON certificate.

        Cell values within 1e-6 of the crystal-system constraints are snapped
        onto them, so certificates with truncated decimals still load.

        Args:
            data: Certificate mapping with CERTIFICATE_KEYS

        Returns:
            Configuration
        """
        if not isinstance(data, dict):
            raise ValueError("Certificate must be a JSON object")
        missing = [k for k in CERTIFICATE_KEYS if k not in data]
        if missing:
            raise ValueError(f"Certificate is missing keys: {', '.join(missing)}")
        group = get_group(str(data["group"]))
        radius = float(data["circumradius"])
        n = data["n"]
        if n in (None, "disc"):
            shape = make_disc(radius)
        else:
            shape = make_regular_ngon(int(n), radius)
        a, b, gamma = float(data["a"]), float(data["b"]), float(data["gamma_rad"])
        ca, cb, cg = constrain_cell(group, a, b, gamma)
        if abs(float(cb) - b) > 1e-6 * max(1.0, abs(b)) or abs(float(cg) - gamma) > 1e-6:
            raise ValueError(f"Certificate cell violates the {group.lattice} constraints of {group.name}")
        return cls(group, CellParams(a, float(cb), float(cg)),
                   (float(data["frac_x"]), float(data["frac_y"])),
                   float(data["rotation_rad"]), shape)


@dataclass(frozen=True)
class PackingReport:
    density: float
    violation: float
    feasible: bool
    contacts: int
    tau: float = 0.0
    coordination: float = 0.0

    def to_dict(self) -> dict:
        return {
            "density": self.density,
            "violation": self.violation,
            "feasible": self.feasible,
            "contacts": self.contacts,
            "coordination": self.coordination,
            "tau": self.tau,
        }


def contact_tolerance(shape: Shape, scale: float = config.CONTACT_TOLERANCE) -> float:
    """Touching allowance in length units: scale · diameter."""
    return scale * diameter(shape)


def _block_sides(block) -> Tuple[int, int]:
    sides = (block, block) if np.isscalar(block) else tuple(block)
    if len(sides) != 2 or any(int(s) != s or s < 1 or s % 2 == 0 for s in sides):
        raise ValueError(f"Neighbor block must be a positive odd count per axis, got {block}")
    return int(sides[0]), int(sides[1])


def neighbor_reach(a, b, gamma, distance: float) -> Tuple[int, int]:
    """
    Cells to scan along each generator so that every copy whose center lies
    within `distance` of a central-cell copy is enumerated.

    Fractional coordinates of two copies differ by less than one per axis, and
    a displacement d spans at most |d|/height cells along an axis, where the
    heights are a·|sin γ| and b·|sin γ|. Batched cells take the largest reach.

    Returns:
        (reach along a, reach along b)
    """
    s = np.abs(np.sin(np.asarray(gamma, dtype=float)))
    reach_u = np.floor(distance / (np.asarray(a, dtype=float) * s)) + 1
    reach_v = np.floor(distance / (np.asarray(b, dtype=float) * s)) + 1
    return int(np.max(reach_u)), int(np.max(reach_v))


def neighbor_pairs(multiplicity: int, block=config.NEIGHBOR_BLOCK):
    """
    Orbit-copy pairs to test, one per unordered pair modulo lattice translation.

    Copies i and j of the central cell are paired for i < j; copy i of the
    central cell is paired with copy j of every cell in the lexicographically
    positive half of the block.

    Args:
        multiplicity: Orbit copies per cell
        block: Odd block side, or a (side along a, side along b) pair

    Returns:
        (i (P,), j (P,), offsets (P, 2))
    """
    side_u, side_v = _block_sides(block)
    reach_u, reach_v = side_u // 2, side_v // 2
    rows = []
    for i in range(multiplicity):
        for j in range(i + 1, multiplicity):
            rows.append((i, j, 0, 0))
    for u in range(0, reach_u + 1):
        for v in range(-reach_v, reach_v + 1):
            if u == 0 and v <= 0:
                continue
            for i in range(multiplicity):
                for j in range(multiplicity):
                    rows.append((i, j, u, v))
    rows = np.array(rows, dtype=int).reshape(-1, 4)
    return rows[:, 0], rows[:, 1], rows[:, 2:].astype(float)


def _orbit_arrays(group: PlaneGroupSpec, poses: PoseBatch):
    basis = cell_basis(poses.a, poses.b, poses.gamma)
    fracs = orbit_fractional(group, poses.centroid)
    centers = np.einsum("bij,bnj->bni", basis, fracs)
    angles, dets = cartesian_ops(group, basis)
    rot = poses.rotation[:, None]
    rotations = np.where(dets > 0, angles + rot, angles - rot)
    return basis, centers, rotations


def adaptive_block(poses: PoseBatch, distance: float,
                   block: int = config.NEIGHBOR_BLOCK) -> Tuple[int, int]:
    """The neighbor block widened per axis until it covers `distance` for every cell."""
    side_u, side_v = _block_sides(block)
    reach_u, reach_v = neighbor_reach(poses.a, poses.b, poses.gamma, distance)
    return max(side_u, 2 * reach_u + 1), max(side_v, 2 * reach_v + 1)


def _pair_geometry(group: PlaneGroupSpec, poses: PoseBatch, block: int, distance: float):
    basis, centers, rotations = _orbit_arrays(group, poses)
    i, j, offsets = neighbor_pairs(group.multiplicity, adaptive_block(poses, distance, block))
    shift = np.einsum("bij,pj->bpi", basis, offsets)
    displacement = centers[:, j, :] + shift - centers[:, i, :]
    return displacement, rotations[:, i], rotations[:, j]


def evaluate_batch(group: PlaneGroupSpec, shape: Shape, poses: PoseBatch,
                   block: int = config.NEIGHBOR_BLOCK):
    """
    Density and violation of many configurations sharing a group and motif.

    Pairs whose centers are farther apart than twice the circumradius cannot
    overlap and are skipped before the separating-axis test. Depths are
    accumulated with bincount in pair order, so results do not depend on
    batch size or chunking.

    Args:
        group: Plane group
        shape: Motif template
        poses: Decoded configurations
        block: Minimum side of the neighbor cell block (odd); thin cells widen it

    Returns:
        (density (B,), violation (B,))
    """
    cell_area = _check_cells(poses.a, poses.b, poses.gamma)
    densities = group.multiplicity * area(shape) / cell_area
    reach = 2.0 * shape.circumradius * (1.0 + 1e-12)
    displacement, rot_i, rot_j = _pair_geometry(group, poses, block, reach)

    close = np.einsum("bpi,bpi->bp", displacement, displacement) < reach * reach
    rows, cols = np.nonzero(close)
    depths = pair_depths(rot_i[rows, cols], rot_j[rows, cols], displacement[rows, cols],
                         None if shape.is_disc else shape.n, shape.circumradius)
    violations = np.bincount(rows, weights=depths, minlength=len(poses))
    return densities, violations


def density(c: Configuration) -> float:
    """N·area(K)/area(U_L); no feasibility check."""
    cell_area = float(_check_cells(c.cell.a, c.cell.b, c.cell.gamma))
    return c.group.multiplicity * area(c.shape) / cell_area


def violation(c: Configuration, block: int = config.NEIGHBOR_BLOCK) -> float:
    return float(evaluate_batch(c.group, c.shape, c.as_batch(), block)[1][0])


def _count_contacts(c: Configuration, tau: float, block: int) -> int:
    radius = c.shape.circumradius
    displacement, rot_i, rot_j = _pair_geometry(c.group, c.as_batch(), block, 2.0 * radius + tau)
    displacement, rot_i, rot_j = displacement[0], rot_i[0], rot_j[0]
    near = np.hypot(displacement[:, 0], displacement[:, 1]) <= 2.0 * radius + tau
    n = None if c.shape.is_disc else c.shape.n
    depths = pair_depths(rot_i[near], rot_j[near], displacement[near], n, radius)
    contacts = 0
    template = c.shape
    for d, ri, rj, depth in zip(displacement[near], rot_i[near], rot_j[near], depths):
        if depth > tau:
            continue
        if template.is_disc:
            gap = math.hypot(d[0], d[1]) - 2.0 * radius
        else:
            first = to_shapely(template.moved((0.0, 0.0), float(ri)))
            second = to_shapely(template.moved((float(d[0]), float(d[1])), float(rj)))
            gap = first.distance(second)
        if gap <= tau:
            contacts += 1
    return contacts


def verify(c: Configuration, tau: Optional[float] = None,
           block: int = config.NEIGHBOR_BLOCK) -> PackingReport:
    """
    Certificate check: density, total violation, feasibility and contacts.

    Args:
        c: Configuration to check
        tau: Overlap/contact tolerance in length units; defaults to 1e-9·D
        block: Minimum neighbor block side

    Returns:
        PackingReport with feasible = (violation <= tau)
    """
    if tau is None:
        tau = contact_tolerance(c.shape)
    if tau < 0:
        raise ValueError(f"Tolerance must be non-negative, got {tau}")
    rho = density(c)
    total = violation(c, block)
    contacts = _count_contacts(c, tau, block)
    return PackingReport(
        density=rho,
        violation=total,
        feasible=bool(total <= tau),
        contacts=contacts,
        tau=float(tau),
        coordination=2.0 * contacts / c.group.multiplicity,
    )


def estimate_density_mc(c: Configuration, samples: int = 1_000_000, seed: int = 0,
                        chunk: int = 200_000) -> float:
    """
    Stratified Monte-Carlo estimate of the covered fraction of the cell.

    One uniform point per stratum of an m×m grid over U_L; a point counts as
    covered when it lies in any orbit copy of the surrounding cells that can
    reach the central one.

    Args:
        c: Configuration
        samples: Approximate number of points (rounded up to a square)
        seed: RNG seed
        chunk: Points tested per block

    Returns:
        Covered area fraction
    """
    rng = np.random.default_rng(seed)
    side = int(math.ceil(math.sqrt(samples)))
    grid = (np.stack(np.meshgrid(np.arange(side), np.arange(side), indexing="ij"), axis=-1)
            .reshape(-1, 2).astype(float))
    fracs = (grid + rng.random(grid.shape)) / side
    basis = c.cell.basis
    points = fracs @ basis.T

    copies = c.orbit()
    radius = c.shape.circumradius
    reach_u, reach_v = neighbor_reach(c.cell.a, c.cell.b, c.cell.gamma, radius)
    shifts = [basis @ np.array([u, v], dtype=float)
              for u in range(-reach_u, reach_u + 1) for v in range(-reach_v, reach_v + 1)]
    covered = np.zeros(points.shape[0], dtype=bool)
    for start in range(0, points.shape[0], chunk):
        block_pts = points[start:start + chunk]
        hit = np.zeros(block_pts.shape[0], dtype=bool)
        for copy in copies:
            for shift in shifts:
                rel = block_pts - (np.asarray(copy.center) + shift)
                if c.shape.is_disc:
                    hit |= np.einsum("ij,ij->i", rel, rel) < radius * radius
                    continue
                normals = copy.rotation + math.pi / copy.n + TWO_PI * np.arange(copy.n) / copy.n
                apothem = radius * math.cos(math.pi / copy.n)
                proj = rel[:, :1] * np.cos(normals) + rel[:, 1:] * np.sin(normals)
                hit |= np.all(proj < apothem, axis=1)
        covered[start:start + chunk] = hit
    return float(covered.mean())
