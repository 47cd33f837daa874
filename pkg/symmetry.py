"""
Plane group catalog and the torus parametrization of packing configurations.

Each of the 17 plane groups is listed with its symmetry operations modulo
lattice translations, in fractional coordinates of the primitive cell. The
centered groups cm and c2mm are written in the rhombic primitive cell (b = a,
free gamma) whose basis bisector is the mirror line, so the density formula
N·area(K)/area(U_L) holds uniformly.
"""

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from geometry import TWO_PI, Shape, diameter, image_rotation, make_disc, make_regular_ngon, min_width

OBLIQUE = "oblique"
RECTANGULAR = "rectangular"
SQUARE = "square"
HEXAGONAL = "hexagonal"

# Cell settings; "rhombic" is the centered rectangular system in its primitive cell
CELL_DOF = {"oblique": 3, "rectangular": 2, "rhombic": 2, "square": 1, "hexagonal": 1}

FRAC_X = "frac_x"
FRAC_Y = "frac_y"
MOTIF_ANGLE = "motif_angle"
CELL_A = "cell_a"
CELL_B = "cell_b"
CELL_GAMMA = "cell_gamma"

BOX_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SymOp:
    """Fractional-coordinate operation f -> matrix @ f + translation (mod 1)."""

    matrix: Tuple[Tuple[int, int], Tuple[int, int]]
    translation: Tuple[float, float] = (0.0, 0.0)

    @property
    def m(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)

    @property
    def t(self) -> np.ndarray:
        return np.array(self.translation, dtype=float)

    @property
    def determinant(self) -> int:
        (a, b), (c, d) = self.matrix
        return a * d - b * c

    def compose(self, other: "SymOp") -> "SymOp":
        """self ∘ other, translation reduced mod 1."""
        m = self.m @ other.m
        t = np.mod(self.m @ other.t + self.t, 1.0)
        t[np.isclose(t, 1.0)] = 0.0
        return SymOp(tuple(tuple(int(round(v)) for v in row) for row in m),
                     (float(t[0]), float(t[1])))

    def same_as(self, other: "SymOp") -> bool:
        if self.matrix != other.matrix:
            return False
        diff = np.mod(self.t - other.t + 0.5, 1.0) - 0.5
        return bool(np.allclose(diff, 0.0, atol=1e-12))


@dataclass(frozen=True)
class PlaneGroupSpec:
    name: str
    system: str
    lattice: str
    ops: Tuple[SymOp, ...]
    asym_unit: Tuple[Tuple[float, float], Tuple[float, float]]

    @property
    def multiplicity(self) -> int:
        return len(self.ops)

    @property
    def centered(self) -> bool:
        return self.lattice == "rhombic"


@dataclass(frozen=True)
class CellParams:
    a: float
    b: float
    gamma: float

    @property
    def basis(self) -> np.ndarray:
        """Columns are the lattice generators in Cartesian coordinates."""
        return cell_basis(self.a, self.b, self.gamma)

    @property
    def area(self) -> float:
        return self.a * self.b * math.sin(self.gamma)


def cell_basis(a, b, gamma) -> np.ndarray:
    """Basis matrices with generators (a, 0) and (b cos γ, b sin γ) as columns.
    Broadcasts over arrays, returning shape (..., 2, 2)."""
    a, b, gamma = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float),
                                      np.asarray(gamma, float))
    out = np.zeros(a.shape + (2, 2))
    out[..., 0, 0] = a
    out[..., 0, 1] = b * np.cos(gamma)
    out[..., 1, 1] = b * np.sin(gamma)
    return out


def _op(m, t=(0.0, 0.0)) -> SymOp:
    return SymOp(tuple(tuple(row) for row in m), (float(t[0]), float(t[1])))


_I = ((1, 0), (0, 1))
_INV = ((-1, 0), (0, -1))
_MX = ((-1, 0), (0, 1))      # (-x, y)
_MY = ((1, 0), (0, -1))      # (x, -y)
_SWAP = ((0, 1), (1, 0))     # (y, x)
_ASWAP = ((0, -1), (-1, 0))  # (-y, -x)
_R4 = ((0, -1), (1, 0))      # (-y, x)
_R4I = ((0, 1), (-1, 0))     # (y, -x)
_R3 = ((0, -1), (1, -1))     # (-y, x - y)
_R3I = ((-1, 1), (-1, 0))    # (-x + y, -x)
_R6 = ((1, -1), (1, 0))      # (x - y, x)
_R6I = ((0, 1), (-1, 1))     # (y, -x + y)
_M3A = ((-1, 1), (0, 1))     # (-x + y, y)
_M3B = ((1, 0), (1, -1))     # (x, x - y)
_M3C = ((1, -1), (0, -1))    # (x - y, -y)
_M3D = ((-1, 0), (-1, 1))    # (-x, -x + y)

_HALF = (0.5, 0.5)
_FULL = ((0.0, 1.0), (0.0, 1.0))
_HEX_BOX = ((0.0, 2.0 / 3.0), (0.0, 2.0 / 3.0))

_P3 = (_op(_I), _op(_R3), _op(_R3I))
_P4 = (_op(_I), _op(_INV), _op(_R4), _op(_R4I))

_CATALOG = (
    PlaneGroupSpec("p1", OBLIQUE, "oblique", (_op(_I),), _FULL),
    PlaneGroupSpec("p2", OBLIQUE, "oblique", (_op(_I), _op(_INV)), ((0.0, 0.5), (0.0, 1.0))),
    PlaneGroupSpec("pm", RECTANGULAR, "rectangular", (_op(_I), _op(_MX)), ((0.0, 0.5), (0.0, 1.0))),
    PlaneGroupSpec("pg", RECTANGULAR, "rectangular", (_op(_I), _op(_MX, (0.0, 0.5))),
                   ((0.0, 1.0), (0.0, 0.5))),
    PlaneGroupSpec("cm", RECTANGULAR, "rhombic", (_op(_I), _op(_SWAP)), _FULL),
    PlaneGroupSpec("p2mm", RECTANGULAR, "rectangular",
                   (_op(_I), _op(_INV), _op(_MX), _op(_MY)), ((0.0, 0.5), (0.0, 0.5))),
    PlaneGroupSpec("p2mg", RECTANGULAR, "rectangular",
                   (_op(_I), _op(_INV), _op(_MX, (0.5, 0.0)), _op(_MY, (0.5, 0.0))),
                   ((0.0, 0.25), (0.0, 1.0))),
    PlaneGroupSpec("p2gg", RECTANGULAR, "rectangular",
                   (_op(_I), _op(_INV), _op(_MX, _HALF), _op(_MY, _HALF)),
                   ((0.0, 0.5), (0.0, 0.5))),
    PlaneGroupSpec("c2mm", RECTANGULAR, "rhombic",
                   (_op(_I), _op(_SWAP), _op(_INV), _op(_ASWAP)), ((0.0, 1.0), (0.0, 0.5))),
    PlaneGroupSpec("p4", SQUARE, "square", _P4, ((0.0, 0.5), (0.0, 0.5))),
    PlaneGroupSpec("p4mm", SQUARE, "square",
                   _P4 + (_op(_MX), _op(_MY), _op(_SWAP), _op(_ASWAP)),
                   ((0.0, 0.5), (0.0, 0.5))),
    PlaneGroupSpec("p4gm", SQUARE, "square",
                   _P4 + (_op(_MX, _HALF), _op(_MY, _HALF), _op(_SWAP, _HALF), _op(_ASWAP, _HALF)),
                   ((0.0, 0.5), (0.0, 0.5))),
    PlaneGroupSpec("p3", HEXAGONAL, "hexagonal", _P3, _HEX_BOX),
    PlaneGroupSpec("p3m1", HEXAGONAL, "hexagonal",
                   _P3 + (_op(_ASWAP), _op(_M3A), _op(_M3B)), _HEX_BOX),
    PlaneGroupSpec("p31m", HEXAGONAL, "hexagonal",
                   _P3 + (_op(_SWAP), _op(_M3C), _op(_M3D)), _HEX_BOX),
    PlaneGroupSpec("p6", HEXAGONAL, "hexagonal",
                   _P3 + (_op(_INV), _op(_R6I), _op(_R6)), _HEX_BOX),
    PlaneGroupSpec("p6mm", HEXAGONAL, "hexagonal",
                   _P3 + (_op(_INV), _op(_R6I), _op(_R6),
                          _op(_ASWAP), _op(_M3A), _op(_M3B),
                          _op(_SWAP), _op(_M3C), _op(_M3D)),
                   _HEX_BOX),
)

_BY_NAME: Dict[str, PlaneGroupSpec] = {g.name: g for g in _CATALOG}

GROUP_NAMES = tuple(_BY_NAME)


def group_catalog() -> Tuple[PlaneGroupSpec, ...]:
    """All 17 plane groups in the order of the published density table."""
    return _CATALOG


def get_group(name: str) -> PlaneGroupSpec:
    """Look up a plane group by its IUCr name, case-insensitively."""
    key = name.strip().lower()
    if key not in _BY_NAME:
        raise ValueError(f"Unknown plane group '{name}'. Valid names: {', '.join(GROUP_NAMES)}")
    return _BY_NAME[key]


def constrain_cell(group: PlaneGroupSpec, a, b, gamma):
    """Apply the crystal-system constraints; broadcasts over arrays."""
    lattice = group.lattice
    if lattice == "rectangular":
        gamma = np.full_like(np.asarray(gamma, float), math.pi / 2)
    elif lattice == "rhombic":
        b = a
    elif lattice == "square":
        b = a
        gamma = np.full_like(np.asarray(gamma, float), math.pi / 2)
    elif lattice == "hexagonal":
        b = a
        gamma = np.full_like(np.asarray(gamma, float), 2.0 * math.pi / 3.0)
    return a, b, gamma


def check_cell(group: PlaneGroupSpec, cell: CellParams, tol: float = 1e-9) -> None:
    a, b, gamma = constrain_cell(group, cell.a, cell.b, cell.gamma)
    if not (math.isclose(float(b), cell.b, rel_tol=tol, abs_tol=tol)
            and math.isclose(float(gamma), cell.gamma, rel_tol=tol, abs_tol=tol)):
        raise ValueError(
            f"Cell (a={cell.a}, b={cell.b}, gamma={cell.gamma}) violates the "
            f"{group.lattice} constraints of {group.name}")


def cartesian_ops(group: PlaneGroupSpec, basis: np.ndarray):
    """Cartesian angles and determinants of the group's linear parts.

    Args:
        group: Plane group
        basis: (..., 2, 2) basis matrices

    Returns:
        (angles (..., N), determinants (N,))
    """
    inv = np.linalg.inv(basis)
    angles = []
    for op in group.ops:
        linear = basis @ op.m @ inv
        angles.append(np.arctan2(linear[..., 1, 0], linear[..., 0, 0]))
    dets = np.array([op.determinant for op in group.ops], dtype=float)
    return np.stack(angles, axis=-1), dets


def orbit_fractional(group: PlaneGroupSpec, centroid) -> np.ndarray:
    """Fractional centers of every orbit copy, reduced mod 1: (..., N, 2)."""
    centroid = np.asarray(centroid, dtype=float)
    out = [np.mod(centroid @ op.m.T + op.t, 1.0) for op in group.ops]
    return np.stack(out, axis=-2)


def _reduce_angle(rotation, n: Optional[int]):
    if n is None:
        return np.zeros_like(rotation)
    return np.mod(rotation, TWO_PI / n)


def fold_to_asymmetric_unit(group: PlaneGroupSpec, centroid, rotation, basis,
                            n: Optional[int]):
    """
    Move the motif to the orbit copy whose centroid lies in the asymmetric unit
    box; the orbit itself is unchanged. Broadcasts over a leading batch axis.

    Args:
        group: Plane group
        centroid: (..., 2) fractional centroid
        rotation: (...,) motif rotation
        basis: (..., 2, 2) basis matrices
        n: Vertex count, None for discs

    Returns:
        (centroid, rotation) of the chosen copy
    """
    images = orbit_fractional(group, centroid)
    (x0, x1), (y0, y1) = group.asym_unit
    inside = ((images[..., 0] >= x0 - BOX_TOLERANCE) & (images[..., 0] <= x1 + BOX_TOLERANCE)
              & (images[..., 1] >= y0 - BOX_TOLERANCE) & (images[..., 1] <= y1 + BOX_TOLERANCE))
    # First op landing in the box; identity when rounding pushes every image out
    choice = np.where(inside.any(axis=-1), np.argmax(inside, axis=-1), 0)
    folded = np.take_along_axis(images, choice[..., None, None], axis=-2)[..., 0, :]
    angles, dets = cartesian_ops(group, basis)
    phi = np.take_along_axis(angles, choice[..., None], axis=-1)[..., 0]
    det = dets[choice]
    new_rotation = np.where(det > 0, phi + rotation, phi - rotation)
    folded = np.where(folded >= 1.0, folded - 1.0, folded)
    return folded, _reduce_angle(new_rotation, n)


@dataclass(frozen=True)
class DofLayout:
    """Torus dimensions of a search: what each angle decodes to and the value
    range it covers. `smooth` marks dimensions mapped through the even map
    lo + (hi - lo)(1 - cos θ)/2 rather than the linear periodic one."""

    group: PlaneGroupSpec
    shape: Shape
    kinds: Tuple[str, ...]
    bounds: Tuple[Tuple[float, float], ...]
    smooth: Tuple[bool, ...]

    @property
    def count(self) -> int:
        return len(self.kinds)

    @property
    def n(self) -> Optional[int]:
        return None if self.shape.is_disc else self.shape.n

    def values_of(self, configuration) -> np.ndarray:
        """Raw parameter values of a configuration, in layout order."""
        lookup = {
            FRAC_X: configuration.centroid[0],
            FRAC_Y: configuration.centroid[1],
            MOTIF_ANGLE: configuration.motif_rotation,
            CELL_A: configuration.cell.a,
            CELL_B: configuration.cell.b,
            CELL_GAMMA: configuration.cell.gamma,
        }
        return np.array([lookup[k] for k in self.kinds], dtype=float)

    def restricted(self, center: Sequence[float], epsilon: float,
                   reference: Optional["DofLayout"] = None) -> "DofLayout":
        """
        Box of half-width epsilon·range around `center`, every dimension mapped
        smoothly. Ranges come from `reference` (the unrestricted layout) so
        repeated restriction does not compound; cell bounds stay inside the
        reference bounds.
        """
        reference = reference or self
        bounds = []
        for kind, value, (lo, hi) in zip(self.kinds, center, reference.bounds):
            half = epsilon * (hi - lo)
            if kind in (CELL_A, CELL_B, CELL_GAMMA):
                new_lo, new_hi = max(lo, value - half), min(hi, value + half)
                if new_hi <= new_lo:
                    new_lo, new_hi = value, value
            else:
                new_lo, new_hi = value - half, value + half
            bounds.append((float(new_lo), float(new_hi)))
        return replace(self, bounds=tuple(bounds), smooth=(True,) * self.count)


def length_bounds(shape: Shape, multiplicity: int) -> Tuple[float, float]:
    """Default cell-length range: minimal width up to D·max(4, 2√N)."""
    d = diameter(shape)
    return min_width(shape), d * max(4.0, 2.0 * math.sqrt(multiplicity))


def template_shape(shape_n, circumradius: float = 1.0) -> Shape:
    """Motif template at the origin; shape_n of None, "disc" or inf gives the disc."""
    if shape_n is None or shape_n == "disc" or (isinstance(shape_n, float) and math.isinf(shape_n)):
        return make_disc(circumradius)
    return make_regular_ngon(int(shape_n), circumradius)


def gamma_bounds(group: PlaneGroupSpec) -> Tuple[float, float]:
    """Default search range of the cell angle: reduced bases for oblique cells."""
    fractions = config.OBLIQUE_GAMMA_BOUNDS if group.lattice == "oblique" else config.RHOMBIC_GAMMA_BOUNDS
    return fractions[0] * math.pi, fractions[1] * math.pi


def dof_layout(group: PlaneGroupSpec, shape_n, circumradius: float = 1.0,
               lengths: Optional[Tuple[float, float]] = None,
               gamma: Optional[Tuple[float, float]] = None) -> DofLayout:
    """
    Torus layout for searching `group` with a regular shape_n-gon.

    Args:
        group: Plane group
        shape_n: Vertex count, or None / "disc" / math.inf for the disc
        circumradius: Motif size
        lengths: (min, max) cell lengths; defaults from length_bounds
        gamma: (min, max) oblique/rhombic cell angle in radians; oblique cells
            default to the reduced-basis range [pi/3, 2pi/3]

    Returns:
        DofLayout with count = 3 + cell_dof (2 + cell_dof for the disc)
    """
    shape = shape_n if isinstance(shape_n, Shape) else template_shape(shape_n, circumradius)
    lengths = lengths or length_bounds(shape, group.multiplicity)
    if not 0 < lengths[0] < lengths[1]:
        raise ValueError(f"Cell length bounds must satisfy 0 < min < max, got {lengths}")
    gamma = gamma or gamma_bounds(group)
    if not 0 < gamma[0] < gamma[1] < math.pi:
        raise ValueError(f"Gamma bounds must lie inside (0, pi), got {gamma}")

    kinds: List[str] = [FRAC_X, FRAC_Y]
    bounds: List[Tuple[float, float]] = [(0.0, 1.0), (0.0, 1.0)]
    smooth: List[bool] = [False, False]
    if not shape.is_disc:
        kinds.append(MOTIF_ANGLE)
        bounds.append((0.0, TWO_PI / shape.n))
        smooth.append(False)

    cell_kinds = {
        "oblique": (CELL_A, CELL_B, CELL_GAMMA),
        "rectangular": (CELL_A, CELL_B),
        "rhombic": (CELL_A, CELL_GAMMA),
        "square": (CELL_A,),
        "hexagonal": (CELL_A,),
    }[group.lattice]
    for kind in cell_kinds:
        kinds.append(kind)
        bounds.append(tuple(map(float, gamma if kind == CELL_GAMMA else lengths)))
        smooth.append(True)
    return DofLayout(group, shape, tuple(kinds), tuple(bounds), tuple(smooth))


@dataclass(frozen=True)
class PoseBatch:
    """Decoded configurations of one layout as parallel arrays."""

    a: np.ndarray
    b: np.ndarray
    gamma: np.ndarray
    centroid: np.ndarray
    rotation: np.ndarray

    def __len__(self) -> int:
        return self.a.shape[0]


def decode_batch(thetas, layout: DofLayout) -> PoseBatch:
    """Decode torus points (B, count) into constrained, folded poses."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != layout.count:
        raise ValueError(f"Expected {layout.count} torus coordinates, got {thetas.shape[1]}")
    thetas = np.mod(thetas, TWO_PI)
    lows = np.array([b[0] for b in layout.bounds])
    highs = np.array([b[1] for b in layout.bounds])
    smooth = np.array(layout.smooth)
    values = np.where(smooth,
                      lows + (highs - lows) * (1.0 - np.cos(thetas)) / 2.0,
                      lows + (highs - lows) * thetas / TWO_PI)
    column = {kind: values[:, i] for i, kind in enumerate(layout.kinds)}
    size = thetas.shape[0]

    a = column[CELL_A]
    b = column.get(CELL_B, a)
    gamma = column.get(CELL_GAMMA, np.full(size, math.pi / 2))
    a, b, gamma = constrain_cell(layout.group, a, b, gamma)
    b = np.broadcast_to(b, (size,)).astype(float)
    gamma = np.broadcast_to(gamma, (size,)).astype(float)

    centroid = np.mod(np.column_stack((column[FRAC_X], column[FRAC_Y])), 1.0)
    rotation = column.get(MOTIF_ANGLE, np.zeros(size))
    centroid, rotation = fold_to_asymmetric_unit(
        layout.group, centroid, rotation, cell_basis(a, b, gamma), layout.n)
    return PoseBatch(np.asarray(a, float), b, gamma, centroid, rotation)


def decode(theta, layout: DofLayout):
    """Decode one torus point into a Configuration."""
    from packing import Configuration

    poses = decode_batch(np.asarray(theta, dtype=float)[None, :], layout)
    return Configuration.from_batch(layout.group, layout.shape, poses, 0)


def expand_orbit(group: PlaneGroupSpec, cell: CellParams, centroid, rotation: float,
                 shape: Shape) -> List[Shape]:
    """
    Cartesian copies of the motif under every operation of the group.

    Args:
        group: Plane group
        cell: Primitive cell
        centroid: Fractional centroid in [0, 1)^2
        rotation: Motif rotation
        shape: Template (its own center and rotation are ignored)

    Returns:
        N shapes, ops[0] first
    """
    basis = cell.basis
    fracs = orbit_fractional(group, centroid)
    angles, dets = cartesian_ops(group, basis)
    copies = []
    for frac, phi, det in zip(fracs, angles, dets):
        center = basis @ frac
        if shape.is_disc:
            copies.append(shape.moved(center))
        else:
            copies.append(shape.moved(center, image_rotation(rotation, float(phi), det)))
    return copies
