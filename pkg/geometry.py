"""
Geometry primitives for packing evaluation.

Regular n-gons and discs with exact closed-form areas, rigid motions of the
plane, and the separating-axis penetration depth that every overlap check in
the search is built on. All values are immutable; every function is pure.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi

POLYGON = "polygon"
DISC = "disc"


def reduce_rotation(rotation: float, n: int) -> float:
    """Reduce a polygon rotation into [0, 2π/n)."""
    period = TWO_PI / n
    reduced = math.fmod(rotation, period)
    if reduced < 0.0:
        reduced += period
    # fmod can land exactly on the period after the shift
    if reduced >= period or math.isclose(reduced, period, rel_tol=0.0, abs_tol=1e-12):
        reduced = 0.0
    return reduced


@dataclass(frozen=True)
class Shape:
    """A regular convex polygon or a disc placed in the plane.

    For a disc, `circumradius` is the radius and `n`/`rotation` are unused.
    """

    kind: str
    circumradius: float
    center: Tuple[float, float] = (0.0, 0.0)
    rotation: float = 0.0
    n: Optional[int] = None

    @property
    def is_disc(self) -> bool:
        return self.kind == DISC

    @property
    def vertices(self) -> np.ndarray:
        """Vertex array of shape (n, 2), counter-clockwise."""
        if self.is_disc:
            raise ValueError("A disc has no vertices")
        angles = self.rotation + TWO_PI * np.arange(self.n) / self.n
        cx, cy = self.center
        return np.column_stack((cx + self.circumradius * np.cos(angles),
                                cy + self.circumradius * np.sin(angles)))

    def moved(self, center, rotation: Optional[float] = None) -> "Shape":
        """Copy of this shape at another pose."""
        center = (float(center[0]), float(center[1]))
        if self.is_disc:
            return Shape(DISC, self.circumradius, center)
        rot = self.rotation if rotation is None else reduce_rotation(rotation, self.n)
        return Shape(POLYGON, self.circumradius, center, rot, self.n)


def make_regular_ngon(n: int, circumradius: float = 1.0, center=(0.0, 0.0),
                      rotation: float = 0.0) -> Shape:
    """
    Build a regular n-gon.

    Args:
        n: Vertex count, at least 3
        circumradius: Distance from center to each vertex
        center: Cartesian center
        rotation: Angle of the first vertex; stored reduced modulo 2π/n

    Returns:
        Shape of kind polygon
    """
    if int(n) != n or n < 3:
        raise ValueError(f"A regular polygon needs n >= 3 vertices, got {n}")
    if not circumradius > 0:
        raise ValueError(f"Circumradius must be positive, got {circumradius}")
    n = int(n)
    return Shape(POLYGON, float(circumradius), (float(center[0]), float(center[1])),
                 reduce_rotation(float(rotation), n), n)


def make_disc(radius: float = 1.0, center=(0.0, 0.0)) -> Shape:
    if not radius > 0:
        raise ValueError(f"Disc radius must be positive, got {radius}")
    return Shape(DISC, float(radius), (float(center[0]), float(center[1])))


def area(s: Shape) -> float:
    if s.is_disc:
        return math.pi * s.circumradius ** 2
    return 0.5 * s.n * s.circumradius ** 2 * math.sin(TWO_PI / s.n)


def diameter(s: Shape) -> float:
    """Largest distance between two points of the shape."""
    if s.is_disc or s.n % 2 == 0:
        return 2.0 * s.circumradius
    return 2.0 * s.circumradius * math.cos(math.pi / (2 * s.n))


def min_width(s: Shape) -> float:
    """Smallest distance between two parallel supporting lines."""
    if s.is_disc:
        return 2.0 * s.circumradius
    if s.n % 2 == 0:
        return 2.0 * s.circumradius * math.cos(math.pi / s.n)
    return s.circumradius * (1.0 + math.cos(math.pi / s.n))


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Isometry:
    """x -> linear @ x + translation, with an orthogonal linear part."""

    linear: np.ndarray = field(default_factory=lambda: _frozen(np.eye(2)))
    translation: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(2)))

    def __post_init__(self):
        linear = _frozen(self.linear)
        translation = _frozen(self.translation)
        if linear.shape != (2, 2) or translation.shape != (2,):
            raise ValueError("Isometry needs a 2x2 linear part and a 2-vector translation")
        if not np.allclose(linear.T @ linear, np.eye(2), atol=1e-12, rtol=0.0):
            raise ValueError(f"Linear part is not orthogonal: {linear.tolist()}")
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "translation", translation)

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.linear))

    @property
    def angle(self) -> float:
        """Rotation angle, or twice the mirror-axis angle for a reflection."""
        return math.atan2(self.linear[1, 0], self.linear[0, 0])

    @classmethod
    def rotation(cls, angle: float, about=(0.0, 0.0)) -> "Isometry":
        c, s = math.cos(angle), math.sin(angle)
        linear = np.array([[c, -s], [s, c]])
        about = np.asarray(about, dtype=float)
        return cls(linear, about - linear @ about)

    @classmethod
    def reflection(cls, axis_angle: float, through=(0.0, 0.0)) -> "Isometry":
        c, s = math.cos(2.0 * axis_angle), math.sin(2.0 * axis_angle)
        linear = np.array([[c, s], [s, -c]])
        through = np.asarray(through, dtype=float)
        return cls(linear, through - linear @ through)


def image_rotation(rotation: float, linear_angle: float, determinant: float):
    """Vertex-angle offset of a regular polygon after a linear isometry.

    A reflection maps a vertex at angle t to linear_angle - t; the image is the
    same regular polygon read in the opposite order.
    """
    if determinant > 0:
        return linear_angle + rotation
    return linear_angle - rotation


def apply_isometry(s: Shape, g: Isometry) -> Shape:
    center = g.linear @ np.asarray(s.center) + g.translation
    if s.is_disc:
        return s.moved(center)
    return s.moved(center, image_rotation(s.rotation, g.angle, g.determinant))


def _edge_normals(vertices: np.ndarray) -> np.ndarray:
    edges = np.roll(vertices, -1, axis=0) - vertices
    normals = np.column_stack((edges[:, 1], -edges[:, 0]))
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def _project(s: Shape, axes: np.ndarray):
    if s.is_disc:
        c = axes @ np.asarray(s.center)
        return c - s.circumradius, c + s.circumradius
    p = s.vertices @ axes.T
    return p.min(axis=0), p.max(axis=0)


def penetration_depth(a: Shape, b: Shape) -> float:
    """
    Minimum translation distance that separates two convex shapes.

    Zero when the interiors are disjoint, including boundary contact.
    Polygon pairs use the separating axes of both edge sets; a polygon and a
    disc also test the axis through the polygon vertex nearest to the disc.

    Args:
        a: First shape
        b: Second shape

    Returns:
        Non-negative penetration length
    """
    if a.is_disc and b.is_disc:
        gap = math.dist(a.center, b.center)
        return max(0.0, a.circumradius + b.circumradius - gap)

    axes = []
    for s, other in ((a, b), (b, a)):
        if s.is_disc:
            verts = other.vertices
            offsets = verts - np.asarray(s.center)
            nearest = offsets[np.argmin(np.einsum("ij,ij->i", offsets, offsets))]
            norm = np.linalg.norm(nearest)
            if norm > 0:
                axes.append((nearest / norm)[None, :])
        else:
            axes.append(_edge_normals(s.vertices))
    axes = np.vstack(axes)

    min_a, max_a = _project(a, axes)
    min_b, max_b = _project(b, axes)
    overlap = np.minimum(max_a - min_b, max_b - min_a)
    return max(0.0, float(overlap.min()))


def support(rotation, angles, n: Optional[int], radius: float):
    """Support function of a regular n-gon (or disc when n is None) centered
    at the origin, evaluated at direction angles; broadcasts over arrays."""
    angles = np.asarray(angles, dtype=float)
    if n is None:
        return np.full(np.broadcast(rotation, angles).shape, radius)
    period = TWO_PI / n
    delta = np.mod(angles - rotation, period)
    delta = np.minimum(delta, period - delta)
    return radius * np.cos(delta)


def pair_depths(rot_a, rot_b, displacement, n: Optional[int], radius: float,
                chunk: int = 65536) -> np.ndarray:
    """
    Vectorised penetration depths for many pairs of congruent shapes.

    Shape A sits at the origin with rotation rot_a, shape B at `displacement`
    with rotation rot_b. Uses support functions instead of vertex
    projections, which is exact for regular polygons.

    Args:
        rot_a: (S,) rotations of the first shapes
        rot_b: (S,) rotations of the second shapes
        displacement: (S, 2) center of B minus center of A
        n: Vertex count, or None for discs
        radius: Circumradius (disc radius)
        chunk: Pairs evaluated per block

    Returns:
        (S,) non-negative depths
    """
    rot_a = np.asarray(rot_a, dtype=float)
    rot_b = np.asarray(rot_b, dtype=float)
    displacement = np.asarray(displacement, dtype=float).reshape(-1, 2)
    count = displacement.shape[0]
    if n is None:
        gap = np.hypot(displacement[:, 0], displacement[:, 1])
        return np.maximum(0.0, 2.0 * radius - gap)

    out = np.empty(count)
    # For even n opposite normals repeat; the overlap is symmetric under psi+pi
    steps = np.arange(n // 2 if n % 2 == 0 else n)
    offsets = math.pi / n + TWO_PI * steps / n
    for start in range(0, count, chunk):
        stop = min(start + chunk, count)
        ra = rot_a[start:stop, None]
        rb = rot_b[start:stop, None]
        d = displacement[start:stop]
        psi = np.concatenate((ra + offsets, rb + offsets), axis=1)
        du = d[:, :1] * np.cos(psi) + d[:, 1:] * np.sin(psi)
        ha = support(ra, psi, n, radius)
        hb = support(rb, psi, n, radius)
        ha_opp = support(ra, psi + math.pi, n, radius)
        hb_opp = support(rb, psi + math.pi, n, radius)
        overlap = np.minimum(ha + hb_opp - du, hb + ha_opp + du)
        out[start:stop] = np.maximum(0.0, overlap.min(axis=1))
    return out


def to_shapely(s: Shape, quad_segs: int = 64):
    """Shapely geometry for exact distance and membership checks."""
    from shapely.geometry import Point, Polygon

    if s.is_disc:
        return Point(s.center).buffer(s.circumradius, quad_segs=quad_segs)
    return Polygon(s.vertices)
