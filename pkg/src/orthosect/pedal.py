"""Pedal triangles, pedal circles, isogonal conjugation, and pedal chains.

A pedal chain on a tetrahedron is a set of four pedal triangles, one per
face, sharing the foot on each common edge. Chains are completed from one
prescribed pedal triangle plus a single scalar parameter; when the six feet
are co-spherical (or co-planar) the chain determines a unique orthosecting
partner tetrahedron, rebuilt here from the feet planes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import (
    DegenerateError,
    ReconstructionError,
    SimsonDegenerateError,
)
from .geom_core import (
    Circle3D,
    Line,
    Plane,
    Point,
    SphereOrPlane,
    Tolerance,
    as_array,
    circle_through,
    closest_points,
    concurrency_point,
    foot_on_line,
    meet_planes,
    project_to_plane,
    unit,
)
from .orthology import EDGE_PAIRINGS, Tetrahedron, edge_orthogonality_residuals

# |dist(source, circumcenter) - circumradius| below this (times scene scale)
# counts as the Simson degeneracy: collinear feet, no pedal circle.
SIMSON_TOL = 1e-7

EdgeKey = frozenset

FACE_EDGE_ORDER = ((0, 1), (0, 2), (1, 2))


@dataclass(frozen=True, eq=False)
class PedalTriangle:
    """Perpendicular feet of a source point on the three edge lines of a
    host triangle. Feet are ordered by FACE_EDGE_ORDER of the face vertices
    and may fall outside the edge segments (edge lines, not segments)."""

    source: Point
    face: Tuple[Point, Point, Point]
    feet: Tuple[Point, Point, Point]


@dataclass(frozen=True, eq=False)
class PedalChain:
    """Six feet keyed by unordered host-edge index pairs {i,j} plus the four
    source points, one per face plane. ``closure_spread`` measures how far
    the configuration is from a genuine chain (0 for exact ones)."""

    host: Tetrahedron
    feet: Dict[EdgeKey, Point]
    sources: Tuple[Point, Point, Point, Point]
    closure_spread: float

    def foot(self, i: int, j: int) -> Point:
        return self.feet[frozenset((i, j))]

    def source(self, i: int) -> Point:
        return self.sources[i - 1]


@dataclass(frozen=True, eq=False)
class SphericalChain:
    chain: PedalChain
    carrier: SphereOrPlane
    max_residual: float


@dataclass(frozen=True, eq=False)
class CircularNet:
    """3x3 grid of points built from a chain around one host edge; every
    elementary quadrilateral of a valid chain is concyclic."""

    grid: Tuple[Tuple[Point, Point, Point], ...]
    residuals: Dict[Tuple[int, int], float]  # keyed by top-left grid corner

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


def _face_plane(face) -> Plane:
    return Plane.through(face[0], face[1], face[2])


def _edge_lines(face) -> Tuple[Line, Line, Line]:
    return tuple(Line.through(face[i], face[j]) for i, j in FACE_EDGE_ORDER)


def pedal_triangle(source, face, tol: Tolerance | None = None,
                   strict: bool = False) -> PedalTriangle:
    """Pedal triangle of a point with respect to a host triangle.

    Sources off the carrier plane are projected onto it first; in strict
    mode an off-plane distance beyond eps_abs raises instead.
    """
    face = tuple(Point.of(f) if not isinstance(f, Point) else f for f in face)
    tol = tol or Tolerance.for_points(list(face) + [as_array(source)])
    try:
        plane = _face_plane(face)
    except DegenerateError as exc:
        raise DegenerateError(f"degenerate face: {exc}") from exc
    dist = abs(plane.signed_distance(source))
    if strict and dist > tol.eps_abs * tol.scene_scale:
        raise DegenerateError(f"source off the face plane by {dist:.3e}")
    src = project_to_plane(source, plane)
    feet = tuple(foot_on_line(src, line) for line in _edge_lines(face))
    return PedalTriangle(source=src, face=face, feet=feet)


def pedal_circle(source, face, tol: Tolerance | None = None) -> Circle3D:
    """Circumcircle of the pedal triangle.

    Degenerates to a line (Simson case) when the source lies on the host's
    circumcircle; that raises SimsonDegenerateError.
    """
    tri = pedal_triangle(source, face, tol)
    tol = tol or Tolerance.for_points(list(tri.face) + [tri.source])
    circum = circle_through(*tri.face, tol=tol)
    on_circle = abs(tri.source.distance_to(circum.center) - circum.radius)
    if on_circle <= SIMSON_TOL * tol.scene_scale:
        raise SimsonDegenerateError(
            "source on the circumcircle: pedal feet are collinear")
    return circle_through(*tri.feet, tol=tol)


def isogonal_conjugate(source, face, tol: Tolerance | None = None) -> Point:
    """Partner point sharing the same pedal circle: the reflection of the
    source in the pedal-circle center."""
    circle = pedal_circle(source, face, tol)
    src = project_to_plane(source, circle.carrier)
    return Point.of(2.0 * circle.center.array - src.array)


def recover_source(feet, face, tol: Tolerance | None = None):
    """Source point whose pedal triangle has the given feet.

    Intersects the in-plane perpendiculars to each edge at its foot.
    Returns ``(source, spread)``; a spread above tolerance flags feet that
    do not actually form a pedal triangle.
    """
    face = tuple(Point.of(f) if not isinstance(f, Point) else f for f in face)
    feet = tuple(Point.of(f) if not isinstance(f, Point) else f for f in feet)
    tol = tol or Tolerance.for_points(list(face) + list(feet))
    plane = _face_plane(face)
    lines = []
    for (i, j), foot in zip(FACE_EDGE_ORDER, feet):
        edge_dir = unit(face[j].array - face[i].array)
        lines.append(Line(anchor=foot, direction=np.cross(plane.normal, edge_dir)))
    return concurrency_point(lines, tol)


# ---------------------------------------------------------------------------
# chain kernel: normalized fast path shared by completion, sphericity root
# finding and curve tracing
# ---------------------------------------------------------------------------

_T_NODES = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
_VANDER_INV = np.linalg.inv(np.vander(_T_NODES, 5, increasing=True))


def _sphere_fit(points: np.ndarray):
    """Least-squares sphere (or plane) through >= 4 points in normalized
    coordinates. Returns (kind, data, max_abs_residual) where data is
    (center, radius) or (normal, offset)."""
    m = np.hstack([points, np.ones((len(points), 1))])
    rhs = -(points * points).sum(axis=1)
    sol, _, rank, _ = np.linalg.lstsq(m, rhs, rcond=None)
    if rank == 4:
        center = -0.5 * sol[:3]
        r2 = float(np.dot(center, center) - sol[3])
        if r2 > 0:
            radius = math.sqrt(r2)
            if radius <= 1e6:
                res = np.abs(np.linalg.norm(points - center, axis=1) - radius)
                return "sphere", (center, radius), float(res.max())
    centroid = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - centroid)
    n = vt[-1]
    res = np.abs((points - centroid) @ n)
    return "plane", (n, float(np.dot(n, centroid))), float(res.max())


def _carrier_distance(kind, data, p: np.ndarray) -> float:
    if kind == "sphere":
        center, radius = data
        return float(np.linalg.norm(p - center) - radius)
    n, off = data
    return float(np.dot(n, p) - off)


class _LineData:
    __slots__ = ("anchor", "direction")

    def __init__(self, anchor, direction):
        self.anchor = anchor
        self.direction = direction

    def foot(self, p):
        return self.anchor + np.dot(p - self.anchor, self.direction) * self.direction


def _intersect_in_plane(a1, d1, a2, d2, n):
    """Intersection of two coplanar lines (anchor, direction) lying in the
    plane with unit normal n."""
    denom = float(np.dot(np.cross(d1, d2), n))
    if abs(denom) < 1e-12:
        raise DegenerateError("parallel in-plane perpendiculars")
    alpha = float(np.dot(np.cross(a2 - a1, d2), n)) / denom
    return a1 + alpha * d1


class ChainKernel:
    """Precomputed, scale-normalized machinery for pedal-chain completion
    on the face spanned by host vertices 1, 2, 3 (sources indexed so that
    source 4 lives on that face).

    All public methods take and return coordinates in the original frame;
    internal work is done with the host shifted to its centroid and scaled
    to unit diameter so residuals are scene-scale free.
    """

    def __init__(self, host: Tetrahedron, tol: Tolerance | None = None):
        self.host = host
        self.tol = tol or Tolerance.for_points(host.vertices)
        self.shift = host.array.mean(axis=0)
        self.scale = self.tol.scene_scale
        a = (host.array - self.shift) / self.scale
        self.a = a
        d12 = unit(a[1] - a[0])
        d13 = unit(a[2] - a[0])
        d23 = unit(a[2] - a[1])
        d14 = unit(a[3] - a[0])
        d24 = unit(a[3] - a[1])
        d34 = unit(a[3] - a[2])
        self.line12 = _LineData(a[0], d12)
        self.line13 = _LineData(a[0], d13)
        self.line23 = _LineData(a[1], d23)
        self.line14 = _LineData(a[0], d14)
        self.line24 = _LineData(a[1], d24)
        self.line34 = _LineData(a[2], d34)
        self.n123 = unit(np.cross(a[1] - a[0], a[2] - a[0]))
        self.off123 = float(np.dot(self.n123, a[0]))
        # displacement direction for source 3: in plane (1,2,4), perpendicular
        # to edge 1-2, pointing toward vertex 4's side
        n124 = unit(np.cross(a[1] - a[0], a[3] - a[0]))
        u = np.cross(n124, d12)
        toward4 = a[3] - self.line12.foot(a[3])
        if np.dot(u, toward4) < 0:
            u = -u
        self.u = u
        self.n134 = unit(np.cross(a[2] - a[0], a[3] - a[0]))
        self.n234 = unit(np.cross(a[2] - a[1], a[3] - a[1]))
        self.p13 = np.cross(self.n134, d13)
        self.p14 = np.cross(self.n134, d14)
        self.p23 = np.cross(self.n234, d23)
        self.p24 = np.cross(self.n234, d24)
        circ = circle_through(a[0], a[1], a[2], tol=Tolerance(scene_scale=1.0))
        self.circumcenter = circ.center.array
        self.circumradius = circ.radius

    # -- coordinate maps ----------------------------------------------------

    def to_local(self, p) -> np.ndarray:
        return (as_array(p) - self.shift) / self.scale

    def to_world(self, p) -> Point:
        return Point.of(p * self.scale + self.shift)

    # -- local-frame pieces --------------------------------------------------

    def project_to_face(self, b4_local: np.ndarray) -> np.ndarray:
        return b4_local - (np.dot(self.n123, b4_local) - self.off123) * self.n123

    def simson_distance(self, b4_local: np.ndarray) -> float:
        return abs(float(np.linalg.norm(b4_local - self.circumcenter)) - self.circumradius)

    def base_feet(self, b4_local: np.ndarray):
        return (self.line12.foot(b4_local),
                self.line13.foot(b4_local),
                self.line23.foot(b4_local))

    def _sphericity_polynomial(self, v12, v13, v23):
        """Coefficients (ascending) of the 5-point co-sphericity determinant
        as a polynomial in the source-3 displacement parameter."""
        base14 = self.line14.foot(v12)
        g14 = np.dot(self.u, self.line14.direction) * self.line14.direction
        base24 = self.line24.foot(v12)
        g24 = np.dot(self.u, self.line24.direction) * self.line24.direction
        mats = np.empty((len(_T_NODES), 5, 5))
        fixed = np.array([v12, v13, v23])
        for idx, t in enumerate(_T_NODES):
            pts = np.vstack([fixed, base14 + t * g14, base24 + t * g24])
            mats[idx, :, 0] = (pts * pts).sum(axis=1)
            mats[idx, :, 1:4] = pts
            mats[idx, :, 4] = 1.0
        dets = np.linalg.det(mats)
        return _VANDER_INV @ dets, (base14, g14, base24, g24)

    def sphericity_roots(self, b4_local: np.ndarray,
                         validate_tol: float | None = None) -> List[dict]:
        """Validated displacement parameters making the first five feet
        co-spherical (or co-planar), with per-root carrier and the signed
        residual of the sixth foot against that carrier.

        Returns a list of dicts sorted by t with keys: t, f, kind, carrier
        data and the local-frame chain points. Coordinates are local; t and
        f are in normalized units (multiply t by the scene scale to get
        world units; f is already the scale-normalized residual).
        """
        if validate_tol is None:
            validate_tol = self.tol.eps_rel
        v12, v13, v23 = self.base_feet(b4_local)
        coeffs, (base14, g14, base24, g24) = self._sphericity_polynomial(v12, v13, v23)
        mag = float(np.abs(coeffs).max())
        if mag <= 1e-12:
            # determinant vanishes identically (collinear base feet)
            return []
        desc = coeffs[::-1].copy()
        while len(desc) > 1 and abs(desc[0]) <= 1e-10 * mag:
            desc = desc[1:]
        if len(desc) <= 1:
            return []
        roots = np.roots(desc)
        deriv = np.polyder(desc)
        out = []
        seen: List[float] = []
        for r in roots:
            if abs(r.imag) > 1e-8 * (1.0 + abs(r.real)):
                continue
            t = float(r.real)
            for _ in range(2):  # Newton polish on the exact-degree fit
                dp = np.polyval(deriv, t)
                if abs(dp) < 1e-300:
                    break
                t -= np.polyval(desc, t) / dp
            if any(abs(t - s) <= 1e-9 * (1.0 + abs(t)) for s in seen):
                continue
            v14 = base14 + t * g14
            v24 = base24 + t * g24
            five = np.array([v12, v13, v23, v14, v24])
            kind, data, fit_res = _sphere_fit(five)
            if fit_res > validate_tol:
                continue
            seen.append(t)
            try:
                b2 = _intersect_in_plane(v13, self.p13, v14, self.p14, self.n134)
            except DegenerateError:
                continue
            v34 = self.line34.foot(b2)
            f = _carrier_distance(kind, data, v34)
            out.append({
                "t": t, "f": f, "kind": kind, "carrier": data,
                "v12": v12, "v13": v13, "v23": v23,
                "v14": v14, "v24": v24, "v34": v34, "b2": b2,
                "fit_residual": fit_res,
            })
        out.sort(key=lambda d: d["t"])
        return out

    def complete_local(self, b4_local: np.ndarray, t: float) -> dict:
        """All six feet, all four sources and the closure distance for a
        given local source position and displacement parameter."""
        v12, v13, v23 = self.base_feet(b4_local)
        b3 = v12 + t * self.u
        v14 = self.line14.foot(b3)
        v24 = self.line24.foot(b3)
        b2 = _intersect_in_plane(v13, self.p13, v14, self.p14, self.n134)
        v34 = self.line34.foot(b2)
        b1 = _intersect_in_plane(v23, self.p23, v24, self.p24, self.n234)
        closure = float(np.linalg.norm(self.line34.foot(b1) - v34))
        return {
            "v12": v12, "v13": v13, "v23": v23,
            "v14": v14, "v24": v24, "v34": v34,
            "b1": b1, "b2": b2, "b3": b3, "b4": b4_local,
            "closure": closure,
        }


# ---------------------------------------------------------------------------
# public chain operations
# ---------------------------------------------------------------------------


def _chain_from_local(kernel: ChainKernel, data: dict) -> PedalChain:
    feet = {
        frozenset((1, 2)): kernel.to_world(data["v12"]),
        frozenset((1, 3)): kernel.to_world(data["v13"]),
        frozenset((2, 3)): kernel.to_world(data["v23"]),
        frozenset((1, 4)): kernel.to_world(data["v14"]),
        frozenset((2, 4)): kernel.to_world(data["v24"]),
        frozenset((3, 4)): kernel.to_world(data["v34"]),
    }
    sources = tuple(kernel.to_world(data[k]) for k in ("b1", "b2", "b3", "b4"))
    return PedalChain(host=kernel.host, feet=feet, sources=sources,
                      closure_spread=data["closure"] * kernel.scale)


def complete_chain(host: Tetrahedron, b4, t: float,
                   tol: Tolerance | None = None) -> PedalChain:
    """Complete a pedal chain from one pedal triangle and one parameter.

    The source on face (1,2,3) is ``b4`` (projected onto the face plane);
    the source on face (1,2,4) is displaced from the shared foot by ``t``
    (world units) along the in-plane perpendicular to edge 1-2, oriented
    toward vertex 4. The remaining feet and sources are then determined;
    ``closure_spread`` reports the final consistency distance, which is
    zero (to round-off) for every valid input.
    """
    kernel = ChainKernel(host, tol)
    b4_local = kernel.project_to_face(kernel.to_local(b4))
    if kernel.simson_distance(b4_local) <= SIMSON_TOL:
        raise SimsonDegenerateError(
            "source on the face circumcircle: base pedal feet collinear")
    data = kernel.complete_local(b4_local, float(t) / kernel.scale)
    return _chain_from_local(kernel, data)


def spherical_parameters(host: Tetrahedron, b4,
                         tol: Tolerance | None = None) -> List[float]:
    """Displacement parameters (world units) for which the five feet built
    from ``b4`` are co-spherical or co-planar; empty when no real validated
    parameter exists."""
    kernel = ChainKernel(host, tol)
    b4_local = kernel.project_to_face(kernel.to_local(b4))
    if kernel.simson_distance(b4_local) <= SIMSON_TOL:
        raise SimsonDegenerateError(
            "source on the face circumcircle: base pedal feet collinear")
    return [r["t"] * kernel.scale for r in kernel.sphericity_roots(b4_local)]


def chain_sphere_residual(host: Tetrahedron, b4,
                          tol: Tolerance | None = None) -> List[float]:
    """Signed scale-normalized distance of the sixth foot from the sphere
    (or plane) through the other five, one value per validated parameter.

    Zero characterizes points of the isogonally self-conjugate curve on the
    face plane.
    """
    kernel = ChainKernel(host, tol)
    b4_local = kernel.project_to_face(kernel.to_local(b4))
    if kernel.simson_distance(b4_local) <= SIMSON_TOL:
        raise SimsonDegenerateError(
            "source on the face circumcircle: base pedal feet collinear")
    return [r["f"] for r in kernel.sphericity_roots(b4_local)]


def chain_from_pair(a: Tetrahedron, b: Tetrahedron,
                    tol: Tolerance | None = None) -> PedalChain:
    """Extract the pedal chain of an orthosecting pair: feet are the edge
    intersection points (closest-approach midpoints), sources the
    projections of the partner's vertices onto the host's face planes."""
    from .orthology import pair_tolerance

    tol = tol or pair_tolerance(a, b)
    feet: Dict[EdgeKey, Point] = {}
    for (i, j), (k, l) in EDGE_PAIRINGS:
        cp = closest_points(a.edge_line(i, j), b.edge_line(k, l), tol)
        feet[frozenset((i, j))] = cp.midpoint
    sources = tuple(project_to_plane(b.vertex(i), a.face_plane(i))
                    for i in (1, 2, 3, 4))
    spread = 0.0
    for i in (1, 2, 3, 4):
        others = [m for m in (1, 2, 3, 4) if m != i]
        for p, q in ((others[0], others[1]), (others[0], others[2]), (others[1], others[2])):
            foot = foot_on_line(sources[i - 1], a.edge_line(p, q))
            spread = max(spread, foot.distance_to(feet[frozenset((p, q))]))
    return PedalChain(host=a, feet=feet, sources=sources, closure_spread=spread)


def chain_carrier(chain: PedalChain, tol: Tolerance | None = None):
    """Least-squares sphere or plane through the six chain feet, with the
    worst absolute foot residual."""
    tol = tol or Tolerance.for_points(chain.host.vertices)
    pts = np.array([as_array(p) for p in chain.feet.values()])
    shift = pts.mean(axis=0)
    kind, data, _ = _sphere_fit((pts - shift) / tol.scene_scale)
    residual = max(abs(_carrier_distance(kind, data, (p - shift) / tol.scene_scale))
                   for p in pts) * tol.scene_scale
    if kind == "sphere":
        center, radius = data
        carrier = SphereOrPlane.sphere(Point.of(center * tol.scene_scale + shift),
                                       radius * tol.scene_scale)
    else:
        n, off = data
        carrier = SphereOrPlane.plane(Plane(normal=n, offset=off * tol.scene_scale
                                            + float(np.dot(n, shift))))
    return carrier, residual


def spherical_chain(chain: PedalChain, tol: Tolerance | None = None,
                    max_residual: float | None = None) -> SphericalChain:
    """Wrap a chain whose feet are co-spherical (or co-planar) within
    tolerance; raises DegenerateError otherwise."""
    tol = tol or Tolerance.for_points(chain.host.vertices)
    if max_residual is None:
        max_residual = tol.eps_rel * tol.scene_scale
    carrier, residual = chain_carrier(chain, tol)
    if residual > max_residual:
        raise DegenerateError(
            f"chain feet deviate from a common sphere/plane by {residual:.3e} "
            f"(> {max_residual:.3e})")
    return SphericalChain(chain=chain, carrier=carrier, max_residual=residual)


def reconstruct_tetrahedron(sc: SphericalChain, tol: Tolerance | None = None,
                            postcondition_tol: float = 1e-6) -> Tetrahedron:
    """Unique tetrahedron orthosecting the host with the chain's feet as
    edge intersections.

    Face m of the result lies in the plane of the three feet on the host
    edges through vertex m. For a plane-kind carrier (flat partner) those
    feet planes all coincide with the carrier, so each vertex is instead
    recovered as the intersection of the carrier plane with the projection
    line through its source point. The orthosection postcondition (all six
    gaps and all six orthogonality residuals below ``postcondition_tol``)
    is asserted and a ReconstructionError raised when it fails, which is
    the symptom of a chain that was not actually spherical.
    """
    chain = sc.chain
    host = chain.host
    tol = tol or Tolerance.for_points(host.vertices)
    if sc.carrier.kind == "plane":
        flat = sc.carrier.carrier
        verts = []
        for m in (1, 2, 3, 4):
            direction = host.face_plane(m).normal
            denom = float(np.dot(flat.normal, direction))
            if abs(denom) <= 1e-9:
                raise DegenerateError(
                    f"carrier plane parallel to the projection direction of face {m}")
            src = chain.source(m).array
            h = (flat.offset - float(np.dot(flat.normal, src))) / denom
            verts.append(Point.of(src + h * direction))
        b = Tetrahedron(tuple(verts))
    else:
        planes = {}
        for i in (1, 2, 3, 4):
            pts = [chain.foot(i, j) for j in (1, 2, 3, 4) if j != i]
            arr = np.array([as_array(p) for p in pts])
            height = np.linalg.norm(np.cross(arr[1] - arr[0], arr[2] - arr[0])) / max(
                np.linalg.norm(arr[1] - arr[0]), np.linalg.norm(arr[2] - arr[0]))
            if height <= tol.eps_rel * tol.scene_scale:
                raise DegenerateError(
                    f"collinear feet around vertex {i}: degenerate partner whose "
                    f"face contains a host vertex")
            planes[i] = Plane.through(*pts)
        verts = []
        for m in (1, 2, 3, 4):
            others = [planes[i] for i in (1, 2, 3, 4) if i != m]
            try:
                verts.append(meet_planes(*others))
            except DegenerateError as exc:
                raise DegenerateError(f"ill-conditioned feet planes: {exc}") from exc
        b = Tetrahedron(tuple(verts))
    ortho = edge_orthogonality_residuals(host, b, tol)
    gaps = {}
    for (i, j), (k, l) in EDGE_PAIRINGS:
        cp = closest_points(host.edge_line(i, j), b.edge_line(k, l), tol)
        gaps[((i, j), (k, l))] = cp.gap / tol.scene_scale
    worst_o = max(ortho.values())
    worst_g = max(gaps.values())
    if worst_o > postcondition_tol or worst_g > postcondition_tol:
        raise ReconstructionError(
            f"reconstructed tetrahedron fails orthosection: orthogonality "
            f"{worst_o:.3e}, gap {worst_g:.3e} (tol {postcondition_tol:.1e})",
            orthogonality=ortho, gaps=gaps)
    return b


def circular_net(chain: PedalChain, edge: Sequence[int] = (1, 2)) -> CircularNet:
    """3x3 net of chain points around a host edge, with the concyclicity
    residual of each of the four elementary quadrilaterals."""
    i, j = sorted(edge)
    if not (1 <= i < j <= 4):
        raise ValueError(f"invalid edge {edge}")
    k, l = sorted({1, 2, 3, 4} - {i, j})
    host = chain.host
    grid = (
        (chain.foot(i, k), host.vertex(i), chain.foot(i, l)),
        (chain.source(l), chain.foot(i, j), chain.source(k)),
        (chain.foot(j, k), host.vertex(j), chain.foot(j, l)),
    )
    tol = Tolerance.for_points(host.vertices)
    residuals = {}
    for r in (0, 1):
        for c in (0, 1):
            quad = [grid[r][c], grid[r][c + 1], grid[r + 1][c + 1], grid[r + 1][c]]
            residuals[(r, c)] = _concyclicity_residual(quad, tol)
    return CircularNet(grid=grid, residuals=residuals)


def _concyclicity_residual(quad, tol: Tolerance) -> float:
    """Distance of the fourth point from the circle through the other three,
    using the best-conditioned triple; includes out-of-plane deviation."""
    pts = [as_array(p) for p in quad]
    best = None
    for skip in range(4):
        tri = [pts[m] for m in range(4) if m != skip]
        area = np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
        if best is None or area > best[0]:
            best = (area, skip, tri)
    _, skip, tri = best
    circ = circle_through(*tri, tol=tol)
    rest = pts[skip]
    in_plane = abs(np.linalg.norm(rest - circ.center.array) - circ.radius)
    off_plane = abs(circ.carrier.signed_distance(rest))
    return float(max(in_plane, off_plane))
