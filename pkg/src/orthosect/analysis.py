"""Verification-level operations: the common sphere of intersection points,
conjugate partners, the isogonally self-conjugate curve on a face plane,
and repeated-conjugation sequences.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import (
    DegenerateError,
    GeometryError,
    NotOrthologicError,
    NotOrthosectingError,
)
from .geom_core import (
    Point,
    SphereOrPlane,
    Tolerance,
    _fit_plane,
    closest_points,
    sphere_through,
    unit,
)
from .orthology import (
    EDGE_PAIRINGS,
    Pairing,
    Tetrahedron,
    edge_orthogonality_residuals,
    orthology_centers,
    pair_tolerance,
)
from .pedal import (
    ChainKernel,
    PedalChain,
    isogonal_conjugate,
    pedal_triangle,
    reconstruct_tetrahedron,
    spherical_chain,
)
from .solver import intersection_gaps


@dataclass(frozen=True, eq=False)
class SphereReport:
    """Common quadric of the edge intersection points with per-point signed
    residuals (normalized) and the gap between the carrier center and the
    midpoint of the two orthology centers (None when a center is
    unavailable, e.g. for flat partners)."""

    carrier: SphereOrPlane
    residuals: Dict[Pairing, float]
    midpoint_gap: Optional[float]
    points: Dict[Pairing, Point]

    @property
    def max_abs_residual(self) -> float:
        return max(abs(r) for r in self.residuals.values())


def _best_four_subset(points: List[np.ndarray], tol: Tolerance):
    best = (-1.0, None)
    for subset in itertools.combinations(range(len(points)), 4):
        p = [points[i] for i in subset]
        vol = abs(float(np.linalg.det(np.array(p[1:]) - p[0])))
        if vol > best[0]:
            best = (vol, subset)
    return best


def verify_sphere(a: Tetrahedron, b: Tetrahedron,
                  five_point: bool = False,
                  tol: Tolerance | None = None) -> SphereReport:
    """Check that the edge intersection points of an orthosecting pair lie
    on one sphere (or plane) centered at the orthology-center midpoint.

    With ``five_point`` the pairing with the worst gap is dropped and only
    the five remaining intersection points are checked (five intersecting
    edge pairs suffice for co-sphericity).
    """
    tol = tol or pair_tolerance(a, b)
    ortho = edge_orthogonality_residuals(a, b, tol)
    if max(ortho.values()) > tol.eps_rel:
        raise NotOrthologicError(
            f"pair is not orthologic: max residual {max(ortho.values()):.3e}",
            residuals=ortho)
    gaps = intersection_gaps(a, b, tol)
    pairings = list(EDGE_PAIRINGS)
    if five_point:
        worst = max(pairings, key=lambda p: gaps[p])
        pairings.remove(worst)
    bad = {p: g for p, g in gaps.items() if p in pairings and g > tol.eps_rel}
    if bad:
        raise NotOrthosectingError(
            f"{len(bad)} edge pair(s) fail to intersect (max gap "
            f"{max(bad.values()):.3e} of scene scale)", gaps=gaps)
    pts: Dict[Pairing, Point] = {}
    for (i, j), (k, l) in pairings:
        cp = closest_points(a.edge_line(i, j), b.edge_line(k, l), tol)
        pts[((i, j), (k, l))] = cp.midpoint
    arrs = [p.array for p in pts.values()]
    vol, subset = _best_four_subset(arrs, tol)
    if vol <= tol.eps_rel * tol.scene_scale**3:
        carrier = SphereOrPlane.plane(_fit_plane(np.array(arrs)))
    else:
        carrier = sphere_through(*(arrs[i] for i in subset), tol=tol)
    residuals = {p: carrier.signed_distance(q) / tol.scene_scale
                 for p, q in pts.items()}
    midpoint_gap = None
    try:
        rep = orthology_centers(a, b, tol)
        mid = 0.5 * (rep.center_a.array + rep.center_b.array)
        if carrier.kind == "sphere":
            midpoint_gap = float(np.linalg.norm(carrier.center.array - mid)) / tol.scene_scale
        else:
            midpoint_gap = abs(carrier.carrier.signed_distance(mid)) / tol.scene_scale
    except (DegenerateError, NotOrthologicError):
        pass
    return SphereReport(carrier=carrier, residuals=residuals,
                        midpoint_gap=midpoint_gap, points=pts)


def conjugate(a: Tetrahedron, b: Tetrahedron,
              tol: Tolerance | None = None) -> Tetrahedron:
    """The conjugate orthosecting partner of ``b`` with respect to ``a``.

    Projects each vertex of ``b`` onto the corresponding face plane of
    ``a``, reflects it in its pedal-circle center (the isogonal conjugate),
    and rebuilds the partner determined by the resulting spherical chain.
    Applying the construction twice returns ``b``; both partners share the
    carrier sphere of their intersection points.
    """
    tol = tol or pair_tolerance(a, b)
    ortho = edge_orthogonality_residuals(a, b, tol)
    gaps = intersection_gaps(a, b, tol)
    if max(ortho.values()) > tol.eps_rel or max(gaps.values()) > tol.eps_rel:
        raise NotOrthosectingError(
            f"pair does not orthosect (orthogonality {max(ortho.values()):.3e}, "
            f"gap {max(gaps.values()):.3e})", gaps=gaps)
    faces = {i: tuple(a.vertex(m) for m in (1, 2, 3, 4) if m != i) for i in (1, 2, 3, 4)}
    face_indices = {i: [m for m in (1, 2, 3, 4) if m != i] for i in (1, 2, 3, 4)}
    sources = []
    for i in (1, 2, 3, 4):
        proj = np.asarray(b.vertex(i).array - a.face_plane(i).signed_distance(b.vertex(i))
                          * a.face_plane(i).normal)
        conj = isogonal_conjugate(Point.of(proj), faces[i], tol)
        sources.append(conj)
    candidates: Dict[frozenset, List[Point]] = {}
    for i in (1, 2, 3, 4):
        tri = pedal_triangle(sources[i - 1], faces[i], tol)
        idx = face_indices[i]
        for (p, q), foot in zip(((0, 1), (0, 2), (1, 2)), tri.feet):
            candidates.setdefault(frozenset((idx[p], idx[q])), []).append(foot)
    feet: Dict[frozenset, Point] = {}
    spread = 0.0
    for key, cands in candidates.items():
        d = cands[0].distance_to(cands[1])
        spread = max(spread, d)
        if d > tol.eps_rel * tol.scene_scale:
            raise DegenerateError(
                f"conjugate chain feet disagree on edge {sorted(key)} by {d:.3e}")
        feet[key] = Point.of(0.5 * (cands[0].array + cands[1].array))
    chain = PedalChain(host=a, feet=feet, sources=tuple(sources),
                       closure_spread=spread)
    sc = spherical_chain(chain, tol)
    return reconstruct_tetrahedron(sc, tol)


@dataclass(frozen=True, eq=False)
class Polyline:
    """One connected arc of the traced curve for one sphericity branch.
    Vertices are 2-D face-frame coordinates; residuals are the |sixth-foot|
    values at the refined vertices and ts the sphericity parameters."""

    branch: int
    points: np.ndarray       # (n, 2)
    residuals: np.ndarray    # (n,)
    ts: np.ndarray           # (n,)


@dataclass(frozen=True, eq=False)
class CurveTrace:
    """Marching-squares trace of the self-conjugate curve on a face plane."""

    face: int
    origin: Point
    axis_u: np.ndarray
    axis_v: np.ndarray
    polylines: Tuple[Polyline, ...]
    grid: int
    window: Tuple[float, float, float, float]
    residual_bound: float

    def to_world(self, uv) -> Point:
        u, v = float(uv[0]), float(uv[1])
        return Point.of(self.origin.array + u * self.axis_u + v * self.axis_v)

    @property
    def vertex_count(self) -> int:
        return sum(len(p.points) for p in self.polylines)

    def iter_vertices(self):
        for poly in self.polylines:
            for idx in range(len(poly.points)):
                yield poly.branch, poly.points[idx], poly.residuals[idx], poly.ts[idx]


class _FaceFrame:
    """Permutes the host so the requested face is spanned by vertices 1,2,3
    and provides the 2-D in-plane coordinate frame."""

    def __init__(self, host: Tetrahedron, face: int, tol: Tolerance | None):
        if face not in (1, 2, 3, 4):
            raise ValueError("face index must be in 1..4")
        self.face = face
        others = [m for m in (1, 2, 3, 4) if m != face]
        self.permuted = host.relabeled((*others, face))
        self.tol = tol or Tolerance.for_points(host.vertices)
        verts = [host.vertex(m).array for m in others]
        self.origin = Point.of(np.mean(verts, axis=0))
        n = unit(np.cross(verts[1] - verts[0], verts[2] - verts[0]))
        self.axis_u = unit(verts[1] - verts[0])
        self.axis_v = np.cross(n, self.axis_u)
        self.kernel = ChainKernel(self.permuted, self.tol)

    def face_uv(self):
        """Face-vertex positions in frame coordinates."""
        out = []
        for m in range(3):
            d = self.permuted.vertex(m + 1).array - self.origin.array
            out.append((float(np.dot(d, self.axis_u)), float(np.dot(d, self.axis_v))))
        return out

    def world(self, u: float, v: float) -> np.ndarray:
        return self.origin.array + u * self.axis_u + v * self.axis_v

    def roots_at(self, u: float, v: float):
        local = self.kernel.to_local(self.world(u, v))
        return self.kernel.sphericity_roots(local)

    def branch_value(self, u: float, v: float, branch: int):
        roots = self.roots_at(u, v)
        if len(roots) <= branch:
            return math.nan, math.nan
        return roots[branch]["f"], roots[branch]["t"] * self.kernel.scale


def default_window(host: Tetrahedron, face: int,
                   inflate: float = 3.0) -> Tuple[float, float, float, float]:
    """Bounding box of the face triangle in frame coordinates, inflated
    about its center."""
    frame = _FaceFrame(host, face, None)
    uv = np.array(frame.face_uv())
    lo = uv.min(axis=0)
    hi = uv.max(axis=0)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo) * inflate
    return (float(mid[0] - half[0]), float(mid[1] - half[1]),
            float(mid[0] + half[0]), float(mid[1] + half[1]))


def _link_segments(segments: List[Tuple[int, int]], n_points: int) -> List[List[int]]:
    """Chain segment index pairs into maximal paths (open ones first, then
    leftover cycles)."""
    adj: Dict[int, List[int]] = {}
    for s, t in segments:
        adj.setdefault(s, []).append(t)
        adj.setdefault(t, []).append(s)
    unused = {tuple(sorted(seg)) for seg in segments}
    paths = []

    def walk(start: int):
        path = [start]
        current = start
        while True:
            nxt = None
            for nb in adj.get(current, ()):
                key = tuple(sorted((current, nb)))
                if key in unused:
                    unused.discard(key)
                    nxt = nb
                    break
            if nxt is None:
                break
            path.append(nxt)
            current = nxt
        return path

    endpoints = sorted(p for p, nbs in adj.items() if len(nbs) == 1)
    for p in endpoints:
        if any(tuple(sorted((p, nb))) in unused for nb in adj[p]):
            paths.append(walk(p))
    remaining = sorted({p for seg in unused for p in seg})
    for p in remaining:
        if any(tuple(sorted((p, nb))) in unused for nb in adj[p]):
            paths.append(walk(p))
    return [p for p in paths if len(p) >= 2]


def trace_curve(host: Tetrahedron, face: int,
                window: Tuple[float, float, float, float] | None = None,
                grid: int = 64,
                tol: Tolerance | None = None,
                refine_tol: float = 1e-9,
                vertex_tol: float = 1e-6) -> CurveTrace:
    """Trace the isogonally self-conjugate curve on a face plane.

    Evaluates the sixth-foot sphericity residual on a ``grid`` x ``grid``
    lattice for both sphericity branches, extracts sign-change cells per
    branch, refines each crossing by bisection to ``refine_tol`` times the
    scene scale, and links the crossings into polylines. Lattice nodes
    where no real sphericity parameter exists are outside the real locus
    and skipped; sign flips whose refined residual stays above
    ``vertex_tol`` are branch-relabeling artifacts near the discriminant
    boundary, not curve points, and terminate the polyline there. An empty
    window yields an empty trace, not an error.
    """
    if grid < 16:
        raise ValueError("grid must be at least 16")
    frame = _FaceFrame(host, face, tol)
    tol = frame.tol
    if window is None:
        window = default_window(host, face)
    x0, y0, x1, y1 = (float(w) for w in window)
    us = np.linspace(x0, x1, grid)
    vs = np.linspace(y0, y1, grid)
    fvals = np.full((2, grid, grid), math.nan)
    tvals = np.full((2, grid, grid), math.nan)
    for iu in range(grid):
        for iv in range(grid):
            roots = frame.roots_at(us[iu], vs[iv])
            for b in range(min(2, len(roots))):
                fvals[b, iu, iv] = roots[b]["f"]
                tvals[b, iu, iv] = roots[b]["t"] * frame.kernel.scale

    position_tol = refine_tol * tol.scene_scale
    polylines: List[Polyline] = []
    bound = 0.0

    for branch in range(2):
        f = fvals[branch]
        t = tvals[branch]
        crossing_index: Dict[Tuple, int] = {}
        crossing_pts: List[np.ndarray] = []
        crossing_res: List[float] = []
        crossing_ts: List[float] = []

        def refine(pa, fa, ta, pb, fb, tb):
            while float(np.linalg.norm(pb - pa)) > position_tol:
                pm = 0.5 * (pa + pb)
                fm, tm = frame.branch_value(pm[0], pm[1], branch)
                if math.isnan(fm):
                    break
                if (fm > 0) == (fa > 0):
                    pa, fa, ta = pm, fm, tm
                else:
                    pb, fb, tb = pm, fm, tm
            if abs(fa) <= abs(fb):
                return pa, abs(fa), ta
            return pb, abs(fb), tb

        def crossing(n1, n2):
            key = (min(n1, n2), max(n1, n2))
            if key in crossing_index:
                return crossing_index[key]
            (i1, j1), (i2, j2) = n1, n2
            pa = np.array([us[i1], vs[j1]])
            pb = np.array([us[i2], vs[j2]])
            p, res, tval = refine(pa, f[i1, j1], t[i1, j1], pb, f[i2, j2], t[i2, j2])
            if res > vertex_tol:
                crossing_index[key] = None
                return None
            idx = len(crossing_pts)
            crossing_pts.append(p)
            crossing_res.append(res)
            crossing_ts.append(tval)
            crossing_index[key] = idx
            return idx

        segments: List[Tuple[int, int]] = []
        for iu in range(grid - 1):
            for iv in range(grid - 1):
                corners = [(iu, iv), (iu + 1, iv), (iu + 1, iv + 1), (iu, iv + 1)]
                vals = [f[c] for c in corners]
                if any(math.isnan(v) for v in vals):
                    continue
                signs = [v > 0 for v in vals]
                edges = []  # cell edges with a sign change
                for e in range(4):
                    if signs[e] != signs[(e + 1) % 4]:
                        edges.append((corners[e], corners[(e + 1) % 4]))
                if len(edges) == 2:
                    ca, cb = crossing(*edges[0]), crossing(*edges[1])
                    if ca is not None and cb is not None:
                        segments.append((ca, cb))
                elif len(edges) == 4:
                    cu = 0.5 * (us[iu] + us[iu + 1])
                    cv = 0.5 * (vs[iv] + vs[iv + 1])
                    fc, _ = frame.branch_value(cu, cv, branch)
                    if math.isnan(fc):
                        continue
                    # connect crossings around corners matching the center
                    if (fc > 0) == signs[0]:
                        pairs = ((edges[0], edges[3]), (edges[1], edges[2]))
                    else:
                        pairs = ((edges[0], edges[1]), (edges[2], edges[3]))
                    for ea, eb in pairs:
                        ca, cb = crossing(*ea), crossing(*eb)
                        if ca is not None and cb is not None:
                            segments.append((ca, cb))
        for path in _link_segments(segments, len(crossing_pts)):
            pts = np.array([crossing_pts[i] for i in path])
            res = np.array([crossing_res[i] for i in path])
            ts = np.array([crossing_ts[i] for i in path])
            polylines.append(Polyline(branch=branch, points=pts, residuals=res, ts=ts))
            if len(res):
                bound = max(bound, float(res.max()))

    return CurveTrace(face=face, origin=frame.origin, axis_u=frame.axis_u,
                      axis_v=frame.axis_v, polylines=tuple(polylines),
                      grid=grid, window=(x0, y0, x1, y1), residual_bound=bound)


@dataclass(frozen=True, eq=False)
class DegreeEstimate:
    """Distribution of line-curve intersection counts over random probe
    lines; exploratory evidence for the curve's algebraic degree (real
    crossings only lower-bound it)."""

    counts: Dict[int, int]
    max_count: int
    lines: int
    tangency_flagged: int


def estimate_degree(trace: CurveTrace, trials: int = 200,
                    rng_seed: int = 0) -> DegreeEstimate:
    """Intersect random lines through the trace window with the traced
    polylines and histogram the crossing counts."""
    if not trace.polylines:
        raise ValueError("empty trace")
    rng = np.random.default_rng(rng_seed)
    x0, y0, x1, y1 = trace.window
    center = np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])
    half_diag = 0.5 * math.hypot(x1 - x0, y1 - y0)
    seg_len = []
    for poly in trace.polylines:
        if len(poly.points) > 1:
            seg_len.extend(np.linalg.norm(np.diff(poly.points, axis=0), axis=1))
    tang_tol = float(np.median(seg_len)) * 0.05 if seg_len else 1e-9
    counts: Dict[int, int] = {}
    flagged = 0
    for _ in range(trials):
        theta = rng.uniform(0.0, math.pi)
        normal = np.array([math.cos(theta), math.sin(theta)])
        c = float(np.dot(normal, center) + rng.uniform(-1.4, 1.4) * half_diag)
        count = 0
        tangent_hit = False
        for poly in trace.polylines:
            s = poly.points @ normal - c
            if np.abs(s).min(initial=math.inf) <= tang_tol:
                tangent_hit = True
            count += int(np.count_nonzero((s[:-1] > 0) != (s[1:] > 0)))
        counts[count] = counts.get(count, 0) + 1
        if tangent_hit:
            flagged += 1
    return DegreeEstimate(counts=counts, max_count=max(counts), lines=trials,
                          tangency_flagged=flagged)


@dataclass(frozen=True, eq=False)
class SequenceRun:
    """Repeated conjugation run: the tetrahedra, per-pair sphere reports,
    the first pair's carrier with the worst residual of every pair's
    intersection points against it, and the clustered orthology centers."""

    tetrahedra: Tuple[Tetrahedron, ...]
    reports: Tuple[SphereReport, ...]
    carrier: SphereOrPlane
    shared_max_residual: float
    centers: Tuple[Point, ...]
    distinct_centers: Tuple[Point, ...]
    truncated_at: Optional[int]
    truncation_reason: Optional[str]


def _cluster_points(points: List[Point], radius: float) -> List[Point]:
    clusters: List[List[np.ndarray]] = []
    for p in points:
        placed = False
        for cl in clusters:
            if np.linalg.norm(np.mean(cl, axis=0) - p.array) <= radius:
                cl.append(p.array)
                placed = True
                break
        if not placed:
            clusters.append([p.array])
    return [Point.of(np.mean(cl, axis=0)) for cl in clusters]


def iterate_sequence(b0: Tetrahedron, b1: Tetrahedron, n: int,
                     tol: Tolerance | None = None,
                     cluster_radius_factor: float = 1e-6) -> SequenceRun:
    """Iterate the conjugate construction: each new member is the conjugate
    of the previous-but-one with respect to the previous.

    Records a sphere report for every consecutive pair, the worst residual
    of all intersection points against the first pair's carrier, and the
    orthology centers of all pairs clustered at the given radius. A
    degeneracy mid-run truncates the sequence and reports the step."""
    tol = tol or pair_tolerance(b0, b1)
    ortho = edge_orthogonality_residuals(b0, b1, tol)
    gaps = intersection_gaps(b0, b1, tol)
    if max(ortho.values()) > tol.eps_rel or max(gaps.values()) > tol.eps_rel:
        raise NotOrthosectingError(
            "seed tetrahedra do not form an orthosecting pair", gaps=gaps)
    seq: List[Tetrahedron] = [b0, b1]
    truncated_at = None
    reason = None
    for m in range(1, n):
        try:
            seq.append(conjugate(seq[m], seq[m - 1], tol))
        except GeometryError as exc:
            truncated_at = m + 1
            reason = str(exc)
            break
    reports: List[SphereReport] = []
    centers: List[Point] = []
    for m in range(len(seq) - 1):
        rep = verify_sphere(seq[m], seq[m + 1], tol=tol)
        reports.append(rep)
        oc = orthology_centers(seq[m], seq[m + 1], tol)
        centers.extend([oc.center_a, oc.center_b])
    carrier = reports[0].carrier
    shared = 0.0
    for rep in reports:
        for p in rep.points.values():
            shared = max(shared, abs(carrier.signed_distance(p)) / tol.scene_scale)
    distinct = _cluster_points(centers, cluster_radius_factor * tol.scene_scale)
    return SequenceRun(tetrahedra=tuple(seq), reports=tuple(reports),
                       carrier=carrier, shared_max_residual=shared,
                       centers=tuple(centers), distinct_centers=tuple(distinct),
                       truncated_at=truncated_at, truncation_reason=reason)
