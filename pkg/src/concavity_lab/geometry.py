"""Planar convex domains with exact signed distances and arclength parametrizations.

Shapes are described in a local frame centred at the origin and mapped to the
world frame by a rotation followed by a translation. The boundary of every
shape is a counter-clockwise chain of primitives (segments, circular arcs, or
a full ellipse), which supplies nearest-point queries and the arclength
parametrization; the signed distance itself uses the closed form of each shape.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate
from scipy.special import ellipeinc

from ._validation import check_count, check_points
from .errors import ValidationError

KINDS = ("disk", "ellipse", "rectangle", "rounded-rectangle", "equilateral-triangle", "stadium")

_PARAMS = {
    "disk": ("radius",),
    "ellipse": ("a", "b"),
    "rectangle": ("length", "width"),
    "rounded-rectangle": ("length", "width", "rho"),
    "equilateral-triangle": ("side",),
    "stadium": ("length", "radius"),
}
_OPTIONAL = {"rounded-rectangle": ("rho",)}


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    params: dict
    center: tuple = (0.0, 0.0)
    angle: float = 0.0

    def to_dict(self):
        out = {"kind": self.kind, "params": dict(self.params)}
        if tuple(self.center) != (0.0, 0.0):
            out["center"] = [float(c) for c in self.center]
        if self.angle != 0.0:
            out["angle"] = float(self.angle)
        return out

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ValidationError("geometry", "make_domain", f"domain spec must be an object, got {d!r}")
        unknown = set(d) - {"kind", "params", "center", "angle"}
        if unknown:
            raise ValidationError("geometry", "make_domain", f"unknown domain keys {sorted(unknown)}")
        if "kind" not in d:
            raise ValidationError("geometry", "make_domain", "domain spec is missing 'kind'")
        return cls(
            kind=d["kind"],
            params=dict(d.get("params", {})),
            center=tuple(float(c) for c in d.get("center", (0.0, 0.0))),
            angle=float(d.get("angle", 0.0)),
        )


@dataclass(frozen=True)
class GeometryStats:
    area: float
    inradius: float
    diameter: float
    boundary_length: float
    smooth: bool = True

    def to_dict(self):
        return {
            "area": self.area,
            "inradius": self.inradius,
            "diameter": self.diameter,
            "boundary_length": self.boundary_length,
            "smooth": self.smooth,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# -- boundary primitives (local frame, counter-clockwise orientation) ---------


class _Segment:
    def __init__(self, a, b):
        self.a = np.asarray(a, float)
        self.b = np.asarray(b, float)
        d = self.b - self.a
        self.length = float(np.hypot(*d))
        self.tangent = d / self.length
        self.normal = np.array([-self.tangent[1], self.tangent[0]])

    def point(self, s):
        s = np.asarray(s, float)[:, None]
        pts = self.a + s * self.tangent
        return pts, np.broadcast_to(self.normal, pts.shape).copy()

    def closest(self, p):
        t = np.clip((p - self.a) @ self.tangent, 0.0, self.length)
        q = self.a + t[:, None] * self.tangent
        return q, np.hypot(*(p - q).T), t


class _Arc:
    """Circular arc from angle theta0 sweeping ccw by `sweep` radians."""

    def __init__(self, center, radius, theta0, sweep):
        self.c = np.asarray(center, float)
        self.r = float(radius)
        self.theta0 = float(theta0)
        self.sweep = float(sweep)
        self.length = self.r * self.sweep

    def point(self, s):
        th = self.theta0 + np.asarray(s, float) / self.r
        u = np.column_stack([np.cos(th), np.sin(th)])
        return self.c + self.r * u, -u

    def closest(self, p):
        d = p - self.c
        rho = np.hypot(d[:, 0], d[:, 1])
        th = np.mod(np.arctan2(d[:, 1], d[:, 0]) - self.theta0, 2 * np.pi)
        if self.sweep >= 2 * np.pi - 1e-15:
            local = th
        else:
            # outside the angular range: snap to the nearer endpoint
            past = th - self.sweep
            before = 2 * np.pi - th
            local = np.where(th <= self.sweep, th, np.where(past < before, self.sweep, 0.0))
        ang = self.theta0 + local
        q = self.c + self.r * np.column_stack([np.cos(ang), np.sin(ang)])
        inside_range = th <= self.sweep
        dist = np.where(inside_range, np.abs(rho - self.r), np.hypot(*(p - q).T))
        return q, dist, local * self.r


class _Ellipse:
    """Full ellipse x = a cos t, y = b sin t, arclength measured from (a, 0)."""

    def __init__(self, a, b):
        self.a = float(a)
        self.b = float(b)
        if self.a >= self.b:
            self._m = 1.0 - (self.b / self.a) ** 2
            self._offset = float(ellipeinc(-np.pi / 2, self._m))
        else:
            self._m = 1.0 - (self.a / self.b) ** 2
            self._offset = 0.0
        self.length = float(self.arclength(np.array([2 * np.pi]))[0])

    def speed(self, t):
        return np.hypot(self.a * np.sin(t), self.b * np.cos(t))

    def arclength(self, t):
        t = np.asarray(t, float)
        if self.a >= self.b:
            return self.a * (ellipeinc(t - np.pi / 2, self._m) - self._offset)
        return self.b * ellipeinc(t, self._m)

    def parameter(self, s):
        """Invert the arclength map by safeguarded Newton iteration."""
        s = np.asarray(s, float)
        t = 2 * np.pi * s / self.length
        for _ in range(50):
            step = (self.arclength(t) - s) / self.speed(t)
            t = t - step
            if np.all(np.abs(step) < 1e-15):
                break
        return t

    def point(self, s):
        t = self.parameter(s)
        pts = np.column_stack([self.a * np.cos(t), self.b * np.sin(t)])
        g = np.column_stack([pts[:, 0] / self.a**2, pts[:, 1] / self.b**2])
        return pts, -g / np.hypot(g[:, 0], g[:, 1])[:, None]

    def closest(self, p):
        q = ellipse_closest_point(self.a, self.b, p)
        dist = np.hypot(*(p - q).T)
        t = np.mod(np.arctan2(q[:, 1] / self.b, q[:, 0] / self.a), 2 * np.pi)
        return q, dist, self.arclength(t)


def ellipse_closest_point(a, b, p):
    """Nearest point on the ellipse x²/a² + y²/b² = 1 to each row of p.

    Root of the Lagrange-multiplier equation in the first quadrant, found by
    monotone Newton iteration, vectorized; signs are restored at the end.
    """
    p = np.asarray(p, float)
    swap = b > a
    if swap:
        a, b = b, a
        p = p[:, ::-1]
    y0 = np.abs(p[:, 0])
    y1 = np.abs(p[:, 1])
    x0 = np.empty_like(y0)
    x1 = np.empty_like(y1)

    on_axis = y1 == 0.0
    # y1 == 0: closed form
    numer = a * y0
    denom = a * a - b * b
    inner = on_axis & (numer < denom)
    xde = np.where(inner, numer / denom if denom > 0 else 0.0, 1.0)
    x0[on_axis] = np.where(inner[on_axis], a * xde[on_axis], a)
    x1[on_axis] = np.where(inner[on_axis], b * np.sqrt(np.maximum(1 - xde[on_axis] ** 2, 0.0)), 0.0)

    y_axis = (~on_axis) & (y0 == 0.0)
    x0[y_axis] = 0.0
    x1[y_axis] = b

    gen = (~on_axis) & (y0 > 0.0)
    if np.any(gen):
        z0 = y0[gen] / a
        z1 = y1[gen] / b
        g = z0 * z0 + z1 * z1 - 1.0
        r0 = (a / b) ** 2
        n0 = r0 * z0
        # work in t = s + 1 so the left bracket end z1 stays exact for tiny z1
        t1 = np.where(g < 0, 1.0, np.hypot(n0, z1))
        # Newton from the left end of the bracket: G is convex and decreasing,
        # so iterates increase monotonically to the root and stay bracketed
        # z1 and the root of the first term alone both lie left of the root
        dr = r0 - 1.0
        t = np.maximum(z1, n0 - dr)
        for _ in range(200):
            ratio0 = n0 / (t + dr)
            ratio1 = z1 / t
            gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0
            dg = -2.0 * (ratio0 * ratio0 / (t + dr) + ratio1 * ratio1 / t)
            step = np.where(gs > 0, -gs / dg, 0.0)
            t_new = np.minimum(t + step, t1)
            if np.all(t_new - t <= 1e-16 * np.maximum(np.abs(t), 1.0)):
                t = t_new
                break
            t = t_new
        x0g = r0 * y0[gen] / (t + dr)
        x1g = y1[gen] / t
        exact = g == 0.0
        x0[gen] = np.where(exact, y0[gen], x0g)
        x1[gen] = np.where(exact, y1[gen], x1g)

    q = np.column_stack([np.copysign(x0, p[:, 0]), np.copysign(x1, p[:, 1])])
    if swap:
        q = q[:, ::-1]
    return q


# -- domains ----------------------------------------------------------------


def _require(kind, params):
    names = _PARAMS[kind]
    unknown = set(params) - set(names)
    if unknown:
        raise ValidationError("geometry", "make_domain", f"unknown parameters {sorted(unknown)} for {kind}")
    out = {}
    for name in names:
        if name not in params:
            if name in _OPTIONAL.get(kind, ()):
                continue
            raise ValidationError("geometry", "make_domain", f"{kind} requires parameter '{name}'")
        try:
            value = float(params[name])
        except (TypeError, ValueError):
            raise ValidationError("geometry", "make_domain", f"parameter {name} must be a number")
        if not math.isfinite(value) or value <= 0:
            raise ValidationError("geometry", "make_domain", f"parameter {name} must be > 0, got {params[name]!r}")
        out[name] = value
    return out


@dataclass(frozen=True, eq=False)
class Domain:
    """Immutable queryable domain. Build with :func:`make_domain`."""

    spec: DomainSpec
    _p: dict = field(repr=False)
    _prims: tuple = field(repr=False)
    _stats: GeometryStats = field(repr=False)
    vertices: np.ndarray = field(repr=False)

    @property
    def kind(self):
        return self.spec.kind

    @property
    def center(self):
        return np.asarray(self.spec.center, float)

    @property
    def boundary_length(self):
        return self._stats.boundary_length

    # frame changes
    def _rot(self, angle):
        c, s = math.cos(angle), math.sin(angle)
        return np.array([[c, -s], [s, c]])

    def to_local(self, p):
        return (p - self.center) @ self._rot(self.spec.angle)

    def to_world(self, q):
        return q @ self._rot(self.spec.angle).T + self.center

    def _vec_world(self, v):
        return v @ self._rot(self.spec.angle).T

    # queries
    def sdf(self, p):
        """Signed distance to the boundary, negative inside. Accepts (2,) or (k, 2)."""
        arr = np.asarray(p, float)
        scalar = arr.ndim == 1
        q = self.to_local(np.atleast_2d(arr))
        d = _LOCAL_SDF[self.kind](self._p, q, self)
        return float(d[0]) if scalar else d

    def contains(self, p):
        return self.sdf(p) < 0

    def closest_point(self, p):
        """Nearest boundary point and its arclength parameter for each row of p."""
        q = self.to_local(check_points(p, "geometry", "closest_point"))
        best_d = np.full(len(q), np.inf)
        best_q = np.zeros_like(q)
        best_s = np.zeros(len(q))
        offset = 0.0
        for prim in self._prims:
            cq, cd, cs = prim.closest(q)
            take = cd < best_d
            best_d = np.where(take, cd, best_d)
            best_q[take] = cq[take]
            best_s = np.where(take, offset + cs, best_s)
            offset += prim.length
        best_s = np.mod(best_s, self.boundary_length)
        return self.to_world(best_q), best_s

    def arclength_of(self, p):
        return self.closest_point(p)[1]

    def boundary_point(self, s):
        """Boundary points and inward unit normals at arclength parameters s."""
        s = np.mod(np.atleast_1d(np.asarray(s, float)), self.boundary_length)
        pts = np.zeros((len(s), 2))
        nrm = np.zeros((len(s), 2))
        starts = np.cumsum([0.0] + [pr.length for pr in self._prims])
        idx = np.clip(np.searchsorted(starts, s, side="right") - 1, 0, len(self._prims) - 1)
        for k, prim in enumerate(self._prims):
            sel = idx == k
            if np.any(sel):
                pp, nn = prim.point(np.clip(s[sel] - starts[k], 0.0, prim.length))
                pts[sel] = pp
                nrm[sel] = nn
        # at a junction between primitives use the bisector of the two normals
        tol = 1e-12 * self.boundary_length
        for k, prim in enumerate(self._prims):
            at = np.abs(s - starts[k]) <= tol
            if k == 0:
                at |= np.abs(s - self.boundary_length) <= tol
            if np.any(at):
                prev = self._prims[k - 1]
                _, n_prev = prev.point(np.array([prev.length]))
                _, n_here = prim.point(np.array([0.0]))
                bis = n_prev[0] + n_here[0]
                nrm[at] = bis / np.hypot(*bis)
        return self.to_world(pts), self._vec_world(nrm)

    def bounding_box(self):
        s = np.linspace(0.0, self.boundary_length, 4097)
        pts, _ = self.boundary_point(s)
        if len(self.vertices):
            pts = np.vstack([pts, self.to_world(self.vertices)])
        return pts.min(axis=0), pts.max(axis=0)

    def stats(self):
        return self._stats


def _sdf_disk(p, q, dom):
    return np.hypot(q[:, 0], q[:, 1]) - p["radius"]


def _sdf_ellipse(p, q, dom):
    a, b = p["a"], p["b"]
    c = ellipse_closest_point(a, b, q)
    d = np.hypot(*(q - c).T)
    inside = (q[:, 0] / a) ** 2 + (q[:, 1] / b) ** 2 < 1.0
    return np.where(inside, -d, d)


def _box(q, bx, by):
    dx = np.abs(q[:, 0]) - bx
    dy = np.abs(q[:, 1]) - by
    outside = np.hypot(np.maximum(dx, 0.0), np.maximum(dy, 0.0))
    return outside + np.minimum(np.maximum(dx, dy), 0.0)


def _sdf_rectangle(p, q, dom):
    return _box(q, p["length"] / 2, p["width"] / 2)


def _sdf_rounded(p, q, dom):
    rho = p["rho"]
    return _box(q, p["length"] / 2 - rho, p["width"] / 2 - rho) - rho


def _sdf_stadium(p, q, dom):
    dx = np.maximum(np.abs(q[:, 0]) - p["length"] / 2, 0.0)
    return np.hypot(dx, q[:, 1]) - p["radius"]


def _sdf_polygon(p, q, dom):
    v = dom.vertices
    best = np.full(len(q), np.inf)
    inside = np.ones(len(q), bool)
    for k in range(len(v)):
        a, b = v[k], v[(k + 1) % len(v)]
        e = b - a
        w = q - a
        t = np.clip((w @ e) / (e @ e), 0.0, 1.0)
        best = np.minimum(best, np.hypot(*(w - t[:, None] * e).T))
        inside &= (e[0] * w[:, 1] - e[1] * w[:, 0]) > 0
    return np.where(inside, -best, best)


_LOCAL_SDF = {
    "disk": _sdf_disk,
    "ellipse": _sdf_ellipse,
    "rectangle": _sdf_rectangle,
    "rounded-rectangle": _sdf_rounded,
    "equilateral-triangle": _sdf_polygon,
    "stadium": _sdf_stadium,
}


def _polygon_prims(v):
    return tuple(_Segment(v[k], v[(k + 1) % len(v)]) for k in range(len(v)))


def _ellipse_perimeter(a, b):
    val, _ = integrate.quad(lambda t: math.hypot(a * math.sin(t), b * math.cos(t)), 0.0, math.pi / 2,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return 4.0 * val


def make_domain(spec):
    """Validate a :class:`DomainSpec` (or its dict form) and build the domain."""
    if isinstance(spec, dict):
        spec = DomainSpec.from_dict(spec)
    if spec.kind not in KINDS:
        raise ValidationError("geometry", "make_domain", f"unknown domain kind {spec.kind!r}; expected one of {KINDS}")
    p = _require(spec.kind, spec.params)
    if len(spec.center) != 2 or not all(math.isfinite(c) for c in spec.center):
        raise ValidationError("geometry", "make_domain", f"center must be a finite 2-vector, got {spec.center!r}")
    if not math.isfinite(spec.angle):
        raise ValidationError("geometry", "make_domain", "angle must be finite")
    kind = spec.kind
    verts = np.zeros((0, 2))
    smooth = True

    if kind == "disk":
        R = p["radius"]
        prims = (_Arc((0, 0), R, 0.0, 2 * np.pi),)
        stats = GeometryStats(math.pi * R * R, R, 2 * R, 2 * math.pi * R)
    elif kind == "ellipse":
        a, b = p["a"], p["b"]
        prims = (_Ellipse(a, b),)
        stats = GeometryStats(math.pi * a * b, min(a, b), 2 * max(a, b), _ellipse_perimeter(a, b))
    elif kind == "rectangle":
        L, W = p["length"], p["width"]
        bx, by = L / 2, W / 2
        verts = np.array([[bx, -by], [bx, by], [-bx, by], [-bx, -by]])
        prims = _polygon_prims(verts)
        smooth = False
        stats = GeometryStats(L * W, min(L, W) / 2, math.hypot(L, W), 2 * (L + W), smooth)
    elif kind == "rounded-rectangle":
        L, W = p["length"], p["width"]
        rho = p.setdefault("rho", W / 4)
        if rho > min(L, W) / 2:
            raise ValidationError("geometry", "make_domain", f"rho={rho} exceeds min(length, width)/2")
        bx, by = L / 2, W / 2
        cx, cy = bx - rho, by - rho
        chain = [
            _Segment((bx, -cy), (bx, cy)),
            _Arc((cx, cy), rho, 0.0, np.pi / 2),
            _Segment((cx, by), (-cx, by)),
            _Arc((-cx, cy), rho, np.pi / 2, np.pi / 2),
            _Segment((-bx, cy), (-bx, -cy)),
            _Arc((-cx, -cy), rho, np.pi, np.pi / 2),
            _Segment((-cx, -by), (cx, -by)),
            _Arc((cx, -cy), rho, 1.5 * np.pi, np.pi / 2),
        ]
        prims = tuple(pr for pr in chain if not isinstance(pr, _Segment) or pr.length > 1e-14)
        spec = DomainSpec(kind, dict(p), spec.center, spec.angle)
        stats = GeometryStats(
            L * W - (4 - math.pi) * rho * rho,
            min(L, W) / 2,
            2 * (math.hypot(cx, cy) + rho),
            2 * (L + W) - 8 * rho + 2 * math.pi * rho,
        )
    elif kind == "equilateral-triangle":
        s = p["side"]
        verts = np.array([[s / 2, -s / (2 * math.sqrt(3))], [0.0, s / math.sqrt(3)], [-s / 2, -s / (2 * math.sqrt(3))]])
        prims = _polygon_prims(verts)
        smooth = False
        stats = GeometryStats(math.sqrt(3) / 4 * s * s, s / (2 * math.sqrt(3)), s, 3 * s, smooth)
    else:  # stadium
        ell, r = p["length"], p["radius"]
        hx = ell / 2
        prims = (
            _Arc((hx, 0.0), r, -np.pi / 2, np.pi),
            _Segment((hx, r), (-hx, r)),
            _Arc((-hx, 0.0), r, np.pi / 2, np.pi),
            _Segment((-hx, -r), (hx, -r)),
        )
        stats = GeometryStats(2 * r * ell + math.pi * r * r, r, ell + 2 * r, 2 * ell + 2 * math.pi * r)

    return Domain(spec=spec, _p=p, _prims=prims, _stats=stats, vertices=verts)


def sdf(domain, p):
    return domain.sdf(p)


def geometry_stats(domain):
    return domain.stats()


def boundary_sample(domain, m):
    """m boundary points equispaced in arclength with inward unit normals.

    Returns (points, normals, arclength) arrays of shapes (m, 2), (m, 2), (m,).
    """
    m = check_count(m, "m", "geometry", "boundary_sample", minimum=3)
    s = np.arange(m) * (domain.boundary_length / m)
    pts, nrm = domain.boundary_point(s)
    return pts, nrm, s


def world_vertices(domain):
    """Corner points of polygonal shapes in the world frame (empty for smooth shapes)."""
    if not len(domain.vertices):
        return np.zeros((0, 2))
    return domain.to_world(domain.vertices)
