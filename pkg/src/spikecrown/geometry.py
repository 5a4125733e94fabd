"""Strictly convex planar curves and the domains they bound.

A boundary curve is represented by a smooth parameterization t in [0,1)
together with a dense precomputed table (points, tangents, outward
normals, curvature, cumulative arclength). Everything downstream only
needs the table for bracketing; final answers always come from the
underlying parameterization, so table resolution limits robustness, not
accuracy.

Supported shapes: circles, ellipses, superellipses |x/a|^m + |y/b|^m = 1
with m >= 2, and periodic cubic splines through sampled control points.
Offsetting inward by delta < 1/kappa_max yields the inner parallel curve
with curvature kappa/(1 - delta*kappa); no third derivatives are needed
for that, which is why providers expose exactly point, first derivative
and curvature.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize
from scipy.spatial import cKDTree

from .errors import (
    ConfigError,
    IntegrationError,
    NonUniqueProjectionError,
    ParallelCurveDegeneracyError,
    PropertyViolationError,
)

_TABLE_N = 4096
_GAUSS5 = np.polynomial.legendre.leggauss(5)
_GAUSS10 = np.polynomial.legendre.leggauss(10)


def _unit_tangent(d1):
    speed = np.linalg.norm(d1, axis=-1, keepdims=True)
    return d1 / speed


def _outward_normal_from_d1(d1):
    # counterclockwise parameterization: outward = tangent rotated -90 deg
    t = _unit_tangent(d1)
    return np.stack([t[..., 1], -t[..., 0]], axis=-1)


class _CircleProvider:
    def __init__(self, radius, center):
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)

    def point(self, t):
        th = 2.0 * np.pi * np.asarray(t, dtype=float)
        return self.center + self.radius * np.stack(
            [np.cos(th), np.sin(th)], axis=-1
        )

    def d1(self, t):
        th = 2.0 * np.pi * np.asarray(t, dtype=float)
        return (2.0 * np.pi * self.radius) * np.stack(
            [-np.sin(th), np.cos(th)], axis=-1
        )

    def curvature(self, t):
        return np.full(np.shape(np.asarray(t, dtype=float)), 1.0 / self.radius)


class _EllipseProvider:
    def __init__(self, a, b):
        self.a = float(a)
        self.b = float(b)

    def point(self, t):
        th = 2.0 * np.pi * np.asarray(t, dtype=float)
        return np.stack([self.a * np.cos(th), self.b * np.sin(th)], axis=-1)

    def d1(self, t):
        th = 2.0 * np.pi * np.asarray(t, dtype=float)
        return 2.0 * np.pi * np.stack(
            [-self.a * np.sin(th), self.b * np.cos(th)], axis=-1
        )

    def curvature(self, t):
        th = 2.0 * np.pi * np.asarray(t, dtype=float)
        g = self.a**2 * np.sin(th) ** 2 + self.b**2 * np.cos(th) ** 2
        return self.a * self.b / g**1.5


class _SplineProvider:
    """Periodic cubic spline r(t) on [0,1]; curvature from r', r''."""

    def __init__(self, spline):
        self._s = spline
        self._s1 = spline.derivative(1)
        self._s2 = spline.derivative(2)

    def point(self, t):
        return self._s(np.mod(np.asarray(t, dtype=float), 1.0))

    def d1(self, t):
        return self._s1(np.mod(np.asarray(t, dtype=float), 1.0))

    def curvature(self, t):
        tm = np.mod(np.asarray(t, dtype=float), 1.0)
        d1 = self._s1(tm)
        d2 = self._s2(tm)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        speed = np.linalg.norm(d1, axis=-1)
        return cross / speed**3


class _OffsetProvider:
    """Inward offset by delta of a base curve, built without second
    derivatives of the offset map: the unit tangent is preserved, the
    speed picks up the factor (1 - delta*kappa), and the curvature is
    kappa / (1 - delta*kappa)."""

    def __init__(self, base, delta):
        self.base = base
        self.delta = float(delta)

    def point(self, t):
        nu = _outward_normal_from_d1(self.base.d1(t))
        return self.base.point(t) - self.delta * nu

    def d1(self, t):
        k = self.base.curvature(t)
        return self.base.d1(t) * (1.0 - self.delta * k)[..., None]

    def curvature(self, t):
        k = self.base.curvature(t)
        return k / (1.0 - self.delta * k)


def _polygon_area_centroid(pts):
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


class ConvexCurve:
    """Closed strictly convex curve with a dense parameter table.

    The parameter t lives on [0,1) and wraps; all evaluation methods
    accept scalars or arrays and any real t. Construction validates
    closure, counterclockwise orientation, outward normals, positive
    curvature (a small negative dip is tolerated only for flat-vertex
    kinds like superellipses, where spline interpolation of the exact
    points wobbles at the curvature zeros), and single winding.
    """

    def __init__(self, provider, kind, n_table=_TABLE_N, flat_tol=0.0):
        self.kind = kind
        self._provider = provider
        self._flat_tol = float(flat_tol)
        n = int(n_table)
        if n < 64:
            raise ConfigError(f"table resolution {n} too coarse")
        self._n = n

        t_ext = np.arange(n + 1) / n
        pts_ext = provider.point(t_ext)
        gap = np.linalg.norm(pts_ext[-1] - pts_ext[0])
        if gap > 1e-10:
            raise ConfigError(f"curve does not close: endpoint gap {gap:.2e}")

        self.t_nodes = t_ext[:n]
        self.points = np.ascontiguousarray(pts_ext[:n])
        d1 = provider.d1(self.t_nodes)
        self.speeds = np.linalg.norm(d1, axis=1)
        self.tangents = d1 / self.speeds[:, None]
        self.normals = np.stack(
            [self.tangents[:, 1], -self.tangents[:, 0]], axis=-1
        )
        self.curvatures = np.asarray(provider.curvature(self.t_nodes), dtype=float)

        kmin = float(self.curvatures.min())
        if kmin <= 0.0 and kmin < -self._flat_tol:
            raise ConfigError(
                f"curve is not strictly convex: min curvature {kmin:.3e}"
            )
        self.kappa_max = float(self.curvatures.max())
        self.kappa_min = max(kmin, 0.0)

        area, centroid = _polygon_area_centroid(self.points)
        if area <= 0.0:
            raise ConfigError("parameterization must run counterclockwise")
        self._centroid = centroid
        out = np.einsum("ij,ij->i", self.normals, self.points - centroid)
        if out.min() <= 0.0:
            raise ConfigError("normals are not consistently outward")

        self.arclengths, self.total_length = self._build_arclength()

        turning = float(
            np.sum(self.curvatures * np.diff(self.arclengths, append=self.total_length))
        )
        if abs(turning - 2.0 * np.pi) > 0.05:
            raise ConfigError(
                f"total turning {turning:.4f} differs from 2*pi; curve winds "
                "more than once or is not simple"
            )

        self._tree = None
        self._diameter = None

    # -- construction helpers -------------------------------------------------

    def _segment_lengths(self, rule):
        nodes, weights = rule
        n = self._n
        h = 1.0 / n
        # Gauss points of every [t_j, t_j+h], evaluated in one vector call
        tt = self.t_nodes[:, None] + (nodes[None, :] + 1.0) * (h / 2.0)
        sp = np.linalg.norm(self._provider.d1(tt.ravel()), axis=1).reshape(n, -1)
        return (h / 2.0) * sp @ weights

    def _build_arclength(self):
        seg5 = self._segment_lengths(_GAUSS5)
        seg10 = self._segment_lengths(_GAUSS10)
        ell5, ell10 = seg5.sum(), seg10.sum()
        if abs(ell5 - ell10) > 1e-8 * ell10:
            raise IntegrationError(
                f"arclength quadrature not converged: {ell5!r} vs {ell10!r}"
            )
        s = np.concatenate([[0.0], np.cumsum(seg10)])
        return s[:-1], float(s[-1])

    # -- evaluation -----------------------------------------------------------

    def point(self, t):
        return self._provider.point(t)

    def d1(self, t):
        return self._provider.d1(t)

    def speed(self, t):
        return np.linalg.norm(self._provider.d1(t), axis=-1)

    def tangent(self, t):
        return _unit_tangent(self._provider.d1(t))

    def normal(self, t):
        return _outward_normal_from_d1(self._provider.d1(t))

    def curvature(self, t):
        return self._provider.curvature(t)

    def arclength(self, t):
        """Cumulative arclength s(t) from t=0, valid for any real t."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tm = np.mod(np.atleast_1d(t), 1.0)
        wraps = np.floor(np.atleast_1d(t) - tm + 0.5)  # integer wrap count
        j = np.minimum((tm * self._n).astype(int), self._n - 1)
        t0 = self.t_nodes[j]
        half = (tm - t0) / 2.0
        nodes, weights = _GAUSS5
        tt = t0[:, None] + (nodes[None, :] + 1.0) * half[:, None]
        sp = np.linalg.norm(self._provider.d1(tt.ravel()), axis=1).reshape(len(tm), -1)
        s = self.arclengths[j] + half * (sp @ weights) + wraps * self.total_length
        return s[0] if scalar else s

    def param_at_arclength(self, s):
        """Inverse of arclength; linear table lookup plus Newton polish."""
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        sm = np.mod(np.atleast_1d(s), self.total_length)
        s_ext = np.concatenate([self.arclengths, [self.total_length]])
        t_ext = np.concatenate([self.t_nodes, [1.0]])
        t = np.interp(sm, s_ext, t_ext)
        for _ in range(2):
            t = t - (self.arclength(t) - sm) / self.speed(t)
        t = np.mod(t, 1.0)
        return t[0] if scalar else t

    # -- cached acceleration structures --------------------------------------

    @property
    def kdtree(self):
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    @property
    def diameter(self):
        if self._diameter is None:
            sub = self.points[::4]
            d2 = np.sum((sub[:, None, :] - sub[None, :, :]) ** 2, axis=-1)
            self._diameter = float(np.sqrt(d2.max()))
        return self._diameter

    @property
    def reach(self):
        """Depth to which inward projection is guaranteed unique."""
        return 0.9 / self.kappa_max


# -- constructors -------------------------------------------------------------


def circle(radius, center=(0.0, 0.0), n_table=_TABLE_N):
    if not radius > 0:
        raise ConfigError(f"circle radius must be positive, got {radius}")
    return ConvexCurve(_CircleProvider(radius, center), "circle", n_table)


def ellipse(a, b, n_table=_TABLE_N):
    if not (a > 0 and b > 0):
        raise ConfigError(f"ellipse semi-axes must be positive, got {a}, {b}")
    return ConvexCurve(_EllipseProvider(a, b), "ellipse", n_table)


def _superellipse_point(a, b, m, th):
    c, s = np.cos(th), np.sin(th)
    x = a * np.sign(c) * np.abs(c) ** (2.0 / m)
    y = b * np.sign(s) * np.abs(s) ** (2.0 / m)
    return np.stack([x, y], axis=-1)


def superellipse(a, b, m, n_table=_TABLE_N):
    """|x/a|^m + |y/b|^m = 1, interpolated through exact points placed
    uniformly in arclength. For m > 2 the curvature vanishes at the four
    axis crossings, so the convexity gate tolerates the interpolation
    wobble there (below 1e-3) instead of demanding a positive floor."""
    if m < 2:
        raise ConfigError(f"superellipse exponent must be >= 2, got {m}")
    if not (a > 0 and b > 0):
        raise ConfigError(f"semi-axes must be positive, got {a}, {b}")
    mm = 4 * int(n_table)
    th = np.linspace(0.0, 2.0 * np.pi, mm + 1)
    pts = _superellipse_point(a, b, m, th)
    chord = np.concatenate(
        [[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
    )
    s_targets = chord[-1] * np.arange(n_table) / n_table
    th_nodes = np.interp(s_targets, chord, th)
    data = _superellipse_point(a, b, m, th_nodes)
    data = np.vstack([data, data[:1]])
    ts = np.arange(n_table + 1) / n_table
    sp = CubicSpline(ts, data, axis=0, bc_type="periodic")
    flat_tol = 1e-3 if m > 2 else 0.0
    return ConvexCurve(_SplineProvider(sp), "superellipse", n_table, flat_tol)


def spline_curve(points, n_table=_TABLE_N):
    """Closed periodic cubic spline through sampled boundary points.

    Points may be listed clockwise; they are reoriented. Construction
    fails with ConfigError when the interpolant is not strictly convex.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise ConfigError("need at least 4 planar control points")
    if np.linalg.norm(pts[0] - pts[-1]) < 1e-12:
        pts = pts[:-1]
    x, y = pts[:, 0], pts[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if area < 0:
        pts = pts[::-1]
    closed = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    if seg.min() < 1e-12:
        raise ConfigError("duplicate consecutive control points")
    u = np.concatenate([[0.0], np.cumsum(seg)])
    u /= u[-1]
    sp = CubicSpline(u, closed, axis=0, bc_type="periodic")
    return ConvexCurve(_SplineProvider(sp), "spline", n_table)


def curve_from_csv(path, n_table=_TABLE_N):
    """Control points from a CSV of x,y rows (optional header)."""
    try:
        pts = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return spline_curve(pts, n_table)


def make_curve(spec, n_table=_TABLE_N):
    """Curve from a plain dict, e.g. {"kind": "ellipse", "a": 2.0, "b": 1.0}."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"curve spec must be a dict with a 'kind': {spec!r}")
    kind = spec["kind"]
    try:
        if kind == "circle":
            return circle(
                spec["radius"], spec.get("center", (0.0, 0.0)), n_table
            )
        if kind == "ellipse":
            return ellipse(spec["a"], spec["b"], n_table)
        if kind == "superellipse":
            return superellipse(spec["a"], spec["b"], spec["m"], n_table)
        if kind == "spline":
            if "csv" in spec:
                return curve_from_csv(spec["csv"], n_table)
            return spline_curve(spec["points"], n_table)
    except KeyError as exc:
        raise ConfigError(f"curve spec {spec!r} missing field {exc}") from None
    raise ConfigError(f"unknown curve kind {kind!r}")


class PlanarDomain:
    """Region bounded by a strictly convex curve; distances are signed
    negative inside."""

    def __init__(self, boundary):
        if not isinstance(boundary, ConvexCurve):
            raise ConfigError("domain boundary must be a ConvexCurve")
        self.boundary = boundary
        self._inradius = None

    def signed_distance(self, x):
        """Distance to the boundary, negative inside. Accepts a single
        point or an (n,2) batch; never raises on medial-axis points."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        X = np.atleast_2d(x)
        if not np.all(np.isfinite(X)):
            raise ConfigError("query points must be finite")
        bd = self.boundary
        n = bd._n
        _, j = bd.kdtree.query(X)
        jm = (j - 1) % n
        jp = (j + 1) % n

        def sq(idx):
            d = X - bd.points[idx]
            return np.einsum("ij,ij->i", d, d)

        d2m, d20, d2p = sq(jm), sq(j), sq(jp)
        denom = d2m - 2.0 * d20 + d2p
        with np.errstate(divide="ignore", invalid="ignore"):
            alpha = np.where(
                np.abs(denom) > 1e-300, 0.5 * (d2m - d2p) / denom, 0.0
            )
        alpha = np.clip(np.nan_to_num(alpha), -1.0, 1.0)
        t_star = bd.t_nodes[j] + alpha / n
        # Parabolic start is only ~1e-7 in t; polish the tangency residual
        # (P-x).P' with the derivative approximated by |P'|^2. The missing
        # term is -kappa*d*|P'|^2, so the iteration contracts at rate
        # kappa*d: essentially one-shot near the boundary (where accuracy
        # matters), and harmlessly slow only near focal points (where the
        # distance value is insensitive to t).
        for _ in range(3):
            diff = bd.point(t_star) - X
            d1 = bd.d1(t_star)
            t_star = t_star - np.einsum("ij,ij->i", diff, d1) / np.einsum(
                "ij,ij->i", d1, d1
            )
        proj = bd.point(t_star)
        diff = X - proj
        dist = np.linalg.norm(diff, axis=1)
        side = np.einsum("ij,ij->i", bd.normal(t_star), diff)
        out = np.where(side >= 0.0, dist, -dist)
        return float(out[0]) if scalar else out

    def contains(self, x):
        return self.signed_distance(x) < 0.0

    @property
    def centroid(self):
        return self.boundary._centroid.copy()

    @property
    def max_curvature(self):
        return self.boundary.kappa_max

    @property
    def inradius(self):
        if self._inradius is None:
            res = minimize(
                lambda z: self.signed_distance(z),
                self.centroid,
                method="Nelder-Mead",
                options={"xatol": 1e-12, "fatol": 1e-12, "maxiter": 2000},
            )
            self._inradius = float(-res.fun)
        return self._inradius

    def inner_curve(self, delta):
        return inner_parallel_curve(self.boundary, delta)


def make_domain(spec, n_table=_TABLE_N):
    return PlanarDomain(make_curve(spec, n_table))


# -- module-level operations --------------------------------------------------


def signed_distance(dom, x):
    return dom.signed_distance(x)


def curve_length(curve):
    return curve.total_length


def project_to_curve(curve, x):
    """Nearest-point projection onto the curve.

    Returns (t_star, point). The dense table supplies brackets around
    every local minimum of the distance; the winner is polished by a
    bracketed root of (P(t)-x).P'(t), which stays quadratic where the
    plain distance is too flat to compare. Ambiguity (a medial-axis
    query, or two refined minima within 1e-9 relative) raises."""
    x = np.asarray(x, dtype=float)
    if x.shape != (2,) or not np.all(np.isfinite(x)):
        raise ConfigError(f"query point must be a finite pair, got {x!r}")
    n = curve._n
    D = np.linalg.norm(curve.points - x, axis=1)
    dmin = float(D.min())
    near = D <= dmin + 1e-9 * max(1.0, dmin)
    if near.sum() > n // 8:
        raise NonUniqueProjectionError(
            f"point {x} is nearly equidistant from a large boundary arc"
        )
    is_min = (D < np.roll(D, 1)) & (D <= np.roll(D, -1))
    cand = np.nonzero(is_min)[0]
    keep = cand[D[cand] <= dmin + curve.total_length / n]
    h = 1.0 / n

    def g(t):
        return float(np.dot(curve.point(t) - x, curve.d1(t)))

    refined = []
    for j in keep[np.argsort(D[keep])][:8]:
        tj = curve.t_nodes[j]
        lo, hi = tj - h, tj + h
        glo, gj, ghi = g(lo), g(tj), g(hi)
        if glo < 0.0 < gj:
            ts = brentq(g, lo, tj, xtol=1e-15, rtol=8.9e-16, maxiter=200)
        elif gj < 0.0 < ghi:
            ts = brentq(g, tj, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
        elif glo < 0.0 < ghi:
            ts = brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
        else:
            ts = tj
        refined.append((float(np.linalg.norm(curve.point(ts) - x)), ts))
    refined.sort()
    best_d, best_t = refined[0]
    for other_d, other_t in refined[1:]:
        sep = abs(other_t - best_t) % 1.0
        sep = min(sep, 1.0 - sep)
        if sep > 4.0 * h and other_d - best_d <= 1e-9 * max(1.0, best_d):
            raise NonUniqueProjectionError(
                f"two projection candidates for {x}: distances "
                f"{best_d:.12e} and {other_d:.12e}"
            )
    return float(np.mod(best_t, 1.0)), curve.point(best_t)


def inner_parallel_curve(curve, delta):
    """Locus of interior points at distance delta from the curve."""
    delta = float(delta)
    if not delta > 0.0:
        raise ConfigError(f"offset distance must be positive, got {delta}")
    if delta * curve.kappa_max >= 1.0:
        raise ParallelCurveDegeneracyError(
            f"offset {delta} reaches 1/kappa_max = {1.0 / curve.kappa_max:.6g}; "
            "inner parallel curve degenerates"
        )
    if curve.kind == "circle":
        prov = curve._provider
        return circle(prov.radius - delta, prov.center, curve._n)
    return ConvexCurve(
        _OffsetProvider(curve._provider, delta),
        f"parallel({curve.kind})",
        curve._n,
        flat_tol=2.0 * curve._flat_tol,
    )


def _pair_scan(P, N, delta_sep, chunk=256):
    """Exhaustive ordered-pair scan of nu_P.(P-Q) over |P-Q| >= delta_sep."""
    best = np.inf
    best_pair = (0, 0)
    for lo in range(0, len(P), chunk):
        hi = min(lo + chunk, len(P))
        diff = P[lo:hi, None, :] - P[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        val = np.einsum("ik,ijk->ij", N[lo:hi], diff)
        val = np.where(dist >= delta_sep, val, np.inf)
        k = np.unravel_index(np.argmin(val), val.shape)
        if val[k] < best:
            best = float(val[k])
            best_pair = (lo + k[0], k[1])
    return best, best_pair


def check_strict_convexity(curve, delta_sep, refine=True):
    """Minimum of nu_P.(P-Q) over boundary pairs with |P-Q| >= delta_sep.

    Positive margin quantifies strict convexity at separation delta_sep.
    A subsampled exhaustive scan locates the minimizing pair; a
    constrained local polish then removes the grid bias. delta_sep = 0
    degenerates to the coincident-pair value 0."""
    delta_sep = float(delta_sep)
    if delta_sep < 0:
        raise ConfigError(f"separation must be nonnegative, got {delta_sep}")
    stride = 2
    P = curve.points[::stride]
    N = curve.normals[::stride]
    margin, (i0, j0) = _pair_scan(P, N, delta_sep)
    if not np.isfinite(margin):
        return np.inf  # delta_sep exceeds the diameter: empty pair set
    if not refine or delta_sep == 0.0:
        return margin
    tp0 = curve.t_nodes[stride * i0]
    tq0 = curve.t_nodes[stride * j0]

    def objective(z):
        p = curve.point(z[0])
        nu = _outward_normal_from_d1(curve.d1(z[0]))
        return float(np.dot(nu, p - curve.point(z[1])))

    def constraint(z):
        return float(np.linalg.norm(curve.point(z[0]) - curve.point(z[1])) - delta_sep)

    res = minimize(
        objective,
        np.array([tp0, tq0]),
        method="SLSQP",
        constraints=[{"type": "ineq", "fun": constraint}],
        options={"ftol": 1e-14, "maxiter": 200},
    )
    if res.success and constraint(res.x) > -1e-10:
        margin = min(margin, float(res.fun))
    return margin


@dataclass
class ContractionReport:
    """Outcome of sampling the two-point inward-shift inequality."""

    n_samples: int
    n_violations: int
    worst_slack: float
    eta_max: float
    worst_case: tuple


def contraction_check(curve, delta_sep, eta_max, n_samples, seed=0):
    """Sample pairs P,Q with |P-Q| >= delta_sep and inward shifts
    eta1, eta2 in [0, eta_max]; verify the shifted points are strictly
    closer than |P-Q|. Raises PropertyViolationError (report attached)
    on any failure; otherwise returns the report with the worst slack."""
    eta_max = float(eta_max)
    if eta_max < 0:
        raise ConfigError(f"eta_max must be nonnegative, got {eta_max}")
    rng = np.random.default_rng(seed)
    tp = np.empty(0)
    tq = np.empty(0)
    for _ in range(200):
        need = n_samples - len(tp)
        if need <= 0:
            break
        cand_p = rng.uniform(0.0, 1.0, 2 * need + 16)
        cand_q = rng.uniform(0.0, 1.0, 2 * need + 16)
        d = np.linalg.norm(curve.point(cand_p) - curve.point(cand_q), axis=1)
        ok = d >= delta_sep
        tp = np.concatenate([tp, cand_p[ok]])
        tq = np.concatenate([tq, cand_q[ok]])
    if len(tp) < n_samples:
        raise ConfigError(
            f"separation {delta_sep} excludes almost every boundary pair"
        )
    tp, tq = tp[:n_samples], tq[:n_samples]
    P, Q = curve.point(tp), curve.point(tq)
    nup = _outward_normal_from_d1(curve.d1(tp))
    nuq = _outward_normal_from_d1(curve.d1(tq))
    eta1 = rng.uniform(0.0, eta_max, n_samples)
    eta2 = rng.uniform(0.0, eta_max, n_samples)
    orig = np.linalg.norm(P - Q, axis=1)
    moved = np.linalg.norm((P - eta1[:, None] * nup) - (Q - eta2[:, None] * nuq), axis=1)
    slack = orig - moved
    worst = int(np.argmin(slack))
    report = ContractionReport(
        n_samples=int(n_samples),
        n_violations=int(np.count_nonzero(slack <= 0.0)),
        worst_slack=float(slack[worst]),
        eta_max=eta_max,
        worst_case=(float(tp[worst]), float(tq[worst]), float(eta1[worst]), float(eta2[worst])),
    )
    if report.n_violations > 0:
        raise PropertyViolationError(
            f"{report.n_violations} of {n_samples} sampled pairs moved apart "
            f"(worst slack {report.worst_slack:.3e}); eta_max {eta_max} too large",
            report,
        )
    return report


def eikonal_defect(dom, x, step=1e-5):
    """|grad signed_distance| - 1 by central differences; diagnostic."""
    x = np.asarray(x, dtype=float)
    e1 = np.array([step, 0.0])
    e2 = np.array([0.0, step])
    gx = (dom.signed_distance(x + e1) - dom.signed_distance(x - e1)) / (2 * step)
    gy = (dom.signed_distance(x + e2) - dom.signed_distance(x - e2)) / (2 * step)
    return float(np.hypot(gx, gy) - 1.0)
