"""Spherical geometry kernels: projection, longitude lift, geodesics and
closed-form Hessians together with a finite-difference geodesic oracle.

Points of S^n are stored as unit vectors in R^{n+1}.  The longitude chart
projects onto two chosen coordinates (the first two by default) and reads
off the polar radius ``r`` and the angle ``theta`` of the projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BranchJump,
    DegenerateCircle,
    NoMargin,
    NotTangent,
    OnAxis,
    OnBranchCut,
    SearchExhausted,
)

TWO_PI = 2.0 * math.pi
UNIT_TOL = 1e-12
AXIS_TOL = 1e-12


def _as_array(x) -> np.ndarray:
    if isinstance(x, SpherePoint):
        return x.coords
    if isinstance(x, TangentVector):
        return x.dir
    return np.asarray(x, dtype=float)


@dataclass(frozen=True, eq=False)
class SpherePoint:
    """A point of the unit sphere S^n inside R^{n+1}."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        if c.ndim != 1 or c.size < 3:
            raise ValueError("a sphere point needs n + 1 >= 3 coordinates")
        if abs(np.linalg.norm(c) - 1.0) > UNIT_TOL:
            raise ValueError(f"not a unit vector: |x| = {np.linalg.norm(c)!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @classmethod
    def normalized(cls, coords) -> "SpherePoint":
        c = np.asarray(coords, dtype=float)
        return cls(c / np.linalg.norm(c))

    @classmethod
    def basis_vector(cls, i: int, n: int) -> "SpherePoint":
        """The unit vector whose ``i``-th coordinate (0-based) is 1, on S^n."""
        c = np.zeros(n + 1)
        c[i] = 1.0
        return cls(c)

    @property
    def n(self) -> int:
        return self.coords.size - 1

    def __repr__(self):
        return f"SpherePoint({np.array2string(self.coords, precision=6)})"


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A vector tangent to the sphere at ``base``."""

    base: SpherePoint
    dir: np.ndarray

    def __post_init__(self):
        d = np.array(self.dir, dtype=float)
        if d.shape != self.base.coords.shape:
            raise ValueError("tangent vector and base point have different sizes")
        if abs(float(self.base.coords @ d)) > UNIT_TOL:
            raise NotTangent(f"(x, v) = {float(self.base.coords @ d)!r} is not 0")
        d.setflags(write=False)
        object.__setattr__(self, "dir", d)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.dir))


def project(x, axes: tuple[int, int] = (0, 1)) -> tuple[float, float]:
    """Projection of R^{n+1} onto the plane of the two chosen coordinates."""
    c = _as_array(x)
    return float(c[axes[0]]), float(c[axes[1]])


def _wrap(a):
    """Map angles into [-pi, pi)."""
    return (np.asarray(a) + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class LongitudeChart:
    """Lift of the projected polar angle to a real-valued longitude.

    The chart takes values in the open interval
    ``(center - pi, center + pi)``.  Its branch cut is the closed half great
    hypersphere of points whose projection has angle ``center + pi``
    (including the codimension-2 subsphere r = 0).  The default
    ``center = pi`` is the standard cut ``{x_1 >= 0, x_2 = 0}`` with
    longitude in ``(0, 2 pi)``.

    Parameters
    ----------
    center : float
        Middle of the longitude range.
    cut_margin : float
        Minimal admissible angular (geodesic) distance to the cut.
    axes : tuple of int
        The coordinates used by the projection.
    """

    center: float = math.pi
    cut_margin: float = 1e-9
    axes: tuple[int, int] = (0, 1)

    @classmethod
    def standard(cls, cut_margin: float = 1e-9, axes=(0, 1)) -> "LongitudeChart":
        return cls(math.pi, cut_margin, tuple(axes))

    @classmethod
    def continued(cls, reference, reference_angle: float | None = None,
                  cut_margin: float = 1e-9, axes=(0, 1)) -> "LongitudeChart":
        """Chart continued from a reference point.

        The reference point receives ``reference_angle`` (which must agree
        with its projected angle modulo 2 pi); every other point receives the
        representative closest to it.
        """
        c = _as_array(reference)
        a = math.atan2(c[axes[1]], c[axes[0]])
        if reference_angle is None:
            reference_angle = a
        elif abs(float(_wrap(reference_angle - a))) > 1e-9:
            raise ValueError("reference angle does not match the reference point")
        return cls(float(reference_angle), cut_margin, tuple(axes))

    @property
    def branch(self) -> str:
        return "standard" if self.center == math.pi and self.axes == (0, 1) else "continued"

    @property
    def cut_angle(self) -> float:
        return self.center + math.pi

    def polar(self, x) -> tuple[float, float]:
        """Return ``(r, theta)`` after validating the axis and cut margins."""
        c = _as_array(x)
        p, q = c[self.axes[0]], c[self.axes[1]]
        r = math.hypot(p, q)
        if r < AXIS_TOL:
            raise OnAxis(f"r(x) = {r!r} is below {AXIS_TOL}")
        delta = float(_wrap(math.atan2(q, p) - self.center))
        if self.cut_margin > 0.0:
            to_cut = math.pi - abs(delta)
            dist = math.asin(min(1.0, r * math.sin(min(to_cut, 0.5 * math.pi))))
            if dist < self.cut_margin:
                raise OnBranchCut(
                    f"angular distance {dist!r} to the cut is below {self.cut_margin}")
        return r, self.center + delta

    def polar_many(self, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised :meth:`polar` over the rows of ``coords``.

        The raised errors carry the index of the first offending row in
        their ``vertex`` attribute.
        """
        c = np.asarray(coords, dtype=float)
        p, q = c[:, self.axes[0]], c[:, self.axes[1]]
        r = np.hypot(p, q)
        bad = np.flatnonzero(r < AXIS_TOL)
        if bad.size:
            i = int(bad[0])
            raise OnAxis(f"vertex {i}: r = {r[i]!r} is below {AXIS_TOL}", vertex=i)
        delta = _wrap(np.arctan2(q, p) - self.center)
        if self.cut_margin > 0.0:
            to_cut = math.pi - np.abs(delta)
            dist = np.arcsin(np.minimum(1.0, r * np.sin(np.minimum(to_cut, 0.5 * math.pi))))
            bad = np.flatnonzero(dist < self.cut_margin)
            if bad.size:
                i = int(bad[0])
                raise OnBranchCut(
                    f"vertex {i}: distance {dist[i]!r} to the cut is below "
                    f"{self.cut_margin}", vertex=i)
        return r, self.center + delta

    def lift(self, x) -> tuple[float, float]:
        return self.polar(x)

    def r(self, x) -> float:
        return self.polar(x)[0]

    def theta(self, x) -> float:
        return self.polar(x)[1]

    def grad_r(self, x) -> np.ndarray:
        """Spherical gradient of ``r`` at ``x`` as an ambient vector."""
        c = _as_array(x)
        r, _ = self.polar(c)
        g = np.zeros_like(c)
        g[self.axes[0]] = c[self.axes[0]] / r
        g[self.axes[1]] = c[self.axes[1]] / r
        return g - r * c

    def grad_theta(self, x) -> np.ndarray:
        """Spherical gradient of ``theta`` at ``x`` (already tangent)."""
        c = _as_array(x)
        r, _ = self.polar(c)
        g = np.zeros_like(c)
        g[self.axes[0]] = -c[self.axes[1]] / r**2
        g[self.axes[1]] = c[self.axes[0]] / r**2
        return g


def lift(x, chart: LongitudeChart | None = None) -> tuple[float, float]:
    """Return ``(r, theta)`` of ``x`` in ``chart`` (standard cut by default)."""
    return (chart or LongitudeChart()).polar(x)


def continue_along(path: Sequence, start_angle: float | None = None,
                   axes=(0, 1), max_jump: float = 0.5 * math.pi) -> np.ndarray:
    """Lift the longitude continuously along a discrete path.

    Each step adds the principal angle increment between consecutive
    projected points.  Steps whose increment exceeds ``max_jump`` are
    rejected with :class:`BranchJump`.
    """
    pts = np.array([_as_array(p) for p in path], dtype=float)
    p, q = pts[:, axes[0]], pts[:, axes[1]]
    r = np.hypot(p, q)
    if np.any(r < AXIS_TOL):
        raise OnAxis("path meets the codimension-2 subsphere", vertex=int(np.argmax(r < AXIS_TOL)))
    raw = np.arctan2(q, p)
    steps = _wrap(np.diff(raw))
    big = np.flatnonzero(np.abs(steps) > max_jump)
    if big.size:
        raise BranchJump(f"step {int(big[0])} jumps by {float(steps[big[0]])!r} rad")
    a0 = raw[0] if start_angle is None else float(start_angle)
    if abs(float(_wrap(a0 - raw[0]))) > 1e-9:
        raise ValueError("start angle does not match the first path point")
    return a0 + np.concatenate([[0.0], np.cumsum(steps)])


def geodesic(x, v, t: float) -> SpherePoint:
    """Point at arc length ``t`` along the great circle from ``x`` in direction ``v``."""
    xc, vc = _as_array(x), _as_array(v)
    if abs(np.linalg.norm(vc) - 1.0) > 1e-10 or abs(float(xc @ vc)) > 1e-10:
        raise NotTangent("geodesic direction must be a unit tangent vector")
    return SpherePoint.normalized(math.cos(t) * xc + math.sin(t) * vc)


def _geodesic_point(xc: np.ndarray, vc: np.ndarray, t: float) -> np.ndarray:
    return math.cos(t) * xc + math.sin(t) * vc


def tangent_basis(x) -> np.ndarray:
    """Orthonormal basis of the tangent space at ``x``.

    Gram-Schmidt applied to the coordinate vectors in their natural order
    after removing the ``x`` component; vectors that become too short are
    skipped.  Returns an ``(n, n + 1)`` array of row vectors.
    """
    c = _as_array(x)
    rows = [c]
    for i in range(c.size):
        e = np.zeros_like(c)
        e[i] = 1.0
        for b in rows:
            e -= (e @ b) * b
        for b in rows:  # second pass keeps orthogonality at round-off level
            e -= (e @ b) * b
        nrm = np.linalg.norm(e)
        if nrm > 1e-6:
            rows.append(e / nrm)
        if len(rows) == c.size:
            break
    return np.array(rows[1:])


@dataclass(frozen=True, eq=False)
class BilinearForm:
    """Symmetric bilinear form on T_xS^n written in an orthonormal basis."""

    entries: np.ndarray
    basis: np.ndarray
    base: np.ndarray | None = field(default=None)

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError("entries must be a square matrix")
        if not np.array_equal(e, e.T):
            raise ValueError("bilinear form entries must be exactly symmetric")
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "basis", np.asarray(self.basis, dtype=float))

    def __call__(self, v, w=None) -> float:
        """Evaluate on ambient tangent vectors ``v`` and ``w`` (``w = v`` by default)."""
        a = self.basis @ _as_array(v)
        b = a if w is None else self.basis @ _as_array(w)
        return float(a @ self.entries @ b)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _check_basis(x: np.ndarray, basis: np.ndarray):
    basis = np.asarray(basis, dtype=float)
    if basis.shape != (x.size - 1, x.size):
        raise ValueError(f"basis must have shape {(x.size - 1, x.size)}")
    if np.max(np.abs(basis @ x)) > 1e-10:
        raise NotTangent("basis vectors are not tangent at x")
    if np.max(np.abs(basis @ basis.T - np.eye(basis.shape[0]))) > 1e-10:
        raise ValueError("basis is not orthonormal")
    return basis


def hess_linear(x, a, basis=None) -> BilinearForm:
    """Hessian of the linear function ``(., a)``: ``-(x, a)`` times the metric."""
    xc = _as_array(x)
    basis = tangent_basis(xc) if basis is None else _check_basis(xc, basis)
    val = -float(xc @ np.asarray(a, dtype=float))
    return BilinearForm(val * np.eye(basis.shape[0]), basis, xc)


def hess_r(x, chart: LongitudeChart | None = None, basis=None) -> BilinearForm:
    """Closed-form Hessian of ``r``: ``-r g + r dtheta (x) dtheta``."""
    chart = chart or LongitudeChart()
    xc = _as_array(x)
    basis = tangent_basis(xc) if basis is None else _check_basis(xc, basis)
    r, _ = chart.polar(xc)
    dth = basis @ chart.grad_theta(xc)
    return BilinearForm(-r * np.eye(basis.shape[0]) + r * np.outer(dth, dth), basis, xc)


def hess_theta(x, chart: LongitudeChart | None = None, basis=None) -> BilinearForm:
    """Closed-form Hessian of ``theta``: ``-(dr (x) dtheta + dtheta (x) dr) / r``."""
    chart = chart or LongitudeChart()
    xc = _as_array(x)
    basis = tangent_basis(xc) if basis is None else _check_basis(xc, basis)
    r, _ = chart.polar(xc)
    dr = basis @ chart.grad_r(xc)
    dth = basis @ chart.grad_theta(xc)
    return BilinearForm(-(np.outer(dr, dth) + np.outer(dth, dr)) / r, basis, xc)


def hess_theta_value(x, v, w=None, chart: LongitudeChart | None = None) -> float:
    """``Hess theta(v, w)`` straight from the differentials of r and theta.

    The value is a sum of products each carrying a factor ``dtheta``, so it
    is exactly zero whenever ``dtheta(v) = dtheta(w) = 0``.
    """
    chart = chart or LongitudeChart()
    xc, vc = _as_array(x), _as_array(v)
    wc = vc if w is None else _as_array(w)
    r, _ = chart.polar(xc)
    gr = chart.grad_r(xc)
    return -(float(gr @ vc) * dtheta(xc, wc, chart) + dtheta(xc, vc, chart) * float(gr @ wc)) / r


def dtheta(x, v, chart: LongitudeChart | None = None) -> float:
    """Differential of the longitude applied to ``v``.

    Evaluated as a 2x2 cross product, so it is exactly zero when the
    chart-plane part of ``v`` is a power-of-two multiple of that of ``x``.
    """
    chart = chart or LongitudeChart()
    xc, vc = _as_array(x), _as_array(v)
    i, j = chart.axes
    r2 = xc[i] ** 2 + xc[j] ** 2
    return float((xc[i] * vc[j] - xc[j] * vc[i]) / r2)


def second_derivative_along(f: Callable[[np.ndarray], float], x: np.ndarray,
                            v: np.ndarray, h: float) -> float:
    """``d^2/dt^2 f(gamma(t))`` at 0 for the unit-speed geodesic in direction ``v``.

    Central second differences at steps ``h`` and ``h/2`` combined by one
    Richardson extrapolation step.
    """
    f0 = f(x)

    def d2(s):
        return (f(_geodesic_point(x, v, s)) - 2.0 * f0 + f(_geodesic_point(x, v, -s))) / (s * s)

    return (4.0 * d2(0.5 * h) - d2(h)) / 3.0


def first_derivative_along(f: Callable[[np.ndarray], float], x: np.ndarray,
                           v: np.ndarray, h: float) -> float:
    """Richardson-extrapolated central first derivative along a geodesic."""

    def d1(s):
        return (f(_geodesic_point(x, v, s)) - f(_geodesic_point(x, v, -s))) / (2.0 * s)

    return (4.0 * d1(0.5 * h) - d1(h)) / 3.0


def fd_hessian(f: Callable[[np.ndarray], float], x, basis=None, h: float = 1e-3) -> BilinearForm:
    """Finite-difference Hessian of ``f`` at ``x`` in ``basis``.

    Diagonal entries are second derivatives along unit-speed geodesics;
    off-diagonal entries use the polarisation identity on the directions
    ``(b_i +- b_j) / sqrt(2)``.  ``f`` is called on raw coordinate arrays.
    """
    if not 1e-5 <= h <= 1e-2:
        raise ValueError("step h must lie in [1e-5, 1e-2]")
    xc = _as_array(x)
    basis = tangent_basis(xc) if basis is None else _check_basis(xc, basis)
    k = basis.shape[0]
    out = np.zeros((k, k))
    for i in range(k):
        out[i, i] = second_derivative_along(f, xc, basis[i], h)
    s = 1.0 / math.sqrt(2.0)
    for i in range(k):
        for j in range(i + 1, k):
            plus = second_derivative_along(f, xc, s * (basis[i] + basis[j]), h)
            minus = second_derivative_along(f, xc, s * (basis[i] - basis[j]), h)
            out[i, j] = out[j, i] = 0.5 * (plus - minus)
    return BilinearForm(out, basis, xc)


# --- strictly convex functions -----------------------------------------------


@dataclass(frozen=True)
class ConvexBuilderResult:
    """Outcome of :func:`build_convex_function`."""

    c: float
    lam: float
    min_hessian_eigenvalue: float
    sample_count: int


def level_tangent(x, rng: np.random.Generator, chart: LongitudeChart | None = None) -> np.ndarray:
    """Random tangent ``v`` at ``x`` with ``dtheta(v) == 0`` in floating point.

    The chart-plane part of ``v`` is ``+-2^k`` times that of ``x``; the rest
    is chosen to make ``v`` tangent.  Requires ``n >= 2``.
    """
    chart = chart or LongitudeChart()
    xc = _as_array(x)
    i, j = chart.axes
    rest = np.ones(xc.size, dtype=bool)
    rest[[i, j]] = False
    xr = xc[rest]
    a = float(rng.choice([-1.0, 1.0]) * 2.0 ** int(rng.integers(-1, 2)))
    v = np.zeros_like(xc)
    v[i], v[j] = a * xc[i], a * xc[j]
    r2 = xc[i] ** 2 + xc[j] ** 2
    w = rng.standard_normal(xr.size)
    nr2 = float(xr @ xr)
    if nr2 > 0:
        w -= (w @ xr) / nr2 * xr
        w -= a * r2 / nr2 * xr
    elif a != 0:
        raise ValueError("no level tangent of this form at a point of the chart plane")
    v[rest] = w
    return v


def convex_hessian(x, chart: LongitudeChart, c: float, lam: float, basis=None) -> BilinearForm:
    """Hessian of ``F = exp(lam * phi) / lam`` with ``phi = theta + arcsin(c / r)``.

    ``Hess F = exp(lam phi) (Hess phi + lam dphi (x) dphi)`` and ``Hess phi``
    follows from the closed forms of ``Hess r`` and ``Hess theta``.
    """
    xc = _as_array(x)
    basis = tangent_basis(xc) if basis is None else _check_basis(xc, basis)
    r, th = chart.polar(xc)
    if not 0.0 < c < r:
        raise NoMargin(f"need 0 < c < r, got c = {c!r}, r = {r!r}")
    dr = basis @ chart.grad_r(xc)
    dth = basis @ chart.grad_theta(xc)
    s = math.sqrt(r * r - c * c)
    g1 = -c / (r * s)                                # d/dr arcsin(c/r)
    g2 = c * (2.0 * r * r - c * c) / (r * r * s**3)  # d2/dr2 arcsin(c/r)
    eye = np.eye(basis.shape[0])
    h_theta = -(np.outer(dr, dth) + np.outer(dth, dr)) / r
    h_r = -r * eye + r * np.outer(dth, dth)
    h_phi = h_theta + g2 * np.outer(dr, dr) + g1 * h_r
    dphi = dth + g1 * dr
    phi = th + math.asin(c / r)
    with np.errstate(over="ignore"):
        scale = math.exp(lam * phi) if lam * phi < 700 else math.inf
    return BilinearForm(_sym(scale * (h_phi + lam * np.outer(dphi, dphi))), basis, xc)


def convex_min_eigenvalue(samples: Sequence, chart: LongitudeChart, c: float, lam: float) -> float:
    """Smallest Hessian eigenvalue of ``F`` over all samples."""
    return min(float(convex_hessian(s, chart, c, lam).eigenvalues()[0]) for s in samples)


def build_convex_function(samples: Sequence, chart: LongitudeChart | None = None,
                          max_lambda: float = 2.0**20) -> ConvexBuilderResult:
    """Find ``c`` and ``lam`` making ``F = exp(lam phi) / lam`` strictly convex on the samples.

    ``c`` is half the smallest ``r`` over the samples; ``lam`` doubles from 1
    until the smallest Hessian eigenvalue over the samples is positive.
    """
    chart = chart or LongitudeChart()
    pts = [_as_array(s) for s in samples]
    if not pts:
        raise ValueError("need at least one sample")
    i, j = chart.axes
    rmin = min(math.hypot(p[i], p[j]) for p in pts)
    if rmin <= 1e-6:
        raise NoMargin(f"min r over samples is {rmin!r}")
    for p in pts:
        chart.polar(p)
    c = 0.5 * rmin
    lam = 1.0
    while lam <= max_lambda:
        ev = convex_min_eigenvalue(pts, chart, c, lam)
        if ev > 0.0:
            return ConvexBuilderResult(c, lam, ev, len(pts))
        lam *= 2.0
    raise SearchExhausted(f"no lambda <= {max_lambda} gives a convex function")


# --- appendix constructions -----------------------------------------------


APPENDIX_ARCS = (
    (0.0, math.pi / 3.0),
    (2.0 * math.pi / 3.0, math.pi),
    (4.0 * math.pi / 3.0, 5.0 * math.pi / 3.0),
)


def _in_arcs(angle, arcs, tol: float = 1e-12):
    a = np.asarray(angle) % TWO_PI
    hit = np.zeros(a.shape, dtype=bool)
    for lo, hi in arcs:
        lo_m = lo % TWO_PI
        span = hi - lo
        if span >= TWO_PI:
            return np.ones(a.shape, dtype=bool)
        rel = (a - lo_m) % TWO_PI
        hit |= (rel <= span + tol) | (rel >= TWO_PI - tol)
    return hit


def great_circle_hits_arcs(point, tangent, arcs=APPENDIX_ARCS) -> tuple[bool, float | None]:
    """Does the great circle through ``point`` along ``tangent`` meet the equator arcs?

    The equator is ``{x_3 = 0}`` on S^2 and ``arcs`` are closed longitude
    intervals on it.  Returns ``(hit, witness_angle)``.
    """
    p, t = _as_array(point), _as_array(tangent)
    if p.size != 3:
        raise ValueError("great-circle test is defined on S^2")
    if np.linalg.norm(np.cross(p, t)) < 1e-12 * max(1.0, np.linalg.norm(t)):
        raise DegenerateCircle("point and tangent do not span a plane")
    arcs = list(arcs)
    if not arcs:
        return False, None
    d = p[2] * t - t[2] * p
    if np.linalg.norm(d) < 1e-14:
        # the circle is the equator itself
        return True, float(arcs[0][0] % TWO_PI)
    candidates = np.arctan2([d[1], -d[1]], [d[0], -d[0]]) % TWO_PI
    for a in candidates:
        if _in_arcs(a, arcs):
            return True, float(a)
    return False, None


def arc_hits_batch(points: np.ndarray, tangents: np.ndarray, arcs=APPENDIX_ARCS) -> np.ndarray:
    """Vectorised :func:`great_circle_hits_arcs` returning a boolean array."""
    p = np.asarray(points, dtype=float)
    t = np.asarray(tangents, dtype=float)
    if np.any(np.linalg.norm(np.cross(p, t), axis=1) < 1e-12):
        raise DegenerateCircle("some point/tangent pair does not span a plane")
    arcs = list(arcs)
    if not arcs:
        return np.zeros(len(p), dtype=bool)
    d = p[:, 2:3] * t - t[:, 2:3] * p
    equator = np.linalg.norm(d, axis=1) < 1e-14
    a = np.arctan2(d[:, 1], d[:, 0])
    return equator | _in_arcs(a, arcs) | _in_arcs(a + math.pi, arcs)


def random_great_circles(rng: np.random.Generator, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniformly distributed great circles on S^2 as (point, unit tangent) pairs."""
    p = rng.standard_normal((count, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    t = rng.standard_normal((count, 3))
    t -= np.sum(t * p, axis=1, keepdims=True) * p
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    return p, t


def z_rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def symmetrized_gradient_at_poles(f: Callable[[np.ndarray], float], order: int = 3,
                                  h: float = 1e-4) -> tuple[float, float]:
    """Gradient norms of the rotation average of ``f`` at the poles of S^2.

    The average is ``sum_j f(R_j x)`` over the ``order`` rotations about the
    x_3 axis by multiples of ``2 pi / order``.  Gradients are Richardson
    central differences along geodesics through each pole.
    """
    rots = [z_rotation(TWO_PI * j / order) for j in range(order)]

    def avg(y):
        return sum(f(R @ y) for R in rots)

    out = []
    for pole in (np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0])):
        g = [first_derivative_along(avg, pole, e, h)
             for e in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))]
        out.append(float(math.hypot(*g)))
    return out[0], out[1]
