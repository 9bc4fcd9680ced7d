"""Volume-density, curvature-estimate and growth audits on sampled surfaces.

Extrinsic ball areas are computed by polar quadrature in parameter space
on a bicubic spline of the immersion, which is exact for planes and
spectrally accurate in the angle.  Unknown constants of the estimates are
fitted from the data and reported as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import RectBivariateSpline

from .elliptic import poincare_sup, shrink_chain, unit_ball_volume
from .errors import (
    EmptyBall,
    GaussImageOutOfChart,
    InsufficientScales,
    InsufficientStencil,
    InvalidRange,
    OnAxis,
    OnBranchCut,
)
from .graphs import WeightedGraph
from .minimal import ImmersedPatch, MinimalGraph
from .sphere import LongitudeChart

N_DIRECTIONS = 256
N_RADIAL = 32


def _as_patch(obj) -> ImmersedPatch:
    return obj.patch() if isinstance(obj, MinimalGraph) else obj


class SurfaceEvaluator:
    """Bicubic spline of a patch with its area element.

    Queries must stay two samples away from missing (NaN) samples and, in
    the non-periodic direction, inside the parameter rectangle.
    """

    PAD = 4

    def __init__(self, patch: ImmersedPatch):
        self.patch = patch
        X = patch.X
        nu, nv = patch.shape
        u = patch.origin[0] + patch.hu * np.arange(nu)
        v = patch.origin[1] + patch.hv * np.arange(nv)
        ok = np.all(np.isfinite(X), axis=-1)
        if patch.periodic_v:
            p = self.PAD
            X = np.concatenate([X[:, -p:], X, X[:, :p]], axis=1)
            ok = np.concatenate([ok[:, -p:], ok, ok[:, :p]], axis=1)
            v = patch.origin[1] + patch.hv * np.arange(-p, nv + p)
        self.u, self.v, self.ok = u, v, ok
        Xf = np.where(ok[..., None], X, 0.0)
        self.splines = [RectBivariateSpline(u, v, Xf[..., c], kx=3, ky=3, s=0) for c in range(3)]
        self.period = patch.hv * nv if patch.periodic_v else None

    def _wrap(self, pu, pv):
        if self.period is not None:
            v0 = self.patch.origin[1]
            pv = v0 + np.mod(pv - v0, self.period)
        return pu, pv

    def valid(self, pu, pv) -> np.ndarray:
        pu, pv = self._wrap(pu, pv)
        h_u, h_v = self.patch.hu, self.patch.hv
        iu = np.floor((pu - self.u[0]) / h_u).astype(int)
        iv = np.floor((pv - self.v[0]) / h_v).astype(int)
        inside = (iu >= 1) & (iu < self.u.size - 2) & (iv >= 1) & (iv < self.v.size - 2)
        good = inside.copy()
        iu_c = np.clip(iu, 1, self.u.size - 3)
        iv_c = np.clip(iv, 1, self.v.size - 3)
        for a in (-1, 0, 1, 2):
            for b in (-1, 0, 1, 2):
                good &= self.ok[iu_c + a, iv_c + b]
        return good

    def __call__(self, pu, pv, du: int = 0, dv: int = 0) -> np.ndarray:
        pu, pv = self._wrap(np.asarray(pu, float), np.asarray(pv, float))
        return np.stack([s.ev(pu, pv, dx=du, dy=dv) for s in self.splines], axis=-1)

    def area_element(self, pu, pv) -> np.ndarray:
        Xu = self(pu, pv, 1, 0)
        Xv = self(pu, pv, 0, 1)
        return np.linalg.norm(np.cross(Xu, Xv), axis=-1)


def ball_area(ev: SurfaceEvaluator, sample, R: float, n_dir: int = N_DIRECTIONS,
              n_rad: int = N_RADIAL) -> float:
    """Area of the extrinsic ball ``{|X - X(y0)| < R}`` around a sample.

    The ball is taken star-shaped in parameter space around ``y0``: along
    each direction the first crossing of the sphere of radius ``R`` is
    located by bisection, then the area element is integrated radially
    with Gauss-Legendre and in angle with the periodic trapezoid rule.
    """
    P = ev.patch
    p0 = np.array([P.origin[0] + sample[0] * P.hu, P.origin[1] + sample[1] * P.hv])
    X0 = ev(p0[0], p0[1])
    phi = 2 * math.pi * np.arange(n_dir) / n_dir
    e = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    G = np.stack([ev(p0[0], p0[1], 1, 0), ev(p0[0], p0[1], 0, 1)])
    sig = math.sqrt(np.linalg.eigvalsh(G @ G.T)[-1])
    step = R / (4.0 * sig)
    lo = np.zeros(n_dir)
    hi = np.full(n_dir, np.nan)
    s = 0.0
    for _ in range(100_000):
        s += step
        open_ = np.isnan(hi)
        if not open_.any():
            break
        pu, pv = p0[0] + s * e[open_, 0], p0[1] + s * e[open_, 1]
        if not np.all(ev.valid(pu, pv)):
            raise InvalidRange(f"ball of radius {R!r} leaves the sampled patch")
        d = np.linalg.norm(ev(pu, pv) - X0, axis=-1)
        idx = np.flatnonzero(open_)
        hit = d >= R
        hi[idx[hit]] = s
        lo[idx[~hit]] = s
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        d = np.linalg.norm(ev(p0[0] + mid * e[:, 0], p0[1] + mid * e[:, 1]) - X0, axis=-1)
        inside = d < R
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    rad = 0.5 * (lo + hi)
    x, w = np.polynomial.legendre.leggauss(n_rad)
    t = 0.5 * (x + 1.0)
    S = rad[:, None] * t[None, :]
    J = ev.area_element(p0[0] + S * e[:, 0, None], p0[1] + S * e[:, 1, None])
    radial = 0.5 * rad * np.sum(w[None, :] * J * S, axis=1)
    return float(2 * math.pi / n_dir * radial.sum())


def induced_graph(obj, base_sample) -> tuple[WeightedGraph, np.ndarray]:
    """Five-point graph of the patch with induced-metric weights.

    Conductances ``sqrt(g) g^uu hv/hu`` and ``sqrt(g) g^vv hu/hv`` (edge
    averages), measures ``sqrt(g) hu hv``, positions the immersed points.
    Returns the graph and the ``(nu, nv)`` array of vertex ids (-1 for
    dropped samples).
    """
    P = _as_patch(obj)
    X = P.X
    Xu = np.gradient(X, P.hu, axis=0)
    if P.periodic_v:
        Xv = (np.roll(X, -1, axis=1) - np.roll(X, 1, axis=1)) / (2 * P.hv)
    else:
        Xv = np.gradient(X, P.hv, axis=1)
    guu = np.einsum("...k,...k->...", Xu, Xu)
    gvv = np.einsum("...k,...k->...", Xv, Xv)
    guv = np.einsum("...k,...k->...", Xu, Xv)
    det = guu * gvv - guv**2
    sg = np.sqrt(det)
    keep = np.isfinite(sg) & (det > 0)
    ids = -np.ones(P.shape, dtype=np.int64)
    ids[keep] = np.arange(int(keep.sum()))
    au = sg * gvv / det * P.hv / P.hu
    av = sg * guu / det * P.hu / P.hv
    edges, conds = [], []
    a, b = ids[:-1, :], ids[1:, :]
    ok = (a >= 0) & (b >= 0)
    edges.append(np.column_stack([a[ok], b[ok]]))
    conds.append(0.5 * (au[:-1, :] + au[1:, :])[ok])
    if P.periodic_v:
        a, b = ids, np.roll(ids, -1, axis=1)
        avb = 0.5 * (av + np.roll(av, -1, axis=1))
    else:
        a, b = ids[:, :-1], ids[:, 1:]
        avb = 0.5 * (av[:, :-1] + av[:, 1:])
    ok = (a >= 0) & (b >= 0)
    edges.append(np.column_stack([a[ok], b[ok]]))
    conds.append(avb[ok])
    base = int(ids[tuple(base_sample)])
    if base < 0:
        raise InsufficientStencil(f"sample {tuple(base_sample)} is not part of the patch")
    g = WeightedGraph(X[keep], np.vstack(edges), np.concatenate(conds),
                      (sg * P.hu * P.hv)[keep], base, validate=False)
    return g, ids


def dyadic_radii(R0: float, levels: int) -> list[float]:
    return [R0 * 2.0**-k for k in range(levels)][::-1]


@dataclass(frozen=True)
class VolumeDensity:
    radii: tuple[float, ...]
    D_table: dict
    Lambda_R0: float | None
    monotone: bool
    doubling_holds: bool
    doubling_margins: tuple[float, ...]


def volume_density_and_lambda(obj, y0, R0: float, levels: int = 5,
                              compute_lambda: bool = True,
                              lambda_levels: int | None = None) -> VolumeDensity:
    """Volume density on a dyadic radius grid and the Poincare supremum.

    ``D(R) = Area(B_R) / (omega_2 R^2)`` for ``R = R0 2^-k``.  The doubling
    inequality ``Area(B_R) <= 2^m D(R0) Area(B_{R/2})`` is checked at every
    sampled radius; ``doubling_margins`` holds the ratio of the two sides.
    """
    P = _as_patch(obj)
    ev = SurfaceEvaluator(P)
    radii = dyadic_radii(R0, levels)
    areas = {R: ball_area(ev, y0, R) for R in radii}
    half = 0.5 * radii[0]
    areas[half] = ball_area(ev, y0, half)
    om = unit_ball_volume(P.m)
    D = {R: float(areas[R] / (om * R**P.m)) for R in radii}
    vals = np.array([D[R] for R in radii])
    monotone = bool(np.all(np.diff(vals) >= -1e-10))
    margins = tuple(float(areas[R] / (2**P.m * D[radii[-1]] * areas[R / 2])) for R in radii)
    lam = None
    if compute_lambda:
        g, _ = induced_graph(P, y0)
        lam = poincare_sup(g, R0, lambda_levels or levels)
    return VolumeDensity(tuple(radii), D, lam, monotone,
                         all(m <= 1 + 1e-12 for m in margins), margins)


# --- curvature audit ----------------------------------------------------------------


@dataclass(frozen=True)
class AuditReport:
    """Inputs and measured sides of the interior curvature estimate."""

    D_table: dict
    Lambda_R0: float | None
    M_table: dict
    B_at_origin: float
    scale_invariant_product: float
    growth_curve: tuple
    R1: float
    p: int
    fitted_C: float
    chain_lhs: float
    chain_rhs_factor: float
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "B_at_origin": self.B_at_origin,
            "scale_invariant_product": self.scale_invariant_product,
            "Lambda_R0": self.Lambda_R0,
            "D_table": {repr(k): v for k, v in self.D_table.items()},
            "M_table": {repr(k): v for k, v in self.M_table.items()},
            "growth_curve": [list(p) for p in self.growth_curve],
            "R1": self.R1,
            "p": self.p,
            "fitted_C": self.fitted_C,
            "flags": list(self.flags),
        }


def gauss_longitude(P: ImmersedPatch, mask: np.ndarray, chart: LongitudeChart):
    """``(r, theta)`` of the Gauss map over ``mask``; chart errors become
    :class:`GaussImageOutOfChart`."""
    N = P.normal[mask]
    finite = np.all(np.isfinite(N), axis=1)
    try:
        r, th = chart.polar_many(N[finite])
    except (OnAxis, OnBranchCut) as exc:
        raise GaussImageOutOfChart(str(exc)) from exc
    return r, th, finite


def curvature_estimate_audit(obj, y0, R0: float, C0: float = 1.0,
                             chart: LongitudeChart | None = None, levels: int = 4,
                             compute_density: bool = True) -> AuditReport:
    """Measure both sides of the interior curvature estimate at ``y0``.

    Reports ``|B|(y0) R0``, ``D``, ``Lambda`` and ``M(R) = sup_{B_R} 1/(r o gamma)``
    and fits the constant of the p-power step, ``p = max(3, m - 1)``:
    ``mean_{B_{R1/2}} |B|^{2p} h^{2p} = C R1^{-2p} sup_{B_{R1}} h^{2p}`` with
    ``h = 1/(gamma, x0)`` and ``R1``, ``x0`` from the image-shrinking chain.
    """
    P = _as_patch(obj)
    m = P.m
    chart = chart or LongitudeChart(math.pi, 1e-9, (m - 1, m))
    y0 = tuple(int(k) for k in y0)
    Xc = P.X[y0]
    if not np.all(np.isfinite(Xc)):
        raise InsufficientStencil(f"sample {y0} is not part of the patch")
    dist = np.linalg.norm(P.X - Xc, axis=-1)
    dist = np.where(np.isfinite(dist), dist, np.inf)
    b2 = P.B2[y0]
    if not np.isfinite(b2):
        raise InsufficientStencil(f"curvature unavailable at sample {y0}")
    B0 = math.sqrt(max(float(b2), 0.0))
    ball0 = dist < R0
    r0, th0, fin0 = gauss_longitude(P, ball0, chart)
    d0 = dist[ball0][fin0]
    order = np.argsort(d0, kind="stable")
    d_sorted, running = d0[order], np.maximum.accumulate(1.0 / r0[order])

    def M(R):
        k = int(np.searchsorted(d_sorted, R, side="left"))
        return float(running[max(k, 1) - 1])

    radii = dyadic_radii(R0, levels)
    M_table = {R: M(R) for R in radii}
    growth = tuple((R, M_table[R] / math.log(math.log(R))) for R in radii if R > math.e)
    osc = float(np.ptp(th0)) if th0.size else 0.0
    c2 = min(max(osc, 2 * math.pi / 3), 2 * math.pi)
    chain = shrink_chain(M, R0, C0, c2)
    R1 = chain.R1
    in1 = d0 < R1
    t1 = th0[in1]
    theta0 = 0.5 * float(t1.max() + t1.min())
    x0 = np.zeros(m + 1)
    x0[chart.axes[0]], x0[chart.axes[1]] = math.cos(theta0), math.sin(theta0)
    ball1 = dist < R1
    hfun = 1.0 / (P.normal[ball1] @ x0)
    hfun = hfun[np.isfinite(hfun)]
    p = max(3, m - 1)
    half = dist < 0.5 * R1
    w = P.sqrt_det[half]
    q = (P.B2[half] ** p) / (P.normal[half] @ x0) ** (2 * p)
    ok = np.isfinite(q) & np.isfinite(w)
    if not ok.any():
        q, w, ok = np.array([b2**p / (P.normal[y0] @ x0) ** (2 * p)]), np.ones(1), np.ones(1, bool)
    lhs = float(np.sum(q[ok] * w[ok]) / np.sum(w[ok]))
    rhs_factor = float(R1 ** (-2 * p) * np.max(hfun ** (2 * p)))
    flags = ["C(p) fitted", "C0 supplied"]
    D_table, lam = {}, None
    if compute_density:
        vd = volume_density_and_lambda(P, y0, R0, levels)
        D_table, lam = vd.D_table, vd.Lambda_R0
        if not vd.monotone:
            flags.append("D not monotone")
        if not vd.doubling_holds:
            flags.append("doubling violated")
    return AuditReport(D_table, lam, M_table, B0, B0 * R0, growth, R1, p,
                       lhs / rhs_factor, lhs, rhs_factor, tuple(flags))


# --- Bernstein growth ------------------------------------------------------------------


def growth_integral(M_func: Callable[[float], float], C0: float, R_minus: float, R: float) -> float:
    """``int_{R_-}^{R} t^-1 exp(-C0 M(t)) dt`` by quadrature in ``s = log t``."""
    if R_minus <= 0 or R < R_minus:
        raise InvalidRange("need 0 < R_- <= R")
    val, _ = integrate.quad(lambda s: math.exp(-C0 * M_func(math.exp(s))),
                            math.log(R_minus), math.log(R), limit=200, epsabs=1e-13, epsrel=1e-12)
    return float(val)


def graph_growth_constant(eps: float) -> float:
    """Graph-height growth constant ``delta = eps / 2``."""
    return 0.5 * eps


@dataclass(frozen=True)
class GrowthVerdict:
    radii: tuple[float, ...]
    ratios: tuple[float, ...]
    limit_estimate: float
    trend_slope: float
    verdict: str
    integrals: tuple[float, ...] = field(default=())


def bernstein_growth_audit(radii: Sequence[float], M_values: Sequence[float], eps: float,
                           C0: float = 1.0, R_minus: float = math.e) -> GrowthVerdict:
    """Fit ``M(R) / log log R`` and decide whether the growth condition holds.

    The ratio ``q`` is fitted as ``a + b / log log R``; ``a`` estimates the
    limit.  The verdict is ``SATISFIED`` when ``a <= eps`` and ``q`` is not
    increasing (``b >= 0``), otherwise ``VIOLATED``.  ``integrals`` are the
    partial integrals ``int_{R_-}^R t^-1 exp(-C0 M(t)) dt`` with ``M``
    taken piecewise constant between the sampled radii.
    """
    R = np.asarray(radii, float)
    M = np.asarray(M_values, float)
    if R.size < 4:
        raise InsufficientScales(f"need at least 4 scales, got {R.size}")
    if np.any(R <= max(math.e, R_minus)):
        raise InvalidRange("radii must exceed max(e, R_-)")
    order = np.argsort(R)
    R, M = R[order], M[order]
    L = np.log(np.log(R))
    q = M / L
    A = np.column_stack([np.ones_like(L), 1.0 / L])
    (a, b), *_ = np.linalg.lstsq(A, q, rcond=None)
    verdict = "SATISFIED" if a <= eps + 1e-12 and b >= -1e-12 else "VIOLATED"

    def Mstep(t):
        k = int(np.searchsorted(R, t, side="left"))
        return float(M[min(k, R.size - 1)])

    ints = []
    acc, last = 0.0, R_minus
    for Rk in R:
        acc += growth_integral(Mstep, C0, last, Rk)
        ints.append(acc)
        last = Rk
    return GrowthVerdict(tuple(float(x) for x in R), tuple(float(x) for x in q), float(a), float(b),
                         verdict, tuple(ints))


def gauss_growth_table(obj, y0, radii: Sequence[float],
                       chart: LongitudeChart | None = None) -> dict:
    """``M(R) = sup_{B_R} 1/(r o gamma)`` over extrinsic balls around ``y0``."""
    P = _as_patch(obj)
    chart = chart or LongitudeChart(math.pi, 1e-9, (P.m - 1, P.m))
    Xc = P.X[tuple(y0)]
    dist = np.linalg.norm(P.X - Xc, axis=-1)
    out = {}
    for R in radii:
        mask = np.isfinite(dist) & (dist < R)
        if not mask.any():
            raise EmptyBall(f"ball of radius {R!r} is empty")
        r, _, _ = gauss_longitude(P, mask, chart)
        if r.size == 0:
            raise InsufficientStencil("no Gauss-map sample inside the ball")
        out[float(R)] = float(np.max(1.0 / r))
    return out
