"""Minimal graphs and immersed surface patches.

A finite-difference solver for the minimal surface equation on grids,
the Gauss map and its longitude ratio, and a sampled-surface kernel for
the second fundamental form and the identities it satisfies on minimal
surfaces (Jacobi, Simons, Kato, harmonic Gauss map).

Patches are two-dimensional and live in R^3.  All derivatives are second
order central differences; samples whose stencil leaves the patch come
out as NaN and are ignored by the max/min reductions.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import (
    BoundaryNode,
    InsufficientStencil,
    NewtonDiverged,
    NonTransverse,
    NotMinimal,
    SteepBoundary,
)
from .sphere import SpherePoint

STEEP_LIMIT = 1e6
MSE_TOL = 1e-10


# --- grids --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    """Square lattice ``(x0 + i h, y0 + j h)`` with an optional domain mask.

    Boundary nodes are domain nodes with a missing 8-neighbour; the rest of
    the domain is interior, where the nine-point stencil is available.
    """

    x0: float
    y0: float
    h: float
    nx: int
    ny: int
    domain: np.ndarray | None = None

    def __post_init__(self):
        if self.h <= 0 or self.nx < 3 or self.ny < 3:
            raise ValueError("need h > 0 and at least 3 nodes per axis")
        d = np.ones((self.nx, self.ny), bool) if self.domain is None else np.asarray(self.domain, bool)
        if d.shape != (self.nx, self.ny):
            raise ValueError("domain mask has the wrong shape")
        object.__setattr__(self, "domain", d)

    @classmethod
    def rectangle(cls, xlim, ylim, h: float) -> "Grid":
        nx = int(round((xlim[1] - xlim[0]) / h)) + 1
        ny = int(round((ylim[1] - ylim[0]) / h)) + 1
        return cls(float(xlim[0]), float(ylim[0]), float(h), nx, ny)

    @classmethod
    def annulus(cls, inner: float, outer: float, h: float, half_width: float | None = None) -> "Grid":
        """Nodes of ``[-w, w]^2`` with ``inner <= |x| <= outer`` (staircase boundary)."""
        w = outer if half_width is None else half_width
        g = cls.rectangle((-w, w), (-w, w), h)
        rho = np.hypot(g.X, g.Y)
        tol = 1e-12 * outer
        return cls(g.x0, g.y0, g.h, g.nx, g.ny, (rho >= inner - tol) & (rho <= outer + tol))

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.h * np.arange(self.ny)

    @cached_property
    def X(self) -> np.ndarray:
        return np.broadcast_to(self.x[:, None], (self.nx, self.ny))

    @cached_property
    def Y(self) -> np.ndarray:
        return np.broadcast_to(self.y[None, :], (self.nx, self.ny))

    @cached_property
    def boundary(self) -> np.ndarray:
        d = np.pad(self.domain, 1, constant_values=False)
        full = np.ones_like(self.domain)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                full &= d[1 + di:1 + di + self.nx, 1 + dj:1 + dj + self.ny]
        return self.domain & ~full

    @cached_property
    def interior(self) -> np.ndarray:
        return self.domain & ~self.boundary

    def node(self, point) -> tuple[int, int]:
        """Grid index nearest to ``point``."""
        i = int(round((point[0] - self.x0) / self.h))
        j = int(round((point[1] - self.y0) / self.h))
        return min(max(i, 0), self.nx - 1), min(max(j, 0), self.ny - 1)

    def scaled(self, s: float) -> "Grid":
        return Grid(self.x0 * s, self.y0 * s, self.h * s, self.nx, self.ny, self.domain)


# --- minimal surface equation --------------------------------------------------------


def mse_operator(f: np.ndarray, h: float) -> np.ndarray:
    """Nine-point divergence form of ``div(Df / sqrt(1 + |Df|^2))``.

    Face fluxes use the one-sided normal difference and the average of
    the two adjacent central tangential differences.  Returns an array of
    the grid's shape, zero on the outer ring.  Accepts complex input.
    """
    out = np.zeros_like(f)
    # x-faces between (i, j) and (i+1, j), j interior
    px = (f[1:, 1:-1] - f[:-1, 1:-1]) / h
    py = (f[:-1, 2:] - f[:-1, :-2] + f[1:, 2:] - f[1:, :-2]) / (4 * h)
    ex = px / np.sqrt(1 + px * px + py * py)
    # y-faces between (i, j) and (i, j+1), i interior
    qy = (f[1:-1, 1:] - f[1:-1, :-1]) / h
    qx = (f[2:, :-1] - f[:-2, :-1] + f[2:, 1:] - f[:-2, 1:]) / (4 * h)
    ey = qy / np.sqrt(1 + qx * qx + qy * qy)
    out[1:-1, 1:-1] = (ex[1:, :] - ex[:-1, :]) / h + (ey[:, 1:] - ey[:, :-1]) / h
    return out


def laplace_operator(f: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(f)
    out[1:-1, 1:-1] = (f[2:, 1:-1] + f[:-2, 1:-1] + f[1:-1, 2:] + f[1:-1, :-2]
                       - 4 * f[1:-1, 1:-1]) / h**2
    return out


def _colored_jacobian(op: Callable, f: np.ndarray, unknown: np.ndarray, h: float,
                      eps: float = 1e-30) -> sparse.csr_matrix:
    """Sparse Jacobian of a nine-point operator by complex steps.

    Nodes with equal ``(i mod 3, j mod 3)`` have disjoint stencils, so nine
    complex evaluations recover every column.
    """
    nx, ny = f.shape
    ids = -np.ones((nx, ny), dtype=np.int64)
    ids[unknown] = np.arange(int(unknown.sum()))
    I, J = np.nonzero(unknown)
    rows, cols, vals = [], [], []
    for a in range(3):
        for b in range(3):
            pert = np.zeros((nx, ny))
            pert[a::3, b::3] = 1.0
            pert[~unknown] = 0.0
            d = op(f + 1j * eps * pert, h).imag / eps
            ci = I + ((a - I + 1) % 3) - 1
            cj = J + ((b - J + 1) % 3) - 1
            ok = (ci >= 0) & (ci < nx) & (cj >= 0) & (cj < ny)
            col = np.full(I.size, -1)
            col[ok] = ids[ci[ok], cj[ok]]
            keep = col >= 0
            rows.append(ids[I[keep], J[keep]])
            cols.append(col[keep])
            vals.append(d[I[keep], J[keep]])
    n = I.size
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, n))


def _max_slope(f: np.ndarray, grid: Grid) -> float:
    d = grid.domain
    sx = np.abs(np.diff(f, axis=0))[d[1:, :] & d[:-1, :]]
    sy = np.abs(np.diff(f, axis=1))[d[:, 1:] & d[:, :-1]]
    m = max(sx.max(initial=0.0), sy.max(initial=0.0))
    return float(m / grid.h)


@dataclass(frozen=True, eq=False)
class MinimalGraph:
    """Solved heights ``f`` on a :class:`Grid` (NaN off the domain)."""

    grid: Grid
    f: np.ndarray
    residual: float = 0.0
    iterations: int = 0

    @property
    def h(self) -> float:
        return self.grid.h

    def slopes(self, node) -> np.ndarray:
        """Central-difference ``Df`` at an interior node."""
        i, j = node
        if not (0 <= i < self.grid.nx and 0 <= j < self.grid.ny) or not self.grid.interior[i, j]:
            raise BoundaryNode(f"node {(i, j)} is not an interior node")
        f, h = self.f, self.h
        return np.array([(f[i + 1, j] - f[i - 1, j]) / (2 * h), (f[i, j + 1] - f[i, j - 1]) / (2 * h)])

    def patch(self) -> "ImmersedPatch":
        X = np.stack([np.asarray(self.grid.X, float), np.asarray(self.grid.Y, float), self.f], axis=-1)
        X = np.where(self.grid.domain[..., None], X, np.nan)
        return ImmersedPatch(X, self.h, self.h, origin=(self.grid.x0, self.grid.y0))

    def scaled(self, s: float) -> "MinimalGraph":
        """The dilated graph ``x -> s f(x / s)``."""
        return MinimalGraph(self.grid.scaled(s), self.f * s, self.residual / s, self.iterations)


def solve_mse(grid: Grid, boundary, tol: float = MSE_TOL, max_iter: int = 60,
              initial: np.ndarray | None = None) -> MinimalGraph:
    """Solve the minimal surface equation with Dirichlet data.

    Damped Newton on :func:`mse_operator`, starting from the discrete
    harmonic extension.  When backtracking cannot decrease the residual a
    Levenberg-Marquardt step is tried before giving up.

    Parameters
    ----------
    boundary : callable ``(x, y) -> height`` or array of the grid's shape
        Heights on the boundary nodes (other entries ignored).
    tol : float
        Required max-norm of the interior residual.

    Raises
    ------
    SteepBoundary
        If some iterate has a difference quotient above ``1e6``.
    NewtonDiverged
        If neither Newton nor the fallback reduce the residual.
    """
    h = grid.h
    if callable(boundary):
        data = np.asarray(boundary(np.asarray(grid.X, float), np.asarray(grid.Y, float)), float)
    else:
        data = np.asarray(boundary, float)
    if data.shape != (grid.nx, grid.ny):
        raise ValueError("boundary data must match the grid")
    bmask = grid.boundary
    if not np.all(np.isfinite(data[bmask])):
        raise ValueError("boundary heights must be finite")
    unknown = grid.interior
    f = np.where(bmask, data, 0.0)
    if _max_slope(np.where(grid.domain, f, 0.0), grid) > STEEP_LIMIT and not unknown.any():
        raise SteepBoundary("boundary data is too steep")
    if unknown.any():
        if initial is None:
            L = _colored_jacobian(laplace_operator, f, unknown, h)
            f[unknown] = spla.spsolve(L.tocsc(), -laplace_operator(f, h)[unknown])
        else:
            f[unknown] = np.asarray(initial, float)[unknown]

    def resid(z):
        return mse_operator(z, h)[unknown]

    r = resid(f)
    it = 0
    while unknown.any() and np.max(np.abs(r)) > tol:
        if it >= max_iter:
            raise NewtonDiverged(f"no convergence after {max_iter} Newton steps "
                                 f"(residual {np.max(np.abs(r)):.3e})")
        it += 1
        J = _colored_jacobian(mse_operator, f, unknown, h)
        step = spla.spsolve(J.tocsc(), -r)
        norm0 = np.linalg.norm(r)
        accepted = False
        t = 1.0
        while t >= 1.0 / 1024:
            trial = f.copy()
            trial[unknown] += t * step
            if _max_slope(trial, grid) > STEEP_LIMIT:
                raise SteepBoundary("difference quotients exceeded 1e6 during Newton")
            rt = resid(trial)
            if np.linalg.norm(rt) < (1 - 1e-4 * t) * norm0 or np.max(np.abs(rt)) <= tol:
                f, r, accepted = trial, rt, True
                break
            t *= 0.5
        if accepted:
            continue
        JtJ = (J.T @ J).tocsc()
        g = J.T @ r
        mu = 1e-6 * float(JtJ.diagonal().max())
        for _ in range(12):
            step = spla.spsolve((JtJ + mu * sparse.identity(JtJ.shape[0])).tocsc(), -g)
            trial = f.copy()
            trial[unknown] += step
            if _max_slope(trial, grid) <= STEEP_LIMIT:
                rt = resid(trial)
                if np.linalg.norm(rt) < norm0:
                    f, r, accepted = trial, rt, True
                    break
            mu *= 10.0
        if not accepted:
            raise NewtonDiverged("line search and Levenberg-Marquardt fallback both failed")
    f = np.where(grid.domain, f, np.nan)
    res = float(np.max(np.abs(r))) if unknown.any() else 0.0
    return MinimalGraph(grid, f, res, it)


# --- Gauss map ------------------------------------------------------------------------


def gauss_vector(Df) -> np.ndarray:
    """``(1 + |Df|^2)^(-1/2) (-Df, 1)`` for slopes of any length ``m``."""
    Df = np.asarray(Df, float)
    return np.append(-Df, 1.0) / math.sqrt(1.0 + float(Df @ Df))


def longitude_ratio_from_slopes(Df) -> float:
    """``r^-2 o gamma = (1 + |Df|^2) / (1 + (D^m f)^2)`` for the chart on the last two axes."""
    Df = np.asarray(Df, float)
    return float((1.0 + Df @ Df) / (1.0 + Df[-1] ** 2))


def gauss_map(mg: MinimalGraph, node) -> SpherePoint:
    return SpherePoint(gauss_vector(mg.slopes(node)))


def gauss_longitude_ratio(mg: MinimalGraph, node) -> float:
    return longitude_ratio_from_slopes(mg.slopes(node))


# --- sampled patches ----------------------------------------------------------------------


def _shift(A: np.ndarray, k: int, axis: int, periodic: bool) -> np.ndarray:
    """``A`` at index ``i + k`` along ``axis`` (NaN beyond the ends unless periodic)."""
    if periodic:
        return np.roll(A, -k, axis=axis)
    out = np.full_like(A, np.nan)
    n = A.shape[axis]
    src = [slice(None)] * A.ndim
    dst = [slice(None)] * A.ndim
    if k >= 0:
        src[axis], dst[axis] = slice(k, n), slice(0, n - k)
    else:
        src[axis], dst[axis] = slice(0, n + k), slice(-k, n)
    out[tuple(dst)] = A[tuple(src)]
    return out


class SecondFundamentalForm(NamedTuple):
    B: np.ndarray
    B2: float
    energy_density: float
    energy_from_B: float


class JacobiResidual(NamedTuple):
    res_f: float
    res_h: float
    res_h_direct: float
    res_h_from_f: float


class SimonsKato(NamedTuple):
    simons_residual: float
    kato_slack: float
    kato_deviation: float


class ImmersedPatch:
    """Surface in R^3 sampled on a parameter grid.

    Parameters
    ----------
    X : (nu, nv, 3) array
        Sample positions; NaN marks samples outside the patch.
    hu, hv : float
        Parameter spacings.
    periodic_v : bool
        Whether the second parameter wraps around.
    origin : pair of float
        Parameter values of sample ``(0, 0)``.
    """

    def __init__(self, X, hu: float, hv: float, periodic_v: bool = False, origin=(0.0, 0.0)):
        X = np.asarray(X, float)
        if X.ndim != 3 or X.shape[2] != 3:
            raise ValueError("patches are sampled surfaces in R^3: shape (nu, nv, 3)")
        self.X = X
        self.hu, self.hv = float(hu), float(hv)
        self.periodic_v = bool(periodic_v)
        self.origin = (float(origin[0]), float(origin[1]))
        self.m = 2

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape[:2]

    @property
    def h(self) -> float:
        return max(self.hu, self.hv)

    def scaled(self, s: float) -> "ImmersedPatch":
        return ImmersedPatch(self.X * s, self.hu, self.hv, self.periodic_v, self.origin)

    # finite differences
    def du(self, A):
        return (_shift(A, 1, 0, False) - _shift(A, -1, 0, False)) / (2 * self.hu)

    def dv(self, A):
        return (_shift(A, 1, 1, self.periodic_v) - _shift(A, -1, 1, self.periodic_v)) / (2 * self.hv)

    def duu(self, A):
        return (_shift(A, 1, 0, False) - 2 * A + _shift(A, -1, 0, False)) / self.hu**2

    def dvv(self, A):
        p = self.periodic_v
        return (_shift(A, 1, 1, p) - 2 * A + _shift(A, -1, 1, p)) / self.hv**2

    def grad(self, A):
        """Stack of the two parameter derivatives along a new axis 2."""
        return np.stack([self.du(A), self.dv(A)], axis=2)

    # first and second fundamental forms
    @cached_property
    def tangents(self) -> np.ndarray:
        """``(nu, nv, 2, 3)``: ``X_u`` and ``X_v``."""
        return self.grad(self.X)

    @cached_property
    def metric(self) -> np.ndarray:
        T = self.tangents
        return np.einsum("...ik,...jk->...ij", T, T)

    @cached_property
    def metric_inv(self) -> np.ndarray:
        g = self.metric
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
        inv = np.empty_like(g)
        inv[..., 0, 0] = g[..., 1, 1] / det
        inv[..., 1, 1] = g[..., 0, 0] / det
        inv[..., 0, 1] = inv[..., 1, 0] = -g[..., 0, 1] / det
        return inv

    @cached_property
    def sqrt_det(self) -> np.ndarray:
        g = self.metric
        return np.sqrt(g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2)

    @cached_property
    def normal(self) -> np.ndarray:
        T = self.tangents
        n = np.cross(T[..., 0, :], T[..., 1, :])
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    @cached_property
    def hessian_X(self) -> np.ndarray:
        """``(nu, nv, 2, 2, 3)`` second derivatives of the immersion."""
        X = self.X
        xuu, xvv = self.duu(X), self.dvv(X)
        xuv = self.du(self.dv(X))
        return np.stack([np.stack([xuu, xuv], axis=2), np.stack([xuv, xvv], axis=2)], axis=2)

    @cached_property
    def second_form(self) -> np.ndarray:
        """Coordinate components ``II_ij = X_ij . N``."""
        return np.einsum("...ijk,...k->...ij", self.hessian_X, self.normal)

    @cached_property
    def shape_operator(self) -> np.ndarray:
        return np.einsum("...ik,...kj->...ij", self.metric_inv, self.second_form)

    @cached_property
    def mean_curvature(self) -> np.ndarray:
        S = self.shape_operator
        return S[..., 0, 0] + S[..., 1, 1]

    @cached_property
    def B2(self) -> np.ndarray:
        """``|B|^2 = tr(S^2)``."""
        S = self.shape_operator
        return np.einsum("...ij,...ji->...", S, S)

    @cached_property
    def gauss_energy(self) -> np.ndarray:
        """``|d gamma|^2 = g^ij N_i . N_j`` from differences of the normal field."""
        dN = self.grad(self.normal)
        return np.einsum("...ij,...ik,...jk->...", self.metric_inv, dN, dN)

    def laplace_beltrami(self, w: np.ndarray) -> np.ndarray:
        """``(1/sqrt g) d_i (sqrt g g^ij d_j w)`` for scalar or vector-valued ``w``."""
        G = self.grad(w)
        ginv, sg = self.metric_inv, self.sqrt_det
        extra = (None,) * (w.ndim - 2)
        fu = sg[(...,) + extra] * (ginv[..., 0, 0][(...,) + extra] * G[:, :, 0]
                                   + ginv[..., 0, 1][(...,) + extra] * G[:, :, 1])
        fv = sg[(...,) + extra] * (ginv[..., 1, 0][(...,) + extra] * G[:, :, 0]
                                   + ginv[..., 1, 1][(...,) + extra] * G[:, :, 1])
        return (self.du(fu) + self.dv(fv)) / sg[(...,) + extra]

    def grad_norm2(self, w: np.ndarray) -> np.ndarray:
        G = self.grad(w)
        return np.einsum("...ij,...i,...j->...", self.metric_inv, G, G)

    @cached_property
    def christoffel(self) -> np.ndarray:
        """``Gamma^l_ij = g^lk (X_ij . X_k)`` with shape ``(nu, nv, l, i, j)``."""
        low = np.einsum("...ijc,...kc->...kij", self.hessian_X, self.tangents)
        return np.einsum("...lk,...kij->...lij", self.metric_inv, low)

    @cached_property
    def grad_B2(self) -> np.ndarray:
        """``|nabla B|^2`` from coordinate covariant derivatives of ``II``."""
        II = self.second_form
        dII = np.stack([self.du(II), self.dv(II)], axis=2)  # (..., k, i, j)
        Gm = self.christoffel
        cov = (dII - np.einsum("...lki,...lj->...kij", Gm, II)
               - np.einsum("...lkj,...il->...kij", Gm, II))
        gi = self.metric_inv
        return np.einsum("...ka,...ib,...jc,...kij,...abc->...", gi, gi, gi, cov, cov)

    @cached_property
    def grad_abs_B2(self) -> np.ndarray:
        """``|nabla |B||^2``."""
        return self.grad_norm2(np.sqrt(np.maximum(self.B2, 0.0)))

    # pointwise queries
    def second_fundamental_form(self, sample) -> SecondFundamentalForm:
        i, j = sample
        vals = (self.second_form[i, j], self.gauss_energy[i, j])
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise InsufficientStencil(f"second differences unavailable at sample {(i, j)}")
        T = self.tangents[i, j]
        e1 = T[0] / np.linalg.norm(T[0])
        e2 = T[1] - (T[1] @ e1) * e1
        e2 /= np.linalg.norm(e2)
        # coefficients of the orthonormal frame in the coordinate basis
        E = np.linalg.solve(self.metric[i, j], np.stack([T @ e1, T @ e2]).T).T
        B = E @ self.second_form[i, j] @ E.T
        B = 0.5 * (B + B.T)
        b2 = float(self.B2[i, j])
        return SecondFundamentalForm(B, b2, 0.5 * float(self.gauss_energy[i, j]), 0.5 * b2)

    def max_curvature(self) -> float:
        return float(np.sqrt(np.nanmax(self.B2)))

    def check_minimal(self, tol: float | None = None) -> float:
        """Max ``|H|``; raises :class:`NotMinimal` above the tolerance.

        The default tolerance is ``max(1e-8, 10 h^2) * max|B|`` (plus an
        absolute ``1e-8``), the discretisation level of the difference
        stencils.
        """
        H = float(np.nanmax(np.abs(self.mean_curvature)))
        if tol is None:
            tol = max(1e-8, 10 * self.h**2) * self.max_curvature() + 1e-8
        if H > tol:
            raise NotMinimal(f"max |H| = {H:.3e} exceeds {tol:.3e}")
        return H


def _nanmax_abs(A) -> float:
    A = np.abs(np.asarray(A))
    if not np.any(np.isfinite(A)):
        raise InsufficientStencil("no sample has a complete stencil")
    return float(np.nanmax(A))


def _as_patch(obj) -> ImmersedPatch:
    return obj.patch() if isinstance(obj, MinimalGraph) else obj


def second_fundamental_form(obj, sample) -> SecondFundamentalForm:
    """``B`` in an orthonormal frame, ``|B|^2`` and the Gauss-map energy density.

    ``energy_density`` is ``|d gamma|^2 / 2`` from differences of the normal;
    ``energy_from_B`` is ``|B|^2 / 2``.
    """
    return _as_patch(obj).second_fundamental_form(sample)


def jacobi_identity_residual(obj, x0) -> JacobiResidual:
    """Residuals of ``Delta f = -|B|^2 f`` and ``Delta h = |B|^2 h + 2 |nabla h|^2 / h``.

    ``f = (gamma, x0)`` and ``h = 1/f``.  ``res_h`` uses the discrete chain
    rule for ``Delta h`` and ``|nabla h|^2``; ``res_h_direct`` applies the
    stencils to ``h`` itself; ``res_h_from_f`` is ``max |h^2 (Delta f + |B|^2 f)|``.

    Raises
    ------
    NonTransverse
        If ``(gamma, x0) <= 0`` at some sample.
    """
    P = _as_patch(obj)
    x0 = np.asarray(getattr(x0, "coords", x0), float)
    fJ = P.normal @ x0
    finite = np.isfinite(fJ)
    if np.any(fJ[finite] <= 0):
        raise NonTransverse("(gamma, x0) is not positive on the whole patch")
    B2 = P.B2
    lap_f = P.laplace_beltrami(fJ)
    gf = P.grad_norm2(fJ)
    rf = lap_f + B2 * fJ
    hJ = 1.0 / fJ
    lap_h = -lap_f / fJ**2 + 2 * gf / fJ**3
    gh = gf / fJ**4
    rh = lap_h - B2 * hJ - 2 * gh / hJ
    rh_direct = P.laplace_beltrami(hJ) - B2 * hJ - 2 * P.grad_norm2(hJ) / hJ
    return JacobiResidual(_nanmax_abs(rf), _nanmax_abs(rh), _nanmax_abs(rh_direct),
                          _nanmax_abs(hJ**2 * rf))


def simons_kato_check(obj, minimal_tol: float | None = None) -> SimonsKato:
    """Simons residual ``max |Delta|B|^2 + 2|B|^4 - 2|nabla B|^2|`` and the Kato slack.

    ``kato_slack`` is ``min(|nabla B|^2 - (1 + 2/m)|nabla|B||^2)``;
    ``kato_deviation`` is the max of its absolute value, which vanishes in
    the limit for surfaces (the inequality is an equality when m = 2).

    Raises
    ------
    NotMinimal
        If the mean curvature exceeds ``minimal_tol`` (see
        :meth:`ImmersedPatch.check_minimal`).
    """
    P = _as_patch(obj)
    P.check_minimal(minimal_tol)
    B2 = P.B2
    simons = P.laplace_beltrami(B2) + 2 * B2**2 - 2 * P.grad_B2
    slack = P.grad_B2 - (1 + 2.0 / P.m) * P.grad_abs_B2
    finite = slack[np.isfinite(slack)]
    if finite.size == 0:
        raise InsufficientStencil("no sample has a complete stencil")
    return SimonsKato(_nanmax_abs(simons), float(finite.min()), float(np.abs(finite).max()))


def gauss_harmonicity_residual(obj) -> float:
    """Max norm of the tension ``Delta gamma + |d gamma|^2 gamma`` of the Gauss map."""
    P = _as_patch(obj)
    N = P.normal
    tau = P.laplace_beltrami(N) + P.gauss_energy[..., None] * N
    return _nanmax_abs(np.linalg.norm(tau, axis=-1))


# --- reference patches ---------------------------------------------------------------------


def catenoid_patch(h: float, t_range=(-1.5, 1.5), n_theta: int | None = None) -> ImmersedPatch:
    """``(cosh t cos s, cosh t sin s, t)`` on ``t_range x [0, 2 pi)`` (periodic in s)."""
    nt = int(round((t_range[1] - t_range[0]) / h)) + 1
    ns = n_theta or int(round(2 * math.pi / h))
    t = np.linspace(t_range[0], t_range[1], nt)
    s = 2 * math.pi * np.arange(ns) / ns
    T, S = np.meshgrid(t, s, indexing="ij")
    X = np.stack([np.cosh(T) * np.cos(S), np.cosh(T) * np.sin(S), T], axis=-1)
    return ImmersedPatch(X, t[1] - t[0], 2 * math.pi / ns, periodic_v=True, origin=(t[0], 0.0))


def catenoid_B2(t) -> np.ndarray:
    """Analytic ``|B|^2 = 2 / cosh^4 t`` of the unit catenoid."""
    return 2.0 / np.cosh(t) ** 4


def catenoid_height(x, y) -> np.ndarray:
    """Upper catenoid graph ``arccosh |x|`` over ``|x| >= 1``, NaN inside the neck."""
    r = np.hypot(x, y)
    with np.errstate(invalid="ignore"):
        return np.where(r >= 1.0, np.arccosh(np.maximum(r, 1.0)), np.nan)


def sphere_patch(h: float, lat=(-1.0, 1.0)) -> ImmersedPatch:
    """Unit sphere in latitude/longitude coordinates (not minimal)."""
    nu = int(round((lat[1] - lat[0]) / h)) + 1
    ns = int(round(2 * math.pi / h))
    u = np.linspace(lat[0], lat[1], nu)
    s = 2 * math.pi * np.arange(ns) / ns
    U, S = np.meshgrid(u, s, indexing="ij")
    X = np.stack([np.cos(U) * np.cos(S), np.cos(U) * np.sin(S), np.sin(U)], axis=-1)
    return ImmersedPatch(X, u[1] - u[0], 2 * math.pi / ns, periodic_v=True, origin=(u[0], 0.0))


def graph_patch(fun: Callable, xlim, ylim, h: float) -> ImmersedPatch:
    """Patch of the graph of an explicit function on a rectangle."""
    g = Grid.rectangle(xlim, ylim, h)
    X, Y = np.asarray(g.X, float), np.asarray(g.Y, float)
    return ImmersedPatch(np.stack([X, Y, fun(X, Y)], axis=-1), h, h, origin=(g.x0, g.y0))


def convergence_order(coarse: float, fine: float, ratio: float = 2.0) -> float:
    """Observed order ``log(e_coarse / e_fine) / log(ratio)``."""
    if fine <= 0:
        return math.inf
    return math.log(coarse / fine) / math.log(ratio)


# --- text I/O ---------------------------------------------------------------------------------


def dumps_minimal_graph(mg: MinimalGraph) -> str:
    """Header ``m``, extents and ``h``, then one row per x-index (NaN off the domain)."""
    g = mg.grid
    buf = io.StringIO()
    buf.write("# longitude-lab minimal graph\n")
    buf.write("m 2\n")
    buf.write(f"origin {g.x0:.17g} {g.y0:.17g}\n")
    buf.write(f"h {g.h:.17g}\n")
    buf.write(f"shape {g.nx} {g.ny}\n")
    for row in mg.f:
        buf.write(" ".join("nan" if not np.isfinite(v) else format(float(v), ".17g") for v in row))
        buf.write("\n")
    return buf.getvalue()


def loads_minimal_graph(text: str) -> MinimalGraph:
    header: dict[str, list[str]] = {}
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] in ("m", "origin", "h", "shape"):
            header[tok[0]] = tok[1:]
        else:
            rows.append([float(t) for t in tok])
    for key in ("m", "origin", "h", "shape"):
        if key not in header:
            raise ValueError(f"missing header field {key!r}")
    if int(header["m"][0]) != 2:
        raise ValueError("only two-dimensional grids are supported")
    nx, ny = (int(t) for t in header["shape"])
    f = np.array(rows, dtype=float)
    if f.shape != (nx, ny):
        raise ValueError(f"expected {nx} rows of {ny} heights")
    grid = Grid(float(header["origin"][0]), float(header["origin"][1]), float(header["h"][0]),
                nx, ny, np.isfinite(f))
    return MinimalGraph(grid, f)


def write_minimal_graph(mg: MinimalGraph, path: str | os.PathLike):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_minimal_graph(mg))


def read_minimal_graph(path: str | os.PathLike) -> MinimalGraph:
    with open(path, encoding="utf-8") as fh:
        return loads_minimal_graph(fh.read())
