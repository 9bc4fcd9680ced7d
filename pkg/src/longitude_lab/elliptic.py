"""Divergence-form elliptic problems on weighted graphs.

Discrete solver for ``div(A grad f) = 0``, estimators for the volume
doubling, Neumann-Poincare and Sobolev constants, Harnack ratio and
oscillation-decay measurements, and the dyadic oscillation chain that
turns a Harnack constant into an image-shrinking radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg
from scipy import integrate, sparse
from scipy.sparse import linalg as spla
from scipy.special import gamma

from .errors import (
    DisconnectedBall,
    EmptyBall,
    InvalidDimension,
    InvalidRange,
    NonConvergence,
    NonPositiveCoefficient,
    NonPositiveField,
    SingularSystem,
)
from .graphs import WeightedGraph, grid_boundary_mask, grid_graph

CG_RTOL = 1e-10
CG_MAXITER = 100_000


# --- coefficients --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Symmetric positive coefficient ``A`` of ``div(A grad f) = 0``.

    Either one multiplier per edge (scalar case) or one SPD matrix per vertex
    (grid case).  Tensors enter the five-point assembly through the edge
    direction ``u`` as ``u^T (A_i + A_j)/2 u``; this is exact for diagonal
    tensors on axis-aligned grids.
    """

    edge_values: np.ndarray | None = None
    vertex_tensors: np.ndarray | None = None

    def __post_init__(self):
        if (self.edge_values is None) == (self.vertex_tensors is None):
            raise ValueError("give exactly one of edge_values or vertex_tensors")
        if self.edge_values is not None:
            object.__setattr__(self, "edge_values", np.asarray(self.edge_values, float).reshape(-1))
        else:
            t = np.asarray(self.vertex_tensors, float)
            if t.ndim != 3 or t.shape[1] != t.shape[2]:
                raise ValueError("vertex tensors must have shape (N, d, d)")
            if not np.allclose(t, np.swapaxes(t, 1, 2)):
                raise ValueError("vertex tensors must be symmetric")
            object.__setattr__(self, "vertex_tensors", t)

    @classmethod
    def constant(cls, g: WeightedGraph, value: float = 1.0) -> "CoefficientField":
        return cls(edge_values=np.full(g.n_edges, float(value)))

    @classmethod
    def diagonal(cls, g: WeightedGraph, diag: Sequence[float]) -> "CoefficientField":
        d = np.diag(np.asarray(diag, float))
        return cls(vertex_tensors=np.broadcast_to(d, (g.n_vertices, *d.shape)).copy())

    @classmethod
    def from_vertex_scalar(cls, g: WeightedGraph, values, mean: str = "arithmetic") -> "CoefficientField":
        """Edge multipliers from a vertex function (arithmetic or geometric mean)."""
        v = np.asarray(values, float)
        a, b = v[g.edges[:, 0]], v[g.edges[:, 1]]
        if mean == "arithmetic":
            e = 0.5 * (a + b)
        elif mean == "geometric":
            e = np.sqrt(a * b)
        else:
            raise ValueError(f"unknown mean {mean!r}")
        return cls(edge_values=e)

    def edge_multipliers(self, g: WeightedGraph) -> np.ndarray:
        if self.edge_values is not None:
            if self.edge_values.shape != (g.n_edges,):
                raise ValueError("one multiplier per edge is required")
            return self.edge_values
        t = self.vertex_tensors
        if t.shape[0] != g.n_vertices or t.shape[1] != g.dim:
            raise ValueError("tensor field does not match the graph")
        u = g.edge_vectors()
        u = u / np.linalg.norm(u, axis=1, keepdims=True)
        mid = 0.5 * (t[g.edges[:, 0]] + t[g.edges[:, 1]])
        return np.einsum("ei,eij,ej->e", u, mid, u)


def coefficient_bounds(A: CoefficientField, g: WeightedGraph, mask: np.ndarray) -> tuple[float, float, float]:
    """Extremal multipliers ``(lambda_1, lambda_2, L = lambda_2 / lambda_1)`` over a ball."""
    mask = np.asarray(mask, bool)
    if A.edge_values is not None:
        inside = mask[g.edges[:, 0]] & mask[g.edges[:, 1]]
        vals = A.edge_multipliers(g)[inside]
        if vals.size == 0:
            raise EmptyBall("no edge lies inside the ball")
        lo, hi = float(vals.min()), float(vals.max())
    else:
        if not mask.any():
            raise EmptyBall("the ball contains no vertex")
        ev = np.linalg.eigvalsh(A.vertex_tensors[mask])
        lo, hi = float(ev[:, 0].min()), float(ev[:, -1].max())
    if lo <= 0:
        raise NonPositiveCoefficient(f"smallest multiplier {lo!r} is not positive")
    return lo, hi, hi / lo


# --- Dirichlet solver ------------------------------------------------------------


def _check_components(g: WeightedGraph, boundary: np.ndarray):
    interior = ~boundary
    idx = np.flatnonzero(interior)
    if idx.size == 0:
        return
    if not boundary.any():
        raise SingularSystem("the Dirichlet boundary is empty")
    sub = g.adjacency[idx][:, idx]
    ncomp, labels = sparse.csgraph.connected_components(sub, directed=False)
    touches = np.zeros(ncomp, dtype=bool)
    to_bdry = np.asarray(g.adjacency[idx][:, np.flatnonzero(boundary)].sum(axis=1)).ravel() > 0
    touches[labels[to_bdry]] = True
    if not touches.all():
        raise SingularSystem(f"{int((~touches).sum())} interior component(s) miss the boundary")


def solve_divergence(g: WeightedGraph, A: CoefficientField, boundary: np.ndarray,
                     values: np.ndarray, rtol: float = CG_RTOL,
                     maxiter: int = CG_MAXITER) -> np.ndarray:
    """Solve the discrete ``div(A grad f) = 0`` with Dirichlet data.

    The discrete weak equation ``sum_e c_e A_e (f_i - f_j)(phi_i - phi_j) = 0``
    is imposed for every ``phi`` vanishing on ``boundary``.  Conjugate
    gradients with a diagonal preconditioner.

    Parameters
    ----------
    boundary : bool array (N,)
        Dirichlet vertices.
    values : array (N,)
        Boundary values (entries off the boundary are ignored).
    """
    boundary = np.asarray(boundary, bool)
    values = np.asarray(values, float)
    mult = A.edge_multipliers(g)
    if np.any(mult <= 0):
        raise NonPositiveCoefficient("coefficient multipliers must be positive")
    _check_components(g, boundary)
    K = g.laplacian(mult)
    I = np.flatnonzero(~boundary)
    B = np.flatnonzero(boundary)
    f = np.where(boundary, values, 0.0)
    if I.size == 0:
        return f
    Kii = K[I][:, I].tocsr()
    rhs = -(K[I][:, B] @ values[B])
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return f
    dinv = 1.0 / Kii.diagonal()
    M = spla.LinearOperator(Kii.shape, matvec=lambda x: dinv * x, dtype=float)
    x0 = np.full(I.size, float(np.mean(values[B])))
    x, info = spla.cg(Kii, rhs, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
    if info != 0:
        raise NonConvergence(f"conjugate gradients stopped with info={info}")
    f[I] = x
    return f


def weak_residual(g: WeightedGraph, A: CoefficientField, f: np.ndarray,
                  boundary: np.ndarray) -> float:
    """Relative residual ``|K_II f_I + K_IB f_B| / |K_IB f_B|`` of a solution."""
    boundary = np.asarray(boundary, bool)
    K = g.laplacian(A.edge_multipliers(g))
    I = np.flatnonzero(~boundary)
    B = np.flatnonzero(boundary)
    r = K[I] @ f
    ref = np.linalg.norm(K[I][:, B] @ f[B])
    return float(np.linalg.norm(r) / ref) if ref > 0 else float(np.linalg.norm(r))


# --- geometry constants ------------------------------------------------------------


def unit_ball_volume(m: int) -> float:
    """Volume ``omega_m`` of the unit ball in R^m."""
    return math.pi ** (m / 2.0) / gamma(m / 2.0 + 1.0)


def doubling_constant(g: WeightedGraph, R: float) -> float:
    """``Vol(B_R) / Vol(B_{R/2})``."""
    half = g.ball(0.5 * R)
    if not half.any():
        raise EmptyBall(f"B_(R/2) is empty for R = {R!r}")
    return g.volume(g.ball(R)) / g.volume(half)


class PoincareEstimate(NamedTuple):
    mu2: float
    K3_estimate: float
    eigenvector: np.ndarray
    mask: np.ndarray


def neumann_eigenpair(g: WeightedGraph, mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Second eigenpair of the measure-weighted Laplacian restricted to ``mask``.

    The Neumann condition is realised by restricting the Dirichlet form to
    the edges with both endpoints in the ball.
    """
    idx = np.flatnonzero(mask)
    if idx.size < 2:
        raise DisconnectedBall("the ball needs at least two vertices")
    if not g.is_connected(mask):
        raise DisconnectedBall("the ball's induced subgraph is not connected")
    inside = mask[g.edges[:, 0]] & mask[g.edges[:, 1]]
    sub = WeightedGraph(g.positions[idx], np.searchsorted(idx, g.edges[inside]),
                        g.conductances[inside], g.measures[idx], 0, validate=False)
    K = sub.laplacian()
    m = sub.measures
    if idx.size <= 1500:
        w, v = scipy.linalg.eigh(K.toarray(), np.diag(m), subset_by_index=[0, 1])
        mu, vec = float(w[1]), v[:, 1]
    else:
        shift = -1e-3 * float(K.diagonal().mean() / m.mean())
        v0 = np.linspace(1.0, 2.0, idx.size)  # fixed start vector keeps runs reproducible
        w, v = spla.eigsh(K.tocsc(), k=2, M=sparse.diags(m).tocsc(), sigma=shift, which="LM",
                          v0=v0)
        order = np.argsort(w)
        mu, vec = float(w[order[1]]), v[:, order[1]]
    vec = vec - (m @ vec) / m.sum()
    vec = vec / math.sqrt(float(vec @ (m * vec)))
    return mu, vec


def neumann_poincare_constant(g: WeightedGraph, R: float) -> PoincareEstimate:
    """Second Neumann eigenvalue on ``B_{3R/4}`` and ``K_3 = (R^2 mu_2)^-1``."""
    mask = g.ball(0.75 * R)
    mu, vec = neumann_eigenpair(g, mask)
    return PoincareEstimate(mu, 1.0 / (R * R * mu), vec, mask)


def dirichlet_energy(g: WeightedGraph, v: np.ndarray, mask: np.ndarray | None = None,
                     touching: bool = False) -> float:
    """``sum_e c_e (v_i - v_j)^2`` over edges inside (or touching) ``mask``."""
    d = v[g.edges[:, 0]] - v[g.edges[:, 1]]
    if mask is None:
        sel = slice(None)
    else:
        a, b = mask[g.edges[:, 0]], mask[g.edges[:, 1]]
        sel = (a | b) if touching else (a & b)
    return float(np.sum(g.conductances[sel] * d[sel] ** 2))


def sobolev_ratio(g: WeightedGraph, v: np.ndarray, radius: float, nu: float) -> float:
    """``(mean |v|^{2 nu})^{1/(2 nu)} / (r (mean |grad v|^2)^{1/2})`` on ``B_r``.

    ``v`` is treated as zero outside the ball (compact support), so edges
    leaving the ball contribute to the gradient term.
    """
    mask = g.nonempty_ball(radius)
    v = np.where(mask, np.asarray(v, float), 0.0)
    vol = g.volume(mask)
    grad = dirichlet_energy(g, v, mask, touching=True) / vol
    if grad == 0.0:
        raise ValueError("test function must be nonzero")
    lp = (np.sum(g.measures[mask] * np.abs(v[mask]) ** (2 * nu)) / vol) ** (1.0 / (2 * nu))
    return float(lp / (radius * math.sqrt(grad)))


def sobolev_constant_probe(g: WeightedGraph, radius: float, nu: float, trials: int,
                           seed: int = 0) -> float:
    """Largest Sobolev ratio found over random compactly supported fields.

    Every returned value is attained by an explicit test function, so it is
    a lower bound on the best constant ``K_1``.  Trials cycle through single
    spikes, smooth Gaussian bumps and i.i.d. noise; the stream depends only
    on ``seed``, so the result is nondecreasing in ``trials``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    mask = g.nonempty_ball(radius)
    idx = np.flatnonzero(mask)
    pos = g.positions
    best = 0.0
    for t in range(trials):
        kind = t % 3
        v = np.zeros(g.n_vertices)
        if kind == 0:
            v[rng.choice(idx)] = 1.0
        elif kind == 1:
            c = pos[rng.choice(idx)]
            w = radius * (0.05 + 0.95 * rng.random())
            v[idx] = np.exp(-np.sum((pos[idx] - c) ** 2, axis=1) / w**2)
        else:
            v[idx] = rng.standard_normal(idx.size)
        best = max(best, sobolev_ratio(g, v, radius, nu))
    return best


# --- Harnack and oscillation --------------------------------------------------------


def harnack_ratio(f: np.ndarray, g: WeightedGraph, R: float) -> float:
    """``log sup_{B_{R/2}} f - log inf_{B_{R/2}} f`` for ``f > 0`` on ``B_R``."""
    f = np.asarray(f, float)
    ball = g.nonempty_ball(R)
    if np.any(f[ball] <= 0):
        raise NonPositiveField("f must be positive on B_R")
    half = g.nonempty_ball(0.5 * R)
    return float(math.log(f[half].max()) - math.log(f[half].min()))


class OscillationDecay(NamedTuple):
    osc_half: float
    osc_full: float
    factor: float


def oscillation(f: np.ndarray, mask: np.ndarray) -> float:
    vals = np.asarray(f, float)[mask]
    if vals.size == 0:
        raise EmptyBall("oscillation over an empty ball")
    return float(vals.max() - vals.min())


def oscillation_decay(f: np.ndarray, g: WeightedGraph, R: float) -> OscillationDecay:
    """``osc_{B_{R/2}} f``, ``osc_{B_R} f`` and their ratio (0 when both vanish)."""
    full = oscillation(f, g.nonempty_ball(R))
    half = oscillation(f, g.nonempty_ball(0.5 * R))
    return OscillationDecay(half, full, half / full if full > 0 else 0.0)


def estimate_C0(ratios: Sequence[float], Ls: Sequence[float]) -> float:
    """Empirical Harnack constant ``max ratio / sqrt(L)`` over a sweep."""
    return float(max(r / math.sqrt(L) for r, L in zip(ratios, Ls)))


def fit_power(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass(frozen=True)
class AnisotropicProblem:
    """Solved ``f_xx + L f_yy = 0`` on a square grid centred at the origin."""

    graph: WeightedGraph
    boundary: np.ndarray
    field: np.ndarray
    L: float
    radius: float


def sharpness_data(x: np.ndarray, y: np.ndarray, L: float) -> np.ndarray:
    """``exp(sqrt(L) x) cos y``, an exact solution of ``f_xx + L f_yy = 0``."""
    return np.exp(math.sqrt(L) * x) * np.cos(y)


def solve_anisotropic(L: float, n: int = 129, half_width: float = 1.0,
                      data: Callable[[np.ndarray, np.ndarray, float], np.ndarray] = sharpness_data
                      ) -> AnisotropicProblem:
    """Solve with ``A = diag(1, L)`` on ``[-w, w]^2`` with boundary ``data(x, y, L)``."""
    g = grid_graph(n, n, (-half_width, half_width), (-half_width, half_width))
    bdry = grid_boundary_mask(n, n)
    vals = data(g.positions[:, 0], g.positions[:, 1], L)
    f = solve_divergence(g, CoefficientField.diagonal(g, [1.0, L]), bdry, vals)
    return AnisotropicProblem(g, bdry, f, float(L), half_width)


# --- oscillation chain ------------------------------------------------------------


@dataclass(frozen=True)
class ShrinkChain:
    """Constants and dyadic ledger behind the image-shrinking radius.

    ``terms[j] = log(1 - exp(-C0 M(2^-j R0)))`` for ``j < depth``, where
    ``2^-(depth+1) R0 < R1 <= 2^-depth R0``.  ``ledger_sum <= target`` with
    ``target = -log(3 c2 / 2 pi)`` is the guaranteed oscillation drop.
    """

    c1: float
    C1: float
    R1: float
    depth: int
    terms: tuple[float, ...]
    ledger_sum: float
    target: float
    integral_bound: float
    clamped: bool = False


def shrink_radius(M_R0: float, R0: float, C0: float, c2: float, c1: float = 1.0) -> tuple[float, float, bool]:
    """``R1 = exp(-C1 exp(C0 M(R0))) R0 / 2`` with ``C1 = log 2 log(3 c2 / 2 pi) / c1``.

    For ``c2 < 2 pi / 3`` no shrinking is needed; ``C1`` is clamped to 0.
    """
    raw = math.log(2.0) * math.log(3.0 * c2 / (2.0 * math.pi)) / c1
    C1 = max(raw, 0.0)
    return 0.5 * math.exp(-C1 * math.exp(C0 * M_R0)) * R0, C1, raw < 0.0


def shrink_chain(M_func: Callable[[float], float], R0: float, C0: float, c2: float,
                 c1: float = 1.0) -> ShrinkChain:
    """Image-shrinking radius and the dyadic oscillation ledger.

    ``M_func`` must be nondecreasing on ``(0, R0]``; it is extended by
    ``M(R0)`` on ``[R0, 2 R0]``.  ``c1 = 1`` is admissible because
    ``-log(1 - t) >= t`` on ``(0, 1)``.
    """
    if C0 <= 0:
        raise InvalidRange(f"C0 must be positive, got {C0!r}")
    if not 0 < c2 <= 2.0 * math.pi:
        raise InvalidRange(f"c2 must lie in (0, 2 pi], got {c2!r}")
    if R0 <= 0:
        raise InvalidRange(f"R0 must be positive, got {R0!r}")
    M_R0 = float(M_func(R0))

    def M(R):
        return M_R0 if R >= R0 else float(M_func(R))

    R1, C1, clamped = shrink_radius(M_R0, R0, C0, c2, c1)
    depth = max(1, int(math.floor(math.log2(R0 / R1))))
    while 2.0 ** (-depth) * R0 < R1:
        depth -= 1
    while 2.0 ** (-depth - 1) * R0 >= R1:
        depth += 1
    terms = tuple(math.log1p(-math.exp(-C0 * M(2.0 ** (-j) * R0))) for j in range(depth))
    target = -math.log(max(3.0 * c2 / (2.0 * math.pi), 1.0))
    lo, hi = math.log(4.0 * R1), math.log(2.0 * R0)
    if hi > lo:
        val, _ = integrate.quad(lambda s: math.log1p(-math.exp(-C0 * M(math.exp(s)))), lo, hi,
                                limit=200)
        bound = val / math.log(2.0)
    else:
        bound = 0.0
    return ShrinkChain(c1, C1, R1, depth, terms, float(sum(terms)), target, bound, clamped)


# --- DSVP constants ------------------------------------------------------------


@dataclass(frozen=True)
class GeometryConstants:
    """Constants of the local DSVP condition and of the image-shrinking chain.

DSVP bundles a distance function, a Sobolev inequality, volume doubling
and a Neumann-Poincare inequality, with constants uniform up to ``R0``.
"""

    nu: float
    K1: float
    K2: float
    K3: float
    c1: float = 1.0
    C0: float | None = None
    c2: float | None = None
    C1: float | None = None
    omega_m: float = math.pi
    D_R0: float = 1.0
    Lambda_R0: float = 1.0
    M_table: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()


def sobolev_exponent(m: int) -> float:
    if m < 2:
        raise InvalidDimension(f"dimension must be >= 2, got {m}")
    return 4.0 if m == 2 else m / (m - 2.0)


def volume_density(g: WeightedGraph, R: float, m: int) -> float:
    return g.volume(g.ball(R)) / (unit_ball_volume(m) * R**m)


def poincare_sup(g: WeightedGraph, R0: float, levels: int = 6) -> float:
    """``sup_R R^-2 mu_2(B_R)^-1`` over the dyadic radii ``R0 2^-k``.

    Radii whose ball has fewer than two vertices are skipped.
    """
    best = 0.0
    for k in range(levels):
        R = R0 * 2.0**-k
        mask = g.ball(R)
        if mask.sum() < 2:
            break
        mu, _ = neumann_eigenpair(g, mask)
        best = max(best, 1.0 / (R * R * mu))
    return best


def dsvp_constants(g: WeightedGraph | None, R0: float, m: int, D_R0: float | None = None,
                   Lambda_R0: float | None = None, C_m: float | None = None,
                   C0: float | None = None, c2: float | None = None,
                   M_table: dict | None = None) -> GeometryConstants:
    """Populate the DSVP constants from volume density and Poincare data.

    ``nu = 4`` (m = 2) or ``m / (m - 2)``;
    ``K1 = 2 nu (m - 1)/m D^(1/m) omega_m^(1/m) C(m)``;
    ``K2 = 2^m D``; ``K3 = 9/16 Lambda``.  Missing ``D_R0`` or
    ``Lambda_R0`` are measured on ``g``.  ``C(m)`` defaults to the
    placeholder 1, which is flagged.
    """
    nu = sobolev_exponent(m)
    flags = []
    if D_R0 is None:
        if g is None:
            raise ValueError("D_R0 or a graph is required")
        D_R0 = volume_density(g, R0, m)
        flags.append("D_R0 measured")
    if Lambda_R0 is None:
        if g is None:
            raise ValueError("Lambda_R0 or a graph is required")
        Lambda_R0 = poincare_sup(g, R0)
        flags.append("Lambda_R0 measured")
    if D_R0 < 1.0 - 1e-12 and "D_R0 measured" not in flags:
        raise InvalidRange(f"D_R0 must be >= 1, got {D_R0!r}")
    if Lambda_R0 <= 0:
        raise InvalidRange(f"Lambda_R0 must be positive, got {Lambda_R0!r}")
    if C_m is None:
        C_m = 1.0
        flags.append("C(m) placeholder = 1")
    elif C_m <= 0:
        raise InvalidRange(f"C(m) must be positive, got {C_m!r}")
    om = unit_ball_volume(m)
    K1 = 2.0 * nu * (m - 1) / m * D_R0 ** (1.0 / m) * om ** (1.0 / m) * C_m
    K2 = 2.0**m * D_R0
    K3 = 9.0 / 16.0 * Lambda_R0
    C1 = None
    if c2 is not None:
        if not 0 < c2 <= 2 * math.pi:
            raise InvalidRange(f"c2 must lie in (0, 2 pi], got {c2!r}")
        C1 = max(0.0, math.log(2.0) * math.log(3.0 * c2 / (2.0 * math.pi)))
    return GeometryConstants(nu, K1, K2, K3, 1.0, C0, c2, C1, om, float(D_R0),
                             float(Lambda_R0), dict(M_table or {}), tuple(flags))
