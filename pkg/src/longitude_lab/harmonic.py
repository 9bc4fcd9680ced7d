"""Discrete harmonic maps from weighted graphs into S^n.

The flow, tension and energy of sphere-valued vertex maps; composition
with the longitude chart; the weak divergence identity satisfied by the
longitude of a harmonic map; and the image-shrinking verification.

"Harmonic" here means small discrete tension at every interior vertex.
That is only a heuristic stand-in for weak harmonicity in a Sobolev class.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .elliptic import CoefficientField, ShrinkChain, shrink_chain, solve_divergence
from .errors import (
    NonConvergence,
    NotCompactlySupported,
    ShrinkViolated,
    ZeroAverage,
)
from .graphs import WeightedGraph
from .sphere import UNIT_TOL, LongitudeChart, SpherePoint

FLOW_TOL = 1e-10
FLOW_MAX_STEPS = 1_000_000


@dataclass(frozen=True, eq=False)
class SphereField:
    """Map from the vertices of ``graph`` to the unit sphere.

    Parameters
    ----------
    graph : WeightedGraph
    values : (N, n+1) array
        Unit vectors, one row per vertex.
    boundary : (N,) bool array, optional
        Vertices whose values are prescribed.
    """

    graph: WeightedGraph
    values: np.ndarray
    boundary: np.ndarray | None = None
    steps: int = 0
    energies: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != self.graph.n_vertices or v.shape[1] < 3:
            raise ValueError("values must have shape (N, n+1) with n >= 2")
        err = np.abs(np.linalg.norm(v, axis=1) - 1.0)
        if np.any(err > UNIT_TOL):
            raise ValueError(f"vertex {int(np.argmax(err))} is not a unit vector")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        b = np.zeros(v.shape[0], bool) if self.boundary is None else np.asarray(self.boundary, bool)
        object.__setattr__(self, "boundary", b)

    def point(self, k: int) -> SpherePoint:
        return SpherePoint(self.values[k])


def _csr(g: WeightedGraph):
    A = g.adjacency
    return A.indptr, A.indices, A.data


def harmonic_extension(g: WeightedGraph, boundary: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Componentwise harmonic extension of boundary data, then normalized.

    Used as the starting point of the flow.  Rows whose extension vanishes
    fall back to the nearest prescribed value direction.
    """
    A = CoefficientField.constant(g)
    ext = np.column_stack([solve_divergence(g, A, boundary, values[:, k])
                           for k in range(values.shape[1])])
    nrm = np.linalg.norm(ext, axis=1)
    small = nrm < 1e-8
    if small.any():
        ext[small] = values[boundary][0]
        nrm[small] = np.linalg.norm(ext[small], axis=1)
    return ext / nrm[:, None]


def harmonic_flow(g: WeightedGraph, boundary: np.ndarray, values: np.ndarray,
                  tol: float = FLOW_TOL, max_steps: int = FLOW_MAX_STEPS,
                  initial: np.ndarray | str | None = "extension",
                  record_energy: bool = False) -> SphereField:
    """Relax a sphere-valued map with prescribed boundary values.

    Each synchronous sweep replaces an interior value by
    ``normalize(d_v u_v + sum_w c_vw u_w)`` with ``d_v = sum_w c_vw``.
    Its fixed points are exactly the maps whose neighbour average is
    parallel to ``u_v``, i.e. zero tension.  The self term makes every
    sweep a Dirichlet-energy descent step.

    Parameters
    ----------
    boundary : bool array (N,)
    values : array (N, n+1)
        Boundary values (unit); interior rows are used when
        ``initial="values"``.
    tol : float
        Stop once the maximal vertex displacement of a sweep is ``<= tol``.
    initial : {"extension", "values"} or array
        Starting interior values.

    Raises
    ------
    ZeroAverage
        If the weighted neighbour sum of an interior vertex vanishes.
    NonConvergence
        If ``max_steps`` sweeps do not reach ``tol``.
    """
    boundary = np.asarray(boundary, bool)
    values = np.asarray(values, float)
    if not boundary.any():
        raise ValueError("the boundary must be nonempty")
    bn = np.linalg.norm(values[boundary], axis=1)
    if np.any(np.abs(bn - 1.0) > UNIT_TOL):
        raise ValueError("boundary values must be unit vectors")
    if isinstance(initial, str):
        if initial == "extension":
            u0 = harmonic_extension(g, boundary, np.where(boundary[:, None], values, 0.0))
        elif initial == "values":
            u0 = values / np.linalg.norm(values, axis=1)[:, None]
        else:
            raise ValueError(f"unknown initial mode {initial!r}")
    elif initial is None:
        u0 = harmonic_extension(g, boundary, np.where(boundary[:, None], values, 0.0))
    else:
        u0 = np.asarray(initial, float)
        u0 = u0 / np.linalg.norm(u0, axis=1)[:, None]
    u0 = np.where(boundary[:, None], values, u0)
    interior = np.flatnonzero(~boundary)
    indptr, indices, data = _csr(g)
    out = kernels.flow_run(u0, indptr, indices, data, interior, tol, max_steps,
                           record_energy=record_energy)
    if out.bad_vertex >= 0:
        raise ZeroAverage(f"neighbour average vanishes at vertex {out.bad_vertex}",
                          vertex=out.bad_vertex)
    if not out.converged:
        raise NonConvergence(
            f"flow stopped after {out.steps} sweeps with displacement {out.last_displacement:.3e}")
    return SphereField(g, out.values, boundary, out.steps, out.energies)


def dirichlet_energy(g: WeightedGraph, values: np.ndarray) -> float:
    """``sum_e c_e |u_i - u_j|^2``."""
    d = values[g.edges[:, 0]] - values[g.edges[:, 1]]
    return float(np.sum(g.conductances * np.einsum("ij,ij->i", d, d)))


def tension(u: SphereField) -> np.ndarray:
    """Norm of the tangential part of the degree-normalised Laplacian.

    Returned per vertex; boundary vertices get 0.
    """
    g = u.graph
    A = g.adjacency
    deg = np.asarray(A.sum(axis=1)).ravel()
    lap = (A @ u.values) / deg[:, None] - u.values
    tang = lap - np.einsum("ij,ij->i", lap, u.values)[:, None] * u.values
    t = np.linalg.norm(tang, axis=1)
    t[u.boundary] = 0.0
    return t


# --- longitude composition ------------------------------------------------------


class MTable:
    """``M(R) = sup_{B_R} 1/(r o u)`` as a callable on radii.

    Nondecreasing by construction: larger balls contain smaller ones.
    """

    def __init__(self, graph: WeightedGraph, r_field: np.ndarray):
        order = np.argsort(graph.base_distances, kind="stable")
        self._dist = graph.base_distances[order]
        self._running = np.maximum.accumulate(1.0 / r_field[order])

    def __call__(self, R: float) -> float:
        k = int(np.searchsorted(self._dist, R, side="left"))
        if k == 0:
            raise ValueError(f"ball of radius {R!r} is empty")
        return float(self._running[k - 1])

    def table(self, radii) -> dict[float, float]:
        return {float(R): self(R) for R in radii}


def compose_fields(u: SphereField, chart: LongitudeChart | None = None
                   ) -> tuple[np.ndarray, np.ndarray, MTable]:
    """``Theta = theta o u``, ``r o u`` and the table ``M``.

    Errors from the chart carry the offending vertex id.
    """
    chart = chart or LongitudeChart()
    r, theta = chart.polar_many(u.values)
    return theta, r, MTable(u.graph, r)


def longitude_edge_coefficient(r: np.ndarray, theta: np.ndarray, edges: np.ndarray,
                               coefficient: str = "chord") -> np.ndarray:
    """Edge value of ``r^2 o u``.

    ``arithmetic`` and ``geometric`` are endpoint means.  ``chord`` is
    ``r_i r_j sinc(Theta_i - Theta_j)``; with it the weak identity holds
    exactly at fixed points of the flow.
    """
    ri, rj = r[edges[:, 0]], r[edges[:, 1]]
    if coefficient == "arithmetic":
        return 0.5 * (ri**2 + rj**2)
    if coefficient == "geometric":
        return ri * rj
    if coefficient == "chord":
        d = theta[edges[:, 0]] - theta[edges[:, 1]]
        return ri * rj * np.sinc(d / math.pi)
    raise ValueError(f"unknown coefficient {coefficient!r}")


def longitude_residual_vector(u: SphereField, chart: LongitudeChart | None = None,
                              coefficient: str = "chord") -> np.ndarray:
    """Per-vertex weak residual ``sum_w c a_e (Theta_v - Theta_w)`` (boundary rows 0)."""
    theta, r, _ = compose_fields(u, chart)
    g = u.graph
    a = longitude_edge_coefficient(r, theta, g.edges, coefficient)
    res = g.laplacian(a) @ theta
    res[u.boundary] = 0.0
    return res


def weak_longitude_residual(u: SphereField, phi: np.ndarray,
                            chart: LongitudeChart | None = None,
                            coefficient: str = "chord") -> float:
    """``sum_e c_e (r^2 o u)_e (Theta_i - Theta_j)(phi_i - phi_j)``.

    Raises
    ------
    NotCompactlySupported
        If ``phi`` is nonzero on a boundary vertex.
    """
    phi = np.asarray(phi, float)
    if np.any(phi[u.boundary] != 0.0):
        k = int(np.flatnonzero(phi[u.boundary] != 0.0)[0])
        raise NotCompactlySupported(
            f"test function is nonzero on boundary vertex {int(np.flatnonzero(u.boundary)[k])}")
    return float(phi @ longitude_residual_vector(u, chart, coefficient))


def unit_gradient_test_functions(g: WeightedGraph, boundary: np.ndarray, count: int,
                                 rng: np.random.Generator) -> np.ndarray:
    """``count`` random interior-supported functions with unit gradient energy."""
    phis = np.zeros((count, g.n_vertices))
    inner = np.flatnonzero(~np.asarray(boundary, bool))
    phis[:, inner] = rng.standard_normal((count, inner.size))
    d = phis[:, g.edges[:, 0]] - phis[:, g.edges[:, 1]]
    phis /= np.sqrt(d**2 @ g.conductances)[:, None]
    return phis


# --- image shrinking ----------------------------------------------------------------


@dataclass(frozen=True)
class ShrinkReport:
    """Geodesic ball containing ``u(B_{R1})``."""

    R1: float
    theta0: float
    center: SpherePoint
    radius: float
    M_R1: float
    osc_R0: float
    osc_R1: float
    min_inner_product: float
    chain: ShrinkChain


def image_shrink_check(u: SphereField, R0: float, C0: float,
                       chart: LongitudeChart | None = None) -> ShrinkReport:
    """Verify that ``u(B_{R1})`` lies in a geodesic ball of radius ``< pi/2``.

    ``R1`` comes from :func:`shrink_chain` with ``c2`` the oscillation of
    ``Theta`` on ``B_{R0}`` (raised to ``2 pi / 3`` when smaller, where
    the chain no longer shrinks).  ``theta0`` is the midpoint of the
    ``Theta``-range on ``B_{R1}``.

    Raises
    ------
    ShrinkViolated
        If the oscillation on ``B_{R1}`` exceeds ``2 pi / 3`` or some vertex
        has ``(u(y), x0) < 1 / (2 M(R1))``.
    """
    chart = chart or LongitudeChart()
    g = u.graph
    theta, r, M = compose_fields(u, chart)
    ball0 = g.nonempty_ball(R0)
    osc0 = float(np.ptp(theta[ball0]))
    c2 = min(max(osc0, 2.0 * math.pi / 3.0), 2.0 * math.pi)
    chain = shrink_chain(M, R0, C0, c2)
    ball1 = g.nonempty_ball(chain.R1)
    t1 = theta[ball1]
    osc1 = float(np.ptp(t1))
    theta0 = 0.5 * float(t1.max() + t1.min())
    x0 = np.zeros(u.values.shape[1])
    x0[chart.axes[0]] = math.cos(theta0)
    x0[chart.axes[1]] = math.sin(theta0)
    M1 = M(chain.R1)
    inner = u.values[ball1] @ x0
    bound = 0.5 / M1
    partial = ShrinkReport(chain.R1, theta0, SpherePoint(x0), math.acos(bound), M1, osc0, osc1,
                           float(inner.min()), chain)
    if osc1 > 2.0 * math.pi / 3.0 + 1e-12:
        k = int(np.flatnonzero(ball1)[np.argmax(t1)])
        raise ShrinkViolated(f"oscillation {osc1:.6g} on B_R1 exceeds 2 pi/3", vertex=k,
                             report=partial)
    bad = np.flatnonzero(inner < bound - 1e-12)
    if bad.size:
        k = int(np.flatnonzero(ball1)[bad[0]])
        raise ShrinkViolated(f"(u, x0) = {inner[bad[0]]:.6g} < {bound:.6g} at vertex {k}",
                             vertex=k, report=partial)
    return partial


# --- text I/O --------------------------------------------------------------------


def dumps_field(values: np.ndarray) -> str:
    """One line ``id c_0 ... c_n`` per vertex, 17 significant digits."""
    values = np.asarray(values, float)
    buf = io.StringIO()
    buf.write(f"# sphere-field vertices={values.shape[0]} ambient={values.shape[1]}\n")
    for k, row in enumerate(values):
        buf.write(str(k) + " " + " ".join(format(float(c), ".17g") for c in row) + "\n")
    return buf.getvalue()


def loads_field(text: str) -> np.ndarray:
    rows: dict[int, list[float]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            rows[int(tok[0])] = [float(t) for t in tok[1:]]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    n = len(rows)
    if sorted(rows) != list(range(n)):
        raise ValueError("vertex ids must be 0..N-1")
    widths = {len(v) for v in rows.values()}
    if len(widths) > 1:
        raise ValueError("rows have different lengths")
    return np.array([rows[k] for k in range(n)], dtype=float)


def write_field(values: np.ndarray, path: str | os.PathLike):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_field(values))


def read_field(path: str | os.PathLike) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        return loads_field(fh.read())
