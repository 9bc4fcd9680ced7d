"""Weighted graphs standing in for Riemannian domains.

A :class:`WeightedGraph` carries vertex positions (used for the extrinsic
distance ``d`` and its metric balls), edge conductances (the metric) and
vertex measures (volumes).  The Dirichlet energy of a vertex function is
``sum_e c_e (v_i - v_j)^2`` and its integral is ``sum_i m_i v_i``.

Text format
-----------
One record per line, ``#`` starts a comment::

    dim <d>
    base <vertex id>
    v <id> <x_1> ... <x_d> <measure>
    e <id_1> <id_2> <conductance> [<length>]

Vertex ids must be ``0 .. N-1`` (in any order).  Numbers are written with
17 significant digits so that a write/read round trip is exact.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import EmptyBall, InvalidGraph


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Connected graph with positive conductances and measures.

    Parameters
    ----------
    positions : (N, d) array
        Vertex positions; ``d(y1, y2) = |pos[y1] - pos[y2]|``.
    edges : (E, 2) int array
        Undirected edges, each listed once.
    conductances : (E,) array
        Positive edge weights.
    measures : (N,) array
        Positive vertex volumes.
    base : int
        The centre ``y0`` of all metric balls.
    lengths : (E,) array, optional
        Intrinsic edge lengths; defaults to the Euclidean endpoint distance.
    """

    positions: np.ndarray
    edges: np.ndarray
    conductances: np.ndarray
    measures: np.ndarray
    base: int = 0
    lengths: np.ndarray | None = None
    validate: bool = True

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        cond = np.asarray(self.conductances, dtype=float).reshape(-1)
        meas = np.asarray(self.measures, dtype=float).reshape(-1)
        for name, arr in (("positions", pos), ("edges", edges), ("conductances", cond),
                          ("measures", meas)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.lengths is not None:
            lens = np.asarray(self.lengths, dtype=float).reshape(-1)
            lens.setflags(write=False)
            object.__setattr__(self, "lengths", lens)
        object.__setattr__(self, "base", int(self.base))
        if self.validate:
            self.check()

    def check(self):
        n = self.n_vertices
        if self.measures.shape != (n,):
            raise InvalidGraph("one measure per vertex is required")
        if self.conductances.shape != (self.n_edges,):
            raise InvalidGraph("one conductance per edge is required")
        if self.n_edges and (self.edges.min() < 0 or self.edges.max() >= n):
            raise InvalidGraph("edge refers to a missing vertex")
        if np.any(self.edges[:, 0] == self.edges[:, 1]):
            raise InvalidGraph("self loops are not allowed")
        if not np.all(self.conductances > 0):
            raise InvalidGraph("conductances must be positive")
        if not np.all(self.measures > 0):
            raise InvalidGraph("measures must be positive")
        if not np.all(np.isfinite(self.positions)):
            raise InvalidGraph("positions must be finite")
        if not 0 <= self.base < n:
            raise InvalidGraph("base vertex out of range")
        if n > 1 and not self.is_connected():
            raise InvalidGraph("graph is not connected")
        if self.lengths is not None and not self.distance_bound_holds():
            raise InvalidGraph("extrinsic distance exceeds an edge length")

    @property
    def n_vertices(self) -> int:
        return self.positions.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric conductance matrix."""
        n = self.n_vertices
        i, j = self.edges[:, 0], self.edges[:, 1]
        w = self.conductances
        a = sparse.coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(n, n))
        return a.tocsr()

    def laplacian(self, multipliers: np.ndarray | None = None) -> sparse.csr_matrix:
        """Stiffness matrix of ``sum_e c_e a_e (v_i - v_j)^2``."""
        n = self.n_vertices
        w = self.conductances if multipliers is None else self.conductances * multipliers
        i, j = self.edges[:, 0], self.edges[:, 1]
        off = sparse.coo_matrix((np.r_[-w, -w], (np.r_[i, j], np.r_[j, i])), shape=(n, n))
        diag = np.bincount(i, w, n) + np.bincount(j, w, n)
        return (off + sparse.diags(diag)).tocsr()

    def is_connected(self, mask: np.ndarray | None = None) -> bool:
        a = self.adjacency
        if mask is not None:
            idx = np.flatnonzero(mask)
            if idx.size == 0:
                return False
            a = a[idx][:, idx]
        ncomp, _ = csgraph.connected_components(a, directed=False)
        return ncomp == 1

    def edge_vectors(self) -> np.ndarray:
        return self.positions[self.edges[:, 1]] - self.positions[self.edges[:, 0]]

    def euclidean_edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors(), axis=1)

    def distance_bound_holds(self, rtol: float = 1e-12) -> bool:
        """Check ``d(endpoints) <= edge length`` on every edge."""
        if self.lengths is None:
            return True
        d = self.euclidean_edge_lengths()
        return bool(np.all(d <= self.lengths * (1.0 + rtol) + rtol))

    @cached_property
    def base_distances(self) -> np.ndarray:
        return np.linalg.norm(self.positions - self.positions[self.base], axis=1)

    def ball(self, radius: float) -> np.ndarray:
        """Boolean mask of the open extrinsic ball ``B_R(y0)``."""
        return self.base_distances < radius

    def volume(self, mask: np.ndarray | None = None) -> float:
        if mask is None:
            return float(self.measures.sum())
        return float(self.measures[mask].sum())

    def nonempty_ball(self, radius: float) -> np.ndarray:
        mask = self.ball(radius)
        if not mask.any():
            raise EmptyBall(f"ball of radius {radius!r} contains no vertex")
        return mask

    def with_base(self, base: int) -> "WeightedGraph":
        return WeightedGraph(self.positions, self.edges, self.conductances, self.measures,
                             base, self.lengths, validate=False)

    def scaled(self, s: float, dim: int | None = None) -> "WeightedGraph":
        """Graph of the domain dilated by ``s`` (Dirichlet energy is scaled
        by ``s^(dim - 2)`` and measures by ``s^dim``)."""
        dim = self.dim if dim is None else dim
        return WeightedGraph(self.positions * s, self.edges, self.conductances * s ** (dim - 2),
                             self.measures * s**dim, self.base,
                             None if self.lengths is None else self.lengths * s, validate=False)

    def nearest_vertex(self, point) -> int:
        return int(np.argmin(np.linalg.norm(self.positions - np.asarray(point, float), axis=1)))


# --- constructors ------------------------------------------------------------


def path_graph(n: int, a: float = 0.0, b: float = 1.0, base: int = 0) -> WeightedGraph:
    """Vertex-centred discretisation of the interval ``[a, b]``.

    Conductances ``1/h`` and measures ``h`` (``h/2`` at the two ends).
    """
    if n < 2:
        raise ValueError("a path needs at least two vertices")
    x = np.linspace(a, b, n)
    h = (b - a) / (n - 1)
    edges = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    meas = np.full(n, h)
    meas[[0, -1]] = 0.5 * h
    return WeightedGraph(x[:, None], edges, np.full(n - 1, 1.0 / h), meas, base)


def grid_graph(nx: int, ny: int, xlim=(0.0, 1.0), ylim=(0.0, 1.0),
               base: int | None = None) -> WeightedGraph:
    """Five-point finite-volume graph of a rectangle.

    Vertex ``k = i * ny + j`` sits at ``(x_i, y_j)``.  Measures are dual-cell
    areas; conductances are dual-face length over edge length, with faces
    along the boundary halved.  ``base`` defaults to the vertex nearest to
    the centre of the rectangle.
    """
    x = np.linspace(*xlim, nx)
    y = np.linspace(*ylim, ny)
    hx = (xlim[1] - xlim[0]) / (nx - 1)
    hy = (ylim[1] - ylim[0]) / (ny - 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    pos = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange(nx * ny).reshape(nx, ny)
    wx = np.ones(nx)
    wx[[0, -1]] = 0.5
    wy = np.ones(ny)
    wy[[0, -1]] = 0.5
    meas = (np.outer(wx, wy) * hx * hy).ravel()
    ex = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    cx = np.broadcast_to(wy * hy / hx, (nx - 1, ny)).ravel()
    ey = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    cy = np.broadcast_to((wx * hx / hy)[:, None], (nx, ny - 1)).ravel()
    g = WeightedGraph(pos, np.vstack([ex, ey]), np.r_[cx, cy], meas, 0, validate=False)
    if base is None:
        base = g.nearest_vertex([(xlim[0] + xlim[1]) / 2, (ylim[0] + ylim[1]) / 2])
    return WeightedGraph(pos, g.edges, g.conductances, meas, base)


def grid_boundary_mask(nx: int, ny: int) -> np.ndarray:
    """Mask of the vertices on the outer edge of a :func:`grid_graph`."""
    m = np.zeros((nx, ny), dtype=bool)
    m[[0, -1], :] = True
    m[:, [0, -1]] = True
    return m.ravel()


def complete_graph(k: int) -> WeightedGraph:
    """Complete graph with unit conductances and measures.

    Vertices sit at the standard basis vectors of R^k (pairwise distance
    sqrt 2); the base vertex is 0.
    """
    i, j = np.triu_indices(k, 1)
    return WeightedGraph(np.eye(k), np.column_stack([i, j]), np.ones(i.size), np.ones(k), 0)


# --- text I/O ------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_graph(g: WeightedGraph) -> str:
    buf = io.StringIO()
    buf.write("# longitude-lab weighted graph\n")
    buf.write(f"dim {g.dim}\n")
    buf.write(f"base {g.base}\n")
    for k in range(g.n_vertices):
        coords = " ".join(_fmt(c) for c in g.positions[k])
        buf.write(f"v {k} {coords} {_fmt(g.measures[k])}\n")
    for k, (a, b) in enumerate(g.edges):
        tail = "" if g.lengths is None else " " + _fmt(g.lengths[k])
        buf.write(f"e {a} {b} {_fmt(g.conductances[k])}{tail}\n")
    return buf.getvalue()


def loads_graph(text: str) -> WeightedGraph:
    dim = None
    base = 0
    verts: dict[int, tuple[list[float], float]] = {}
    edges, conds, lens = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "dim":
                dim = int(tok[1])
            elif tok[0] == "base":
                base = int(tok[1])
            elif tok[0] == "v":
                if dim is None:
                    raise ValueError("'dim' must precede vertex lines")
                if len(tok) != dim + 3:
                    raise ValueError(f"expected {dim} coordinates and a measure")
                verts[int(tok[1])] = ([float(t) for t in tok[2:2 + dim]], float(tok[-1]))
            elif tok[0] == "e":
                if len(tok) not in (4, 5):
                    raise ValueError("edge line needs two ids, a conductance and an optional length")
                edges.append((int(tok[1]), int(tok[2])))
                conds.append(float(tok[3]))
                lens.append(float(tok[4]) if len(tok) == 5 else None)
            else:
                raise ValueError(f"unknown record {tok[0]!r}")
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    n = len(verts)
    if sorted(verts) != list(range(n)):
        raise ValueError("vertex ids must be 0..N-1")
    pos = np.array([verts[k][0] for k in range(n)], dtype=float).reshape(n, dim or 0)
    meas = np.array([verts[k][1] for k in range(n)])
    if any(x is None for x in lens) and not all(x is None for x in lens):
        raise ValueError("edge lengths must be given for all edges or none")
    lengths = None if not lens or lens[0] is None else np.array(lens)
    return WeightedGraph(pos, np.array(edges, dtype=np.int64).reshape(-1, 2),
                         np.array(conds), meas, base, lengths)


def write_graph(g: WeightedGraph, path: str | os.PathLike):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_graph(g))


def read_graph(path: str | os.PathLike) -> WeightedGraph:
    with open(path, encoding="utf-8") as fh:
        return loads_graph(fh.read())
