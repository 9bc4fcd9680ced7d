"""Hot loops of the harmonic-map flow.

Two interchangeable implementations of the lazy Jacobi sweep
``u_v <- normalize(d_v u_v + sum_w c_vw u_w)`` are provided: a numba
kernel and a vectorised numpy one.  The numba path is used when numba is
importable and the environment variable ``LONGITUDE_LAB_DISABLE_NUMBA`` is
not set to a true value.
"""

from __future__ import annotations

import os
from typing import NamedTuple

import numpy as np

ENV_FLAG = "LONGITUDE_LAB_DISABLE_NUMBA"


def numba_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba
except ImportError:  # pragma: no cover - exercised only without the accel extra
    numba = None

HAVE_NUMBA = numba is not None


class FlowOutcome(NamedTuple):
    values: np.ndarray
    steps: int
    converged: bool
    last_displacement: float
    bad_vertex: int
    energies: np.ndarray


def _energy_numpy(values, indptr, indices, data):
    rows = np.repeat(np.arange(values.shape[0]), np.diff(indptr))
    d = values[rows] - values[indices]
    return 0.5 * float(np.sum(data * np.einsum("ij,ij->i", d, d)))


def _interior_indices(interior) -> np.ndarray:
    interior = np.asarray(interior)
    return np.flatnonzero(interior) if interior.dtype == bool else interior.astype(np.int64)


def flow_run_numpy(values, indptr, indices, data, interior, tol, max_steps,
                   record_energy=False, zero_tol=1e-12) -> FlowOutcome:
    """Vectorised lazy Jacobi flow (reference implementation).

    ``interior`` holds the free vertices, as an index array or a boolean mask.
    """
    from scipy import sparse

    interior = _interior_indices(interior)
    u = np.array(values, dtype=float, copy=True)
    n = u.shape[0]
    A = sparse.csr_matrix((data, indices, indptr), shape=(n, n))
    deg = np.asarray(A.sum(axis=1)).ravel()[interior]
    energies = [_energy_numpy(u, indptr, indices, data)] if record_energy else []
    disp = np.inf
    for step in range(1, max_steps + 1):
        s = (A @ u)[interior]
        snorm = np.linalg.norm(s, axis=1)
        bad = np.flatnonzero(snorm <= zero_tol * deg)
        if bad.size:
            return FlowOutcome(u, step, False, disp, int(interior[bad[0]]), np.asarray(energies))
        w = deg[:, None] * u[interior] + s
        w /= np.linalg.norm(w, axis=1)[:, None]
        disp = float(np.max(np.linalg.norm(w - u[interior], axis=1))) if interior.size else 0.0
        u[interior] = w
        if record_energy:
            energies.append(_energy_numpy(u, indptr, indices, data))
        if disp <= tol:
            return FlowOutcome(u, step, True, disp, -1, np.asarray(energies))
    return FlowOutcome(u, max_steps, False, disp, -1, np.asarray(energies))


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _energy_nb(u, indptr, indices, data):
        e = 0.0
        for v in range(u.shape[0]):
            for p in range(indptr[v], indptr[v + 1]):
                w = indices[p]
                acc = 0.0
                for k in range(u.shape[1]):
                    t = u[v, k] - u[w, k]
                    acc += t * t
                e += data[p] * acc
        return 0.5 * e

    @numba.njit(cache=True)
    def _flow_nb(u, indptr, indices, data, interior, tol, max_steps, record, zero_tol,
                 energies):
        n_int = interior.shape[0]
        k = u.shape[1]
        new = np.empty((n_int, k))
        s = np.empty(k)
        disp = np.inf
        if record:
            energies[0] = _energy_nb(u, indptr, indices, data)
        for step in range(1, max_steps + 1):
            disp = 0.0
            for a in range(n_int):
                v = interior[a]
                deg = 0.0
                for c in range(k):
                    s[c] = 0.0
                for p in range(indptr[v], indptr[v + 1]):
                    w = indices[p]
                    deg += data[p]
                    for c in range(k):
                        s[c] += data[p] * u[w, c]
                sn = 0.0
                for c in range(k):
                    sn += s[c] * s[c]
                if np.sqrt(sn) <= zero_tol * deg:
                    return step, False, disp, v
                nn = 0.0
                for c in range(k):
                    s[c] += deg * u[v, c]
                    nn += s[c] * s[c]
                nn = np.sqrt(nn)
                dd = 0.0
                for c in range(k):
                    new[a, c] = s[c] / nn
                    t = new[a, c] - u[v, c]
                    dd += t * t
                dd = np.sqrt(dd)
                if dd > disp:
                    disp = dd
            for a in range(n_int):
                for c in range(k):
                    u[interior[a], c] = new[a, c]
            if record:
                energies[step] = _energy_nb(u, indptr, indices, data)
            if disp <= tol:
                return step, True, disp, -1
        return max_steps, False, disp, -1

    def flow_run_numba(values, indptr, indices, data, interior, tol, max_steps,
                       record_energy=False, zero_tol=1e-12) -> FlowOutcome:
        """Compiled lazy Jacobi flow; same contract as :func:`flow_run_numpy`."""
        u = np.array(values, dtype=np.float64, copy=True)
        energies = np.zeros(max_steps + 1 if record_energy else 1)
        steps, ok, disp, bad = _flow_nb(u, indptr.astype(np.int64), indices.astype(np.int64),
                                        np.asarray(data, np.float64),
                                        _interior_indices(interior), float(tol),
                                        int(max_steps), bool(record_energy), float(zero_tol),
                                        energies)
        trace = energies[: steps + 1] if record_energy else np.empty(0)
        if bad >= 0 and record_energy:
            trace = energies[:steps]
        return FlowOutcome(u, int(steps), bool(ok), float(disp), int(bad), trace)

else:  # pragma: no cover
    flow_run_numba = None


def active_backend() -> str:
    return "numba" if HAVE_NUMBA and not numba_disabled() else "numpy"


def flow_run(*args, **kwargs) -> FlowOutcome:
    """Dispatch to the numba kernel or the numpy fallback."""
    if active_backend() == "numba":
        return flow_run_numba(*args, **kwargs)
    return flow_run_numpy(*args, **kwargs)
