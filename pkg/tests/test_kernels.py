import numpy as np
import pytest

from longitude_lab import kernels
from longitude_lab.graphs import grid_boundary_mask, grid_graph, path_graph

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


def random_problem(n=12, ambient=4, seed=0):
    g = grid_graph(n, n)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((g.n_vertices, ambient))
    u[:, 0] = np.abs(u[:, 0]) + 1.0  # keeps every neighbour sum away from zero
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    A = g.adjacency
    interior = np.flatnonzero(~grid_boundary_mask(n, n))
    return u, A.indptr, A.indices, A.data, interior


@pytest.mark.parametrize("tol, steps", [(0.0, 7), (1e-6, 10_000)])
def test_numpy_kernel_keeps_unit_norm_and_lowers_energy(tol, steps):
    out = kernels.flow_run_numpy(*random_problem(), tol, steps, record_energy=True)
    assert np.abs(np.linalg.norm(out.values, axis=1) - 1).max() < 1e-12
    assert np.all(np.diff(out.energies) <= 1e-14)
    assert out.energies.size == out.steps + 1
    if tol > 0:
        assert out.converged and out.last_displacement <= tol


def test_boundary_rows_are_untouched():
    u, *rest = random_problem()
    interior = rest[-1]
    out = kernels.flow_run_numpy(u, *rest, 0.0, 5)
    bdry = np.setdiff1d(np.arange(u.shape[0]), interior)
    assert np.array_equal(out.values[bdry], u[bdry])


def test_mask_and_index_forms_agree():
    u, ip, ix, d, interior = random_problem()
    mask = np.zeros(u.shape[0], bool)
    mask[interior] = True
    a = kernels.flow_run_numpy(u, ip, ix, d, interior, 0.0, 4)
    b = kernels.flow_run_numpy(u, ip, ix, d, mask, 0.0, 4)
    assert np.array_equal(a.values, b.values)


def antipodal_path():
    g = path_graph(3)
    u = np.array([[0, 0, 1.0], [1.0, 0, 0], [0, 0, -1.0]])
    A = g.adjacency
    return u, A.indptr, A.indices, A.data, np.array([1])


def test_zero_average_is_reported():
    out = kernels.flow_run_numpy(*antipodal_path(), 1e-10, 100)
    assert out.bad_vertex == 1 and not out.converged


@needs_numba
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_backends_agree_bit_for_bit(seed):
    p = random_problem(seed=seed)
    a = kernels.flow_run_numpy(*p, 0.0, 25, record_energy=True)
    b = kernels.flow_run_numba(*p, 0.0, 25, record_energy=True)
    assert np.array_equal(a.values, b.values)
    assert a.steps == b.steps
    assert np.allclose(a.energies, b.energies, rtol=1e-13, atol=0)


@needs_numba
def test_backends_agree_on_zero_average():
    a = kernels.flow_run_numpy(*antipodal_path(), 1e-10, 100)
    b = kernels.flow_run_numba(*antipodal_path(), 1e-10, 100)
    assert a.bad_vertex == b.bad_vertex == 1


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv(kernels.ENV_FLAG, "1")
    assert kernels.numba_disabled()
    assert kernels.active_backend() == "numpy"
    monkeypatch.setenv(kernels.ENV_FLAG, "0")
    assert not kernels.numba_disabled()
    expected = "numba" if kernels.HAVE_NUMBA else "numpy"
    assert kernels.active_backend() == expected


def test_dispatcher_uses_active_backend(monkeypatch):
    calls = []
    monkeypatch.setattr(kernels, "flow_run_numpy", lambda *a, **k: calls.append("numpy"))
    monkeypatch.setenv(kernels.ENV_FLAG, "yes")
    kernels.flow_run(*random_problem(), 0.0, 1)
    assert calls == ["numpy"]
