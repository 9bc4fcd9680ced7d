"""Acceptance criteria 1-14, each reported as one PASS/FAIL line.

The full suite runs once with every experiment timed, the individual
criteria read their records from that report, and a second run checks
that all output files are byte-identical.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from longitude_lab import experiments as E
from longitude_lab import plotting, sphere

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "full_suite.cfg"

pytestmark = pytest.mark.slow


def _run_suite(out: Path, timings: dict | None = None):
    cfg = E.load_config(CONFIG)
    if timings is not None:
        runners = dict(E.RUNNERS)

        def timed(kind):
            def inner(*a):
                t0 = time.perf_counter()
                try:
                    return runners[kind](*a)
                finally:
                    timings[kind] = time.perf_counter() - t0
            return inner

        patched = {k: timed(k) for k in runners}
        E.RUNNERS.update(patched)
        try:
            report = E.run(cfg)
        finally:
            E.RUNNERS.update(runners)
    else:
        report = E.run(cfg)
    E.write_reports(report, out)
    plotting.plot_report(report, out)
    return report


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("suite_a")
    timings: dict = {}
    report = _run_suite(out, timings)
    return report, timings, out


def records(report, experiment, predicate=lambda name: True):
    found = [r for r in report.records if r.experiment == experiment and predicate(r.name)]
    assert found, f"no records for {experiment}"
    return found


def verdict(log, k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    log.append(line)
    print(line)
    assert ok, line


def worst(recs):
    return max(r.measured for r in recs)


def test_criterion_01_hessian_oracles(suite, acceptance_log):
    report, timings, _ = suite
    recs = records(report, "hessians", lambda n: "closed - oracle" in n)
    assert {r.name.split()[0] for r in recs} == {"S^2", "S^4"}
    ok = all(r.passed and r.tolerance == 1e-6 for r in recs) and timings["hessians"] < 10
    verdict(acceptance_log, 1, ok,
            f"max |closed - oracle| = {worst(recs):.2e} (<= 1e-6), runtime {timings['hessians']:.2f} s (< 10 s)")


def test_criterion_02_level_tangents(suite, acceptance_log):
    report, _, _ = suite
    exact = records(report, "hessians", lambda n: "level tangents" in n and "closed form" in n)
    oracle = records(report, "hessians", lambda n: "level tangents" in n and "oracle" in n)
    ok = all(r.measured == 0.0 for r in exact) and all(r.passed for r in oracle)
    verdict(acceptance_log, 2, ok,
            f"closed form max {worst(exact):.1e} (exactly 0), oracle max {worst(oracle):.2e} (<= 1e-6)")


def test_criterion_03_convex_function_on_cap(suite, acceptance_log):
    report, _, _ = suite
    (rec,) = records(report, "hessians", lambda n: n == "convex F on cap: min Hessian eigenvalue")
    rng = np.random.default_rng(0)
    center = np.array([0.0, 1.0, 0.0])
    t0 = time.perf_counter()
    pts = []
    while len(pts) < 200:
        y = rng.standard_normal(3)
        y /= np.linalg.norm(y)
        if math.acos(min(1.0, y @ center)) <= math.pi / 6:
            pts.append(y)
    res = sphere.build_convex_function(pts)
    dt = time.perf_counter() - t0
    ok = rec.measured > 0 and res.min_hessian_eigenvalue > 0 and dt < 5
    verdict(acceptance_log, 3, ok,
            f"min Hessian eigenvalue {rec.measured:.4f} (> 0) over 200 samples, runtime {dt:.2f} s (< 5 s)")


def test_criterion_04_weak_divergence_identity(suite, acceptance_log):
    report, _, _ = suite
    (rec,) = records(report, "harmonic-map", lambda n: n.startswith("weak longitude residual (chord"))
    ok = rec.passed and rec.reference == pytest.approx(100 * 1e-10)
    verdict(acceptance_log, 4, ok,
            f"max weak residual {rec.measured:.2e} over 100 test functions (<= {rec.reference:.0e})")


def test_criterion_05_harnack_sharpness(suite, acceptance_log):
    report, timings, _ = suite
    (rec,) = records(report, "harnack-sweep", lambda n: n == "Harnack ratio exponent in L")
    pts = report.series["harnack-sweep/harnack_ratio_vs_sqrtL"]["x"]
    ok = rec.passed and len(pts) == 4 and timings["harnack-sweep"] < 60
    verdict(acceptance_log, 5, ok,
            f"fitted exponent {rec.measured:.4f} in [0.40, 0.60], runtime {timings['harnack-sweep']:.2f} s (< 60 s)")


def test_criterion_06_oscillation_decay(suite, acceptance_log):
    report, _, _ = suite
    (lin,) = records(report, "harnack-sweep", lambda n: n == "osc factor for linear data")
    strict = records(report, "harnack-sweep", lambda n: n.startswith("osc factor < 1 strictly"))
    ok = lin.passed and lin.tolerance == pytest.approx(2 / 128) and all(r.passed for r in strict)
    verdict(acceptance_log, 6, ok,
            f"linear-data factor {lin.measured:.4f} (0.5 +- {lin.tolerance:.4f}), "
            f"{len(strict)} swept fields with factor < 1")


def test_criterion_07_shrink_chain(suite, acceptance_log):
    report, _, _ = suite
    (ratio,) = records(report, "shrink-chain", lambda n: n == "R1 / R0")
    mono = records(report, "shrink-chain", lambda n: "strictly decreasing" in n)
    ok = ratio.passed and ratio.tolerance == 1e-4 and all(r.passed for r in mono)
    verdict(acceptance_log, 7, ok,
            f"R1/R0 = {ratio.measured:.6f} (0.0631 +- 1e-4), monotone over the 10x10 grid")


def test_criterion_08_neumann_eigenvalue(suite, acceptance_log):
    report, _, _ = suite
    (rec,) = records(report, "harnack-sweep", lambda n: n == "path mu_2 / pi^2")
    verdict(acceptance_log, 8, rec.passed and rec.tolerance == 0.01,
            f"mu_2 / pi^2 = {rec.measured:.6f} on 400 vertices (within 1%)")


def test_criterion_09_minimal_graph(suite, acceptance_log):
    report, _, _ = suite
    aff = records(report, "minimal-graph", lambda n: n.startswith("affine"))
    (order,) = records(report, "minimal-graph", lambda n: n == "catenoid recovery order")
    b2 = records(report, "minimal-graph", lambda n: n.startswith("|B|^2 at rho=sqrt2"))
    ok = all(r.passed for r in aff + b2) and order.passed and order.reference == 1.8
    verdict(acceptance_log, 9, ok,
            f"affine max {worst(aff):.1e} (<= 1e-8), catenoid order {order.measured:.3f} (>= 1.8), "
            f"|B|^2 at sqrt2 = {b2[-1].measured:.5f}")


def test_criterion_10_identity_suite(suite, acceptance_log):
    report, timings, _ = suite
    keys = ("Jacobi residual h=0.01", "Simons residual h=0.01", "Kato slack h=0.01",
            "Gauss map tension h=0.01")
    recs = records(report, "minimal-graph", lambda n: n in keys)
    orders = records(report, "minimal-graph", lambda n: n.endswith("convergence order"))
    ok = (len(recs) == 4 and len(orders) == 4 and all(r.passed for r in recs + orders)
          and timings["minimal-graph"] < 120)
    verdict(acceptance_log, 10, ok,
            f"residuals at h=0.01 <= O(h), min order {min(r.measured for r in orders):.3f} (>= 1), "
            f"runtime {timings['minimal-graph']:.2f} s (< 120 s)")


def test_criterion_11_curvature_audit(suite, acceptance_log):
    report, _, _ = suite
    (inv,) = records(report, "bernstein-audit", lambda n: n == "|B|(y0) R0 scale invariance")
    flags = records(report, "bernstein-audit",
                    lambda n: n in ("volume density nondecreasing", "doubling holds at every sampled R"))
    ok = inv.passed and inv.tolerance == 1e-8 and len(flags) == 2 and all(r.passed for r in flags)
    verdict(acceptance_log, 11, ok,
            f"|B| R0 change under rescaling {inv.measured:.1e} (<= 1e-8), density monotone, doubling holds")


def test_criterion_12_growth_integral(suite, acceptance_log):
    report, _, _ = suite
    (rec,) = records(report, "bernstein-audit", lambda n: n.startswith("growth integral"))
    verdict(acceptance_log, 12, rec.passed and rec.tolerance == 1e-3,
            f"integral at R = e^(e^2) = {rec.measured:.12f} (2 +- 1e-3)")


def test_criterion_13_great_circles(suite, acceptance_log):
    report, timings, _ = suite
    (rec,) = records(report, "appendix-geodesics", lambda n: n.startswith("great-circle hit rate"))
    ok = rec.measured == 1.0 and timings["appendix-geodesics"] < 5
    verdict(acceptance_log, 13, ok,
            f"hit rate {rec.measured!r} over 10^5 circles, runtime {timings['appendix-geodesics']:.2f} s (< 5 s)")


def test_criterion_14_determinism(suite, tmp_path, acceptance_log):
    report, _, out_a = suite
    out_b = tmp_path / "suite_b"
    _run_suite(out_b)
    files_a = sorted(p.name for p in out_a.iterdir())
    files_b = sorted(p.name for p in out_b.iterdir())
    same = files_a == files_b and all((out_a / f).read_bytes() == (out_b / f).read_bytes()
                                      for f in files_a)
    ok = same and report.passed
    verdict(acceptance_log, 14, ok,
            f"{len(files_a)} output files byte-identical across two full runs, all "
            f"{len(report.records)} checks passed")
