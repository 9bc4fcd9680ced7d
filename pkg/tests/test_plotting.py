import json

import numpy as np
import pytest

from longitude_lab import experiments as E
from longitude_lab import plotting


@pytest.fixture(scope="module")
def report():
    c = E.Collector("demo", 1.0)
    c.add("check", 0.0, 0.0, 1.0)
    x = [1.0, 2.0, 4.0, 8.0]
    c.curve("harnack", x, [2 * v**0.5 for v in x], "sqrt(L)", "ratio")
    c.curve("power", x, [3 * v**-2 for v in x], "h", "error", loglog=True)
    c.curve("a", x, x, "R", "q", group="pair", logx=True)
    c.curve("b", x, x[::-1], "R", "q", group="pair", logx=True)
    return E.RunReport({}, "hash", 0, c.records, c.series)


@pytest.mark.parametrize("k", [-2.0, 0.5, 1.0, 3.0])
def test_fitted_slope(k):
    x = np.geomspace(0.01, 1, 7)
    assert plotting.fitted_slope(x, 5 * x**k) == pytest.approx(k)


def test_fitted_slope_needs_two_positive_points():
    assert np.isnan(plotting.fitted_slope([1.0, 2.0], [1.0, -1.0]))


def test_one_figure_per_group(tmp_path, report):
    paths = plotting.plot_report(report, tmp_path)
    names = sorted(p.split("/")[-1] for p in paths)
    assert names == ["demo__harnack.svg", "demo__pair.svg", "demo__power.svg"]


def test_all_points_are_drawn(report):
    fig = plotting.draw_group("demo/harnack", [("harnack", report.series["harnack"])])
    (line,) = fig.axes[0].get_lines()
    assert len(line.get_xdata()) == 4


def test_loglog_series_carry_the_fitted_slope(report):
    fig = plotting.draw_group("demo/power", [("power", report.series["power"])])
    ax = fig.axes[0]
    assert ax.get_xscale() == ax.get_yscale() == "log"
    texts = [t.get_text() for t in ax.texts]
    assert texts == ["fitted slope -2.000"]


def test_svg_output_is_deterministic(tmp_path, report):
    a = plotting.plot_report(report, tmp_path / "a")
    b = plotting.plot_report(report, tmp_path / "b")
    for pa, pb in zip(a, b):
        assert open(pa, "rb").read() == open(pb, "rb").read()


def test_plot_from_json_path(tmp_path, report):
    p = tmp_path / "report.json"
    p.write_text(E.report_json(report))
    paths = plotting.plot_report(str(p))
    assert all(q.startswith(str(tmp_path)) for q in paths) and len(paths) == 3


def test_empty_report_only_warns(tmp_path):
    empty = {"records": [], "series": {}}
    with pytest.warns(UserWarning, match="no records"):
        assert plotting.plot_report(empty, tmp_path) == []
    assert list(tmp_path.iterdir()) == []
