"""SVG figures from a run report.

Figures are drawn with the object-oriented matplotlib API (no global
pyplot state) and saved with a fixed hash salt and no date stamp, so
the same report always gives the same bytes.
"""

from __future__ import annotations

import json
import os
import warnings
from collections import defaultdict

import matplotlib
import numpy as np
from matplotlib.figure import Figure
from matplotlib.ticker import NullFormatter

SVG_RC = {"svg.hashsalt": "longitude-lab", "svg.fonttype": "path"}


def fitted_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def _load(report) -> dict:
    if isinstance(report, dict):
        return report
    if hasattr(report, "to_dict"):
        return report.to_dict()
    with open(report, encoding="utf-8") as fh:
        return json.load(fh)


def _file_name(group: str) -> str:
    return group.replace("/", "__").replace(" ", "_") + ".svg"


def draw_group(name: str, members: list[tuple[str, dict]]) -> Figure:
    fig = Figure(figsize=(5.0, 3.6))
    ax = fig.add_subplot()
    loglog = any(s["loglog"] for _, s in members)
    for label, s in members:
        ax.plot(s["x"], s["y"], marker="o", ms=3, label=label)
        if loglog:
            k = fitted_slope(s["x"], s["y"])
            mid = len(s["x"]) // 2
            xm = float(np.sqrt(s["x"][mid - 1] * s["x"][mid])) if len(s["x"]) % 2 == 0 else s["x"][mid]
            ym = float(np.sqrt(s["y"][mid - 1] * s["y"][mid])) if len(s["y"]) % 2 == 0 else s["y"][mid]
            ax.annotate(f"fitted slope {k:.3f}", xy=(xm, ym), fontsize=8,
                        textcoords="offset points", xytext=(6, -12))
    if loglog or any(s.get("logx") for _, s in members):
        ax.set_xscale("log")
        ax.xaxis.set_minor_formatter(NullFormatter())
    if loglog:
        ax.set_yscale("log")
        ax.yaxis.set_minor_formatter(NullFormatter())
    first = members[0][1]
    ax.set_xlabel(first["xlabel"])
    ax.set_ylabel(first["ylabel"])
    ax.set_title(name, fontsize=9)
    if len(members) > 1:
        ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def plot_report(report, out_dir: str | os.PathLike | None = None) -> list[str]:
    """Write one SVG per series group and return the paths.

    ``report`` is a path to ``report.json``, its parsed dict or a
    :class:`RunReport`.  An empty report only emits a warning.
    """
    data = _load(report)
    series = data.get("series", {})
    if not data.get("records"):
        warnings.warn("report has no records; no plots written", stacklevel=2)
        return []
    if out_dir is None:
        out_dir = os.path.dirname(os.path.abspath(report)) if isinstance(report, (str, os.PathLike)) else "."
    os.makedirs(out_dir, exist_ok=True)
    groups: dict[str, list] = defaultdict(list)
    for key in sorted(series):
        s = series[key]
        groups[s.get("group", key)].append((key.split("/", 1)[-1], s))
    paths = []
    with matplotlib.rc_context(SVG_RC):
        for name in sorted(groups):
            fig = draw_group(name, groups[name])
            path = os.path.join(out_dir, _file_name(name))
            fig.savefig(path, format="svg", metadata={"Date": None})
            paths.append(path)
    return paths
