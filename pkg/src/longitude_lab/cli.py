"""Command line entry point: ``longitude-lab run`` and ``longitude-lab plot``."""

from __future__ import annotations

import argparse
import sys

from . import experiments, plotting
from .errors import ConfigError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="longitude-lab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiments named in a config file")
    r.add_argument("--config", required=True, help="flat key = value config file")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.add_argument("--tolerance-scale", type=float, default=None,
                   help="multiply every scaled tolerance by this factor")
    r.add_argument("--no-plots", action="store_true", help="skip the SVG figures")
    q = sub.add_parser("plot", help="draw SVG figures from a report.json")
    q.add_argument("--report", required=True)
    q.add_argument("--out", default=None, help="output directory (default: next to the report)")
    return p


def _summary(report: experiments.RunReport) -> str:
    failed = [r for r in report.records if not r.passed]
    lines = [f"{len(report.records) - len(failed)}/{len(report.records)} checks passed"]
    lines += [f"FAIL {r.experiment}: {r.name} (measured {r.measured!r}, reference {r.reference!r})"
              for r in failed]
    lines += [f"ERROR {k}: {v}" for k, v in sorted(report.errors.items())]
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "plot":
        for path in plotting.plot_report(args.report, args.out):
            print(path)
        return 0
    try:
        cfg = experiments.load_config(args.config, seed=args.seed, tolerance_scale=args.tolerance_scale)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    report = experiments.run(cfg)
    experiments.write_reports(report, args.out)
    if not args.no_plots:
        plotting.plot_report(report, args.out)
    print(_summary(report))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
