"""Command line front-end.

Exit codes: 0 success, 1 job error (or a decidable inequality failing under
``verify``), 2 config error, 3 numeric or internal error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ._version import __version__
from .builder import ObservablePool, probe_direction
from .errors import ConfigError, JobError, ObsChartError
from .jobs import load_job
from .report import CSV_TRACES, STRUCTURED, emit_report
from .runner import run_job

EXIT_OK, EXIT_JOB, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(text: str, path):
    if path:
        try:
            with open(path, "w", newline="\n", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise JobError(f"cannot write {path}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


def cmd_analyze(args) -> int:
    job = load_job(args.job)
    report = run_job(job, timings=True if args.timings else None)
    path = args.report or job.report_path
    if path:
        emit_report(report, STRUCTURED, path)
    else:
        sys.stdout.write(report.dumps())
    traces = args.traces or job.traces_dir
    if traces:
        emit_report(report, CSV_TRACES, traces)
    return EXIT_OK


def cmd_build_chart(args) -> int:
    job = load_job(args.job)
    if job.builder is None:
        raise ConfigError("build-chart needs a 'builder' section", "builder")
    report = run_job(job, timings=False)
    out = {
        "chart": report.chart,
        "build_trace": report.build_trace,
        "hidden_directions": report.hidden_directions,
        "completeness": report.completeness,
    }
    _write(_dump(out), args.output)
    return EXIT_OK


def _direction(spec: str, model) -> np.ndarray:
    if spec in model.param_names:
        v = np.zeros(model.param_dim)
        v[model.param_names.index(spec)] = 1.0
        return v
    try:
        v = np.array([float(s) for s in spec.split(",")])
    except ValueError:
        raise ConfigError(f"direction must be a parameter name or {model.param_dim} comma-separated numbers",
                          "--direction") from None
    if v.size != model.param_dim or not np.any(v):
        raise ConfigError(f"direction needs {model.param_dim} entries, not all zero", "--direction")
    return v / np.linalg.norm(v)


def cmd_probe(args) -> int:
    job = load_job(args.job)
    model = job.model
    v = _direction(args.direction, model)
    if job.builder is not None:
        pool, grid = job.builder.pool, job.builder.grid
    else:
        pool, grid = ObservablePool(job.chart.observables), job.grid
    table = probe_direction(model, job.theta0, v, pool, grid, job.budget)
    out = {
        "direction": v.tolist(),
        "param_names": list(model.param_names),
        "orders": {cid: est.to_dict() for cid, est in table.items()},
    }
    _write(_dump(out), args.output)
    return EXIT_OK


def _verdict(v) -> str:
    return "undecidable" if v is None else ("holds" if v else "FAILS")


def cmd_verify(args) -> int:
    job = load_job(args.job)
    report = run_job(job, timings=False)
    failed = False
    lines = [f"chart complete: {report.completeness['complete']}"]
    for c in report.theorem_checks:
        failed |= c["inequality_holds"] is False
        lines.append(
            f"{c['arc_id']}: o_psi={c['observable_order']['order']} o_K={c['kl_order']['order']} "
            f"inequality={_verdict(c['inequality_holds'])} equality={_verdict(c['equality_holds'])}"
        )
    _write("\n".join(lines) + "\n", args.output)
    return EXIT_JOB if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obschart", description="Observable charts and order checks for singular models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="run a job and emit the full report")
    a.add_argument("job")
    a.add_argument("--report", help="report path (default: outputs.report, else stdout)")
    a.add_argument("--traces", help="directory for per-arc CSV traces")
    a.add_argument("--timings", action="store_true", help="include wall-clock timings (not deterministic)")
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("build-chart", help="run the chart builder and print chart and trace")
    b.add_argument("job")
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_build_chart)

    pr = sub.add_parser("probe", help="orders of pool candidates along one direction")
    pr.add_argument("job")
    pr.add_argument("--direction", required=True, help="parameter name or comma-separated vector")
    pr.add_argument("-o", "--output")
    pr.set_defaults(func=cmd_probe)

    v = sub.add_parser("verify", help="check o_K >= 2 o_Psi on every arc")
    v.add_argument("job")
    v.add_argument("-o", "--output")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except JobError as exc:
        print(f"job error: {exc}", file=sys.stderr)
        return EXIT_JOB
    except ObsChartError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - map anything unexpected to the internal-error code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
