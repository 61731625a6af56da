"""Job orchestration: chart (or builder), Jacobian, Fisher, completeness, arcs."""

from __future__ import annotations

import time
from dataclasses import asdict

import numpy as np

from ._version import __version__
from .arcs import _kl_method, check_floor, verify_order_theorem
from .builder import build_chart
from .chart import Chart, chart_jacobian, chart_methods, completeness_check, eval_chart
from .errors import DomainError, JobError
from .jobs import AnalysisJob
from .numerics import fisher_information, fisher_kernel, numeric_nullspace
from .report import AnalysisReport


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def job_echo(job: AnalysisJob) -> dict:
    """Fully resolved job (defaults filled), enough to rerun it."""
    echo = {
        "model": job.model.describe(),
        "theta0": _floats(job.theta0),
        "chart": job.chart.to_dict() if job.chart is not None else None,
        "builder": None,
        "arcs": [a.to_dict() for a in job.arcs],
        "grid": asdict(job.grid),
        "budget": asdict(job.budget),
        "seed": job.seed,
    }
    if job.builder is not None:
        b = job.builder
        echo["builder"] = {
            "pool": b.pool.to_dict(),
            "seed_chart": b.seed_chart.to_dict(),
            "target_order": b.target_order,
            "max_iters": b.max_iters,
            "grid": asdict(b.grid),
        }
    return echo


def _check_trace_row(r) -> dict:
    return {
        "t": r.t,
        "chart_delta_magnitude": r.chart_delta_magnitude,
        "kl_value": r.kl_value,
        "expectation_method": r.expectation_method,
        "error_estimate": r.error_estimate,
    }


def run_job(job: AnalysisJob, timings: bool | None = None) -> AnalysisReport:
    """Execute a validated job; UNDETERMINED arcs become warnings, not failures."""
    model, budget = job.model, job.budget
    try:
        theta0 = model.check_theta(job.theta0)
    except DomainError as exc:
        raise JobError(str(exc)) from None
    if job.arcs:
        check_floor((_kl_method(model, budget),), job.grid, budget, "KL divergence")
    if job.chart is not None:
        check_floor(chart_methods(job.chart, model, budget), job.grid, budget, "chart")

    stamps = {}
    warnings = []
    clock = time.perf_counter

    trace = None
    start = clock()
    if job.builder is not None:
        b = job.builder
        chart, bt = build_chart(model, theta0, b.pool, b.seed_chart, b.target_order, b.max_iters, budget, b.grid)
        trace = bt.to_dict()
        stamps["build_chart"] = clock() - start
        if job.arcs:
            check_floor(chart_methods(chart, model, budget), job.grid, budget, "chart")
    else:
        chart = job.chart
    chart = Chart(chart.observables, tuple(theta0))

    start = clock()
    values = eval_chart(chart, model, theta0, budget)
    jac = chart_jacobian(chart, model, theta0, budget)
    warnings.extend(jac.warnings)
    warnings.extend(values.flags)
    J = jac.matrix
    sv = np.linalg.svd(J, compute_uv=False) if J.size else np.zeros(0)
    kernel = numeric_nullspace(J, budget.jacobian_rel_tol)
    stamps["chart_jacobian"] = clock() - start

    start = clock()
    info = fisher_information(model, theta0, budget)
    fk = fisher_kernel(info, budget.fisher_rel_tol)
    verdict = completeness_check(chart, model, theta0, budget, jacobian=jac)
    stamps["fisher_completeness"] = clock() - start
    if not verdict.complete:
        warnings.append("chart is not first-order complete; arc inequalities are not guaranteed")

    start = clock()
    checks = []
    for arc in job.arcs:
        tc = verify_order_theorem(chart, model, arc, job.grid, budget, verdict, "chart", raise_undetermined=False)
        if tc.undetermined:
            warnings.append(f"arc '{arc.id}': order undetermined")
        if tc.inequality_holds is False:
            warnings.append(f"arc '{arc.id}': KL order below twice the observable order")
        d = tc.to_dict()
        d["trace"] = [_check_trace_row(r) for r in tc.trace]
        d["arc"] = arc.to_dict()
        checks.append(d)
    stamps["arcs"] = clock() - start

    use_timings = job.timings if timings is None else timings
    return AnalysisReport(
        tool_version=__version__,
        job=job_echo(job),
        chart=chart.to_dict(),
        chart_values={
            "ids": chart.ids,
            "values": _floats(values.values),
            "errors": _floats(values.errors),
            "methods": list(values.methods),
        },
        jacobian={
            "matrix": _floats(J),
            "singular_values": _floats(sv),
            "score_correlation": None if jac.score_matrix is None else _floats(jac.score_matrix),
            "discrepancy": jac.discrepancy,
            "fd_step": jac.fd_step,
            "rel_tol": budget.jacobian_rel_tol,
        },
        fisher={
            "matrix": _floats(info),
            "eigenvalues": _floats(np.linalg.eigvalsh(info)[::-1]),
            "rank": model.param_dim - fk.dim,
            "rel_tol": budget.fisher_rel_tol,
        },
        hidden_directions={
            "dim": kernel.dim,
            "basis": [_floats(v) for v in kernel.vectors()],
            "param_names": list(model.param_names),
        },
        completeness={
            "complete": verdict.complete,
            "max_principal_angle": verdict.max_principal_angle,
            "chart_kernel_dim": verdict.chart_kernel.dim,
            "score_kernel_dim": verdict.score_kernel.dim,
            "angle_tol": budget.angle_tol,
        },
        theorem_checks=checks,
        build_trace=trace,
        warnings=list(warnings),
        notes=model.notes(tuple(chart.keys)),
        timings={k: round(v, 6) for k, v in stamps.items()} if use_timings else None,
    )
