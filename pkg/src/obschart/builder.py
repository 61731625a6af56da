"""Greedy chart construction by probing hidden directions with arcs.

Each iteration computes the kernel of the current chart's Jacobian, probes
every kernel basis vector ``v`` with the linear arc ``theta0 + t v`` and the
quadratic arcs ``theta0 + t v + t^2 e_i``, and adds the pool candidate with
the smallest finite order of vanishing along any probe arc of a direction
the chart does not yet reveal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .arcs import (
    INFINITE,
    Arc,
    GridSpec,
    OrderEstimate,
    check_floor,
    format_order,
    order_with_retries,
    parse_order,
)
from .chart import Chart, Observable, chart_jacobian, chart_methods, eval_chart
from .errors import DomainError, UndeterminedOrder
from .model import ModelSpec
from .numerics import Budget, numeric_nullspace

KERNEL_EMPTY = "kernel_empty"
TARGET_ORDER_REACHED = "target_order_reached"
POOL_EXHAUSTED = "pool_exhausted"
MAX_ITERATIONS = "max_iterations"

# probe orders up to 8 must stay fittable on the default grid
BUILDER_FLOOR = 1e-13


class ObservablePool:
    """Deterministically ordered candidate observables (by kind, then degree)."""

    def __init__(self, candidates: Sequence[Observable]):
        cands = list(candidates)
        ids = [c.id for c in cands]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate candidate ids in pool: {ids}")
        self.candidates = tuple(sorted(cands, key=lambda o: (o.kind, o.degree_hint)))

    def __len__(self):
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.candidates]

    def remaining(self, chart: Chart) -> list[Observable]:
        used = set(chart.keys) | set(chart.ids)
        return [c for c in self.candidates if c.key not in used and c.id not in used]

    def exhausted(self, chart: Chart) -> bool:
        return not self.remaining(chart)

    def to_dict(self) -> dict:
        return {"candidates": [c.to_dict() for c in self.candidates]}

    @classmethod
    def from_dict(cls, d: dict) -> "ObservablePool":
        return cls([Observable.from_dict(c) for c in d["candidates"]])


@dataclass(frozen=True)
class BuildIteration:
    chart_ids: tuple
    kernel_dim: int
    kernel_basis: tuple  # one tuple per basis vector
    probed: tuple  # ({"direction", "arcs", "chart_order"}, ...)
    candidate_orders: dict  # candidate id -> {arc id -> order}
    added: Optional[str] = None
    added_order: Optional[float] = None
    triggering_arc: Optional[str] = None
    skipped: tuple = ()

    def to_dict(self) -> dict:
        return {
            "chart": list(self.chart_ids),
            "kernel_dim": self.kernel_dim,
            "kernel_basis": [list(v) for v in self.kernel_basis],
            "probed_directions": [dict(p) for p in self.probed],
            "candidate_orders": {
                c: {a: format_order(o) for a, o in arcs.items()} for c, arcs in self.candidate_orders.items()
            },
            "added": self.added,
            "added_order": None if self.added_order is None else format_order(self.added_order),
            "triggering_arc": self.triggering_arc,
            "skipped": list(self.skipped),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BuildIteration":
        return cls(
            tuple(d["chart"]),
            d["kernel_dim"],
            tuple(tuple(v) for v in d["kernel_basis"]),
            tuple(d["probed_directions"]),
            {c: {a: parse_order(o) for a, o in arcs.items()} for c, arcs in d["candidate_orders"].items()},
            d["added"],
            None if d["added_order"] is None else parse_order(d["added_order"]),
            d["triggering_arc"],
            tuple(d["skipped"]),
        )


@dataclass(frozen=True)
class BuildTrace:
    iterations: tuple
    terminated_reason: str
    probe_arcs: dict = field(default_factory=dict)  # arc id -> Arc.to_dict()

    @property
    def kernel_dims(self) -> list[int]:
        return [it.kernel_dim for it in self.iterations]

    @property
    def added(self) -> list[str]:
        return [it.added for it in self.iterations if it.added is not None]

    def to_dict(self) -> dict:
        return {
            "iterations": [it.to_dict() for it in self.iterations],
            "terminated_reason": self.terminated_reason,
            "probe_arcs": self.probe_arcs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BuildTrace":
        return cls(
            tuple(BuildIteration.from_dict(it) for it in d["iterations"]),
            d["terminated_reason"],
            d.get("probe_arcs", {}),
        )


def _fmt(x: float) -> str:
    return f"{x:.6g}" if x != 0 else "0"


def _direction_label(v, names) -> str:
    nz = [(n, x) for n, x in zip(names, v) if abs(x) > 1e-12]
    if len(nz) == 1 and abs(abs(nz[0][1]) - 1) < 1e-12:
        return ("-" if nz[0][1] < 0 else "") + f"e_{nz[0][0]}"
    return "(" + ",".join(_fmt(x) for x in v) + ")"


def probe_arcs(model: ModelSpec, theta0, v) -> list[Arc]:
    """Linear probe along ``v`` plus one quadratic correction per coordinate."""
    theta0 = np.asarray(theta0, dtype=float)
    v = np.asarray(v, dtype=float)
    label = _direction_label(v, model.param_names)
    arcs = [Arc(theta0, v[None, :], f"t*{label}")]
    for i, name in enumerate(model.param_names):
        e = np.zeros_like(v)
        e[i] = 1.0
        arcs.append(Arc(theta0, np.stack([v, e]), f"t*{label}+t^2*e_{name}"))
    return arcs


def _observable_order(chart, model, arc, grid, budget, base=None) -> OrderEstimate:
    check_floor(chart_methods(chart, model, budget), grid, budget, f"chart {chart.ids}")
    if base is None:
        base = eval_chart(chart, model, arc.base_point, budget).values

    def delta(t):
        th = arc(t)
        if not model.theta_in_domain(th):
            raise DomainError("outside domain")
        return eval_chart(chart, model, th, budget).values - base

    return order_with_retries(delta, grid)


def _order_or_none(chart, model, arc, grid, budget):
    try:
        return _observable_order(chart, model, arc, grid, budget).order, None
    except UndeterminedOrder as exc:
        return None, str(exc)


def probe_direction(
    model: ModelSpec,
    theta0,
    v,
    pool: ObservablePool,
    grid: GridSpec = GridSpec(floor=BUILDER_FLOOR),
    budget: Budget = Budget(),
) -> dict:
    """Order of every pool candidate along ``theta0 + t v``; UNDETERMINED gives ``order=None``."""
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1) > 1e-10:
        raise ValueError("probe direction must be a unit vector")
    theta0 = model.check_theta(theta0)
    arc = Arc(theta0, v[None, :], "probe")
    out = {}
    for cand in pool:
        try:
            out[cand.id] = _observable_order(Chart((cand,)), model, arc, grid, budget)
        except UndeterminedOrder as exc:
            out[cand.id] = exc.diagnostics
    return out


def build_chart(
    model: ModelSpec,
    theta0,
    pool: ObservablePool,
    seed_chart: Optional[Chart] = None,
    target_order: int = 4,
    max_iters: int = 20,
    budget: Budget = Budget(),
    grid: GridSpec = GridSpec(floor=BUILDER_FLOOR),
) -> tuple[Chart, BuildTrace]:
    """Grow ``seed_chart`` from ``pool`` until no hidden direction is left to reveal."""
    if len(pool) == 0:
        raise ValueError("observable pool is empty")
    theta0 = model.check_theta(theta0)
    chart = seed_chart if seed_chart is not None else Chart(())
    chart = Chart(chart.observables, tuple(theta0))
    iterations = []
    arc_registry = {}
    reason = MAX_ITERATIONS
    position = {c.id: i for i, c in enumerate(pool)}

    for _ in range(max_iters):
        J = chart_jacobian(chart, model, theta0, budget).matrix
        kernel = numeric_nullspace(J, budget.jacobian_rel_tol)
        basis = tuple(tuple(float(x) for x in v) for v in kernel.vectors())
        if kernel.dim == 0:
            iterations.append(BuildIteration(tuple(chart.ids), 0, (), (), {}))
            reason = KERNEL_EMPTY
            break

        probed, open_arcs = [], []
        for v in kernel.vectors():
            arcs = probe_arcs(model, theta0, v)
            for a in arcs:
                arc_registry[a.id] = a.to_dict()
            order = INFINITE
            if len(chart):
                order, _ = _order_or_none(chart, model, arcs[0], grid, budget)
            revealed = order is not None and order != INFINITE and order <= target_order
            probed.append(
                {
                    "direction": _direction_label(v, model.param_names),
                    "arcs": [a.id for a in arcs],
                    "chart_order": format_order(order),
                    "revealed": revealed,
                }
            )
            if not revealed:
                open_arcs.extend(arcs)

        if not open_arcs:
            iterations.append(BuildIteration(tuple(chart.ids), kernel.dim, basis, tuple(probed), {}))
            reason = TARGET_ORDER_REACHED
            break

        remaining = pool.remaining(chart)
        table, skipped = {}, []
        best = None
        for cand in remaining:
            single = Chart((cand,))
            base = eval_chart(single, model, theta0, budget).values
            row = {}
            for arc in open_arcs:
                try:
                    est = _observable_order(single, model, arc, grid, budget, base)
                    row[arc.id] = est.order
                except UndeterminedOrder as exc:
                    row[arc.id] = None
                    skipped.append(f"{cand.id} on {arc.id}: {exc}")
                    continue
                if est.is_finite:
                    key = (est.order, cand.degree_hint, position[cand.id])
                    if best is None or key < best[0]:
                        best = (key, cand, arc.id)
            table[cand.id] = row

        if best is None:
            iterations.append(
                BuildIteration(tuple(chart.ids), kernel.dim, basis, tuple(probed), table, skipped=tuple(skipped))
            )
            reason = POOL_EXHAUSTED
            break

        (order, _, _), cand, arc_id = best
        iterations.append(
            BuildIteration(
                tuple(chart.ids), kernel.dim, basis, tuple(probed), table, cand.id, order, arc_id, tuple(skipped)
            )
        )
        chart = chart.extended(cand)

    return chart, BuildTrace(tuple(iterations), reason, arc_registry)
