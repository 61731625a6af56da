"""Analytic arcs, order-of-vanishing estimation and the KL order inequality.

Orders are estimated from forward evaluations only: ``|g(t)|`` is sampled on
a geometric grid, points under a numeric floor are discarded, and the slope
of ``log10 |g|`` against ``log10 t`` is rounded to an integer after passing
two gates (slope within 0.15 of the integer, max residual at most 0.1).
"INFINITE" therefore means "below the floor on the whole grid".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .chart import Chart, CompletenessVerdict, chart_methods, completeness_check, eval_chart
from .errors import AccuracyFloorError, DomainError, UndeterminedOrder
from .model import ModelSpec
from .numerics import CLOSED_FORM, MONTE_CARLO, Budget, kl_divergence

INFINITE = math.inf
SLOPE_TOL = 0.15
RESIDUAL_TOL = 0.1


@dataclass(frozen=True)
class GridSpec:
    t0: float = 0.1
    ratio: float = 0.5
    count: int = 10
    floor: float = 1e-10
    min_points: int = 3
    retries: int = 2

    def __post_init__(self):
        if not (self.t0 > 0 and 0 < self.ratio < 1 and self.count >= 2 and self.floor > 0):
            raise ValueError(f"invalid grid specification {self}")
        if self.min_points < 2:
            raise ValueError("min_points must be at least 2")

    def points(self) -> np.ndarray:
        return self.t0 * self.ratio ** np.arange(self.count)

    def with_(self, **kw) -> "GridSpec":
        return replace(self, **kw)


@dataclass(frozen=True)
class Arc:
    """Polynomial curve ``theta0 + sum_k c_k t^k``; ``coefficients`` has shape ``(K, d)``."""

    base_point: np.ndarray
    coefficients: np.ndarray
    id: str = "arc"
    allow_constant: bool = False

    def __post_init__(self):
        base = np.asarray(self.base_point, dtype=float).reshape(-1)
        coef = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        if coef.shape[1] != base.size:
            raise ValueError(f"arc '{self.id}': coefficient vectors must have length {base.size}")
        if coef.shape[0] < 1:
            raise ValueError(f"arc '{self.id}': needs at least one coefficient (K >= 1)")
        if not (np.all(np.isfinite(base)) and np.all(np.isfinite(coef))):
            raise ValueError(f"arc '{self.id}': non-finite entries")
        if not self.allow_constant and not np.any(coef):
            raise ValueError(f"arc '{self.id}': all coefficients zero (mark it constant explicitly)")
        object.__setattr__(self, "base_point", base)
        object.__setattr__(self, "coefficients", coef)

    @classmethod
    def constant(cls, base_point, id: str = "constant") -> "Arc":
        base = np.asarray(base_point, dtype=float)
        return cls(base, np.zeros((1, base.size)), id, allow_constant=True)

    @classmethod
    def linear(cls, base_point, direction, id: str = "arc") -> "Arc":
        return cls(base_point, np.atleast_2d(direction), id)

    @property
    def max_degree(self) -> int:
        return self.coefficients.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        return eval_arc(self, t)

    def reparameterized(self, power: int = 2) -> "Arc":
        """The arc ``t -> gamma(t**power)``."""
        K, d = self.coefficients.shape
        coef = np.zeros((K * power, d))
        coef[power - 1 :: power] = self.coefficients
        return Arc(self.base_point, coef, f"{self.id}@t^{power}", self.allow_constant)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "base_point": self.base_point.tolist(),
            "coefficients": self.coefficients.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Arc":
        return cls(d["base_point"], d["coefficients"], d.get("id", "arc"), bool(d.get("constant", False)))


def eval_arc(arc: Arc, t: float) -> np.ndarray:
    """Horner evaluation of ``theta0 + c_1 t + ... + c_K t^K``."""
    acc = np.zeros_like(arc.base_point)
    for c in arc.coefficients[::-1]:
        acc = (acc + c) * t
    return arc.base_point + acc


@dataclass(frozen=True)
class OrderEstimate:
    order: Optional[float]  # int, INFINITE, or None when undetermined
    raw_slope: Optional[float]
    residual: Optional[float]
    leading_coeff_mag: Optional[float]
    grid: tuple
    floor_hit: bool
    magnitudes: tuple = ()
    dropped: tuple = ()
    t0: float = 0.1
    note: str = ""

    @property
    def is_infinite(self) -> bool:
        return self.order == INFINITE

    @property
    def is_finite(self) -> bool:
        return self.order is not None and self.order != INFINITE

    @property
    def determined(self) -> bool:
        return self.order is not None

    def to_dict(self) -> dict:
        return {
            "order": format_order(self.order),
            "raw_slope": self.raw_slope,
            "residual": self.residual,
            "leading_coeff_mag": self.leading_coeff_mag,
            "grid": list(self.grid),
            "magnitudes": list(self.magnitudes),
            "floor_hit": self.floor_hit,
            "dropped": list(self.dropped),
            "t0": self.t0,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OrderEstimate":
        return cls(
            parse_order(d["order"]), d["raw_slope"], d["residual"], d["leading_coeff_mag"],
            tuple(d["grid"]), d["floor_hit"], tuple(d["magnitudes"]), tuple(d["dropped"]),
            d["t0"], d["note"],
        )


def format_order(order):
    if order is None:
        return "UNDETERMINED"
    if order == INFINITE:
        return "INFINITE"
    return int(order)


def parse_order(value):
    if value == "UNDETERMINED":
        return None
    if value == "INFINITE":
        return INFINITE
    return int(value)


def fit_order(ts, magnitudes, floor: float = 1e-10, min_points: int = 3, dropped=(), t0=None) -> OrderEstimate:
    """Integer order from ``|g(t_j)|`` samples; raises :class:`UndeterminedOrder`."""
    ts = np.asarray(ts, dtype=float)
    mags = np.asarray(magnitudes, dtype=float)
    t0 = float(ts.max()) if t0 is None and ts.size else t0
    keep = mags > floor
    floor_hit = bool(np.any(~keep))
    if not np.any(keep):
        return OrderEstimate(INFINITE, None, None, None, (), floor_hit, (), tuple(dropped), t0)
    lt = np.log10(ts[keep])
    lm = np.log10(mags[keep])
    base = OrderEstimate(
        None, None, None, None, tuple(map(float, ts[keep])), floor_hit,
        tuple(map(float, mags[keep])), tuple(dropped), t0,
    )
    if keep.sum() < min_points:
        raise UndeterminedOrder(
            f"only {int(keep.sum())} grid point(s) above the floor {floor:g}",
            replace(base, note="too few points above floor"),
        )
    slope, intercept = np.polyfit(lt, lm, 1)
    residual = float(np.max(np.abs(lm - (slope * lt + intercept))))
    order = int(round(slope))
    lead = float(10 ** np.mean(lm - order * lt))
    est = replace(base, raw_slope=float(slope), residual=residual, leading_coeff_mag=lead)
    if abs(slope - order) > SLOPE_TOL or residual > RESIDUAL_TOL:
        raise UndeterminedOrder(
            f"slope {slope:.3f} / residual {residual:.3f} fail the integer-order gates",
            replace(est, note="fit gates failed"),
        )
    return replace(est, order=order)


def order_of_vanishing(g: Callable[[float], np.ndarray], grid: GridSpec = GridSpec()) -> OrderEstimate:
    """Order of ``g`` at ``t = 0`` (``g(0) = 0`` is the caller's responsibility).

    Grid points where ``g`` raises :class:`DomainError` are dropped and noted.
    """
    ts, mags, dropped = [], [], []
    for t in grid.points():
        try:
            v = np.atleast_1d(np.asarray(g(float(t)), dtype=float))
        except DomainError:
            dropped.append(float(t))
            continue
        ts.append(float(t))
        mags.append(float(np.max(np.abs(v))) if v.size else 0.0)
    return fit_order(ts, mags, grid.floor, grid.min_points, dropped, grid.t0)


def order_with_retries(g, grid: GridSpec = GridSpec()) -> OrderEstimate:
    """:func:`order_of_vanishing`, retrying fit-gate failures with ``t0 / 4``."""
    attempt = grid
    for i in range(grid.retries + 1):
        try:
            est = order_of_vanishing(g, attempt)
            if i:
                est = replace(est, note=f"retried with t0={attempt.t0:g}")
            return est
        except UndeterminedOrder as exc:
            last = exc
            if exc.diagnostics is not None and exc.diagnostics.note == "too few points above floor":
                break
            attempt = attempt.with_(t0=attempt.t0 / 4)
    raise last


def check_floor(methods, grid, budget, what):
    if MONTE_CARLO in methods and grid.floor < 10 * budget.mc_tol:
        raise AccuracyFloorError(
            f"{what} uses Monte Carlo (tolerance {budget.mc_tol:g}); floor {grid.floor:g} "
            f"must be at least {10 * budget.mc_tol:g}"
        )


def _kl_method(model, budget):
    if budget.method == MONTE_CARLO:
        return MONTE_CARLO
    th = model.default_theta0()
    if budget.allow_closed_form and budget.method == "auto" and model.closed_form_kl(th, th) is not None:
        return CLOSED_FORM
    if model.quadrature_rule(th, 2) is not None or model.data_dim == 1:
        return "quadrature"
    return MONTE_CARLO


class _ArcEvaluator:
    """Caches chart and KL evaluations along one arc (shared by orders and traces)."""

    def __init__(self, chart, model, arc, budget):
        self.chart, self.model, self.arc, self.budget = chart, model, arc, budget
        self.theta0 = model.check_theta(arc.base_point)
        self._base = None
        self._chart = {}
        self._kl = {}

    def theta(self, t):
        th = eval_arc(self.arc, t)
        if not self.model.theta_in_domain(th):
            raise DomainError(f"arc '{self.arc.id}' leaves the parameter domain at t={t:g}")
        return th

    def chart_delta(self, t):
        if t not in self._chart:
            if self._base is None:
                self._base = eval_chart(self.chart, self.model, self.theta0, self.budget).values
            cv = eval_chart(self.chart, self.model, self.theta(t), self.budget)
            self._chart[t] = (cv.values - self._base, cv)
        return self._chart[t][0]

    def kl(self, t):
        if t not in self._kl:
            self._kl[t] = kl_divergence(self.model, self.theta0, self.theta(t), self.budget)
        return self._kl[t].value


def observable_order(
    chart: Chart, model: ModelSpec, arc: Arc, grid: GridSpec = GridSpec(), budget: Budget = Budget()
) -> OrderEstimate:
    """Order of vanishing of ``Psi(gamma(t)) - Psi(theta0)``."""
    check_floor(chart_methods(chart, model, budget), grid, budget, "chart")
    ev = _ArcEvaluator(chart, model, arc, budget)
    return order_with_retries(ev.chart_delta, grid)


def kl_order(model: ModelSpec, arc: Arc, grid: GridSpec = GridSpec(), budget: Budget = Budget()) -> OrderEstimate:
    """Order of vanishing of ``t -> KL(P_theta0 || P_gamma(t))``."""
    check_floor((_kl_method(model, budget),), grid, budget, "KL divergence")
    ev = _ArcEvaluator(None, model, arc, budget)
    return order_with_retries(ev.kl, grid)


@dataclass(frozen=True)
class TraceRow:
    t: float
    chart_delta_magnitude: float
    kl_value: float
    expectation_method: str
    error_estimate: float


@dataclass(frozen=True)
class TheoremCheck:
    observable_order: OrderEstimate
    kl_order: OrderEstimate
    inequality_holds: Optional[bool]
    equality_holds: Optional[bool]
    chart_id: str
    arc_id: str
    chart_complete: Optional[bool] = None
    notes: tuple = ()
    trace: tuple = field(default=(), compare=False)

    @property
    def decidable(self) -> bool:
        return self.inequality_holds is not None

    @property
    def undetermined(self) -> bool:
        return not (self.observable_order.determined and self.kl_order.determined)

    def to_dict(self) -> dict:
        return {
            "chart_id": self.chart_id,
            "arc_id": self.arc_id,
            "observable_order": self.observable_order.to_dict(),
            "kl_order": self.kl_order.to_dict(),
            "inequality_holds": self.inequality_holds,
            "equality_holds": self.equality_holds,
            "chart_complete": self.chart_complete,
            "notes": list(self.notes),
        }


def theorem_verdict(o_psi, o_k) -> tuple[Optional[bool], Optional[bool]]:
    """``(inequality, equality)`` for ``o_K >= 2 o_Psi``; ``None`` where undecidable."""
    if o_psi is None or o_k is None:
        return None, None
    if o_psi == INFINITE:
        # decidable only through the KL floor; equality is not meaningful
        return o_k == INFINITE, None
    if o_k == INFINITE:
        return None, None
    return o_k >= 2 * o_psi, o_k == 2 * o_psi


def verify_order_theorem(
    chart: Chart,
    model: ModelSpec,
    arc: Arc,
    grid: GridSpec = GridSpec(),
    budget: Budget = Budget(),
    completeness: Optional[CompletenessVerdict] = None,
    chart_id: str = "chart",
    raise_undetermined: bool = True,
) -> TheoremCheck:
    """Observable order, KL order and the verdict on ``o_K >= 2 o_Psi`` for one arc."""
    methods = chart_methods(chart, model, budget)
    check_floor(methods, grid, budget, "chart")
    kl_method = _kl_method(model, budget)
    check_floor((kl_method,), grid, budget, "KL divergence")
    if completeness is None:
        completeness = completeness_check(chart, model, arc.base_point, budget)
    notes = []
    if not completeness.complete:
        notes.append("chart incomplete - inequality not guaranteed")

    ev = _ArcEvaluator(chart, model, arc, budget)
    estimates = []
    for g in (ev.chart_delta, ev.kl):
        try:
            estimates.append(order_with_retries(g, grid))
        except UndeterminedOrder as exc:
            if raise_undetermined:
                raise
            estimates.append(exc.diagnostics)
            notes.append(f"undetermined: {exc}")
    o_est, k_est = estimates
    if o_est.dropped or k_est.dropped:
        notes.append(f"grid points outside the parameter domain dropped: {sorted(set(o_est.dropped + k_est.dropped))}")
    ineq, eq = theorem_verdict(o_est.order, k_est.order)
    if o_est.is_finite and k_est.is_infinite:
        notes.append("KL below floor on the whole grid; inequality undecidable")

    rows = []
    for t in grid.points():
        t = float(t)
        try:
            delta = ev.chart_delta(t)
            kl = ev.kl(t)
        except DomainError:
            continue
        cv = ev._chart[t][1]
        kr = ev._kl[t]
        cm = "+".join(sorted(set(cv.methods))) or "none"
        err = max([float(np.max(cv.errors)) if cv.errors.size else 0.0, kr.error_estimate])
        rows.append(
            TraceRow(t, float(np.max(np.abs(delta))) if delta.size else 0.0, kl, f"{cm}|{kr.method}", err)
        )
    return TheoremCheck(o_est, k_est, ineq, eq, chart_id, arc.id, completeness.complete, tuple(notes), tuple(rows))


def random_arc(base_point, rng: np.random.Generator, max_degree: int = 3, density: float = 0.5,
               scale=(0.5, 2.0), id: str = "random") -> Arc:
    """Seeded random arc: degree in ``1..max_degree``, sparse coefficients.

    Nonzero entries have magnitude uniform in ``scale`` with random sign; at
    least one entry is nonzero.
    """
    base = np.asarray(base_point, dtype=float)
    d = base.size
    K = int(rng.integers(1, max_degree + 1))
    mask = rng.random((K, d)) < density
    if not mask.any():
        mask[rng.integers(K), rng.integers(d)] = True
    mags = rng.uniform(*scale, size=(K, d)) * rng.choice([-1.0, 1.0], size=(K, d))
    return Arc(base, np.where(mask, mags, 0.0), id)
