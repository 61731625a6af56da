"""Observables, observable charts and their first-order geometry."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, EvaluationError, ObsChartError
from .model import ModelSpec, sample, score_batch
from .moments import cumulant_gradient, cumulants_from_moments
from .numerics import (
    MONTE_CARLO,
    Budget,
    NullspaceResult,
    expectation,
    expected_method,
    fisher_information,
    fisher_kernel,
    map_jacobian,
    numeric_nullspace,
    principal_angles,
)
from .testfunctions import TestFunction, parse_test_function

KINDS = ("monomial", "cumulant", "response", "cross_moment", "custom")


@dataclass(frozen=True)
class Observable:
    """A named functional ``P -> E_P[f]`` (or, for cumulants, a smooth function of moments).

    ``params`` by kind: monomial ``(degrees...)``; cumulant ``(order,)``;
    response ``(test_function_id, i, j)`` meaning ``E[Y_i phi(X_j)]``;
    cross_moment ``(i, j)`` meaning ``E[Y_i X_j]``; custom ``()``.
    Indices are 1-based.
    """

    id: str
    kind: str
    params: tuple = ()
    degree_hint: int = 1
    func: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown observable kind '{self.kind}'")
        if not self.id:
            raise ValueError("observable id must be non-empty")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom observables need an evaluation function")
        if self.kind == "cumulant" and int(self.params[0]) < 1:
            raise ValueError("cumulant order must be >= 1")

    # -- constructors --
    @classmethod
    def monomial(cls, degrees, id: Optional[str] = None) -> "Observable":
        degrees = tuple(int(k) for k in np.atleast_1d(degrees))
        if any(k < 0 for k in degrees):
            raise ValueError("monomial degrees must be non-negative")
        return cls(id or "x^" + ",".join(map(str, degrees)), "monomial", degrees, sum(degrees))

    @classmethod
    def cumulant(cls, order: int, id: Optional[str] = None) -> "Observable":
        order = int(order)
        return cls(id or ("m1" if order == 1 else f"k{order}"), "cumulant", (order,), order)

    @classmethod
    def response(cls, phi, i: int = 1, j: int = 1, id: Optional[str] = None) -> "Observable":
        tf = parse_test_function(phi)
        default = f"psi[{tf.id}]" if (i, j) == (1, 1) else f"psi{i}{j}[{tf.id}]"
        return cls(id or default, "response", (tf.id, int(i), int(j)), 1)

    @classmethod
    def cross_moment(cls, i: int, j: int, id: Optional[str] = None) -> "Observable":
        return cls(id or f"m{i}{j}", "cross_moment", (int(i), int(j)), 2)

    @classmethod
    def custom(cls, id: str, func: Callable, degree_hint: int = 1) -> "Observable":
        return cls(id, "custom", (), int(degree_hint), func)

    @property
    def key(self) -> Optional[str]:
        """Kind-derived identifier used for closed-form lookups (None for custom)."""
        if self.kind == "custom":
            return None
        return f"{self.kind}:{','.join(str(p) for p in self.params)}"

    @property
    def is_linear(self) -> bool:
        return self.kind != "cumulant"

    @property
    def test_function(self) -> TestFunction:
        return parse_test_function(self.params[0])

    # -- evaluation on data --
    def values(self, points: np.ndarray, model: ModelSpec) -> np.ndarray:
        """Pointwise ``f(x)`` for linear kinds."""
        points = np.asarray(points, dtype=float)
        if self.kind == "monomial":
            if len(self.params) != points.shape[1]:
                raise DomainError(
                    f"observable '{self.id}': {len(self.params)} degrees for "
                    f"{points.shape[1]}-dimensional data"
                )
            return np.prod(points ** np.array(self.params, dtype=float), axis=1)
        if self.kind == "custom":
            return np.asarray(self.func(points), dtype=float).reshape(len(points))
        if self.kind == "cumulant":
            raise TypeError("cumulants are not pointwise functions")
        x, y = _split(model, points, self.id)
        if self.kind == "cross_moment":
            i, j = self.params
            return y[:, i - 1] * x[:, j - 1]
        _, i, j = self.params
        return y[:, i - 1] * self.test_function(x[:, j - 1])

    def functional(self, points, weights, model) -> float:
        """Value of the functional under the weighted rule ``(points, weights)``."""
        if self.is_linear:
            return float(weights @ self.values(points, model))
        x, wsum, c, mom = self._central(points, weights, model)
        order = self.params[0]
        if order == 1:
            return c
        return float(cumulants_from_moments(mom)[order - 1])

    def influence(self, points, weights, model) -> np.ndarray:
        """Linearization ``f_lin`` at the rule's distribution, evaluated at ``points``.

        For a moment-based functional, ``d/dt psi(P_t) = E[f_lin * score]``;
        the Monte Carlo standard error is ``std(f_lin) / sqrt(n)``.
        """
        return self.linearization(points, weights, model)(points)

    def linearization(self, points, weights, model) -> Callable[[np.ndarray], np.ndarray]:
        if self.is_linear:
            return lambda p: self.values(p, model)
        _, _, c, mom = self._central(points, weights, model)
        order = self.params[0]
        if order == 1:
            return lambda p: np.asarray(p, dtype=float)[:, 0]
        g = cumulant_gradient(mom, order)
        powers = np.arange(1, order + 1)

        def f_lin(p):
            u = np.asarray(p, dtype=float)[:, 0] - c
            return (u[:, None] ** powers) @ g

        return f_lin

    def _central(self, points, weights, model):
        if model.data_dim != 1:
            raise DomainError(f"cumulant observable '{self.id}' needs 1-D data")
        x = np.asarray(points, dtype=float)[:, 0]
        wsum = float(np.sum(weights))
        c = float(weights @ x) / wsum
        u = x - c
        order = self.params[0]
        mom = np.array([float(weights @ u**k) / wsum for k in range(1, order + 1)])
        mom[0] = 0.0
        return x, wsum, c, mom

    # -- serialization --
    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind, "degree_hint": self.degree_hint}
        if self.kind == "monomial":
            d["degrees"] = list(self.params)
        elif self.kind == "cumulant":
            d["order"] = self.params[0]
        elif self.kind == "response":
            d["test_function"], d["i"], d["j"] = self.params
        elif self.kind == "cross_moment":
            d["i"], d["j"] = self.params
        else:
            raise ValueError(f"custom observable '{self.id}' cannot be serialized")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Observable":
        kind = d.get("kind")
        if kind == "monomial":
            obs = cls.monomial(d["degrees"], d.get("id"))
        elif kind == "cumulant":
            obs = cls.cumulant(d["order"], d.get("id"))
        elif kind == "response":
            obs = cls.response(d["test_function"], d.get("i", 1), d.get("j", 1), d.get("id"))
        elif kind == "cross_moment":
            obs = cls.cross_moment(d["i"], d["j"], d.get("id"))
        else:
            raise ValueError(f"cannot deserialize observable of kind '{kind}'")
        if "degree_hint" in d:
            obs = Observable(obs.id, obs.kind, obs.params, int(d["degree_hint"]))
        return obs


def _split(model, points, obs_id):
    if not hasattr(model, "split"):
        raise DomainError(f"observable '{obs_id}' needs a regression model with (x, y) data")
    return model.split(points)


@dataclass(frozen=True)
class Chart:
    """Ordered observables, optionally tied to a reference parameter."""

    observables: tuple
    reference_point: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "observables", tuple(self.observables))
        ids = [o.id for o in self.observables]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate observable ids in chart: {ids}")
        if self.reference_point is not None:
            object.__setattr__(
                self, "reference_point", tuple(float(v) for v in self.reference_point)
            )

    def __len__(self) -> int:
        return len(self.observables)

    @property
    def ids(self) -> list[str]:
        return [o.id for o in self.observables]

    @property
    def keys(self) -> list:
        return [o.key for o in self.observables]

    def extended(self, obs: Observable) -> "Chart":
        return Chart(self.observables + (obs,), self.reference_point)

    def subchart(self, ids: Sequence[str]) -> "Chart":
        by_id = {o.id: o for o in self.observables}
        return Chart(tuple(by_id[i] for i in ids), self.reference_point)

    def to_dict(self) -> dict:
        d = {"observables": [o.to_dict() for o in self.observables]}
        if self.reference_point is not None:
            d["reference_point"] = list(self.reference_point)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Chart":
        return cls(
            tuple(Observable.from_dict(o) for o in d["observables"]),
            d.get("reference_point"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def loads(cls, text: str) -> "Chart":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ChartValues:
    values: np.ndarray
    errors: np.ndarray
    methods: tuple
    flags: tuple = ()


def eval_chart(chart: Chart, model: ModelSpec, theta, budget: Budget = Budget()) -> ChartValues:
    """``Psi(theta)`` entry by entry, with per-entry method and error estimate."""
    vals, errs, methods, flags = [], [], [], []
    for obs in chart.observables:
        try:
            res = expectation(model, theta, obs, budget)
        except ObsChartError as exc:
            raise type(exc)(f"observable '{obs.id}': {exc}") from exc
        vals.append(res.value)
        errs.append(res.error_estimate)
        methods.append(res.method)
        flags.extend(f"{obs.id}:{f}" for f in res.flags)
    return ChartValues(np.array(vals), np.array(errs), tuple(methods), tuple(flags))


def chart_methods(chart: Chart, model: ModelSpec, budget: Budget) -> tuple:
    return tuple(expected_method(model, o, budget) for o in chart.observables)


@dataclass(frozen=True)
class ChartJacobian:
    """Finite-difference Jacobian plus the score-correlation cross-check."""

    matrix: np.ndarray
    score_matrix: Optional[np.ndarray]
    discrepancy: Optional[float]
    fd_step: float
    warnings: tuple = ()


def chart_jacobian(chart: Chart, model: ModelSpec, theta0, budget: Budget = Budget()) -> ChartJacobian:
    """``D Psi(theta0)`` two ways: differences of :func:`eval_chart`, and ``E[f s^T]``.

    The finite-difference matrix is the reported value; the score-correlation
    matrix is computed when the model has a quadrature rule (or 1-D data).
    """
    theta0 = model.check_theta(theta0)
    d = model.param_dim
    if len(chart) == 0:
        return ChartJacobian(np.zeros((0, d)), np.zeros((0, d)), 0.0, budget.fd_step)
    mc = MONTE_CARLO in chart_methods(chart, model, budget)
    step = budget.mc_fd_step if mc else budget.fd_step
    J = map_jacobian(lambda th: eval_chart(chart, model, th, budget).values, theta0, step)
    warnings = []
    if mc:
        warnings.append(f"Monte Carlo entries: finite-difference step raised to {step:g}")
    S = _score_correlation(chart, model, theta0, budget)
    disc = None
    if S is not None:
        disc = float(np.max(np.abs(S - J)) / max(1.0, float(np.max(np.abs(J)))))
        if disc > budget.discrepancy_tol:
            warnings.append(
                f"score-correlation Jacobian differs from finite differences by {disc:.2e} (relative)"
            )
    return ChartJacobian(J, S, disc, step, tuple(warnings))


def _score_correlation(chart, model, theta0, budget):
    if budget.method == MONTE_CARLO:
        return None
    rule = model.quadrature_rule(theta0, budget.quad_nodes)
    if rule is None:
        return None
    pts, w = rule
    s = score_batch(model, theta0, pts, budget.fd_step)
    rows = []
    for obs in chart.observables:
        f = obs.linearization(pts, w, model)(pts)
        rows.append((f * w) @ s)
    return np.array(rows)


def hidden_directions(
    chart: Chart, model: ModelSpec, theta0, rel_tol: Optional[float] = None, budget: Budget = Budget()
) -> NullspaceResult:
    """Kernel of the chart Jacobian: directions invisible at first order."""
    J = chart_jacobian(chart, model, theta0, budget).matrix
    return numeric_nullspace(J, budget.jacobian_rel_tol if rel_tol is None else rel_tol)


@dataclass(frozen=True)
class CompletenessVerdict:
    chart_kernel: NullspaceResult
    score_kernel: NullspaceResult
    complete: bool
    max_principal_angle: float


def completeness_check(
    chart: Chart, model: ModelSpec, theta0, budget: Budget = Budget(), jacobian=None
) -> CompletenessVerdict:
    """Compare ``ker D Psi(theta0)`` with the Fisher null space.

    Complete iff the two subspaces have equal dimension and their largest
    principal angle is at most ``budget.angle_tol``.
    """
    theta0 = model.check_theta(theta0)
    check_square_integrable(chart, model, theta0, budget)
    J = jacobian.matrix if jacobian is not None else chart_jacobian(chart, model, theta0, budget).matrix
    ck = numeric_nullspace(J, budget.jacobian_rel_tol)
    sk = fisher_kernel(fisher_information(model, theta0, budget), budget.fisher_rel_tol)
    if ck.dim != sk.dim:
        return CompletenessVerdict(ck, sk, False, float(np.pi / 2))
    angles = principal_angles(ck.basis, sk.basis)
    angle = float(np.max(angles)) if angles.size else 0.0
    return CompletenessVerdict(ck, sk, angle <= budget.angle_tol, angle)


def check_square_integrable(chart: Chart, model: ModelSpec, theta0, budget: Budget = Budget()):
    """Unbounded observables are allowed only with finite ``E[f_lin^2]``."""
    rule = model.quadrature_rule(theta0, budget.quad_nodes)
    if rule is None:
        if model.data_dim > 1:
            return
        data = sample(model, theta0, min(budget.mc_samples, 20_000), budget.seed)
        pts, w = data.points, np.full(len(data), 1.0 / len(data))
    else:
        pts, w = rule
    for obs in chart.observables:
        with np.errstate(over="ignore", invalid="ignore"):
            f = obs.linearization(pts, w, model)(pts)
            m2 = float(w @ (f * f))
        if not np.isfinite(m2):
            raise EvaluationError(f"observable '{obs.id}' is not square integrable at theta0")


def identifiable_rank(model: ModelSpec, theta0, budget: Budget = Budget()) -> int:
    """Dimension of the identifiable tangent space (Fisher rank at ``1e-6 * lambda_max``)."""
    info = fisher_information(model, theta0, budget)
    return model.param_dim - fisher_kernel(info, budget.fisher_rel_tol).dim
