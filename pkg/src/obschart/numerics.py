"""Expectations, KL divergence, Jacobians, nullspaces and Fisher information.

Expectations are dispatched in a fixed order: a closed-form rule registered
on the model, then a quadrature rule (Gauss--Hermite after affine
standardization supplied by the model, or adaptive trapezoid for 1-D models
without one), then seeded Monte Carlo.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import DomainError, EvaluationError, NumericError
from .finite_diff import DEFAULT_REL_STEP, richardson_jacobian
from .model import ModelSpec, sample, score_batch

CLOSED_FORM = "closed_form"
QUADRATURE = "quadrature"
MONTE_CARLO = "monte_carlo"
METHODS = (CLOSED_FORM, QUADRATURE, MONTE_CARLO)


@dataclass(frozen=True)
class Budget:
    """Accuracy configuration shared by all numerical operations."""

    quad_nodes: int = 200
    mc_samples: int = 100_000
    mc_tol: float = 1e-3
    seed: int = 0
    fd_step: float = DEFAULT_REL_STEP
    mc_fd_step: float = 1e-3
    jacobian_rel_tol: float = 1e-8
    fisher_rel_tol: float = 1e-6
    angle_tol: float = 1e-4
    discrepancy_tol: float = 1e-4
    method: str = "auto"
    allow_closed_form: bool = True
    trapezoid_max_doublings: int = 10

    def __post_init__(self):
        if self.method not in ("auto", QUADRATURE, MONTE_CARLO):
            raise ValueError(f"unknown expectation method '{self.method}'")
        if self.quad_nodes < 2 or self.mc_samples < 2:
            raise ValueError("quad_nodes and mc_samples must be at least 2")

    def with_(self, **kw) -> "Budget":
        return replace(self, **kw)


@dataclass(frozen=True)
class ExpectationResult:
    value: float
    method: str
    error_estimate: float
    n_evals: int
    flags: tuple = ()

    def __post_init__(self):
        if self.error_estimate < 0:
            raise ValueError("error_estimate must be non-negative")


@dataclass(frozen=True)
class NullspaceResult:
    basis: np.ndarray  # (d, k), orthonormal columns
    singular_values: np.ndarray  # descending
    tolerance_used: float
    scale: float = 0.0  # largest singular value (or eigenvalue)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def vectors(self) -> list[np.ndarray]:
        return [self.basis[:, i] for i in range(self.dim)]


# -- quadrature rules ------------------------------------------------------


@lru_cache(maxsize=32)
def _hermgauss(n: int):
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w


def gauss_hermite_normal(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights integrating against the standard normal density."""
    x, w = _hermgauss(int(n))
    return np.sqrt(2.0) * x, w / np.sqrt(np.pi)


class _Pointwise:
    """Adapter turning a plain callable ``f(points) -> values`` into an observable."""

    key = None

    def __init__(self, fn):
        self.fn = fn

    def values(self, points, model):
        return np.asarray(self.fn(points), dtype=float).reshape(len(points))

    def functional(self, points, weights, model):
        return float(weights @ self.values(points, model))

    def influence(self, points, weights, model):
        return self.values(points, model)


def _as_observable(f):
    return f if hasattr(f, "functional") else _Pointwise(f)


def _adaptive_trapezoid(model, theta, value_fn, budget, tol=1e-12):
    """Interval-doubling trapezoid for 1-D models without a quadrature rule."""
    (lo, hi), = model.support.bounds
    centre = float(getattr(model, "location_hint", lambda th: 0.0)(theta))
    half = 8.0
    step = 0.01
    prev = None
    for _ in range(budget.trapezoid_max_doublings + 1):
        a = max(lo, centre - half)
        b = min(hi, centre + half)
        n = int(np.ceil((b - a) / step)) + 1
        xs = np.linspace(a, b, n)
        w = np.full(n, (b - a) / (n - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        w = w * np.exp(model.logpdf(theta, xs[:, None]))
        val = value_fn(xs[:, None], w)
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val, abs(val - prev), n
        prev = val
        if np.isinf(lo) or np.isinf(hi):
            half *= 2.0
        step /= 2.0
    raise NumericError(
        f"{model.name}: adaptive trapezoid did not converge after "
        f"{budget.trapezoid_max_doublings} interval doublings"
    )


def _quadrature(model, theta, value_fn, budget):
    """Returns ``(value, error, n_evals)`` or ``None`` when no rule applies."""
    rule = model.quadrature_rule(theta, budget.quad_nodes)
    if rule is not None:
        pts, w = rule
        val = value_fn(pts, w)
        cpts, cw = model.quadrature_rule(theta, max(2, budget.quad_nodes // 2))
        coarse = value_fn(cpts, cw)
        return val, abs(val - coarse), len(w) + len(cw)
    if model.data_dim == 1:
        return _adaptive_trapezoid(model, theta, value_fn, budget)
    return None


def expected_method(model: ModelSpec, f, budget: Budget) -> str:
    """The method :func:`expectation` would use, without evaluating anything."""
    f = _as_observable(f)
    if budget.method == MONTE_CARLO:
        return MONTE_CARLO
    if (
        budget.allow_closed_form
        and budget.method == "auto"
        and f.key is not None
        and f.key in model.closed_form_expectations
    ):
        return CLOSED_FORM
    has_rule = model.quadrature_rule(model.default_theta0(), 2) is not None
    if has_rule or model.data_dim == 1:
        return QUADRATURE
    if budget.method == QUADRATURE:
        raise NumericError(f"{model.name}: no quadrature rule for data_dim={model.data_dim}")
    return MONTE_CARLO


def expectation(model: ModelSpec, theta, f, budget: Budget = Budget()) -> ExpectationResult:
    """``E_theta[f]`` with method tag and absolute error estimate.

    ``f`` is an observable (anything exposing ``key``/``functional``/
    ``influence``) or a plain callable mapping a ``(n, data_dim)`` array to
    ``n`` values.
    """
    theta = model.check_theta(theta)
    f = _as_observable(f)
    method = expected_method(model, f, budget)
    if method == CLOSED_FORM:
        val = float(model.closed_form_expectations[f.key](theta))
        if not np.isfinite(val):
            raise EvaluationError(f"closed form for '{f.key}' not finite at {theta.tolist()}")
        return ExpectationResult(val, CLOSED_FORM, 0.0, 1)
    if method == QUADRATURE:
        val, err, n = _quadrature(
            model, theta, lambda p, w: f.functional(p, w, model), budget
        )
        res = ExpectationResult(float(val), QUADRATURE, float(err), int(n))
    else:
        res = _monte_carlo(model, theta, f, budget)
    if not (np.isfinite(res.value) and np.isfinite(res.error_estimate)):
        raise EvaluationError(f"{model.name}: expectation not finite at theta={theta.tolist()}")
    return res


def _monte_carlo(model, theta, f, budget):
    data = sample(model, theta, budget.mc_samples, budget.seed)
    n = len(data)
    w = np.full(n, 1.0 / n)
    val = f.functional(data.points, w, model)
    infl = f.influence(data.points, w, model)
    se = float(np.std(infl, ddof=1) / np.sqrt(n))
    flags = ("mc_tolerance_exceeded",) if se > budget.mc_tol else ()
    return ExpectationResult(float(val), MONTE_CARLO, se, n, flags)


def kl_divergence(model: ModelSpec, theta0, theta, budget: Budget = Budget()) -> ExpectationResult:
    """``KL(P_theta0 || P_theta)``; small negative noise is clamped to zero."""
    theta0 = model.check_theta(theta0)
    theta = model.check_theta(theta)
    if budget.allow_closed_form and budget.method == "auto":
        cf = model.closed_form_kl(theta0, theta)
        if cf is not None:
            return _clamp(ExpectationResult(float(cf), CLOSED_FORM, 0.0, 1))

    def log_ratio(points):
        lp0 = model.logpdf(theta0, points)
        lp = model.logpdf(theta, points)
        bad = ~np.isfinite(lp) | ~np.isfinite(lp0)
        if np.any(bad):
            x = points[int(np.argmax(bad))]
            raise DomainError(f"{model.name}: zero density inside support at x={x.tolist()}")
        return lp0 - lp

    res = None
    if budget.method != MONTE_CARLO:
        res = _quadrature(model, theta0, lambda p, w: float(w @ log_ratio(p)), budget)
    if res is not None:
        val, err, n = res
        return _clamp(ExpectationResult(float(val), QUADRATURE, float(err), int(n)))
    data = sample(model, theta0, budget.mc_samples, budget.seed)
    lr = log_ratio(data.points)
    se = float(np.std(lr, ddof=1) / np.sqrt(len(lr)))
    flags = ("mc_tolerance_exceeded",) if se > budget.mc_tol else ()
    return _clamp(ExpectationResult(float(np.mean(lr)), MONTE_CARLO, se, len(lr), flags))


def _clamp(res: ExpectationResult) -> ExpectationResult:
    if res.value >= 0:
        return res
    # tiny slack for closed forms whose error estimate is exactly zero
    if res.value >= -max(res.error_estimate, 1e-15):
        return replace(res, value=0.0, flags=res.flags + ("clamped",))
    raise NumericError(
        f"KL divergence {res.value:.3e} below zero beyond error estimate {res.error_estimate:.1e}"
    )


# -- derivatives -----------------------------------------------------------


def map_jacobian(fun: Callable, theta0, rel_step: float = DEFAULT_REL_STEP) -> np.ndarray:
    """``m x d`` Jacobian of a vector map by Richardson-extrapolated central differences."""
    theta0 = np.asarray(theta0, dtype=float)
    J = richardson_jacobian(lambda th: np.atleast_1d(np.asarray(fun(th), dtype=float)), theta0, rel_step)
    J = J.reshape(-1, theta0.size)
    bad = ~np.isfinite(J)
    if np.any(bad):
        r, c = np.argwhere(bad)[0]
        raise EvaluationError(f"non-finite Jacobian entry at (row {r}, column {c})")
    return J


# -- linear algebra --------------------------------------------------------


def canonical_basis(basis: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of ``span(basis)``.

    Pivoted QR of the orthogonal projector prefers coordinate-aligned vectors,
    so a kernel spanned by ``e_i, e_j`` comes back as exactly those vectors.
    """
    d, k = basis.shape
    if k == 0:
        return basis
    if k == d:
        return np.eye(d)
    proj = basis @ basis.T
    q, _, _ = scipy.linalg.qr(proj, pivoting=True)
    out = q[:, :k]
    # project back so rounding in QR does not leak outside the span
    out = basis @ (basis.T @ out)
    out, _ = np.linalg.qr(out)
    for i in range(k):
        j = int(np.argmax(np.abs(out[:, i])))
        if out[j, i] < 0:
            out[:, i] = -out[:, i]
        out[np.abs(out[:, i]) < 1e-15, i] = 0.0
    return out


def numeric_nullspace(J, rel_tol: float = 1e-8) -> NullspaceResult:
    """Right kernel of ``J``: singular directions with ``s_i <= rel_tol * s_max``."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    m, d = J.shape
    if not np.all(np.isfinite(J)):
        raise EvaluationError("nullspace of a non-finite matrix")
    if m == 0:
        return NullspaceResult(np.eye(d), np.zeros(0), 0.0, 0.0)
    _, s, vt = np.linalg.svd(J)
    smax = float(s[0]) if s.size else 0.0
    tol = rel_tol * smax
    full = np.zeros(d)
    full[: s.size] = s
    mask = full <= tol if smax > 0 else np.ones(d, dtype=bool)
    basis = canonical_basis(vt[mask].T)
    return NullspaceResult(basis, s, tol, smax)


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Principal angles (radians, descending) between column spans."""
    if A.shape[1] == 0 or B.shape[1] == 0:
        return np.zeros(0)
    return scipy.linalg.subspace_angles(A, B)


# -- Fisher information ----------------------------------------------------


def fisher_information(model: ModelSpec, theta0, budget: Budget = Budget()) -> np.ndarray:
    """``E[s s^T]`` at ``theta0``, symmetrized and checked for semidefiniteness."""
    theta0 = model.check_theta(theta0)
    rule = None
    if budget.method != MONTE_CARLO:
        rule = model.quadrature_rule(theta0, budget.quad_nodes)
        if rule is None and model.data_dim == 1:
            rule = _trapezoid_rule_for_fisher(model, theta0, budget)
    if rule is not None:
        pts, w = rule
        s = score_batch(model, theta0, pts, budget.fd_step)
        info = (s * w[:, None]).T @ s
    else:
        data = sample(model, theta0, budget.mc_samples, budget.seed)
        s = score_batch(model, theta0, data.points, budget.fd_step)
        info = s.T @ s / len(s)
    info = 0.5 * (info + info.T)
    eig = np.linalg.eigvalsh(info)
    if eig.size and eig[0] < -1e-8 * max(1.0, eig[-1]):
        raise NumericError(f"Fisher information indefinite (min eigenvalue {eig[0]:.3e})")
    return info


def _trapezoid_rule_for_fisher(model, theta0, budget):
    captured = {}

    def value_fn(p, w):
        captured["rule"] = (p, w)
        s = score_batch(model, theta0, p, budget.fd_step)
        return float(np.sum(w @ (s * s)))

    _adaptive_trapezoid(model, theta0, value_fn, budget, tol=1e-10)
    return captured["rule"]


def fisher_kernel(info: np.ndarray, rel_tol: float = 1e-6) -> NullspaceResult:
    """Null eigenspace of a Fisher matrix (eigenvalues ``<= rel_tol * lambda_max``)."""
    lam, vec = np.linalg.eigh(info)
    lam = lam[::-1]
    vec = vec[:, ::-1]
    lmax = float(max(lam[0], 0.0)) if lam.size else 0.0
    tol = rel_tol * lmax
    mask = lam <= tol if lmax > 0 else np.ones(lam.size, dtype=bool)
    return NullspaceResult(canonical_basis(vec[:, mask]), lam, tol, lmax)


def fisher_rank(info: np.ndarray, rel_tol: float = 1e-6) -> int:
    return info.shape[0] - fisher_kernel(info, rel_tol).dim
