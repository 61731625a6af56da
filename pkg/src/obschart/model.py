"""Parametric model abstraction: densities, scores and seeded sampling.

Every model works on batches of data points, ``points`` being an array of
shape ``(n, data_dim)``.  Regression models lay a point out as the
concatenation ``(x, y)`` of input and response.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, EvaluationError
from .finite_diff import DEFAULT_REL_STEP, richardson_jacobian


@dataclass(frozen=True)
class Support:
    """Product of intervals, one ``(lo, hi)`` pair per data coordinate."""

    bounds: tuple

    @classmethod
    def real(cls, dim: int) -> "Support":
        return cls(tuple((-np.inf, np.inf) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def is_unbounded(self) -> bool:
        return any(np.isinf(lo) or np.isinf(hi) for lo, hi in self.bounds)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.all((points >= lo) & (points <= hi), axis=1)

    def to_dict(self) -> dict:
        return {"bounds": [[_enc(lo), _enc(hi)] for lo, hi in self.bounds]}


def _enc(v: float):
    return "inf" if v == np.inf else "-inf" if v == -np.inf else float(v)


class RuleTable(Mapping):
    """Closed-form expectation table resolving keys lazily.

    ``resolve(key)`` returns a ``rule(theta)`` or ``None``; explicit entries
    take precedence.
    """

    def __init__(self, resolve=None, entries=None):
        self._resolve = resolve or (lambda key: None)
        self._entries = dict(entries or {})

    def __getitem__(self, key):
        if key in self._entries:
            return self._entries[key]
        rule = self._resolve(key)
        if rule is None:
            raise KeyError(key)
        return rule

    def __contains__(self, key):
        return key in self._entries or self._resolve(key) is not None

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)


class ModelSpec:
    """Base class for parametric models ``theta -> P_theta``.

    Subclasses implement :meth:`logpdf` and :meth:`draw`.  Optional hooks:

    * :meth:`analytic_score` -- returns ``None`` when not available;
    * :meth:`quadrature_rule` -- weighted nodes integrating against ``P_theta``;
    * ``closed_form_expectations`` -- observable key -> ``rule(theta)``;
    * :meth:`closed_form_kl` -- returns ``None`` when not available.
    """

    name = "model"
    param_names: tuple = ()
    data_dim = 1

    def __init__(self):
        self.support = Support.real(self.data_dim)
        self.closed_form_expectations: Mapping[str, Callable[[np.ndarray], float]] = {}

    @property
    def param_dim(self) -> int:
        return len(self.param_names)

    # -- to be provided by subclasses -------------------------------------
    def logpdf(self, theta: np.ndarray, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def draw(self, theta: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def analytic_score(self, theta, points) -> Optional[np.ndarray]:
        return None

    def quadrature_rule(self, theta, n_nodes: int):
        return None

    def closed_form_kl(self, theta0, theta) -> Optional[float]:
        return None

    def theta_in_domain(self, theta: np.ndarray) -> bool:
        return True

    def hyperparameters(self) -> dict:
        return {}

    def default_theta0(self) -> np.ndarray:
        return np.zeros(self.param_dim)

    def notes(self, chart_keys=()) -> list[str]:
        """Model-specific remarks worth carrying into reports."""
        return []

    # -- shared helpers ----------------------------------------------------
    def check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape != (self.param_dim,):
            raise DomainError(
                f"{self.name}: expected {self.param_dim} parameters, got {theta.size}"
            )
        if not np.all(np.isfinite(theta)):
            raise DomainError(f"{self.name}: non-finite parameter {theta.tolist()}")
        if not self.theta_in_domain(theta):
            raise DomainError(f"{self.name}: parameter {theta.tolist()} outside domain")
        return theta

    def check_points(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.data_dim)
        if points.shape[1] != self.data_dim:
            raise DomainError(f"{self.name}: data points must have dimension {self.data_dim}")
        inside = self.support.contains(points)
        if not np.all(inside):
            bad = points[~inside][0]
            raise DomainError(f"{self.name}: data point {bad.tolist()} outside support")
        return points

    def param_index(self, name: str) -> int:
        try:
            return self.param_names.index(name)
        except ValueError:
            raise DomainError(f"{self.name}: unknown parameter '{name}'") from None

    def describe(self) -> dict:
        return {"name": self.name, **self.hyperparameters()}


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    source_seed: int
    source_theta: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.points)


def _as_points(model: ModelSpec, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 0 if model.data_dim == 1 else x.ndim == 1
    return single, model.check_points(x.reshape(-1, model.data_dim))


def log_density(model: ModelSpec, theta, x) -> np.ndarray | float:
    """``log p_theta(x)`` for one point or a batch of points."""
    theta = model.check_theta(theta)
    single, pts = _as_points(model, x)
    vals = np.asarray(model.logpdf(theta, pts), dtype=float)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise EvaluationError(
            f"{model.name}: log-density not finite at theta={theta.tolist()}, "
            f"x={pts[i].tolist()}"
        )
    return float(vals[0]) if single else vals


def score_batch(
    model: ModelSpec,
    theta,
    points: np.ndarray,
    rel_step: float = DEFAULT_REL_STEP,
    prefer_analytic: bool = True,
) -> np.ndarray:
    """Score vectors for a batch, shape ``(n, d)``; no support validation."""
    theta = np.asarray(theta, dtype=float)
    s = model.analytic_score(theta, points) if prefer_analytic else None
    if s is None:
        s = richardson_jacobian(lambda th: model.logpdf(th, points), theta, rel_step)
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise EvaluationError(f"{model.name}: non-finite score at theta={theta.tolist()}")
    return s


def score(model: ModelSpec, theta, x, prefer_analytic: bool = True) -> np.ndarray:
    """Gradient of the log-density in ``theta`` at one data point (or a batch)."""
    theta = model.check_theta(theta)
    single, pts = _as_points(model, x)
    s = score_batch(model, theta, pts, prefer_analytic=prefer_analytic)
    return s[0] if single else s


def sample(model: ModelSpec, theta, n: int, seed: int) -> Dataset:
    """Draw ``n`` i.i.d. points from ``P_theta``; identical for identical seeds."""
    if int(n) < 1:
        raise ValueError("sample size must be at least 1")
    theta = model.check_theta(theta)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    pts = np.asarray(model.draw(theta, int(n), rng), dtype=float).reshape(int(n), model.data_dim)
    pts.setflags(write=False)
    theta = theta.copy()
    theta.setflags(write=False)
    return Dataset(points=pts, source_seed=int(seed), source_theta=theta)
