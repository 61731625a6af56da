"""One hidden tanh unit regression: ``Y = a tanh(w X + b) + noise``.

``X ~ N(0, 1)`` and ``noise ~ N(0, sigma_n^2)``; ``theta = (a, w, b)``.  The
input law carries no parameters, so the model's log-density is the
conditional ``log p(y | x)``: scores, Fisher information and KL divergences
coincide with those of the joint law.
"""

from __future__ import annotations

import re

import numpy as np

from ..chart import Chart, Observable
from ..errors import DomainError
from ..model import ModelSpec, RuleTable
from ..numerics import gauss_hermite_normal
from ..testfunctions import TestFunction, bump, parse_test_function

_RESPONSE_NODES = 200
_Y_NODES_MAX = 40


class TanhUnitModel(ModelSpec):
    name = "tanh"
    param_names = ("a", "w", "b")
    data_dim = 2

    def __init__(self, sigma_n=1.0, w0=1.0, b0=0.0, centers=(-1.0, 0.0, 1.0), width=1.0):
        super().__init__()
        if not sigma_n > 0:
            raise DomainError("tanh: noise std sigma_n must be positive")
        self.sigma_n = float(sigma_n)
        self.w0 = float(w0)
        self.b0 = float(b0)
        self.centers = tuple(float(c) for c in centers)
        self.width = float(width)
        self.closed_form_expectations = RuleTable(self._resolve)

    def hyperparameters(self):
        return {
            "sigma_n": self.sigma_n,
            "w0": self.w0,
            "b0": self.b0,
            "centers": list(self.centers),
            "width": self.width,
        }

    def default_theta0(self):
        return np.array([0.0, self.w0, self.b0])

    @staticmethod
    def split(points):
        points = np.asarray(points, dtype=float)
        return points[:, :1], points[:, 1:]

    def mean_response(self, theta, x):
        a, w, b = theta
        return a * np.tanh(w * x + b)

    def logpdf(self, theta, points):
        x, y = points[:, 0], points[:, 1]
        r = (y - self.mean_response(theta, x)) / self.sigma_n
        return -0.5 * np.log(2 * np.pi) - np.log(self.sigma_n) - 0.5 * r * r

    def analytic_score(self, theta, points):
        a, w, b = theta
        x, y = points[:, 0], points[:, 1]
        th = np.tanh(w * x + b)
        sech2 = 1.0 - th * th
        r = (y - a * th) / self.sigma_n**2
        return np.column_stack([r * th, r * a * sech2 * x, r * a * sech2])

    def draw(self, theta, n, rng):
        x = rng.standard_normal(n)
        y = self.mean_response(theta, x) + self.sigma_n * rng.standard_normal(n)
        return np.column_stack([x, y])

    def quadrature_rule(self, theta, n_nodes):
        zx, wx = gauss_hermite_normal(n_nodes)
        zy, wy = gauss_hermite_normal(min(n_nodes, _Y_NODES_MAX))
        f = self.mean_response(theta, zx)
        x = np.repeat(zx, len(zy))
        y = (f[:, None] + self.sigma_n * zy[None, :]).ravel()
        return np.column_stack([x, y]), np.outer(wx, wy).ravel()

    def response(self, theta, phi, n_nodes: int = _RESPONSE_NODES) -> float:
        """``E[f_theta(X) phi(X)] = a * G_phi(w, b)`` on a fixed Gauss--Hermite grid."""
        tf = parse_test_function(phi)
        a, w, b = theta
        z, wt = gauss_hermite_normal(n_nodes)
        return float(a * (wt @ (np.tanh(w * z + b) * tf(z))))

    def closed_form_kl(self, theta0, theta):
        z, wt = gauss_hermite_normal(_RESPONSE_NODES)
        diff = self.mean_response(theta0, z) - self.mean_response(theta, z)
        return float(wt @ (diff * diff)) / (2 * self.sigma_n**2)

    def _resolve(self, key):
        m = re.fullmatch(r"response:(.+),1,1", key)
        if m:
            try:
                tf = parse_test_function(m[1])
            except ValueError:
                return None
            return lambda th: self.response(th, tf)
        if key == "cross_moment:1,1":
            return lambda th: self.response(th, "power(1)")
        return None

    def test_functions(self) -> list[TestFunction]:
        return [bump(c, self.width) for c in self.centers]

    def default_chart(self) -> Chart:
        return Chart(tuple(Observable.response(tf) for tf in self.test_functions()))

    def default_pool(self):
        grid = [bump(c, 1.0) for c in (-2.0, -1.0, 0.0, 1.0, 2.0)]
        return [Observable.cross_moment(1, 1)] + [Observable.response(tf) for tf in grid]


def tanh_response(model: TanhUnitModel, theta, phi) -> float:
    return model.response(model.check_theta(theta), phi)
