"""Gaussian location family ``N(mu, sigma^2)`` with known ``sigma``."""

from __future__ import annotations

import re

import numpy as np

from ..chart import Chart, Observable
from ..errors import DomainError
from ..model import ModelSpec, RuleTable
from ..moments import gaussian_raw_moments
from ..numerics import gauss_hermite_normal


class GaussianLocationModel(ModelSpec):
    name = "gaussian"
    param_names = ("mu",)
    data_dim = 1

    def __init__(self, sigma: float = 1.0):
        super().__init__()
        if not sigma > 0:
            raise DomainError("gaussian: sigma must be positive")
        self.sigma = float(sigma)
        self.closed_form_expectations = RuleTable(self._resolve)

    def hyperparameters(self):
        return {"sigma": self.sigma}

    def logpdf(self, theta, points):
        x = np.asarray(points, dtype=float)[:, 0]
        return -0.5 * np.log(2 * np.pi) - np.log(self.sigma) - 0.5 * ((x - theta[0]) / self.sigma) ** 2

    def analytic_score(self, theta, points):
        return ((np.asarray(points, dtype=float)[:, 0] - theta[0]) / self.sigma**2)[:, None]

    def draw(self, theta, n, rng):
        return theta[0] + self.sigma * rng.standard_normal(n)

    def quadrature_rule(self, theta, n_nodes):
        z, w = gauss_hermite_normal(n_nodes)
        return (theta[0] + self.sigma * z)[:, None], w

    def closed_form_kl(self, theta0, theta):
        return 0.5 * ((theta[0] - theta0[0]) / self.sigma) ** 2

    def _resolve(self, key):
        m = re.fullmatch(r"monomial:(\d+)", key)
        if m and int(m[1]) >= 1:
            n = int(m[1])
            return lambda th: gaussian_raw_moments(th[0], self.sigma, n)[n - 1]
        m = re.fullmatch(r"cumulant:(\d+)", key)
        if m and int(m[1]) >= 1:
            n = int(m[1])
            return lambda th: th[0] if n == 1 else self.sigma**2 if n == 2 else 0.0
        return None

    def default_chart(self) -> Chart:
        return Chart((Observable.monomial(1, "x"),))

    def default_pool(self):
        return [Observable.monomial(1, "x"), Observable.monomial(2, "x2")]
