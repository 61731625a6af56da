"""Two-component Gaussian mixture with shared, fixed variance.

``P = (1/2 + alpha) N(mu + delta, sigma^2) + (1/2 - alpha) N(mu - delta, sigma^2)``
with ``theta = (mu, delta, alpha)``.  Singular along ``delta = 0``.
"""

from __future__ import annotations

import re

import numpy as np
from scipy.special import logsumexp

from ..chart import Chart, Observable
from ..errors import DomainError
from ..model import ModelSpec, RuleTable
from ..moments import cumulants_from_moments, gaussian_raw_moments
from ..numerics import gauss_hermite_normal

_LOG_2PI = np.log(2 * np.pi)
_MAX_ORDER = 12


class GmmModel(ModelSpec):
    name = "gmm"
    param_names = ("mu", "delta", "alpha")
    data_dim = 1

    def __init__(self, sigma: float = 1.0):
        super().__init__()
        if not sigma > 0:
            raise DomainError("gmm: sigma must be positive")
        self.sigma = float(sigma)
        self.closed_form_expectations = RuleTable(self._resolve)

    def hyperparameters(self):
        return {"sigma": self.sigma}

    def theta_in_domain(self, theta):
        return abs(theta[2]) < 0.5

    def weights(self, theta):
        alpha = theta[2]
        if not abs(alpha) < 0.5:
            raise DomainError(f"gmm: mixture weight constraint |alpha| < 1/2 violated ({alpha})")
        return 0.5 + alpha, 0.5 - alpha

    def _component_logs(self, theta, x):
        mu, delta, _ = theta
        pp, pm = self.weights(theta)
        s2 = self.sigma**2
        norm = -0.5 * _LOG_2PI - np.log(self.sigma)
        lp = np.log(pp) + norm - 0.5 * (x - mu - delta) ** 2 / s2
        lm = np.log(pm) + norm - 0.5 * (x - mu + delta) ** 2 / s2
        return lp, lm

    def logpdf(self, theta, points):
        x = np.asarray(points, dtype=float)[:, 0]
        lp, lm = self._component_logs(theta, x)
        return np.logaddexp(lp, lm)

    def analytic_score(self, theta, points):
        mu, delta, _ = theta
        x = np.asarray(points, dtype=float)[:, 0]
        pp, pm = self.weights(theta)
        lp, lm = self._component_logs(theta, x)
        lse = logsumexp(np.stack([lp, lm]), axis=0)
        rp = np.exp(lp - lse)
        rm = np.exp(lm - lse)
        s2 = self.sigma**2
        zp = (x - mu - delta) / s2
        zm = (x - mu + delta) / s2
        return np.column_stack([rp * zp + rm * zm, rp * zp - rm * zm, rp / pp - rm / pm])

    def draw(self, theta, n, rng):
        mu, delta, _ = theta
        pp, _ = self.weights(theta)
        upper = rng.random(n) < pp
        return mu + np.where(upper, delta, -delta) + self.sigma * rng.standard_normal(n)

    def quadrature_rule(self, theta, n_nodes):
        mu, delta, _ = theta
        pp, pm = self.weights(theta)
        z, w = gauss_hermite_normal(n_nodes)
        pts = np.concatenate([mu + delta + self.sigma * z, mu - delta + self.sigma * z])
        return pts[:, None], np.concatenate([pp * w, pm * w])

    # -- closed forms --
    def cumulants(self, theta, order: int = 3) -> np.ndarray:
        """Exact cumulants ``k_1..k_order``.

        ``X = mu + delta*S + sigma*Z`` with ``S = +-1``; cumulants add over
        independent summands and ``k_n(delta*S) = delta**n * k_n(S)``.
        """
        mu, delta, alpha = theta
        self.weights(theta)
        m = 2.0 * alpha  # E[S]
        s_moments = [1.0 if k % 2 == 0 else m for k in range(1, order + 1)]
        ks = cumulants_from_moments(s_moments) * delta ** np.arange(1, order + 1)
        ks[0] += mu
        if order >= 2:
            ks[1] += self.sigma**2
        return ks

    def raw_moments(self, theta, order: int) -> np.ndarray:
        mu, delta, _ = theta
        pp, pm = self.weights(theta)
        return pp * gaussian_raw_moments(mu + delta, self.sigma, order) + pm * gaussian_raw_moments(
            mu - delta, self.sigma, order
        )

    def _resolve(self, key):
        m = re.fullmatch(r"cumulant:(\d+)", key)
        if m and 1 <= int(m[1]) <= _MAX_ORDER:
            n = int(m[1])
            return lambda th: self.cumulants(th, n)[n - 1]
        m = re.fullmatch(r"monomial:(\d+)", key)
        if m and 1 <= int(m[1]) <= _MAX_ORDER:
            n = int(m[1])
            return lambda th: self.raw_moments(th, n)[n - 1]
        return None

    def default_chart(self) -> Chart:
        return Chart(tuple(Observable.cumulant(k) for k in (1, 2, 3)))

    def notes(self, chart_keys=()):
        if "cumulant:3" not in chart_keys:
            return []
        return ["k3 is the exact third cumulant; near delta = 0 it behaves as -4 alpha delta^3 (negative sign)"]

    def default_pool(self):
        return [Observable.cumulant(k) for k in range(1, 7)]


def gmm_cumulants(model: GmmModel, theta) -> tuple[float, float, float]:
    """``(m1, kappa2, kappa3)``: ``mu + 2 alpha delta``, ``sigma^2 + delta^2 (1 - 4 alpha^2)``,
    ``-4 alpha delta^3 (1 - 4 alpha^2)``."""
    theta = np.asarray(theta, dtype=float)
    k = model.cumulants(theta, 3)
    return float(k[0]), float(k[1]), float(k[2])
