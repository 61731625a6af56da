"""Reduced-rank regression ``Y = U V^T X + noise`` with unit isotropic noise.

``theta`` stacks ``U`` (p x r) and ``V`` (q x r) row-major.  Data points are
``(x_1..x_q, y_1..y_p)``; ``X ~ N(0, Sigma_X)``.  As for the tanh model the
log-density is the conditional ``log p(y | x)``.
"""

from __future__ import annotations

import itertools
import re

import numpy as np

from ..chart import Chart, Observable
from ..errors import DomainError
from ..model import ModelSpec, RuleTable
from ..numerics import gauss_hermite_normal
from ..testfunctions import bump


class RrrModel(ModelSpec):
    name = "rrr"
    data_dim = 4

    def __init__(self, p=2, q=2, r=1, sigma_x=None):
        p, q, r = int(p), int(q), int(r)
        if min(p, q, r) < 1:
            raise DomainError("rrr: p, q, r must be positive")
        self.p, self.q, self.r = p, q, r
        self.data_dim = p + q
        if r == 1:
            names = [f"u{i + 1}" for i in range(p)] + [f"v{j + 1}" for j in range(q)]
        else:
            names = [f"U{i + 1}{k + 1}" for i in range(p) for k in range(r)]
            names += [f"V{j + 1}{k + 1}" for j in range(q) for k in range(r)]
        self.param_names = tuple(names)
        super().__init__()
        sx = np.eye(q) if sigma_x is None else np.asarray(sigma_x, dtype=float)
        if sx.shape != (q, q) or not np.allclose(sx, sx.T):
            raise DomainError("rrr: sigma_x must be a symmetric q x q matrix")
        try:
            self._chol = np.linalg.cholesky(sx)
        except np.linalg.LinAlgError:
            raise DomainError("rrr: sigma_x must be positive definite") from None
        self.sigma_x = sx
        self.closed_form_expectations = RuleTable(self._resolve)

    def hyperparameters(self):
        return {"p": self.p, "q": self.q, "r": self.r, "sigma_x": self.sigma_x.tolist()}

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        k = self.p * self.r
        return theta[:k].reshape(self.p, self.r), theta[k:].reshape(self.q, self.r)

    def pack(self, U, V):
        return np.concatenate([np.asarray(U, float).ravel(), np.asarray(V, float).ravel()])

    def coefficient(self, theta):
        U, V = self.unpack(theta)
        return U @ V.T

    def split(self, points):
        points = np.asarray(points, dtype=float)
        return points[:, : self.q], points[:, self.q :]

    def logpdf(self, theta, points):
        x, y = self.split(points)
        e = y - x @ self.coefficient(theta).T
        return -0.5 * self.p * np.log(2 * np.pi) - 0.5 * np.sum(e * e, axis=1)

    def analytic_score(self, theta, points):
        U, V = self.unpack(theta)
        x, y = self.split(points)
        e = y - x @ (U @ V.T).T  # (n, p)
        xv = x @ V  # (n, r)
        eu = e @ U  # (n, r)
        dU = e[:, :, None] * xv[:, None, :]
        dV = x[:, :, None] * eu[:, None, :]
        n = len(points)
        return np.concatenate([dU.reshape(n, -1), dV.reshape(n, -1)], axis=1)

    def draw(self, theta, n, rng):
        x = rng.standard_normal((n, self.q)) @ self._chol.T
        y = x @ self.coefficient(theta).T + rng.standard_normal((n, self.p))
        return np.column_stack([x, y])

    def quadrature_rule(self, theta, n_nodes):
        # tensor Gauss--Hermite; integrands in scope are low-degree polynomials
        per_dim = max(2, min(8, n_nodes // 25))
        z, w = gauss_hermite_normal(per_dim)
        grid = np.array(list(itertools.product(z, repeat=self.p + self.q)))
        wts = np.prod(np.array(list(itertools.product(w, repeat=self.p + self.q))), axis=1)
        x = grid[:, : self.q] @ self._chol.T
        y = x @ self.coefficient(theta).T + grid[:, self.q :]
        return np.column_stack([x, y]), wts

    def cross_moments(self, theta):
        return self.coefficient(theta) @ self.sigma_x

    def kl(self, B0, B):
        D = np.asarray(B, float) - np.asarray(B0, float)
        return 0.5 * float(np.trace(D @ self.sigma_x @ D.T))

    def closed_form_kl(self, theta0, theta):
        return self.kl(self.coefficient(theta0), self.coefficient(theta))

    def _resolve(self, key):
        m = re.fullmatch(r"cross_moment:(\d+),(\d+)", key)
        if m:
            i, j = int(m[1]), int(m[2])
            if 1 <= i <= self.p and 1 <= j <= self.q:
                return lambda th: self.cross_moments(th)[i - 1, j - 1]
        return None

    def default_chart(self) -> Chart:
        return Chart(
            tuple(
                Observable.cross_moment(i + 1, j + 1)
                for i in range(self.p)
                for j in range(self.q)
            )
        )

    def default_pool(self):
        pool = list(self.default_chart().observables)
        for c in (-2.0, -1.0, 0.0, 1.0, 2.0):
            for i in range(self.p):
                for j in range(self.q):
                    pool.append(Observable.response(bump(c, 1.0), i + 1, j + 1))
        return pool


def rrr_cross_moments(model: RrrModel, U, V) -> np.ndarray:
    """``E[Y X^T] = U V^T Sigma_X``."""
    return np.asarray(U, float).reshape(model.p, model.r) @ np.asarray(V, float).reshape(
        model.q, model.r
    ).T @ model.sigma_x


def rrr_kl(model: RrrModel, B0, B) -> float:
    return model.kl(B0, B)


def rrr_determinant_relation(m) -> float:
    """``m11 m22 - m12 m21``; vanishes on the rank-one model image."""
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise DomainError("determinantal relation is defined for 2 x 2 moment matrices")
    return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
