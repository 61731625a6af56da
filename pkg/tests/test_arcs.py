import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obschart.arcs import (
    INFINITE,
    Arc,
    GridSpec,
    OrderEstimate,
    eval_arc,
    fit_order,
    kl_order,
    observable_order,
    order_of_vanishing,
    order_with_retries,
    random_arc,
    theorem_verdict,
    verify_order_theorem,
)
from obschart.chart import Chart, Observable
from obschart.errors import AccuracyFloorError, DomainError, UndeterminedOrder
from obschart.numerics import MONTE_CARLO, Budget


def test_eval_arc_examples(gmm, rrr):
    const = Arc.constant([0.1, 0.2, 0.3])
    np.testing.assert_array_equal(eval_arc(const, 0.7), [0.1, 0.2, 0.3])
    lin = Arc([0, 0, 0], [[1, 0, 0]])
    np.testing.assert_array_equal(lin(0.25), [0.25, 0, 0])
    # u(t) = t a, v(t) = t b  =>  B(t) = t^2 a b^T
    a, b = np.array([1.0, 2.0]), np.array([-0.5, 1.0])
    arc = Arc(np.zeros(4), [np.concatenate([a, b])])
    np.testing.assert_allclose(rrr.coefficient(arc(0.3)), 0.09 * np.outer(a, b), rtol=1e-15)


def test_arc_validation():
    with pytest.raises(ValueError):
        Arc([0, 0], [[0, 0]])
    with pytest.raises(ValueError):
        Arc([0, 0], [[1, 0, 0]])
    with pytest.raises(ValueError):
        Arc([0, np.inf], [[1, 0]])


def test_arc_round_trip_and_reparameterization():
    arc = Arc([0.1, 0.2], [[1, 0], [0.5, -1]], "x")
    assert Arc.from_dict(arc.to_dict()).to_dict() == arc.to_dict()
    sq = arc.reparameterized(2)
    for t in (0.1, 0.37):
        np.testing.assert_allclose(sq(t), arc(t * t), rtol=1e-15)


def test_horner_matches_power_sum():
    rng = np.random.default_rng(0)
    c = rng.normal(size=(4, 3))
    arc = Arc(np.ones(3), c)
    t = 0.3
    np.testing.assert_allclose(arc(t), 1 + sum(c[k] * t ** (k + 1) for k in range(4)), rtol=1e-14)


def test_order_of_vanishing_examples():
    assert order_of_vanishing(lambda t: np.array([t**2, 0.0])).order == 2
    inf = order_of_vanishing(lambda t: np.zeros(2))
    assert inf.order == INFINITE and inf.floor_hit and inf.grid == ()
    est = order_of_vanishing(lambda t: t**3 + 10 * t**5)
    assert est.order == 3
    assert abs(est.raw_slope - 3) <= 0.15 and est.residual <= 0.1
    assert est.leading_coeff_mag == pytest.approx(1.0, rel=0.2)


def test_undetermined_on_fractional_power():
    with pytest.raises(UndeterminedOrder) as exc:
        order_of_vanishing(lambda t: t**1.5)
    diag = exc.value.diagnostics
    assert isinstance(diag, OrderEstimate) and diag.order is None
    assert diag.raw_slope == pytest.approx(1.5, abs=1e-9)


def test_undetermined_on_too_few_points():
    # only t = 0.1, 0.05 stay above the floor
    with pytest.raises(UndeterminedOrder, match="above the floor"):
        order_of_vanishing(lambda t: 1e-6 * (t > 0.04) * t)


def test_retry_with_smaller_t0_rescues_slow_onset():
    # the t^4 term dominates near t0 = 0.1; a smaller t0 exposes the t^2 term
    g = lambda t: 1e-2 * t**2 + 50 * t**4
    with pytest.raises(UndeterminedOrder):
        order_of_vanishing(g)
    est = order_with_retries(g, GridSpec(retries=3))
    assert est.order == 2 and "retried" in est.note


def test_domain_violations_are_dropped():
    def g(t):
        if t > 0.06:
            raise DomainError("outside")
        return t**2

    est = order_of_vanishing(g)
    assert est.order == 2 and est.dropped == (0.1,)


def test_fit_order_infinite_when_all_below_floor():
    est = fit_order([0.1, 0.05, 0.025], [1e-12, 0.0, 1e-14], floor=1e-10)
    assert est.order == INFINITE and est.floor_hit


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 6),
    st.floats(1, 10),
    st.floats(-1, 1),
    st.booleans(),
)
def test_monomial_plus_higher_order_recovered(k, c, c2, neg):
    # leading coefficient at least as large as the next one
    g = lambda t: (-c if neg else c) * t**k + c2 * t ** (k + 1)
    assert order_of_vanishing(g, GridSpec(floor=1e-14)).order == k


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.floats(0.2, 5))
def test_grid_halving_keeps_orders(k, c):
    g = lambda t: c * t**k + t ** (k + 2)
    a = order_of_vanishing(g, GridSpec())
    b = order_of_vanishing(g, GridSpec(t0=0.05))
    assert a.order == b.order == k


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(ratio=1.5)
    with pytest.raises(ValueError):
        GridSpec(min_points=1)
    np.testing.assert_allclose(GridSpec().points(), 0.1 * 0.5 ** np.arange(10))


def test_observable_order_examples(gmm, rrr):
    chart = gmm.default_chart()
    assert observable_order(chart, gmm, Arc([0, 0, 0], [[1, 0, 0]])).order == 1
    assert observable_order(chart, gmm, Arc([0, 0, 0], [[0, 1, 0]])).order == 2
    arc = Arc(np.zeros(4), [[1, 0, 1, 0]])
    assert observable_order(rrr.default_chart(), rrr, arc).order == 2


def test_kl_order_examples(gmm, rrr):
    assert kl_order(gmm, Arc([0, 0, 0], [[1, 0, 0]])).order == 2
    assert kl_order(rrr, Arc(np.zeros(4), [[1, 0, 1, 0]])).order == 4
    assert kl_order(gmm, Arc([0, 0, 0], [[0, 0, 1]])).order == INFINITE


def test_monte_carlo_chart_requires_high_floor(gmm):
    mc = Budget(method=MONTE_CARLO, mc_tol=1e-3)
    arc = Arc([0, 0, 0], [[1, 0, 0]])
    with pytest.raises(AccuracyFloorError):
        observable_order(gmm.default_chart(), gmm, arc, GridSpec(), mc)
    with pytest.raises(AccuracyFloorError):
        kl_order(gmm, arc, GridSpec(), mc)


def test_theorem_verdict_table():
    assert theorem_verdict(2, 4) == (True, True)
    assert theorem_verdict(2, 5) == (True, False)
    assert theorem_verdict(2, 3) == (False, False)
    assert theorem_verdict(INFINITE, INFINITE) == (True, None)
    assert theorem_verdict(INFINITE, 2) == (False, None)
    assert theorem_verdict(2, INFINITE) == (None, None)
    assert theorem_verdict(None, 2) == (None, None)


def test_verify_examples(gmm, rrr):
    tc = verify_order_theorem(rrr.default_chart(), rrr, Arc(np.zeros(4), [[1, 0, 1, 0]], "det"))
    assert (tc.observable_order.order, tc.kl_order.order, tc.inequality_holds, tc.equality_holds) == (2, 4, True, True)
    tc = verify_order_theorem(gmm.default_chart(), gmm, Arc([0, 0, 0], [[1, 0, 0]], "mu"))
    assert (tc.observable_order.order, tc.kl_order.order, tc.inequality_holds, tc.equality_holds) == (1, 2, True, True)
    tc = verify_order_theorem(gmm.default_chart(), gmm, Arc([0, 0, 0], [[0, 0, 1]], "alpha"))
    assert tc.observable_order.order == INFINITE and tc.kl_order.order == INFINITE
    assert tc.inequality_holds is True and tc.equality_holds is None
    assert tc.chart_complete is True and len(tc.trace) == 10


def test_incomplete_chart_is_annotated(gmm):
    chart = Chart((Observable.cumulant(2),))
    tc = verify_order_theorem(chart, gmm, Arc([0, 0, 0], [[1, 0, 0]]))
    assert tc.chart_complete is False
    assert any("incomplete" in n for n in tc.notes)
    assert tc.inequality_holds is False


def test_verify_records_undetermined_when_asked():
    frac = FractionalModel()
    tc = verify_order_theorem(frac.default_chart(), frac, Arc([0.0], [[1.0]]), raise_undetermined=False)
    assert tc.undetermined and tc.inequality_holds is None
    assert any("undetermined" in n for n in tc.notes)
    with pytest.raises(UndeterminedOrder):
        verify_order_theorem(frac.default_chart(), frac, Arc([0.0], [[1.0]]))


class FractionalModel:
    """Gaussian location model reparameterized as mu = |theta|^1.5 (non-analytic arc image)."""

    def __new__(cls):
        from obschart.zoo import GaussianLocationModel

        class _M(GaussianLocationModel):
            name = "fractional"

            def logpdf(self, theta, points):
                return super().logpdf(np.abs(theta) ** 1.5, points)

            def analytic_score(self, theta, points):
                return None

            def closed_form_kl(self, theta0, theta):
                return super().closed_form_kl(np.abs(theta0) ** 1.5, np.abs(theta) ** 1.5)

            def quadrature_rule(self, theta, n):
                return super().quadrature_rule(np.abs(theta) ** 1.5, n)

        m = _M()
        m.closed_form_expectations = {}
        return m


def test_reparameterized_time_doubles_orders(gmm):
    # the square-root grid visits the same parameter points along gamma(t^2)
    chart = gmm.default_chart()
    grid = GridSpec()
    sq_grid = GridSpec(t0=math.sqrt(grid.t0), ratio=math.sqrt(grid.ratio))
    for coef in ([[1, 0, 0]], [[0, 1, 0]], [[0, 1, 1]], [[0, 0, 1], [0, 1, 0]]):
        arc = Arc([0, 0, 0], coef)
        a = verify_order_theorem(chart, gmm, arc, grid)
        b = verify_order_theorem(chart, gmm, arc.reparameterized(2), sq_grid)
        assert b.observable_order.order == 2 * a.observable_order.order
        assert b.kl_order.order == 2 * a.kl_order.order


def test_order_stable_across_complete_charts(gmm):
    small = gmm.default_chart()
    big = small.extended(Observable.cumulant(4))
    rng = np.random.default_rng(6)
    for _ in range(10):
        arc = random_arc([0, 0, 0], rng)
        assert observable_order(small, gmm, arc).order == observable_order(big, gmm, arc).order


def test_random_arc_is_seeded_and_nonzero():
    a = random_arc([0, 0, 0], np.random.default_rng(3), density=0.0)
    b = random_arc([0, 0, 0], np.random.default_rng(3), density=0.0)
    assert a.to_dict() == b.to_dict()
    assert np.count_nonzero(a.coefficients) == 1
    nz = np.abs(a.coefficients[a.coefficients != 0])
    assert np.all((nz >= 0.5) & (nz <= 2.0))


def test_estimate_round_trip():
    est = order_of_vanishing(lambda t: 3 * t**2)
    assert OrderEstimate.from_dict(est.to_dict()) == est
    inf = order_of_vanishing(lambda t: 0.0)
    assert inf.to_dict()["order"] == "INFINITE"
    assert math.isinf(OrderEstimate.from_dict(inf.to_dict()).order)


def test_reparameterized_low_orders_on_default_grid(gmm, rrr):
    tc = verify_order_theorem(gmm.default_chart(), gmm, Arc([0, 0, 0], [[1, 0, 0]]).reparameterized(2))
    assert (tc.observable_order.order, tc.kl_order.order) == (2, 4)
    arc = Arc(np.zeros(4), [[1, 0, 1, 0]]).reparameterized(2)
    tc = verify_order_theorem(rrr.default_chart(), rrr, arc, GridSpec(floor=1e-15))
    assert (tc.observable_order.order, tc.kl_order.order) == (4, 8)
