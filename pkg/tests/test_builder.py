import numpy as np
import pytest

from obschart.arcs import INFINITE, Arc, observable_order
from obschart.builder import (
    KERNEL_EMPTY,
    POOL_EXHAUSTED,
    MAX_ITERATIONS,
    TARGET_ORDER_REACHED,
    BuildTrace,
    ObservablePool,
    build_chart,
    probe_arcs,
    probe_direction,
)
from obschart.chart import Chart, Observable, completeness_check


@pytest.fixture(scope="module")
def gmm_build(gmm):
    pool = ObservablePool([Observable.cumulant(k) for k in range(1, 5)])
    return build_chart(gmm, [0, 0, 0], pool)


def test_pool_ordering_and_uniqueness():
    pool = ObservablePool([Observable.cumulant(3), Observable.monomial([1]), Observable.cumulant(1)])
    assert [c.id for c in pool] == ["m1", "k3", "x^1"]
    with pytest.raises(ValueError):
        ObservablePool([Observable.cumulant(2), Observable.cumulant(2)])


def test_pool_round_trip(tanh):
    pool = ObservablePool(tanh.default_pool())
    assert ObservablePool.from_dict(pool.to_dict()).ids == pool.ids


def test_gmm_builder_contains_low_cumulants(gmm_build):
    chart, trace = gmm_build
    assert {"m1", "k2", "k3"} <= set(chart.ids)
    assert trace.terminated_reason == POOL_EXHAUSTED
    added = {it.added: (it.added_order, it.triggering_arc) for it in trace.iterations if it.added}
    assert added["m1"] == (1, "t*e_mu")
    assert added["k2"] == (2, "t*e_delta")
    # kappa3 reveals the (delta, alpha) interaction on a quadratic probe
    assert added["k3"][1] == "t*e_alpha+t^2*e_delta"


def test_kernel_dimension_non_increasing(gmm_build):
    _, trace = gmm_build
    dims = trace.kernel_dims
    assert all(a >= b for a, b in zip(dims, dims[1:]))
    assert dims[0] == 3


def test_added_candidate_is_minimal(gmm_build):
    _, trace = gmm_build
    for it in trace.iterations:
        if it.added is None:
            continue
        finite = [o for row in it.candidate_orders.values() for o in row.values() if o not in (None, INFINITE)]
        assert it.added_order == min(finite)
        assert it.candidate_orders[it.added][it.triggering_arc] == it.added_order


def test_gaussian_location_one_step(gauss):
    chart, trace = build_chart(gauss, [0.0], ObservablePool(gauss.default_pool()))
    assert chart.ids == ["x"]
    assert trace.terminated_reason == KERNEL_EMPTY and trace.kernel_dims == [1, 0]
    assert completeness_check(chart, gauss, [0.0]).complete


def test_tanh_builder_reveals_w_b_at_order_two(tanh):
    pool = ObservablePool(tanh.default_chart().observables)
    chart, trace = build_chart(tanh, [0, 1, 0], pool)
    assert len(chart) == 3 and set(chart.ids) == set(pool.ids)
    second = trace.iterations[1]
    assert second.added_order == 2
    assert second.triggering_arc in ("t*e_w+t^2*e_a", "t*e_b+t^2*e_a")
    orders = {a: o for row in second.candidate_orders.values() for a, o in row.items() if o == 2}
    assert "t*e_w+t^2*e_a" in orders and "t*e_b+t^2*e_a" in orders


def test_max_iterations(gmm):
    chart, trace = build_chart(gmm, [0, 0, 0], ObservablePool([Observable.cumulant(k) for k in range(1, 5)]), max_iters=2)
    assert trace.terminated_reason == MAX_ITERATIONS and len(chart) == 2


def test_seed_chart_is_respected(gmm):
    seed = Chart((Observable.cumulant(1),))
    chart, trace = build_chart(gmm, [0, 0, 0], ObservablePool([Observable.cumulant(k) for k in range(1, 4)]), seed)
    assert chart.ids[0] == "m1" and chart.ids.count("m1") == 1
    assert trace.iterations[0].kernel_dim == 2


def test_empty_pool_rejected(gmm):
    with pytest.raises(ValueError):
        build_chart(gmm, [0, 0, 0], ObservablePool([]))


def test_builder_is_deterministic(gmm, gmm_build):
    chart, trace = build_chart(gmm, [0, 0, 0], ObservablePool([Observable.cumulant(k) for k in range(1, 5)]))
    assert chart == gmm_build[0]
    assert trace.to_dict() == gmm_build[1].to_dict()
    assert BuildTrace.from_dict(trace.to_dict()).to_dict() == trace.to_dict()


def test_probe_arcs_shape(gmm):
    arcs = probe_arcs(gmm, [0, 0, 0], [0, 1, 0])
    assert [a.id for a in arcs] == ["t*e_delta", "t*e_delta+t^2*e_mu", "t*e_delta+t^2*e_delta", "t*e_delta+t^2*e_alpha"]
    assert all(np.array_equal(a.coefficients[0], [0, 1, 0]) for a in arcs)


def test_probe_direction_gmm(gmm):
    pool = ObservablePool([Observable.cumulant(k) for k in range(1, 5)])
    t = probe_direction(gmm, [0, 0, 0], [0, 1, 0], pool)
    assert t["k2"].order == 2 and t["m1"].order == INFINITE
    t = probe_direction(gmm, [0, 0, 0], [0, 0, 1], pool)
    assert all(e.order == INFINITE for e in t.values())
    with pytest.raises(ValueError):
        probe_direction(gmm, [0, 0, 0], [0, 2, 0], pool)


def test_probe_direction_rrr(rrr):
    v = np.array([1.0, 0, 1.0, 0]) / np.sqrt(2)
    t = probe_direction(rrr, np.zeros(4), v, ObservablePool(rrr.default_chart().observables))
    assert t["m11"].order == 2
    assert all(t[k].order == INFINITE for k in ("m12", "m21", "m22"))


def test_target_order_stops_early(gmm):
    # at a regular point low cumulants already move at order <= 4 along every kernel direction
    chart, trace = build_chart(gmm, [0, 0.5, 0.1], ObservablePool(gmm.default_pool()))
    assert trace.terminated_reason == TARGET_ORDER_REACHED
    assert chart.ids[0] == "m1" and len(chart) < len(gmm.default_pool())
    assert all(p["revealed"] for p in trace.iterations[-1].probed)


def test_kernel_empty_builds_are_complete(gmm):
    chart, trace = build_chart(gmm, [0, 0.5, 0.1], ObservablePool(gmm.default_pool()), target_order=1)
    assert trace.terminated_reason == KERNEL_EMPTY
    assert completeness_check(chart, gmm, [0, 0.5, 0.1]).complete
