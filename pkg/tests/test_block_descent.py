import math

import numpy as np
import pytest

import helpers
import trafficeq as tq
from trafficeq import block_descent as bd


def eta_for(net, eps, n_sources=1):
    return bd.smoothing_weights(net, eps, n_sources)


def random_potentials(rng, net, dem, spread=3.0):
    T = rng.uniform(-spread, spread, (len(dem.origins), net.node_count))
    for s, origin in enumerate(dem.origins):
        T[s, origin] = 0.0
    return T


def test_potential_objective_zero_matrix(braess):
    net, dem = braess
    T = np.zeros((1, net.node_count))
    assert tq.potential_objective(net, dem, T) == 0.0


def test_potential_objective_single_edge():
    net, dem = helpers.single_edge(t_bar=1.0, cap=10.0, demand=4.0)
    T = np.array([[0.0, 2.0]])  # head potential = t_bar + 1
    assert tq.potential_objective(net, dem, T) == pytest.approx(-4.0 * 2.0 + 10.0 * 1.0)


def test_potential_objective_optimum_is_minus_lp_value(two_route_lp):
    net, dem = two_route_lp
    T_star = np.array([[0.0, 2.0, 2.0]])
    assert tq.potential_objective(net, dem, T_star) == pytest.approx(-8.0, abs=1e-12)
    # random matrices never go below the optimum
    rng = np.random.default_rng(51)
    for _ in range(200):
        T = random_potentials(rng, net, dem)
        assert tq.potential_objective(net, dem, T) >= -8.0 - 1e-9


def test_recover_times_zero_matrix(braess):
    net, _ = braess
    T = np.zeros((1, net.node_count))
    np.testing.assert_array_equal(tq.recover_times(net, T), net.free_time)


def test_recover_times_from_distances_is_free_flow(braess):
    net, _ = braess
    tree = tq.dijkstra(net, net.free_time, 0)
    T = np.asarray(tree.dist)[None, :]
    np.testing.assert_allclose(tq.recover_times(net, T), net.free_time)


def test_recover_times_dominates_free_flow_exactly(braess):
    net, dem = braess
    rng = np.random.default_rng(52)
    for _ in range(100):
        T = random_potentials(rng, net, dem)
        t = tq.recover_times(net, T)
        assert np.all(t >= net.free_time)


def test_smoothing_weights_frozen_value():
    # eps / (4 * n * cap * ln(S + 1)) with eps=0.04, n=4, cap=10, S=2:
    # 0.04 / (160 * ln 3) = 2.27560e-4 (independently recomputed; a hand
    # calculation rounds to ~2.2754e-4).
    net = tq.Network.from_edges(4, [(0, 1, 1.0, 10.0, 0.15, 4.0)])
    eta = bd.smoothing_weights(net, 0.04, 2)
    assert eta[0] == pytest.approx(0.04 / (160.0 * math.log(3.0)), rel=1e-14)
    assert eta[0] == pytest.approx(2.2756e-4, rel=1e-4)


def test_smoothing_sandwich(braess):
    net, dem = braess
    eta = eta_for(net, 0.04)
    slack = float(net.capacity @ (eta * math.log(len(dem.origins) + 1.0)))
    rng = np.random.default_rng(53)
    for _ in range(200):
        T = random_potentials(rng, net, dem)
        smooth = tq.smoothed_objective(net, dem, T, eta)
        rough = tq.potential_objective(net, dem, T)
        assert smooth <= rough + 1e-9
        assert rough <= smooth + slack + 1e-9


def test_softmax_saturation_single_source():
    net, dem = helpers.single_edge(t_bar=1.0, cap=10.0, demand=4.0)
    eta = eta_for(net, 0.04)
    x = 50.0 * eta[0]
    T = np.array([[0.0, net.free_time[0] + x]])
    smooth = tq.smoothed_objective(net, dem, T, eta)
    linear = -4.0 * T[0, 1]
    # un-normalized penalty: cap * eta * log(sum exp + 1) saturates to cap * x
    penalty = smooth - linear + float(net.capacity @ (eta * math.log(2.0)))
    assert penalty == pytest.approx(10.0 * x, rel=1e-6)


def test_translation_invariance(braess):
    net, dem = braess
    eta = eta_for(net, 0.04)
    rng = np.random.default_rng(54)
    for _ in range(50):
        T = rng.uniform(-2, 2, (1, net.node_count))  # unanchored on purpose
        shift = rng.uniform(-5, 5)
        T2 = T + shift  # shifts the whole (single) source row
        assert tq.potential_objective(net, dem, T2) == pytest.approx(
            tq.potential_objective(net, dem, T), abs=1e-9
        )
        assert tq.smoothed_objective(net, dem, T2, eta) == pytest.approx(
            tq.smoothed_objective(net, dem, T, eta), abs=1e-9
        )


def test_gradient_matches_finite_differences(braess):
    net, dem = braess
    eta = eta_for(net, 0.4)
    rng = np.random.default_rng(55)
    checked = 0
    while checked < 50:
        T = random_potentials(rng, net, dem)
        node = int(rng.integers(net.node_count))
        g = tq.smoothed_block_gradient(net, dem, T, eta, node)
        for s, origin in enumerate(dem.origins):
            if origin == node:
                assert g[s] == 0.0
                continue
            h = 1e-6 * max(1.0, abs(T[s, node]))
            T_plus = T.copy()
            T_plus[s, node] += h
            T_minus = T.copy()
            T_minus[s, node] -= h
            fd = (
                tq.smoothed_objective(net, dem, T_plus, eta)
                - tq.smoothed_objective(net, dem, T_minus, eta)
            ) / (2 * h)
            assert abs(fd - g[s]) <= 1e-5 * max(1.0, abs(g[s]))
            checked += 1
    assert checked >= 50


def test_gradient_zero_on_isolated_node():
    rows = [(0, 1, 1.0, 10.0, 0.0, 1.0)]
    net = tq.Network.from_edges(3, rows)  # node 2 isolated
    dem = tq.DemandTable.from_entries([(0, 1, 4.0)])
    eta = eta_for(net, 0.04)
    T = np.array([[0.0, 1.0, 0.5]])
    np.testing.assert_array_equal(tq.smoothed_block_gradient(net, dem, T, eta, 2), [0.0])


def test_gradient_edge_contribution_bounded():
    # node with one incident edge and no demand: |gradient| < capacity
    rows = [(0, 1, 1.0, 7.0, 0.0, 1.0), (1, 2, 1.0, 9.0, 0.0, 1.0)]
    net = tq.Network.from_edges(3, rows)
    dem = tq.DemandTable.from_entries([(0, 1, 2.0)])
    eta = eta_for(net, 0.04)
    rng = np.random.default_rng(56)
    for _ in range(50):
        T = random_potentials(rng, net, dem)
        g = tq.smoothed_block_gradient(net, dem, T, eta, 2)
        assert abs(g[0]) <= 9.0


def test_block_lipschitz_values():
    rows = [(0, 1, 1.0, 7.0, 0.0, 1.0)]
    net = tq.Network.from_edges(3, rows)
    eta = np.array([0.01])
    assert tq.block_lipschitz(net, eta, 2) == 0.0
    assert tq.block_lipschitz(net, eta, 0) == pytest.approx(700.0)
    assert tq.block_lipschitz(net, eta, 1) == pytest.approx(700.0)


def test_unit_over_lipschitz_step_descends(braess):
    net, dem = braess
    eta = eta_for(net, 0.4)
    rng = np.random.default_rng(57)
    for _ in range(100):
        T = random_potentials(rng, net, dem)
        node = int(rng.integers(net.node_count))
        lip = tq.block_lipschitz(net, eta, node)
        if lip == 0.0:
            continue
        before = tq.smoothed_objective(net, dem, T, eta)
        T2 = T.copy()
        T2[:, node] -= tq.smoothed_block_gradient(net, dem, T, eta, node) / lip
        after = tq.smoothed_objective(net, dem, T2, eta)
        assert after <= before + 1e-10


def test_recovered_flows_strictly_interior(braess):
    # Strict interiority holds for any positive temperature; test it at a
    # temperature where the exponentials stay representable (with tiny eta
    # the softmax saturates to exactly 0 or 1 in floating point).
    net, dem = braess
    eta = np.full(net.edge_count, 0.5)
    rng = np.random.default_rng(58)
    for _ in range(50):
        T = random_potentials(rng, net, dem)
        flows = tq.recover_flows(net, T, eta)
        assert np.all(flows > 0.0)
        assert np.all(flows < net.capacity)


def test_zero_demand_short_circuit(braess):
    net, _ = braess
    dem = tq.DemandTable.from_entries([])
    res = tq.solve_stable_dynamics_bcd(net, dem, tq.SmoothConfig(target_eps=0.01))
    assert res.converged
    assert res.potentials.shape == (0, net.node_count)
    np.testing.assert_array_equal(res.flows, np.zeros(net.edge_count))
    np.testing.assert_array_equal(res.times, net.free_time)


def test_solve_single_edge_within_eps():
    net, dem = helpers.single_edge(t_bar=1.0, cap=10.0, demand=4.0)
    eps = 0.02
    res = tq.solve_stable_dynamics_bcd(net, dem, tq.SmoothConfig(target_eps=eps, seed=0))
    assert res.converged
    assert res.objective == pytest.approx(4.0 * 1.0, abs=eps)
    assert res.times[0] == pytest.approx(1.0, abs=eps)


def test_solve_two_route_fast_eps(two_route_lp):
    net, dem = two_route_lp
    eps = 0.05
    res = tq.solve_stable_dynamics_bcd(net, dem, tq.SmoothConfig(target_eps=eps, seed=0))
    assert res.converged
    assert res.objective == pytest.approx(8.0, abs=eps)
    assert res.violation <= eps
    assert np.all(res.times >= net.free_time)


def test_recovered_times_match_mirror_descent(two_route_lp):
    # The optimal potentials put both route times at 2; the averaged dual of
    # mirror descent lands on the same times where flow is positive.
    net, dem = two_route_lp
    T_star = np.array([[0.0, 2.0, 2.0]])
    times_bcd = tq.recover_times(net, T_star)
    cfg = tq.MdConfig(iterations=40_000, tol=2e-2, r_bar=9.0, seed=0)
    res = tq.solve_stable_dynamics_md(net, dem, cfg)
    positive = res.flows > 1e-6
    np.testing.assert_allclose(times_bcd[positive], res.times[positive], atol=1e-2)


def test_trace_schema_and_sandwich_along_run(two_route_lp):
    net, dem = two_route_lp
    res = tq.solve_stable_dynamics_bcd(net, dem, tq.SmoothConfig(target_eps=0.05, seed=1))
    lines = res.trace.to_csv().splitlines()
    assert lines[0] == "epoch,smoothed_obj,nonsmooth_obj,gap"
    eta = eta_for(net, 0.05)
    slack = float(net.capacity @ (eta * math.log(2.0)))
    for rec in res.trace.records:
        assert rec.smoothed_obj <= rec.nonsmooth_obj + 1e-9
        assert rec.nonsmooth_obj <= rec.smoothed_obj + slack + 1e-9


def test_accelerated_mode_descends(two_route_lp):
    net, dem = two_route_lp
    cfg = tq.SmoothConfig(target_eps=0.05, max_epochs=3000, accelerated=True, seed=0)
    res = tq.solve_stable_dynamics_bcd(net, dem, cfg)
    assert math.isfinite(res.smoothed_obj)
    assert res.smoothed_obj < 0.0  # made real progress from the zero start


def test_parallel_mode_matches_quality(two_route_lp):
    net, dem = two_route_lp
    cfg = tq.SmoothConfig(target_eps=0.05, parallel=True, seed=0)
    res = tq.solve_stable_dynamics_bcd(net, dem, cfg)
    assert res.converged
    assert res.objective == pytest.approx(8.0, abs=0.05)


def test_config_validation():
    with pytest.raises(ValueError):
        tq.SmoothConfig(target_eps=0.0)
    with pytest.raises(ValueError):
        tq.SmoothConfig(max_epochs=0)
    with pytest.raises(ValueError):
        tq.SmoothConfig(parallel=True, accelerated=True)
    with pytest.raises(ValueError):
        bd.smoothing_weights(tq.Network.from_edges(2, [(0, 1, 1, 1, 0, 1)]), 0.1, 0)
