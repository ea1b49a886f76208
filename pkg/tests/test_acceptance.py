"""Acceptance gate: one test per headline guarantee, pinned tolerances.

Each test prints a single CRITERION line on success; pytest -v shows one
pass/fail row per criterion either way.
"""

import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from anarchy import (
    PiecewiseLatency,
    build_plateau_mechanism,
    build_threshold_mechanism,
    continuity_no_improvement_check,
    cost_increment,
    greedy_parameters,
    lower_bound_value,
    mn_uses_links_no_earlier_than_opt,
    nash_flow,
    normalize_network,
    opt_flow,
    ratio_curve,
    ratio_sup,
    recurrence_bound,
    solve_plateau_params,
    water_fill,
)


def _random_links(rng, kmax, flat_chance=0.0):
    k = rng.randint(2, kmax)
    links = [
        {"a": rng.uniform(0.05, 5.0), "b": rng.uniform(0.0, 4.0)} for _ in range(k)
    ]
    if flat_chance and rng.random() < flat_chance:
        links.append({"a": 0.0, "b": max(l["b"] for l in links) + rng.uniform(0.01, 2.0)})
    return links


def _rate_span(net):
    last = net.breakpoints[-1]
    return 2.5 * max(last if math.isfinite(last) else 1.0, 1.0)


def test_criterion_1_pigou_exactness(pigou):
    start = time.perf_counter()
    value, where = ratio_sup(pigou)
    assert abs(value - 4 / 3) <= 1e-12
    assert abs(where - 1.0) <= 1e-9

    params, lats = build_threshold_mechanism(pigou, [2.0])
    assert params.thresholds[0] == pytest.approx(0.5, abs=1e-15)
    grid = [3.0 * i / 1000 for i in range(1, 1001)]
    for sample in ratio_curve(pigou, (params, lats), grid):
        assert abs(sample.ratio - 1.0) <= 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print(f"CRITERION 1 PASS: plain peak 4/3, capped curve flat at 1 ({elapsed:.2f}s)")


def test_criterion_2_two_link_freeze_bound():
    start = time.perf_counter()
    rng = random.Random(2024)
    cap = 1.25 + 1e-9
    worst = 0.0
    for _ in range(500):
        links = [
            {"a": rng.uniform(0.05, 5.0), "b": rng.uniform(0.0, 3.0)},
            {"a": rng.uniform(0.05, 5.0), "b": rng.uniform(0.0, 3.0)},
        ]
        try:
            net = normalize_network(links)
        except Exception:
            continue
        params, lats = build_threshold_mechanism(net, [4.0])
        mech = (params, lats) if params.freeze_points else None
        value, _ = ratio_sup(net, mech)
        worst = max(worst, value)
        assert value <= cap, (links, value)

    lam2 = 4.0 * (1 - 1e-4)
    near = normalize_network([{"a": 1.0, "b": 0.0}, {"a": 1.0 / lam2, "b": 1.0}])
    near_value, _ = ratio_sup(near)
    assert near_value >= 1.25 - 1e-3
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print(
        f"CRITERION 2 PASS: 500 instances below 5/4 (worst {worst:.6f}), "
        f"near-worst family reaches {near_value:.7f} ({elapsed:.2f}s)"
    )


def test_criterion_3_plateau_target():
    start = time.perf_counter()
    ratios = (96 / 53 + 1e-3, 2.0, 2.1, 3.0, 5.0, 10.0, 100.0)
    sups = {}
    for R in ratios:
        net = normalize_network([{"a": 1.0, "b": 0.0}, {"a": 1.0 / R, "b": 1.0}])
        params = solve_plateau_params(net)
        lats = build_plateau_mechanism(net, params)
        value, _ = ratio_sup(net, (params, lats))
        sups[R] = value
        assert value <= 1.192 + 1e-3, (R, value)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    peak = max(sups.values())
    print(f"CRITERION 3 PASS: plateau sup <= 1.192+1e-3 at 7 ratios (peak {peak:.6f}, {elapsed:.2f}s)")


def test_criterion_4_lower_bound_meets_upper():
    start = time.perf_counter()
    low = lower_bound_value(21 / 10).value
    assert low >= 1.191

    net = normalize_network([{"a": 1.0, "b": 0.0}, {"a": 10 / 21, "b": 1.0}])
    params = solve_plateau_params(net)
    lats = build_plateau_mechanism(net, params)
    sup, _ = ratio_sup(net, (params, lats))
    assert abs(sup - low) <= 2e-3
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print(f"CRITERION 4 PASS: lower bound {low:.6f}, plateau sup {sup:.6f} ({elapsed:.2f}s)")


def test_criterion_5_oracle_equivalence():
    start = time.perf_counter()
    rng = random.Random(505)
    nprng = np.random.default_rng(505)
    for _ in range(200):
        links = _random_links(rng, 8, flat_chance=0.25)
        try:
            net = normalize_network(links)
        except Exception:
            continue
        lats = [PiecewiseLatency.from_affine(l) for l in net.links]
        span = _rate_span(net)
        for _ in range(20):
            rate = rng.uniform(1e-3, span)
            closed = nash_flow(net, rate)
            filled = water_fill(lats, rate)
            scale = max(1.0, rate)
            for a, b in zip(closed.profile.flows, filled.profile.flows):
                assert abs(a - b) <= 1e-9 * scale
            assert abs(closed.cost - filled.cost) <= 1e-9 * max(1.0, closed.cost)

        rate = rng.uniform(0.1, span)
        best = opt_flow(net, rate)
        k = net.k
        a = np.array([l.slope for l in net.links])
        b = np.array([l.intercept for l in net.links])
        profiles = nprng.dirichlet(np.ones(k), size=1000) * rate
        costs = np.sum(profiles * (a * profiles + b), axis=1)
        assert best.cost <= costs.min() + 1e-9 * max(1.0, best.cost)
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    print(f"CRITERION 5 PASS: closed form == water fill, opt beats 200k samples ({elapsed:.2f}s)")


def test_criterion_6_invariant_suites():
    start = time.perf_counter()

    # nash-to-opt flow ratio stays within the efficiency-prefix bound
    rng = random.Random(61)
    for _ in range(500):
        try:
            net = normalize_network(_random_links(rng, 6))
        except Exception:
            continue
        rate = rng.uniform(1e-3, _rate_span(net))
        nash = nash_flow(net, rate)
        opt = opt_flow(net, rate)
        h = opt.used_count
        eff_h = net.eff_prefix[h - 1]
        for i in range(h):
            fstar = opt.profile.flows[i]
            if fstar <= 0.0:
                continue
            bound = 2.0 * eff_h / (net.eff_prefix[i] + eff_h)
            assert nash.profile.flows[i] / fstar <= bound + 1e-9

    # freezing never opens a link before the optimal flow would
    rng = random.Random(62)
    for _ in range(500):
        try:
            net = normalize_network(_random_links(rng, 6, flat_chance=0.3))
        except Exception:
            continue
        R = [rng.uniform(2.0, 10.0) for _ in range(net.k - 1)]
        params, _ = build_threshold_mechanism(net, R)
        check = mn_uses_links_no_earlier_than_opt(net, params)
        assert check.ok, check

    # pointwise-raised continuous latencies cannot cut equilibrium cost
    rng = random.Random(63)
    for _ in range(500):
        try:
            net = normalize_network(_random_links(rng, 5))
        except Exception:
            continue
        raised = []
        for link in net.links:
            c = rng.uniform(1.0, 3.0)
            d = rng.uniform(0.0, 2.0)
            raised.append(
                PiecewiseLatency((0.0,), (c * link.slope,), (c * link.intercept + d,))
            )
        rate = rng.uniform(0.05, _rate_span(net))
        check = continuity_no_improvement_check(net, raised, rate)
        assert check.ok

    # aggregate identities tying offsets, breakpoints, and efficiencies
    rng = random.Random(64)
    for _ in range(500):
        try:
            net = normalize_network(_random_links(rng, 7))
        except Exception:
            continue
        for j in range(1, net.k):
            b_j = net.links[j].intercept
            lhs_full = net.off_prefix[j] + net.breakpoints[j]
            rhs_full = b_j * net.eff_prefix[j]
            assert abs(lhs_full - rhs_full) <= 1e-12 * max(1.0, abs(rhs_full))
            lhs_prev = net.off_prefix[j - 1] + net.breakpoints[j]
            rhs_prev = b_j * net.eff_prefix[j - 1]
            assert abs(lhs_prev - rhs_prev) <= 1e-12 * max(1.0, abs(rhs_prev))

    # closed-form cost increments match cost differences inside one regime
    rng = random.Random(65)
    for _ in range(500):
        try:
            net = normalize_network(_random_links(rng, 6))
        except Exception:
            continue
        j = rng.randint(1, net.k)
        lo = net.breakpoints[j - 1]
        hi = net.breakpoints[j] if j < net.k else lo + 5.0
        if hi <= lo:
            continue
        s = rng.uniform(lo, hi)
        r = rng.uniform(s, hi)
        inc = cost_increment(net, s, r, j)
        diff = nash_flow(net, r).cost - nash_flow(net, s).cost
        assert abs(inc - diff) <= 1e-9 * max(1.0, abs(diff))
        s2, r2 = s / 2.0, r / 2.0
        inc2 = cost_increment(net, s2, r2, j, which="opt")
        diff2 = opt_flow(net, r2).cost - opt_flow(net, s2).cost
        assert abs(inc2 - diff2) <= 1e-9 * max(1.0, abs(diff2))

    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    print(f"CRITERION 6 PASS: five invariant suites x 500 instances clean ({elapsed:.2f}s)")


def test_criterion_7_recurrence_exactness():
    start = time.perf_counter()
    for k in range(2, 7):
        params = greedy_parameters(k)
        report = recurrence_bound(params)
        exact = Fraction(
            int(report.details["exact_numerator"]),
            int(report.details["exact_denominator"]),
        )
        assert exact < Fraction(4, 3), (k, exact)
        assert report.strictly_below_four_thirds is True

    assert greedy_parameters(2) == [7]
    single = recurrence_bound([7])
    exact = Fraction(
        int(single.details["exact_numerator"]),
        int(single.details["exact_denominator"]),
    )
    assert exact == Fraction(256, 193)
    elapsed = time.perf_counter() - start
    print(f"CRITERION 7 PASS: greedy multipliers stay below 4/3 for k<=6, single 7 gives 256/193 ({elapsed:.2f}s)")
