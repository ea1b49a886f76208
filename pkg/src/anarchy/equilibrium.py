"""Selfish and system-optimal flows on parallel links.

Closed forms cover affine instances: a selfish (Nash) flow equalizes
latencies across used links, a system-optimal flow equalizes marginal
costs, and both open link j once demand passes a breakpoint (the optimum
at half the selfish breakpoint).  The water-filling solver handles the
modified, piecewise latencies produced by coordination mechanisms, where
jumps make equilibria set-valued.
"""
from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .config import comparison_tolerance
from .errors import InfeasibleRate, NegativeRate, SegmentMismatch, TooManyLinks
from .model import INF, FlowProfile, ParallelNetwork


class LatencyLike(Protocol):
    def value(self, x: float) -> float: ...

    def right_liminf(self, x: float) -> float: ...


@dataclass(frozen=True)
class EquilibriumResult:
    """Solved flow with its equalized level.

    ``level`` is the common latency of used links for equilibrium solves and
    the common marginal cost for optimal solves.  ``per_link_interval`` is
    only filled by the water-filling solver: the range of flows each link can
    carry across equilibria at this level, clipped to [0, rate].
    """

    profile: FlowProfile
    level: float
    used_count: int
    cost: float
    per_link_interval: tuple[tuple[float, float], ...] | None = None


@dataclass(frozen=True)
class EquilibriumCheck:
    """Outcome of an equilibrium test, with the first violating pair if any."""

    ok: bool
    violator: tuple[int, int] | None = None
    lhs: float | None = None
    rhs: float | None = None

    def __bool__(self) -> bool:
        return self.ok


def profile_cost(lats: Sequence[LatencyLike], flows: Sequence[float]) -> float:
    """Total travel cost sum f_i * latency_i(f_i); zero-flow links cost zero."""
    return math.fsum(f * lats[i].value(f) for i, f in enumerate(flows) if f > 0.0)


def _segment_index(breakpoints: Sequence[float], r: float) -> int:
    # Number of breakpoints strictly below r; exactly at a breakpoint the
    # smaller segment wins (the two closed forms agree there).
    return max(1, bisect_left(breakpoints, r))


def nash_flow(net: ParallelNetwork, rate: float) -> EquilibriumResult:
    """Selfish flow: used links share one latency level.

    With j links open, link i carries rate * eff_i / eff_prefix_j plus a
    rate-independent correction; the level is (rate + off_prefix_j) / eff_prefix_j.
    A zero-slope final link pins the level at its intercept once demand
    reaches the last breakpoint.
    """
    if rate < 0.0:
        raise NegativeRate(f"rate must be >= 0, got {rate}")
    k = net.k
    if net.has_flat_tail and rate >= net.breakpoints[-1]:
        bk = net.links[-1].intercept
        flows = [(bk - net.links[i].intercept) * net.efficiency[i] for i in range(k - 1)]
        flows.append(rate - math.fsum(flows))
        profile = FlowProfile(rate=rate, flows=tuple(flows))
        return EquilibriumResult(profile, level=bk, used_count=profile.used_count,
                                 cost=rate * bk)

    j = min(_segment_index(net.breakpoints, rate), k)
    eff_j = net.eff_prefix[j - 1]
    off_j = net.off_prefix[j - 1]
    level = (rate + off_j) / eff_j
    flows = [0.0] * k
    for i in range(j):
        flows[i] = max(0.0, net.efficiency[i] * (level - net.links[i].intercept))
    profile = FlowProfile(rate=rate, flows=tuple(flows))
    cost = (rate * rate + off_j * rate) / eff_j
    return EquilibriumResult(profile, level=level, used_count=profile.used_count, cost=cost)


def _pairwise_spread(net: ParallelNetwork, h: int) -> float:
    # sum over i < g <= h of (b_g - b_i)^2 eff_g eff_i / (4 eff_prefix_h):
    # the fixed saving an optimal flow extracts from intercept spread.
    terms = []
    for g in range(1, h):
        for i in range(g):
            d = net.links[g].intercept - net.links[i].intercept
            terms.append(d * d * net.efficiency[g] * net.efficiency[i])
    return math.fsum(terms) / (4.0 * net.eff_prefix[h - 1])


def opt_flow(net: ParallelNetwork, rate: float) -> EquilibriumResult:
    """System-optimal flow: used links share one marginal cost.

    Link h opens at half its selfish breakpoint.  The reported level is the
    equalized marginal cost (2*slope*flow + intercept on used links).
    """
    if rate < 0.0:
        raise NegativeRate(f"rate must be >= 0, got {rate}")
    k = net.k
    if net.has_flat_tail and 2.0 * rate >= net.breakpoints[-1]:
        bk = net.links[-1].intercept
        flows = [(bk - net.links[i].intercept) * net.efficiency[i] / 2.0 for i in range(k - 1)]
        used = math.fsum(flows)
        flows.append(rate - used)
        profile = FlowProfile(rate=rate, flows=tuple(flows))
        cost = math.fsum(
            (bk * bk - b * b) * e / 4.0
            for b, e in zip(net.intercepts[:-1], net.efficiency[:-1])
        ) + (rate - used) * bk
        return EquilibriumResult(profile, level=bk, used_count=profile.used_count, cost=cost)

    h = min(_segment_index(net.opt_breakpoints, rate), k)
    eff_h = net.eff_prefix[h - 1]
    off_h = net.off_prefix[h - 1]
    level = (2.0 * rate + off_h) / eff_h  # marginal cost on used links
    flows = [0.0] * k
    for i in range(h):
        flows[i] = max(0.0, net.efficiency[i] * (level - net.links[i].intercept) / 2.0)
    profile = FlowProfile(rate=rate, flows=tuple(flows))
    cost = (rate * rate + off_h * rate) / eff_h - _pairwise_spread(net, h)
    return EquilibriumResult(profile, level=level, used_count=profile.used_count, cost=cost)


def cost_increment(net: ParallelNetwork, s: float, r: float, j: int,
                   which: str = "nash") -> float:
    """Exact cost growth of a flow that keeps using j links from rate s to r.

    Equals ((r-s)^2 + (off_prefix_j + 2s)(r-s)) / eff_prefix_j.  Both rates
    must sit in the segment where the named flow uses exactly j links.
    """
    if s < 0.0 or r < 0.0:
        raise NegativeRate("rates must be >= 0")
    if which not in ("nash", "opt"):
        raise ValueError(f"which must be 'nash' or 'opt', got {which!r}")
    if s > r:
        raise SegmentMismatch(f"start rate {s} exceeds end rate {r}")
    if not 1 <= j <= net.k:
        raise SegmentMismatch(f"link count {j} outside 1..{net.k}")
    scale = 0.5 if which == "opt" else 1.0
    lo = net.breakpoints[j - 1] * scale
    hi = net.breakpoints[j] * scale if j < net.k else INF
    eps = 1e-12 * max(1.0, hi if math.isfinite(hi) else lo)
    if s < lo - eps or r > hi + eps:
        raise SegmentMismatch(
            f"rates [{s}, {r}] leave the {which} segment [{lo}, {hi}] for {j} links"
        )
    if j == net.k and net.has_flat_tail:
        # Constant-latency tail: cost grows linearly at the final intercept.
        return (r - s) * net.links[-1].intercept
    eff_j = net.eff_prefix[j - 1]
    off_j = net.off_prefix[j - 1]
    d = r - s
    return (d * d + (off_j + 2.0 * s) * d) / eff_j


def is_user_equilibrium(lats: Sequence[LatencyLike], profile: FlowProfile,
                        tol: float | None = None) -> EquilibriumCheck:
    """Check that no used link envies another.

    For every link i with positive flow and every other link g, the latency
    on i must not exceed the latency g would show just above its current
    flow.  The comparison allows tol * max(1, level) slack, where level is
    the largest used latency.
    """
    if tol is None:
        tol = comparison_tolerance()
    flows = profile.flows
    used = [i for i, f in enumerate(flows) if f > 0.0]
    if not used:
        return EquilibriumCheck(True)
    level = max(lats[i].value(flows[i]) for i in used)
    slack = tol * max(1.0, level) if math.isfinite(level) else 0.0
    for i in used:
        vi = lats[i].value(flows[i])
        for g in range(len(flows)):
            if g == i:
                continue
            edge = lats[g].right_liminf(flows[g])
            if not vi <= edge + slack:
                return EquilibriumCheck(False, violator=(i, g), lhs=vi, rhs=edge)
    return EquilibriumCheck(True)


def _max_flow_at_level(lat, level: float) -> float:
    """Largest flow whose latency stays <= level."""
    starts = lat.starts
    n = len(starts)
    best = 0.0
    for i in range(n):
        lo = starts[i]
        hi = starts[i + 1] if i + 1 < n else INF
        hi = min(hi, lat.cap)
        if hi < lo and i > 0:
            continue
        m, c = lat.slopes[i], lat.offsets[i]
        if m == 0.0:
            cand = hi if c <= level else None
        else:
            x = (level - c) / m
            cand = min(x, hi)
            floor = lo if i > 0 else 0.0
            if cand < floor:
                cand = None
        if cand is not None and cand > best:
            best = cand
    return best


def _min_flow_at_level(lat, level: float) -> float:
    """Smallest flow the link must carry in an equilibrium at `level`.

    Any flow below the returned value still shows a just-above latency
    strictly under the level, so users on other links would move here; the
    value is sup{x : right_liminf(x) < level}.
    """
    starts = lat.starts
    n = len(starts)
    top = 0.0
    for i in range(n):
        lo = starts[i]
        hi = starts[i + 1] if i + 1 < n else INF
        hi = min(hi, lat.cap)
        if hi < lo:
            continue
        m, c = lat.slopes[i], lat.offsets[i]
        if m == 0.0:
            if c < level and hi > top:
                top = hi
        else:
            x = (level - c) / m
            if x > lo and min(x, hi) > top:
                top = min(x, hi)
    return top


def water_fill(lats: Sequence, rate: float, *, latency_family: str = "original",
               tol: float | None = None) -> EquilibriumResult:
    """Equilibrium of piecewise latencies by filling links up to a common level.

    Bisects the level L between the cheapest empty-link latency and a doubled
    upper bound until the total flow absorbable at L reaches the rate, then
    snaps L onto an exact segment-corner value when one sits inside the
    bracket.  Per-link flow intervals at L are computed analytically from the
    segments; the canonical profile spreads the rate across the intervals
    proportionally to their widths and is verified to be an equilibrium.
    """
    if rate < 0.0:
        raise NegativeRate(f"rate must be >= 0, got {rate}")
    lats = list(lats)

    def supply(level: float) -> float:
        return math.fsum(_max_flow_at_level(l, level) for l in lats)

    capacity = math.fsum(l.cap for l in lats)
    if capacity < rate:
        raise InfeasibleRate(f"total capacity {capacity} below rate {rate}")

    lo_level = min(l.value(0.0) for l in lats)
    if rate == 0.0 or supply(lo_level) >= rate:
        level = lo_level
    else:
        step = max(1.0, abs(lo_level))
        hi_level = lo_level + step
        guard = 0
        while supply(hi_level) < rate:
            step *= 2.0
            hi_level = lo_level + step
            guard += 1
            if guard > 200:
                raise InfeasibleRate(f"no finite level absorbs rate {rate}")
        lo, hi = lo_level, hi_level
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if supply(mid) >= rate:
                hi = mid
            else:
                lo = mid
        level = hi
        # Snap onto an exact corner value (plateau constants, cap latencies)
        # so interval endpoints come out exact at jump levels.
        snap = 1e-9 * max(1.0, abs(level))
        for lat in lats:
            for c in lat.level_candidates():
                if c < level and level - c <= snap and supply(c) >= rate:
                    level = c

    intervals = []
    for lat in lats:
        hi_f = min(_max_flow_at_level(lat, level), rate)
        lo_f = min(_min_flow_at_level(lat, level), hi_f)
        intervals.append((lo_f, hi_f))
    total_lo = math.fsum(lo for lo, _ in intervals)
    total_hi = math.fsum(hi for _, hi in intervals)
    spread = total_hi - total_lo
    t = 0.0 if spread <= 0.0 else min(1.0, max(0.0, (rate - total_lo) / spread))
    flows = tuple(lo + t * (hi - lo) for lo, hi in intervals)

    profile = FlowProfile(rate=rate, flows=flows, latency_family=latency_family)
    check = is_user_equilibrium(lats, profile, tol)
    if not check:
        raise AssertionError(
            f"water-fill produced a non-equilibrium profile: {check.violator} "
            f"lhs={check.lhs} rhs={check.rhs}"
        )
    return EquilibriumResult(
        profile,
        level=level,
        used_count=profile.used_count,
        cost=profile_cost(lats, flows),
        per_link_interval=tuple(intervals),
    )


def worst_equilibrium_cost_two_links(lats: Sequence, rate: float,
                                     tol: float | None = None) -> float:
    """Most expensive equilibrium split of `rate` over two links.

    Candidate splits combine segment boundaries of both latencies, the
    water-fill interval endpoints, per-piece analytic cost extrema and a
    1e-4 * rate grid; the cost between boundaries is quadratic in the split,
    so its extrema are explicit.  Exact within tolerance for two links.
    """
    if len(lats) != 2:
        raise TooManyLinks(f"worst-equilibrium search needs exactly 2 links, got {len(lats)}")
    if rate < 0.0:
        raise NegativeRate(f"rate must be >= 0, got {rate}")
    if rate == 0.0:
        return 0.0
    if tol is None:
        tol = comparison_tolerance()
    lat1, lat2 = lats

    wf = water_fill(lats, rate, tol=tol)
    assert wf.per_link_interval is not None
    (m1, hi1), (m2, hi2) = wf.per_link_interval

    cands = {0.0, rate, m1, hi1, rate - m2, rate - hi2}
    for b in lat1.flow_boundaries():
        if 0.0 <= b <= rate:
            cands.add(b)
    for b in lat2.flow_boundaries():
        x = rate - b
        if 0.0 <= x <= rate:
            cands.add(x)

    # Between candidate boundaries the total cost is quadratic in the split;
    # add each piece's analytic vertex.
    edges = sorted(c for c in cands if 0.0 <= c <= rate)
    for p, q in zip(edges, edges[1:]):
        if q - p <= 0.0:
            continue
        mid = 0.5 * (p + q)
        i1 = max(0, int(np.searchsorted(lat1._starts_arr, mid, side="left")) - 1)
        i2 = max(0, int(np.searchsorted(lat2._starts_arr, rate - mid, side="left")) - 1)
        s1, c1 = lat1.slopes[i1], lat1.offsets[i1]
        s2, c2 = lat2.slopes[i2], lat2.offsets[i2]
        denom = 2.0 * (s1 + s2)
        if denom > 0.0:
            vertex = (2.0 * s2 * rate + c2 - c1) / denom
            if p < vertex < q:
                cands.add(vertex)

    grid = np.linspace(0.0, rate, 10001)
    xs = np.unique(np.concatenate([grid, np.asarray(sorted(cands))]))
    xs = xs[(xs >= 0.0) & (xs <= rate)]

    with np.errstate(invalid="ignore", over="ignore"):
        v1 = lat1.value_many(xs)
        rl1 = lat1.right_liminf_many(xs)
        ys = rate - xs
        v2 = lat2.value_many(ys)
        rl2 = lat2.right_liminf_many(ys)
        used1 = xs > 0.0
        used2 = ys > 0.0
        level = np.maximum(np.where(used1, v1, -INF), np.where(used2, v2, -INF))
        slack = tol * np.maximum(1.0, np.where(np.isfinite(level), level, 1.0))
        ok = (~used1 | (v1 <= rl2 + slack)) & (~used2 | (v2 <= rl1 + slack))
        cost = np.where(used1, xs * v1, 0.0) + np.where(used2, ys * v2, 0.0)
        cost = np.where(ok, cost, -INF)

    best = int(np.argmax(cost))
    if not ok[best]:
        raise AssertionError("no equilibrium split found")
    split = float(xs[best])
    check = is_user_equilibrium(lats, FlowProfile(rate, (split, rate - split)), tol)
    assert check, f"worst split failed re-verification: {check.violator}"
    return float(cost[best])
