"""Efficiency ratios and worst-case bounds.

The central quantity is the ratio of equilibrium cost to optimal cost as a
function of demand.  Between structural breakpoints both costs are quadratic
in the rate, so the supremum of the ratio reduces to evaluating breakpoints,
right limits at jumps, the analytic extrema inside each segment and the
large-demand limit.  Closed-form worst-case bounds for the mechanisms live
here as well.
"""
from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .config import comparison_tolerance
from .equilibrium import (
    nash_flow,
    opt_flow,
    profile_cost,
    water_fill,
    worst_equilibrium_cost_two_links,
)
from .errors import (
    NegativeRate,
    NotContinuousAtEquilibrium,
    ParamTooSmall,
    RatioOutOfRange,
)
from .mechanisms import PlateauParams, ThresholdParams, mn_flow
from .model import INF, ParallelNetwork, PiecewiseLatency

# A mechanism is carried around as (parameters, modified latencies).
Mechanism = tuple[Union[ThresholdParams, PlateauParams], Sequence[PiecewiseLatency]]


@dataclass(frozen=True)
class CurveSample:
    """One point of the cost-ratio curve."""

    r: float
    cost_num: float
    cost_den: float
    ratio: float
    regime: str


@dataclass(frozen=True)
class BoundReport:
    """A named worst-case bound with the inputs that produced it."""

    name: str
    value: float
    inputs: tuple[float, ...]
    formula: str
    details: Mapping[str, object] | None = None
    strictly_below_four_thirds: bool | None = None

    def __post_init__(self) -> None:
        if not self.value >= 1.0:
            raise ValueError(f"bound {self.name} below 1: {self.value}")


def _nash_links(net: ParallelNetwork, r: float) -> int:
    if net.has_flat_tail and r >= net.breakpoints[-1]:
        return net.k
    return max(1, min(bisect_left(net.breakpoints, r), net.k))


def _opt_links(net: ParallelNetwork, r: float) -> int:
    if net.has_flat_tail and 2.0 * r >= net.breakpoints[-1]:
        return net.k
    return max(1, min(bisect_left(net.opt_breakpoints, r), net.k))


def _num_cost(net: ParallelNetwork, mech: Mechanism | None, r: float) -> float:
    if mech is None:
        return nash_flow(net, r).cost
    params, lats = mech
    if isinstance(params, ThresholdParams):
        prof = mn_flow(net, params, r)
        # Modified latencies agree with the originals at in-cap flows.
        return profile_cost(net.links, prof.flows)
    return worst_equilibrium_cost_two_links(lats, r)


def _den_cost(net: ParallelNetwork, r: float) -> float:
    return opt_flow(net, r).cost


def _ratio_at(net: ParallelNetwork, mech: Mechanism | None, r: float) -> float:
    return _num_cost(net, mech, r) / _den_cost(net, r)


def _regime(net: ParallelNetwork, mech: Mechanism | None, r: float) -> str:
    h = _opt_links(net, r)
    if mech is None:
        return f"nash{_nash_links(net, r)}/opt{h}"
    params = mech[0]
    if isinstance(params, ThresholdParams):
        remaining = r
        idx = len(params.stages) - 1
        for i, stage in enumerate(params.stages):
            if stage.local_freeze_rate is None or remaining <= stage.local_freeze_rate:
                idx = i
                break
            remaining -= stage.local_freeze_rate
        return f"stage{idx}/opt{h}"
    if r <= params.hold_start:
        tag = "pre"
    elif r <= params.jump_rate:
        tag = "hold"
    elif r < params.resume_rate:
        tag = "jump"
    else:
        tag = "post"
    return f"{tag}/opt{h}"


def curve_breakpoints(net: ParallelNetwork, mech: Mechanism | None = None) -> tuple[float, ...]:
    """Demands where either cost changes its quadratic piece."""
    pts: set[float] = set()
    for r in net.breakpoints[1:]:
        pts.add(r)
        pts.add(r / 2.0)
    if mech is not None:
        params = mech[0]
        if isinstance(params, ThresholdParams):
            for stage in params.stages:
                for off in range(stage.suffix_net.k):
                    pts.add(stage.global_start_rate + stage.suffix_net.breakpoints[off])
                if stage.local_freeze_rate is not None:
                    pts.add(stage.global_start_rate + stage.local_freeze_rate)
        else:
            pts.update((params.hold_start, params.jump_rate, params.resume_rate))
    out: list[float] = []
    for p in sorted(pts):
        if p <= 0.0 or not math.isfinite(p):
            continue
        if out and p - out[-1] <= 1e-12 * max(1.0, p):
            continue
        out.append(p)
    return tuple(out)


def ratio_curve(net: ParallelNetwork, mechanism: Mechanism | None,
                r_grid: Sequence[float]) -> list[CurveSample]:
    """Evaluate the cost ratio on a grid of positive demands."""
    samples = []
    for raw in r_grid:
        r = float(raw)
        if not (r > 0.0) or not math.isfinite(r):
            raise NegativeRate(f"curve rates must be positive and finite, got {raw!r}")
        num = _num_cost(net, mechanism, r)
        den = _den_cost(net, r)
        samples.append(CurveSample(r, num, den, num / den, _regime(net, mechanism, r)))
    return samples


def tail_ratio(net: ParallelNetwork, mechanism: Mechanism | None = None) -> float:
    """Limit of the cost ratio as demand grows without bound."""
    if mechanism is None or isinstance(mechanism[0], PlateauParams):
        return 1.0
    if net.has_flat_tail:
        return 1.0
    final_suffix = mechanism[0].stages[-1].suffix_net
    return net.eff_prefix[-1] / final_suffix.eff_prefix[-1]


def _quad_through(s: float, y0: float, y1: float, y2: float) -> tuple[float, float, float]:
    # Interpolate through (-s, y0), (0, y1), (s, y2); costs are quadratic per
    # segment, so this recovers the true coefficients up to rounding.
    a2 = (y0 - 2.0 * y1 + y2) / (2.0 * s * s)
    a1 = (y2 - y0) / (2.0 * s)
    return a2, a1, y1


def _quad_roots(A: float, B: float, C: float) -> list[float]:
    if A == 0.0:
        if B == 0.0:
            return []
        return [-C / B]
    disc = B * B - 4.0 * A * C
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    return [(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)]


def _segment_candidates(net: ParallelNetwork, mech: Mechanism | None,
                        p: float, q: float) -> list[float]:
    # Candidate demands inside one segment: analytic extrema of the ratio of
    # the two fitted quadratics, plus a coarse safety grid.
    out = []
    width = q - p
    mid = 0.5 * (p + q)
    step = 0.25 * width
    fit_rs = [mid - step, mid, mid + step]
    n2, n1, n0 = _quad_through(step, *[_num_cost(net, mech, r) for r in fit_rs])
    d2, d1, d0 = _quad_through(step, *[_den_cost(net, r) for r in fit_rs])
    A = n2 * d1 - n1 * d2
    B = 2.0 * (n2 * d0 - n0 * d2)
    C = n1 * d0 - n0 * d1
    for u in _quad_roots(A, B, C):
        r = u + mid
        if p < r < q:
            out.append(r)
    for i in range(1, 9):
        out.append(p + width * i / 9.0)
    return out


def _tail_candidates(net: ParallelNetwork, mech: Mechanism | None,
                     p: float) -> list[float]:
    delta = max(1.0, p)
    mid = p + 2.0 * delta
    fit_rs = [mid - delta, mid, mid + delta]
    n2, n1, n0 = _quad_through(delta, *[_num_cost(net, mech, r) for r in fit_rs])
    d2, d1, d0 = _quad_through(delta, *[_den_cost(net, r) for r in fit_rs])
    A = n2 * d1 - n1 * d2
    B = 2.0 * (n2 * d0 - n0 * d2)
    C = n1 * d0 - n0 * d1
    out = [r for u in _quad_roots(A, B, C) if (r := u + mid) > p]
    out.extend(p * f for f in (1.5, 2.0, 3.0, 5.0, 8.0))
    return out


def ratio_sup(net: ParallelNetwork, mechanism: Mechanism | None = None) -> tuple[float, float]:
    """Supremum of the cost ratio over all demands, with its location.

    Enumerates segment breakpoints, right limits just past each breakpoint,
    analytic per-segment extrema, the plateau jump limit and the tail limit.
    Ties go to the smallest demand; a supremum attained only in the limit of
    large demand reports location inf.
    """
    bps = curve_breakpoints(net, mechanism)
    cands: list[float] = [1.0] if not bps else []
    edges = [0.0, *bps]
    for b in bps:
        cands.append(b)
        cands.append(b * (1.0 + 1e-12))
    for p, q in zip(edges, edges[1:]):
        if q - p <= 1e-15 * max(1.0, q):
            continue
        cands.extend(_segment_candidates(net, mechanism, p, q))
    if bps:
        cands.extend(_tail_candidates(net, mechanism, bps[-1]))

    best_val = -INF
    best_r = INF
    for r in sorted({c for c in cands if c > 0.0 and math.isfinite(c)}):
        val = _ratio_at(net, mechanism, r)
        if val > best_val:
            best_val, best_r = val, r

    if mechanism is not None and isinstance(mechanism[0], PlateauParams):
        params, lats = mechanism
        if len(lats[0].starts) > 1:  # plateau actually present
            plateau_value = lats[0].value(params.hold_end)
            jump_val = plateau_value * params.jump_rate / _den_cost(net, params.jump_rate)
            if jump_val > best_val:
                best_val, best_r = jump_val, params.jump_rate

    tail = tail_ratio(net, mechanism)
    if tail > best_val:
        best_val, best_r = tail, INF
    return best_val, best_r


def two_link_simple_bound(R: float) -> BoundReport:
    """Worst-case ratio of the two-link threshold mechanism with multiplier R.

    max(1 + 1/R, (4+4R)/(4+3R)); the two sides meet at R = 4 where the bound
    is 5/4.
    """
    R = float(R)
    if not R >= 2.0:
        raise ParamTooSmall(f"multiplier must be >= 2, got {R}")
    freeze_side = 1.0 + 1.0 / R
    benign_side = (4.0 + 4.0 * R) / (4.0 + 3.0 * R)
    return BoundReport(
        name="two_link_threshold",
        value=max(freeze_side, benign_side),
        inputs=(R,),
        formula="max(1 + 1/R, (4+4R)/(4+3R))",
        details={"freeze_side": freeze_side, "benign_side": benign_side},
    )


def benign_bound(R_values: Sequence[float]) -> BoundReport:
    """Ratio bound when no link is super-efficient: 4P^2/(3P^2+1), P = prod(1+R_i)."""
    Rs = tuple(float(x) for x in R_values)
    for x in Rs:
        if not x >= 2.0:
            raise ParamTooSmall(f"multipliers must be >= 2, got {x}")
    P = math.prod(1.0 + x for x in Rs)
    value = 4.0 * P * P / (3.0 * P * P + 1.0)
    return BoundReport(
        name="benign",
        value=value,
        inputs=Rs,
        formula="4P^2/(3P^2+1), P = prod(1+R_i)",
        details={"P": P},
    )


def _exact_benign(Rs: Sequence[Fraction]) -> Fraction:
    P = Fraction(1)
    for x in Rs:
        P *= 1 + x
    return 4 * P * P / (3 * P * P + 1)


def _exact_recurrence(Rs: Sequence[Fraction]) -> Fraction:
    m = len(Rs)
    memo: list[Fraction] = [Fraction(1)] * (m + 1)
    for i in range(m - 1, -1, -1):
        best = _exact_benign(Rs[i:])
        for j in range(i, m):
            term = max(_exact_benign(Rs[i:j]), (1 + Fraction(1, 1) / Rs[j]) ** 2 * memo[j + 1])
            if term > best:
                best = term
        memo[i] = best
    return memo[0]


def recurrence_bound(R_values: Sequence[float]) -> BoundReport:
    """Worst-case ratio of the threshold mechanism via downward recursion.

    The value for multipliers R_i..R_{k-1} is the max of the all-benign bound
    and, over every position j that could host the first super-efficient
    link, max(benign bound of R_i..R_{j-1}, (1+1/R_j)^2 times the value of
    the remaining suffix).  Evaluated in exact rational arithmetic so the
    strict comparison against 4/3 stays meaningful when doubles saturate.
    """
    Rs = [Fraction(x) for x in R_values]
    for x in Rs:
        if x < 2:
            raise ParamTooSmall(f"multipliers must be >= 2, got {float(x)}")
    exact = _exact_recurrence(Rs)
    return BoundReport(
        name="recurrence",
        value=float(exact),
        inputs=tuple(float(x) for x in Rs),
        formula="max over first super-efficient position of benign and jump terms",
        details={
            "exact_numerator": str(exact.numerator),
            "exact_denominator": str(exact.denominator),
        },
        strictly_below_four_thirds=bool(exact < Fraction(4, 3)),
    )


def greedy_parameters(k: int) -> list[int]:
    """Integer multipliers keeping the recurrence bound strictly below 4/3.

    Works bottom-up: each new multiplier R is the smallest integer >= 2 with
    (1 + 1/R)^2 times the already-built suffix value below 4/3.  The suffix
    value is re-evaluated exactly after each step, so the guarantee is exact
    even when the integers get large.
    """
    if k < 1:
        raise ValueError(f"need at least one link, got k={k}")
    Rs: list[Fraction] = []
    inner = Fraction(1)
    four_thirds = Fraction(4, 3)
    for _ in range(k - 1):
        p, q = inner.numerator, inner.denominator
        # (4q - 3p) R^2 - 6p R - 3p > 0 with lead coefficient positive
        lead = 4 * q - 3 * p
        disc = 36 * p * p + 12 * p * lead
        R = max(2, (6 * p + math.isqrt(disc)) // (2 * lead) + 1)
        while not Fraction(R + 1, R) ** 2 * inner < four_thirds:
            R += 1
        Rs.insert(0, Fraction(R))
        inner = _exact_recurrence(Rs)
    return [int(x) for x in Rs]


def lower_bound_value(R: float, alpha_grid: int = 512) -> BoundReport:
    """Best ratio any latency modification can reach on a hard two-link family.

    The family has unit first slope, second slope 1/R and unit intercept gap,
    2 <= R <= 4.  Minimizes, over the demand x1 at which the first link is
    held, the larger of the hold peak and the best achievable jump peak, and
    caps the result at 6/5 (the unmodified ratio at the breakpoint).  Grid
    scan plus golden-section refinement.
    """
    R = float(R)
    if not 2.0 <= R <= 4.0:
        raise RatioOutOfRange(f"slope ratio must be in [2, 4], got {R}")

    def opt_cost_norm(x: float) -> float:
        return x * x if x <= 0.5 else (x * x + R * x - R / 4.0) / (1.0 + R)

    def hold_term(x1: float) -> float:
        return x1 * x1 / opt_cost_norm(x1)

    def jump_rate(x1: float) -> float:
        root = math.sqrt(R * R + 4.0 * R * R * x1 - 4.0 * R * x1 * x1)
        return max(1.0, (R + root) / (4.0 * x1))

    def jump_term(x1: float) -> float:
        rs = jump_rate(x1)
        return 4.0 * rs * (R + 1.0) * (rs - x1 + R) / (R * (4.0 * rs * rs + 4.0 * R * rs - R))

    def worst(x1: float) -> float:
        return max(hold_term(x1), jump_term(x1))

    n = max(3, int(alpha_grid))
    xs = [0.5 + 0.5 * i / (n - 1) for i in range(n)]
    best = min(range(n), key=lambda i: worst(xs[i]))
    a = xs[max(0, best - 1)]
    b = xs[min(n - 1, best + 1)]
    shrink = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - shrink * (b - a)
    d = a + shrink * (b - a)
    for _ in range(200):
        if worst(c) < worst(d):
            b = d
        else:
            a = c
        c = b - shrink * (b - a)
        d = a + shrink * (b - a)
        if b - a < 1e-15:
            break
    x1 = 0.5 * (a + b)
    value = min(1.2, worst(x1))
    return BoundReport(
        name="two_link_lower",
        value=value,
        inputs=(R,),
        formula="min(6/5, min over hold flow of max(hold peak, jump peak))",
        details={"x1": x1, "jump_rate": jump_rate(x1)},
    )


@dataclass(frozen=True)
class ContinuityCheck:
    """Outcome of the no-improvement check for continuous modifications."""

    ok: bool
    modified_cost: float
    nash_cost: float

    def __bool__(self) -> bool:
        return self.ok


def continuity_no_improvement_check(net: ParallelNetwork,
                                    modified: Sequence[PiecewiseLatency],
                                    rate: float,
                                    tol: float | None = None) -> ContinuityCheck:
    """Modifications continuous at their equilibrium cannot beat the selfish cost.

    Solves the modified equilibrium by water-filling, requires each modified
    latency to be continuous at its equilibrium flow (else raises
    NotContinuousAtEquilibrium) and checks the modified equilibrium cost is
    at least the unmodified one.
    """
    if tol is None:
        tol = comparison_tolerance()
    res = water_fill(modified, rate, latency_family="modified", tol=tol)
    for i, f in enumerate(res.profile.flows):
        left = modified[i].value(f)
        right = modified[i].right_liminf(f)
        if not abs(right - left) <= tol * max(1.0, abs(left)):
            raise NotContinuousAtEquilibrium(
                f"link {i} jumps at its equilibrium flow {f}: {left} -> {right}"
            )
    base = nash_flow(net, rate).cost
    ok = res.cost >= base - tol * max(1.0, base)
    return ContinuityCheck(ok, modified_cost=res.cost, nash_cost=base)
