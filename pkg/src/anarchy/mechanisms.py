"""Coordination mechanisms that modify latencies to tame selfish routing.

Two constructions are provided.  The threshold mechanism caps a prefix of
links at their selfish flows the moment demand reaches half the breakpoint
of a "super-efficient" link (one whose efficiency exceeds a chosen multiple
of the prefix it joins); the construction recurses on the remaining suffix.
The plateau mechanism, for two links, flattens the first latency between
two flow marks so the second link opens earlier, trading a bounded jump for
a better worst-case ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .config import comparison_tolerance
from .equilibrium import nash_flow
from .errors import (
    BadParamCount,
    NegativeRate,
    NotTwoLinks,
    ParamOutOfRange,
    ParamTooSmall,
    RatioTooSmall,
    SchemaError,
)
from .model import INF, FlowProfile, ParallelNetwork, PiecewiseLatency

# Below this slope ratio the unmodified two-link instance already meets the
# plateau mechanism's 1.192 target, so the identity modification is used.
MIN_PLATEAU_RATIO = 96.0 / 53.0
PLATEAU_TARGET = 1.192


@dataclass(frozen=True)
class FreezeStage:
    """One step of the threshold recursion.

    Links start..start+len(caps)-1 are frozen at ``caps`` once the suffix
    that begins at ``start`` has absorbed ``local_freeze_rate``; a final
    stage (no trigger) has empty caps and absorbs everything that remains.
    """

    start: int
    caps: tuple[float, ...]
    local_freeze_rate: float | None
    global_start_rate: float
    suffix_net: ParallelNetwork
    trigger: int | None


@dataclass(frozen=True)
class ThresholdParams:
    """Threshold mechanism state built for one network."""

    R: tuple[float, ...]
    thresholds: tuple[float | None, ...]
    freeze_points: tuple[float, ...]
    super_efficient: tuple[int, ...]
    stages: tuple[FreezeStage, ...]


def build_threshold_mechanism(
    net: ParallelNetwork, R: Sequence[float]
) -> tuple[ThresholdParams, list[PiecewiseLatency]]:
    """Cap links at their running flows ahead of each super-efficient link.

    R holds k-1 multipliers, all >= 2.  Link t+1 is super-efficient when
    efficiency[t+1] > R[t] * (total efficiency of links 0..t).  When total
    demand reaches half the breakpoint of a super-efficient link, every link
    below it freezes at the flow it carries right then; further demand fills
    the remaining links selfishly until the next super-efficient link, and so
    on.  Links above the last super-efficient one (always including the last
    link) keep their latencies.
    """
    R = tuple(float(x) for x in R)
    if len(R) != net.k - 1:
        raise BadParamCount(f"need {net.k - 1} parameters for {net.k} links, got {len(R)}")
    for x in R:
        if not x >= 2.0:
            raise ParamTooSmall(f"threshold parameters must be >= 2, got {x}")

    stages: list[FreezeStage] = []
    thresholds: list[float | None] = [None] * net.k
    freeze_points: list[float] = []
    supers: list[int] = []
    s = 0
    global_start = 0.0
    while True:
        suffix = net.suffix(s)
        trigger = None
        for t in range(s, net.k - 1):
            if net.efficiency[t + 1] > R[t] * net.eff_prefix[t]:
                trigger = t
                break
        if trigger is None:
            stages.append(FreezeStage(s, (), None, global_start, suffix, None))
            break
        freeze_total = net.breakpoints[trigger + 1] / 2.0
        local_freeze = freeze_total - global_start
        frozen = nash_flow(suffix, local_freeze)
        caps = frozen.profile.flows[: trigger - s + 1]
        stages.append(FreezeStage(s, caps, local_freeze, global_start, suffix, trigger + 1))
        for off, cap in enumerate(caps):
            thresholds[s + off] = cap
        freeze_points.append(freeze_total)
        supers.append(trigger + 1)
        global_start = freeze_total
        s = trigger + 1

    params = ThresholdParams(
        R=R,
        thresholds=tuple(thresholds),
        freeze_points=tuple(freeze_points),
        super_efficient=tuple(supers),
        stages=tuple(stages),
    )
    lats = [
        PiecewiseLatency.from_affine(link, cap=INF if cap is None else cap)
        for link, cap in zip(net.links, params.thresholds)
    ]
    return params, lats


def mn_flow(net: ParallelNetwork, params: ThresholdParams, rate: float) -> FlowProfile:
    """Equilibrium flow under the threshold modification.

    Demand fills each stage's suffix selfishly until the stage freezes, then
    spills into the next suffix; below the first freeze point this is the
    unmodified selfish flow.
    """
    if rate < 0.0:
        raise NegativeRate(f"rate must be >= 0, got {rate}")
    flows = [0.0] * net.k
    remaining = rate
    for stage in params.stages:
        if stage.local_freeze_rate is None or remaining <= stage.local_freeze_rate:
            inner = nash_flow(stage.suffix_net, remaining)
            for off, f in enumerate(inner.profile.flows):
                flows[stage.start + off] = f
            remaining = 0.0
            break
        for off, cap in enumerate(stage.caps):
            flows[stage.start + off] = cap
        remaining -= stage.local_freeze_rate
    return FlowProfile(rate=rate, flows=tuple(flows), latency_family="modified")


@dataclass(frozen=True)
class LinkUsageCheck:
    """Outcome of the usage-order check, with the first offending link if any."""

    ok: bool
    link: int | None = None
    first_used_rate: float | None = None
    opt_start_rate: float | None = None

    def __bool__(self) -> bool:
        return self.ok


def mn_uses_links_no_earlier_than_opt(
    net: ParallelNetwork, params: ThresholdParams, tol: float = 1e-9
) -> LinkUsageCheck:
    """Verify the modified flow never opens a link before the optimum would.

    The rate at which the modified flow first loads link h is the stage's
    global start plus the suffix breakpoint of h; it must be at least half
    the global breakpoint of h.  Frozen-at-zero links never open.
    """
    for stage in params.stages:
        span = len(stage.caps) if stage.caps else stage.suffix_net.k
        for off in range(span):
            h = stage.start + off
            if stage.caps and stage.caps[off] == 0.0:
                continue  # frozen before ever opening
            first_used = stage.global_start_rate + stage.suffix_net.breakpoints[off]
            opt_start = net.breakpoints[h] / 2.0
            if first_used < opt_start - tol:
                return LinkUsageCheck(False, link=h, first_used_rate=first_used,
                                      opt_start_rate=opt_start)
    return LinkUsageCheck(True)


@dataclass(frozen=True)
class PlateauParams:
    """Two-link plateau marks and the rates they induce.

    The first latency is held constant at its hold_end value while flow is
    between hold_start and hold_end.  jump_rate is the demand where the
    second link's latency catches up with the plateau (the modified flow
    jumps there); resume_rate is where the modified flow rejoins the
    unmodified selfish flow.
    """

    hold_start: float
    hold_end: float
    jump_rate: float
    resume_rate: float
    slope_ratio: float
    nash_breakpoint: float

    @property
    def alpha(self) -> float:
        """hold_start in units of the second link's breakpoint."""
        return self.hold_start / self.nash_breakpoint

    @property
    def beta(self) -> float:
        """jump_rate in units of the second link's breakpoint."""
        return self.jump_rate / self.nash_breakpoint

    @classmethod
    def from_flows(cls, net: ParallelNetwork, hold_start: float,
                   hold_end: float) -> "PlateauParams":
        if net.k != 2:
            raise NotTwoLinks(f"plateau mechanism needs 2 links, got {net.k}")
        a1, b1 = net.links[0].slope, net.links[0].intercept
        a2, b2 = net.links[1].slope, net.links[1].intercept
        if a2 <= 0.0:
            raise ParamOutOfRange("plateau mechanism needs a positive second slope")
        r2 = net.breakpoints[1]
        tol = 1e-9 * max(1.0, r2)
        if not (r2 / 2.0 - tol <= hold_start <= r2 + tol):
            raise ParamOutOfRange(
                f"hold_start {hold_start} outside [{r2 / 2.0}, {r2}]"
            )
        if hold_end < r2 - tol:
            raise ParamOutOfRange(f"hold_end {hold_end} below breakpoint {r2}")
        if hold_end < hold_start:
            raise ParamOutOfRange("hold_end must be >= hold_start")
        plateau_value = a1 * hold_end + b1
        jump_rate = hold_start + (plateau_value - b2) / a2
        if jump_rate < r2 - tol:
            raise ParamOutOfRange(f"induced jump rate {jump_rate} below breakpoint {r2}")
        return cls(
            hold_start=float(hold_start),
            hold_end=float(hold_end),
            jump_rate=float(jump_rate),
            resume_rate=float(jump_rate - hold_start + hold_end),
            slope_ratio=a1 / a2,
            nash_breakpoint=r2,
        )


def build_plateau_mechanism(
    net: ParallelNetwork, params: PlateauParams
) -> tuple[PiecewiseLatency, PiecewiseLatency]:
    """Hold the first latency flat between the two marks; second link unchanged.

    When the slope ratio is at most 96/53 the unmodified instance already
    meets the target, so both latencies are returned as-is.
    """
    if net.k != 2:
        raise NotTwoLinks(f"plateau mechanism needs 2 links, got {net.k}")
    first, second = net.links
    identity = (PiecewiseLatency.from_affine(first), PiecewiseLatency.from_affine(second))
    if second.slope <= 0.0:
        raise ParamOutOfRange("plateau mechanism needs a positive second slope")
    ratio = first.slope / second.slope
    if ratio <= MIN_PLATEAU_RATIO:
        return identity
    if abs(params.slope_ratio - ratio) > 1e-9 * max(1.0, ratio):
        raise ParamOutOfRange("parameters were built for a different network")
    if params.hold_end <= params.hold_start:
        return identity
    plateau_value = first.value(params.hold_end)
    modified = PiecewiseLatency(
        starts=(0.0, params.hold_start, params.hold_end),
        slopes=(first.slope, 0.0, first.slope),
        offsets=(first.intercept, plateau_value, first.intercept),
    )
    return modified, identity[1]


def _plateau_terms(ratio: float) -> tuple:
    """Normalized peak-ratio terms of the plateau construction.

    alpha and beta are the hold start and jump rate in breakpoint units.
    hold_peak is the ratio just before the second link opens; jump_peak the
    ratio just after the modified flow jumps.  beta_for minimizes the jump
    peak for a given alpha.
    """
    R = ratio

    def hold_peak(alpha: float) -> float:
        return 4.0 * (R + 1.0) * alpha * alpha / (4.0 * alpha * R - R + 4.0 * alpha * alpha)

    def beta_for(alpha: float) -> float:
        return (R + math.sqrt(R) * math.sqrt(R + 4.0 * alpha * (R - alpha))) / (4.0 * alpha)

    def jump_peak(alpha: float) -> float:
        b = beta_for(alpha)
        return 4.0 * b * (R + 1.0) * (b - alpha + R) / (R * (4.0 * b * b + 4.0 * b * R - R))

    return hold_peak, beta_for, jump_peak


def solve_plateau_params(net: ParallelNetwork) -> PlateauParams:
    """Pick plateau marks that balance the two worst-case peaks.

    The closed-form alpha0 makes the pre-opening peak exactly 1.192; the
    balanced alpha in [1/2, alpha0] equates it with the post-jump peak
    (minimized over the jump rate), which only lowers the maximum.  Requires
    a slope ratio above 96/53.
    """
    if net.k != 2:
        raise NotTwoLinks(f"plateau mechanism needs 2 links, got {net.k}")
    a1 = net.links[0].slope
    a2 = net.links[1].slope
    if a2 <= 0.0:
        raise ParamOutOfRange("plateau mechanism needs a positive second slope")
    R = a1 / a2
    if R <= MIN_PLATEAU_RATIO:
        raise RatioTooSmall(
            f"slope ratio {R} is at most {MIN_PLATEAU_RATIO}; no modification needed"
        )
    hold_peak, beta_for, jump_peak = _plateau_terms(R)
    alpha0 = (149.0 * R + 2.0 * math.sqrt(894.0 * R * (R + 1.0))) / (2.0 * (125.0 * R - 24.0))

    def gap(alpha: float) -> float:
        return hold_peak(alpha) - jump_peak(alpha)

    lo, hi = 0.5, alpha0
    if gap(hi) < 0.0:
        alpha = hi
    elif gap(lo) > 0.0:
        alpha = lo
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if gap(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        alpha = 0.5 * (lo + hi)

    r2 = net.breakpoints[1]
    beta = beta_for(alpha)
    hold_start = alpha * r2
    hold_end = r2 * ((beta - alpha) / R + 1.0)
    return PlateauParams.from_flows(net, hold_start, hold_end)


def mechanism_to_dict(params: ThresholdParams | PlateauParams) -> dict:
    """JSON shape for a mechanism; derived fields are intentionally dropped."""
    if isinstance(params, ThresholdParams):
        return {"kind": "threshold", "R": list(params.R)}
    return {"kind": "plateau", "x1": params.hold_start, "x2": params.hold_end}


def mechanism_from_dict(net: ParallelNetwork, obj: object):
    """Rebuild a mechanism from its JSON shape, recomputing all derived state.

    Returns (params, latencies).  A plateau entry without marks solves for
    the balanced ones.
    """
    if not isinstance(obj, Mapping) or "kind" not in obj:
        raise SchemaError('mechanism object must carry a "kind"')
    kind = obj["kind"]
    if kind == "threshold":
        if "R" not in obj or not isinstance(obj["R"], Sequence):
            raise SchemaError('threshold mechanism needs an "R" list')
        try:
            R = [float(x) for x in obj["R"]]
        except (TypeError, ValueError) as exc:
            raise SchemaError('"R" entries must be numeric') from exc
        return build_threshold_mechanism(net, R)
    if kind == "plateau":
        if "x1" in obj or "x2" in obj:
            try:
                x1 = float(obj["x1"])
                x2 = float(obj["x2"])
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError('plateau mechanism needs numeric "x1" and "x2"') from exc
            params = PlateauParams.from_flows(net, x1, x2)
        else:
            params = solve_plateau_params(net)
        return params, list(build_plateau_mechanism(net, params))
    raise SchemaError(f"unknown mechanism kind {kind!r}")
