"""Parallel-link instances, latency families and flow profiles.

A network is a set of parallel links between one source and one sink, each
link carrying an affine latency slope*x + intercept.  Normalization sorts
links by intercept, merges equal-intercept links into one (their
efficiencies add) and precomputes the prefix aggregates that every solver
downstream relies on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .config import IDENTITY_RTOL
from .errors import (
    EmptyNetwork,
    NegativeCoefficient,
    SchemaError,
    ZeroSlopeNotLast,
)

INF = math.inf


@dataclass(frozen=True)
class AffineLatency:
    """Latency slope*x + intercept of one link."""

    slope: float
    intercept: float

    def __post_init__(self) -> None:
        for name in ("slope", "intercept"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0.0:
                raise NegativeCoefficient(f"{name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def efficiency(self) -> float:
        """Flow absorbed per unit of latency increase (infinite when constant)."""
        return 1.0 / self.slope if self.slope > 0.0 else INF

    @property
    def flow_offset(self) -> float:
        """Intercept expressed in flow units, intercept / slope."""
        if self.slope > 0.0:
            return self.intercept / self.slope
        return INF if self.intercept > 0.0 else 0.0

    def value(self, x: float) -> float:
        return self.slope * x + self.intercept

    def right_liminf(self, x: float) -> float:
        # Affine latencies are continuous, the right limit is the value.
        return self.value(x)


@dataclass(frozen=True)
class ParallelNetwork:
    """Normalized instance: links sorted by intercept, prefix sums cached.

    Instances are produced by :func:`normalize_network`.  ``eff_prefix[j]``
    and ``off_prefix[j]`` accumulate ``efficiency`` and ``flow_offset`` over
    links ``0..j``; ``breakpoints[j]`` is the demand at which a selfish flow
    first touches link ``j``.
    """

    links: tuple[AffineLatency, ...]
    efficiency: tuple[float, ...]
    flow_offset: tuple[float, ...]
    eff_prefix: tuple[float, ...]
    off_prefix: tuple[float, ...]
    breakpoints: tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.links)

    @property
    def intercepts(self) -> tuple[float, ...]:
        return tuple(l.intercept for l in self.links)

    @property
    def slopes(self) -> tuple[float, ...]:
        return tuple(l.slope for l in self.links)

    @property
    def has_flat_tail(self) -> bool:
        """True when the last link has zero slope (unbounded capacity at fixed cost)."""
        return self.links[-1].slope == 0.0

    @property
    def opt_breakpoints(self) -> tuple[float, ...]:
        """Demands at which a system-optimal flow first touches each link."""
        return tuple(r / 2.0 for r in self.breakpoints)

    def suffix(self, start: int) -> "ParallelNetwork":
        """Sub-instance on links start..k-1 (already sorted and merged)."""
        return normalize_network(self.links[start:])

    def to_json_dict(self) -> dict:
        return {"links": [{"a": l.slope, "b": l.intercept} for l in self.links]}


def normalize_network(raw_links: Iterable[AffineLatency | Mapping[str, float]]) -> ParallelNetwork:
    """Sort by intercept, merge equal-intercept links, cache aggregates.

    Merging adds efficiencies: two links with intercepts tied at b behave
    like one link with slope 1 / (1/a1 + 1/a2).  After merging, a zero-slope
    link is only allowed in the last position; earlier ones could never be
    cheapest and are rejected rather than silently dropped.
    """
    links: list[AffineLatency] = []
    for item in raw_links:
        if isinstance(item, AffineLatency):
            links.append(item)
        elif isinstance(item, Mapping):
            try:
                links.append(AffineLatency(float(item["a"]), float(item["b"])))
            except KeyError as exc:
                raise SchemaError(f"link entry missing key {exc}") from exc
        else:
            raise SchemaError(f"cannot read link from {type(item).__name__}")
    if not links:
        raise EmptyNetwork("network needs at least one link")

    links.sort(key=lambda l: l.intercept)

    merged: list[AffineLatency] = []
    for link in links:
        if merged and merged[-1].intercept == link.intercept:
            prev = merged[-1]
            if prev.slope == 0.0 or link.slope == 0.0:
                slope = 0.0
            else:
                slope = 1.0 / (1.0 / prev.slope + 1.0 / link.slope)
            merged[-1] = AffineLatency(slope, link.intercept)
        else:
            merged.append(link)

    for i, link in enumerate(merged[:-1]):
        if link.slope == 0.0:
            raise ZeroSlopeNotLast(
                f"link {i} has zero slope but a larger-intercept link follows"
            )

    k = len(merged)
    eff = tuple(l.efficiency for l in merged)
    off = tuple(l.flow_offset for l in merged)
    eff_prefix = []
    off_prefix = []
    se = so = 0.0
    for e, o in zip(eff, off):
        se += e
        so += o
        eff_prefix.append(se)
        off_prefix.append(so)

    # breakpoints[j] = sum_{i<j} (b_j - b_i) * efficiency_i, finite even for a
    # zero-slope final link because only earlier efficiencies enter.
    intercepts = [l.intercept for l in merged]
    breakpoints = []
    for j in range(k):
        bj = intercepts[j]
        breakpoints.append(math.fsum((bj - intercepts[i]) * eff[i] for i in range(j)))

    net = ParallelNetwork(
        links=tuple(merged),
        efficiency=eff,
        flow_offset=off,
        eff_prefix=tuple(eff_prefix),
        off_prefix=tuple(off_prefix),
        breakpoints=tuple(breakpoints),
    )
    _check_aggregate_identities(net)
    return net


def _check_aggregate_identities(net: ParallelNetwork) -> None:
    # off_prefix[j] + breakpoints[j] == intercept_j * eff_prefix[j], and the
    # shifted variant against eff_prefix[j-1]; both only meaningful while the
    # prefix efficiency is finite.
    for j in range(net.k):
        if not math.isfinite(net.eff_prefix[j]):
            continue
        bj = net.links[j].intercept
        lhs = net.off_prefix[j] + net.breakpoints[j]
        rhs = bj * net.eff_prefix[j]
        if abs(lhs - rhs) > IDENTITY_RTOL * max(1.0, abs(rhs)):
            raise AssertionError(f"prefix identity failed at link {j}: {lhs} vs {rhs}")
        if j > 0:
            lhs2 = net.off_prefix[j - 1] + net.breakpoints[j]
            rhs2 = bj * net.eff_prefix[j - 1]
            if abs(lhs2 - rhs2) > IDENTITY_RTOL * max(1.0, abs(rhs2)):
                raise AssertionError(
                    f"shifted prefix identity failed at link {j}: {lhs2} vs {rhs2}"
                )


def network_from_dict(obj: object) -> ParallelNetwork:
    """Build a network from the JSON shape {"links": [{"a": .., "b": ..}, ..]}."""
    if not isinstance(obj, Mapping) or "links" not in obj:
        raise SchemaError('network object must be {"links": [...]}')
    entries = obj["links"]
    if not isinstance(entries, Sequence) or isinstance(entries, (str, bytes)):
        raise SchemaError('"links" must be a list of {"a": .., "b": ..} entries')
    out = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, Mapping):
            raise SchemaError(f"link {i} is not an object")
        try:
            a = float(entry["a"])
            b = float(entry["b"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f'link {i} needs numeric "a" and "b"') from exc
        out.append(AffineLatency(a, b))
    return normalize_network(out)


@dataclass(frozen=True)
class PiecewiseLatency:
    """Non-decreasing piecewise-affine latency with optional hard cap.

    Segment i applies on the interval (starts[i], starts[i+1]]; the first
    segment also covers 0.  At a boundary the stored value is therefore the
    left limit, which keeps the function lower semicontinuous when it jumps.
    Flows strictly above ``cap`` cost +inf; flow exactly at the cap keeps its
    finite value, so a capped link can be loaded to the cap but never past it.
    """

    starts: tuple[float, ...]
    slopes: tuple[float, ...]
    offsets: tuple[float, ...]
    cap: float = INF

    def __post_init__(self) -> None:
        if not self.starts or len(self.starts) != len(self.slopes) or len(self.starts) != len(self.offsets):
            raise ValueError("segments need matching starts/slopes/offsets")
        object.__setattr__(self, "starts", tuple(float(s) for s in self.starts))
        object.__setattr__(self, "slopes", tuple(float(s) for s in self.slopes))
        object.__setattr__(self, "offsets", tuple(float(o) for o in self.offsets))
        object.__setattr__(self, "cap", float(self.cap))
        if self.starts[0] != 0.0:
            raise ValueError("first segment must start at 0")
        for a, b in zip(self.starts, self.starts[1:]):
            if not b > a:
                raise ValueError("segment starts must be strictly increasing")
        for m in self.slopes:
            if not math.isfinite(m) or m < 0.0:
                raise ValueError("segment slopes must be finite and >= 0")
        for c in self.offsets:
            if not math.isfinite(c):
                raise ValueError("segment offsets must be finite")
        if math.isnan(self.cap) or self.cap < 0.0:
            raise ValueError("cap must be >= 0")
        # Non-decreasing across boundaries: left value <= right value.
        for i in range(1, len(self.starts)):
            s = self.starts[i]
            left = self.slopes[i - 1] * s + self.offsets[i - 1]
            right = self.slopes[i] * s + self.offsets[i]
            if right < left - 1e-12 * max(1.0, abs(left)):
                raise ValueError(f"value drops at boundary {s}: {left} -> {right}")

    @classmethod
    def from_affine(cls, lat: AffineLatency, cap: float = INF) -> "PiecewiseLatency":
        return cls(starts=(0.0,), slopes=(lat.slope,), offsets=(lat.intercept,), cap=cap)

    @cached_property
    def _starts_arr(self) -> np.ndarray:
        return np.asarray(self.starts)

    @cached_property
    def _slopes_arr(self) -> np.ndarray:
        return np.asarray(self.slopes)

    @cached_property
    def _offsets_arr(self) -> np.ndarray:
        return np.asarray(self.offsets)

    def value(self, x: float) -> float:
        """Latency at flow x (the left limit at segment boundaries)."""
        if x > self.cap:
            return INF
        idx = int(np.searchsorted(self._starts_arr, x, side="left")) - 1
        if idx < 0:
            idx = 0
        return self.slopes[idx] * x + self.offsets[idx]

    def right_liminf(self, x: float) -> float:
        """Limit of the latency from the right of x."""
        if x >= self.cap:
            return INF
        idx = int(np.searchsorted(self._starts_arr, x, side="right")) - 1
        if idx < 0:
            idx = 0
        return self.slopes[idx] * x + self.offsets[idx]

    def value_many(self, xs: np.ndarray) -> np.ndarray:
        idx = np.clip(np.searchsorted(self._starts_arr, xs, side="left") - 1, 0, None)
        out = self._slopes_arr[idx] * xs + self._offsets_arr[idx]
        return np.where(xs > self.cap, INF, out)

    def right_liminf_many(self, xs: np.ndarray) -> np.ndarray:
        idx = np.clip(np.searchsorted(self._starts_arr, xs, side="right") - 1, 0, None)
        out = self._slopes_arr[idx] * xs + self._offsets_arr[idx]
        return np.where(xs >= self.cap, INF, out)

    def flow_boundaries(self) -> tuple[float, ...]:
        """Finite flow values where the description changes (segment starts, cap)."""
        pts = list(self.starts[1:])
        if math.isfinite(self.cap):
            pts.append(self.cap)
        return tuple(sorted(set(pts)))

    def level_candidates(self) -> tuple[float, ...]:
        """Latency values attained at segment corners; used to snap levels."""
        vals = set()
        n = len(self.starts)
        for i in range(n):
            s = self.starts[i]
            e = self.starts[i + 1] if i + 1 < n else self.cap
            vals.add(self.slopes[i] * s + self.offsets[i])
            if math.isfinite(e) and e > s:
                vals.add(self.slopes[i] * min(e, self.cap) + self.offsets[i])
        return tuple(sorted(v for v in vals if math.isfinite(v)))

    def is_monotone(self, samples: int = 1000) -> bool:
        """Re-check monotonicity on a sample grid (construction already enforces it)."""
        span = max(1.0, 2.0 * self.starts[-1], 2.0 * self.cap if math.isfinite(self.cap) else 0.0)
        xs = np.linspace(0.0, span, samples)
        vals = self.value_many(xs)
        return bool(np.all(np.diff(vals) >= -1e-12 * np.maximum(1.0, np.abs(vals[:-1]))))

    def dominates(self, base: AffineLatency, samples: int = 1000) -> bool:
        """True when this latency never undercuts the base affine latency."""
        span = max(1.0, 2.0 * self.starts[-1], 2.0 * self.cap if math.isfinite(self.cap) else 0.0)
        xs = np.linspace(0.0, span, samples)
        vals = self.value_many(xs)
        ref = base.slope * xs + base.intercept
        return bool(np.all(vals >= ref - 1e-12 * np.maximum(1.0, np.abs(ref))))


@dataclass(frozen=True)
class FlowProfile:
    """Per-link flows for one demand rate.

    ``latency_family`` records which latencies the profile was computed
    against ("original" or "modified").  Flows must be non-negative and sum
    to the rate within 1e-9 relative.
    """

    rate: float
    flows: tuple[float, ...]
    latency_family: str = "original"

    def __post_init__(self) -> None:
        rate = float(self.rate)
        flows = [float(f) for f in self.flows]
        scale = max(1.0, abs(rate))
        for i, f in enumerate(flows):
            if f < -1e-9 * scale:
                raise ValueError(f"flow {i} is negative: {f}")
            if f < 0.0:
                flows[i] = 0.0
        total = math.fsum(flows)
        if abs(total - rate) > 1e-9 * scale:
            raise ValueError(f"flows sum to {total}, expected {rate}")
        object.__setattr__(self, "rate", rate)
        object.__setattr__(self, "flows", tuple(flows))

    @property
    def used_count(self) -> int:
        return sum(1 for f in self.flows if f > 0.0)
