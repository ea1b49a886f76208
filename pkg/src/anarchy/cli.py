"""Command-line front end.

Subcommands: ``solve`` prints one flow table, ``curve`` sweeps the cost
ratio into CSV (optionally SVG), ``bounds`` evaluates the closed-form
worst-case bounds and ``verify`` runs built-in invariant suites.  Runs that
write files also drop a ``run_manifest.json`` next to them recording input
digests, tool version and tolerances.

Exit codes: 0 success, 1 verification failure, 2 malformed input or usage,
3 parameter outside a solver's domain, 4 filesystem trouble.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import random
import sys
from datetime import datetime, timezone
from fractions import Fraction

from .analysis import (
    Mechanism,
    benign_bound,
    curve_breakpoints,
    greedy_parameters,
    lower_bound_value,
    ratio_curve,
    ratio_sup,
    recurrence_bound,
    tail_ratio,
    two_link_simple_bound,
)
from .config import IDENTITY_RTOL, comparison_tolerance
from .equilibrium import nash_flow, opt_flow, water_fill, worst_equilibrium_cost_two_links
from .errors import AnarchyError, SchemaError
from .mechanisms import (
    build_plateau_mechanism,
    build_threshold_mechanism,
    mechanism_from_dict,
    mn_uses_links_no_earlier_than_opt,
    solve_plateau_params,
)
from .model import (
    INF,
    ParallelNetwork,
    PiecewiseLatency,
    network_from_dict,
    normalize_network,
)

try:
    from importlib.metadata import PackageNotFoundError, version

    _VERSION = version("anarchy")
except PackageNotFoundError:  # running from a source tree
    _VERSION = "0.1.0"


def _load_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _load_network(path: str) -> ParallelNetwork:
    return network_from_dict(_load_json(path))


def _load_mechanism(path: str, net: ParallelNetwork) -> Mechanism:
    params, lats = mechanism_from_dict(net, _load_json(path))
    return params, lats


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(directory: str, argv: list[str], inputs: list[str],
                    outputs: list[str]) -> str:
    manifest = {
        "command": ["anarchy", *argv],
        "version": _VERSION,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": outputs,
        "tolerances": {"comparison": comparison_tolerance(), "identity": IDENTITY_RTOL},
    }
    path = os.path.join(directory or ".", "run_manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def cmd_solve(args: argparse.Namespace) -> int:
    net = _load_network(args.network)
    rate = args.rate
    if args.which == "mn":
        if args.mechanism is None:
            raise SchemaError("--which mn needs --mechanism")
        params, lats = _load_mechanism(args.mechanism, net)
        res = water_fill(lats, rate, latency_family="modified")
        latencies = [lats[i].value(f) for i, f in enumerate(res.profile.flows)]
    else:
        res = nash_flow(net, rate) if args.which == "nash" else opt_flow(net, rate)
        latencies = [net.links[i].value(f) for i, f in enumerate(res.profile.flows)]

    print(f"{args.which} flow on {net.k} links at rate {_fmt(rate)}")
    print(f"{'link':>4}  {'flow':>12}  {'latency':>12}")
    for i, (f, lat) in enumerate(zip(res.profile.flows, latencies)):
        print(f"{i:>4}  {_fmt(f):>12}  {_fmt(lat):>12}")
    print(f"cost {_fmt(res.cost)}  level {_fmt(res.level)}  used {res.used_count}")
    return 0


def _curve_rows(net: ParallelNetwork, mech: Mechanism | None,
                rmax: float | None, samples: int) -> tuple[list[float], tuple[float, ...]]:
    bps = curve_breakpoints(net, mech)
    if rmax is None:
        rmax = max(1.0, 2.0 * max(bps, default=0.5))
    rows = {rmax * i / samples for i in range(1, samples + 1)}
    for b in bps:
        if b <= rmax:
            rows.add(b)
            rows.add(b * (1.0 + 1e-12))
    return sorted(rows), bps


def cmd_curve(args: argparse.Namespace) -> int:
    net = _load_network(args.network)
    mech = _load_mechanism(args.mechanism, net) if args.mechanism else None
    rows, bps = _curve_rows(net, mech, args.rmax, args.samples)
    samples = ratio_curve(net, mech, rows)
    tail = tail_ratio(net, mech)

    lines = ["r,cost_num,cost_den,ratio,regime"]
    for s in samples:
        lines.append(f"{s.r!r},{s.cost_num!r},{s.cost_den!r},{s.ratio!r},{s.regime}")
    lines.append(f"{INF!r},{INF!r},{INF!r},{tail!r},tail")
    with open(args.csv, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    outputs = [args.csv]

    if args.svg:
        _emit_svg(args.svg, samples, bps)
        outputs.append(args.svg)

    _write_manifest(os.path.dirname(os.path.abspath(args.csv)), args._argv,
                    [p for p in (args.network, args.mechanism) if p], outputs)
    val, where = ratio_sup(net, mech)
    print(f"wrote {', '.join(outputs)}; ratio peaks at {_fmt(val)} (r = {_fmt(where)})")
    return 0


def _emit_svg(path: str, samples, breakpoints) -> None:
    """Hand-rolled 800x500 line chart: one polyline per regime run, dashed
    verticals at breakpoints, open/closed circle pairs at jumps."""
    pts = [(s.r, s.ratio, s.regime) for s in samples if math.isfinite(s.r)]
    if not pts:
        raise AnarchyError("nothing to plot")
    xmax = max(r for r, _, _ in pts)
    ys = [y for _, y, _ in pts]
    ymin, ymax = min(ys), max(ys)
    if ymax - ymin < 1e-9:
        ymin, ymax = ymin - 0.05, ymax + 0.05
    pad = 0.05 * (ymax - ymin)
    ymin -= pad
    ymax += pad
    W, H, L, R, T, B = 800, 500, 60.0, 20.0, 20.0, 40.0

    def X(r: float) -> float:
        return L + (W - L - R) * r / xmax

    def Y(v: float) -> float:
        return (H - B) - (H - T - B) * (v - ymin) / (ymax - ymin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{L}" y1="{H - B}" x2="{W - R}" y2="{H - B}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>',
        f'<text x="{L}" y="{H - B + 16}" font-size="12">0</text>',
        f'<text x="{W - R - 30}" y="{H - B + 16}" font-size="12">{xmax:.4g}</text>',
        f'<text x="4" y="{Y(ymin) + 4:.2f}" font-size="12">{ymin:.4g}</text>',
        f'<text x="4" y="{Y(ymax) + 4:.2f}" font-size="12">{ymax:.4g}</text>',
    ]
    for bp in breakpoints:
        if 0.0 < bp <= xmax:
            parts.append(
                f'<line x1="{X(bp):.2f}" y1="{T}" x2="{X(bp):.2f}" y2="{H - B}" '
                f'stroke="gray" stroke-dasharray="4 3"/>'
            )

    runs: list[list[tuple[float, float]]] = []
    current_regime = None
    for r, v, regime in pts:
        if regime != current_regime:
            runs.append([])
            current_regime = regime
        runs[-1].append((r, v))
    for run in runs:
        if len(run) == 1:
            r, v = run[0]
            parts.append(f'<circle cx="{X(r):.2f}" cy="{Y(v):.2f}" r="2" fill="steelblue"/>')
            continue
        coords = " ".join(f"{X(r):.2f},{Y(v):.2f}" for r, v in run)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="steelblue" stroke-width="1.5"/>')
    for a, b in zip(runs, runs[1:]):
        (ra, va), (rb, vb) = a[-1], b[0]
        if rb - ra <= 1e-6 * max(1.0, rb) and abs(vb - va) > 1e-9 * max(1.0, abs(va)):
            parts.append(
                f'<circle cx="{X(ra):.2f}" cy="{Y(va):.2f}" r="3.5" '
                f'fill="white" stroke="steelblue"/>'
            )
            parts.append(f'<circle cx="{X(rb):.2f}" cy="{Y(vb):.2f}" r="3.5" fill="steelblue"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def cmd_bounds(args: argparse.Namespace) -> int:
    kind = args.kind
    if kind == "greedy":
        if args.links is None:
            raise SchemaError("greedy bound needs --links")
        Rs = greedy_parameters(args.links)
        report = recurrence_bound(Rs)
        print(f"multipliers for {args.links} links: {Rs}")
    else:
        if not args.R:
            raise SchemaError(f"{kind} bound needs --R")
        if kind == "simple2":
            if len(args.R) != 1:
                raise SchemaError("simple2 takes one multiplier")
            report = two_link_simple_bound(args.R[0])
        elif kind == "benign":
            report = benign_bound(args.R)
        elif kind == "recurrence":
            report = recurrence_bound(args.R)
        else:  # lower
            if len(args.R) != 1:
                raise SchemaError("lower takes one slope ratio")
            report = lower_bound_value(args.R[0])

    print(f"{report.name}: {report.value!r}")
    print(f"  inputs  {list(report.inputs)}")
    print(f"  formula {report.formula}")
    if report.details:
        for key, val in report.details.items():
            print(f"  {key} = {val}")
    if report.strictly_below_four_thirds is not None:
        print(f"  strictly below 4/3: {report.strictly_below_four_thirds}")
    return 0


def _random_network(rng: random.Random, kmax: int = 5) -> ParallelNetwork:
    k = rng.randint(1, kmax)
    links = [
        {"a": rng.uniform(0.1, 5.0), "b": rng.uniform(0.0, 4.0)} for _ in range(k)
    ]
    return normalize_network(links)


def _checks_core():
    def pigou_peak():
        net = normalize_network([{"a": 1, "b": 0}, {"a": 0, "b": 1}])
        val, where = ratio_sup(net)
        assert abs(val - 4.0 / 3.0) <= 1e-12, f"peak {val}"
        assert abs(where - 1.0) <= 1e-9, f"peak location {where}"

    def pigou_cap_flat():
        net = normalize_network([{"a": 1, "b": 0}, {"a": 0, "b": 1}])
        mech = build_threshold_mechanism(net, [2.0])
        rows = [0.01 + 2.99 * i / 200 for i in range(201)]
        for s in ratio_curve(net, mech, rows):
            assert abs(s.ratio - 1.0) <= 1e-12, f"ratio {s.ratio} at r={s.r}"

    def bound_meets_at_four():
        rep = two_link_simple_bound(4.0)
        assert abs(rep.value - 1.25) <= 1e-12, rep.value

    def water_fill_closed_form():
        nets = [
            normalize_network([{"a": 1, "b": 0}, {"a": 1, "b": 1}]),
            normalize_network([{"a": 2, "b": 0.5}, {"a": 0.25, "b": 1}, {"a": 1, "b": 3}]),
        ]
        for net in nets:
            lats = [PiecewiseLatency.from_affine(link) for link in net.links]
            for rate in (0.0, 0.3, 1.0, 2.7, 9.0):
                wf = water_fill(lats, rate)
                cf = nash_flow(net, rate)
                assert abs(wf.cost - cf.cost) <= 1e-9 * max(1.0, cf.cost), (
                    f"{wf.cost} vs {cf.cost} at rate {rate}"
                )

    return [
        ("pigou_peak_four_thirds", pigou_peak),
        ("pigou_cap_curve_flat", pigou_cap_flat),
        ("two_link_bound_meets_at_four", bound_meets_at_four),
        ("water_fill_matches_closed_form", water_fill_closed_form),
    ]


def _checks_known():
    def recurrence_pair():
        rep = recurrence_bound([7.0])
        assert rep.details is not None
        got = Fraction(int(rep.details["exact_numerator"]),
                       int(rep.details["exact_denominator"]))
        assert got == Fraction(256, 193), got

    def benign_pair():
        rep = benign_bound([2.0, 2.0])
        assert abs(rep.value - 324.0 / 244.0) <= 1e-12, rep.value

    def plateau_target():
        net = normalize_network([{"a": 2, "b": 0}, {"a": 1, "b": 1}])
        params = solve_plateau_params(net)
        lats = list(build_plateau_mechanism(net, params))
        val, _ = ratio_sup(net, (params, lats))
        assert val <= 1.192 + 1e-3, val

    def lower_at_two_point_one():
        rep = lower_bound_value(2.1)
        assert rep.value >= 1.191, rep.value

    def greedy_below_four_thirds():
        for k in (2, 3, 4):
            rep = recurrence_bound(greedy_parameters(k))
            assert rep.strictly_below_four_thirds, (k, rep.value)

    return [
        ("recurrence_single_seven", recurrence_pair),
        ("benign_two_twos", benign_pair),
        ("plateau_meets_target", plateau_target),
        ("lower_bound_holds", lower_at_two_point_one),
        ("greedy_parameters_below_four_thirds", greedy_below_four_thirds),
    ]


def _checks_random(seed: int):
    def water_fill_agrees():
        rng = random.Random(seed)
        for _ in range(100):
            net = _random_network(rng)
            lats = [PiecewiseLatency.from_affine(link) for link in net.links]
            rate = rng.uniform(0.0, 4.0 * (net.breakpoints[-1] + 1.0))
            wf = water_fill(lats, rate)
            cf = nash_flow(net, rate)
            assert abs(wf.cost - cf.cost) <= 1e-9 * max(1.0, cf.cost), (
                f"{wf.cost} vs {cf.cost} at rate {rate}"
            )

    def two_link_bound_holds():
        rng = random.Random(seed + 1)
        for _ in range(100):
            a1 = rng.uniform(0.2, 4.0)
            a2 = rng.uniform(0.05, a1)
            b2 = rng.uniform(0.1, 3.0)
            net = normalize_network([{"a": a1, "b": 0.0}, {"a": a2, "b": b2}])
            R = rng.uniform(2.0, 8.0)
            params, lats = build_threshold_mechanism(net, [R])
            bound = two_link_simple_bound(R).value
            for _ in range(5):
                r = rng.uniform(1e-3, 4.0 * net.breakpoints[1])
                num = worst_equilibrium_cost_two_links(lats, r)
                den = opt_flow(net, r).cost
                assert num <= bound * den * (1.0 + 1e-9), (r, num / den, bound)

    def usage_order():
        rng = random.Random(seed + 2)
        for _ in range(50):
            net = _random_network(rng, kmax=6)
            if net.has_flat_tail or net.k < 2:
                continue
            R = [rng.uniform(2.0, 10.0) for _ in range(net.k - 1)]
            params, _ = build_threshold_mechanism(net, R)
            check = mn_uses_links_no_earlier_than_opt(net, params)
            assert check, f"link {check.link} opens at {check.first_used_rate}"

    return [
        ("random_water_fill_agrees", water_fill_agrees),
        ("random_two_link_bound_holds", two_link_bound_holds),
        ("random_usage_order", usage_order),
    ]


def cmd_verify(args: argparse.Namespace) -> int:
    if args.suite == "core":
        checks = _checks_core()
    elif args.suite == "known":
        checks = _checks_known()
    else:
        checks = _checks_random(args.seed)

    results = []
    failures = 0
    for name, fn in checks:
        try:
            fn()
            print(f"PASS {name}")
            results.append({"name": name, "ok": True})
        except AssertionError as exc:
            failures += 1
            print(f"FAIL {name}: {exc}")
            results.append({"name": name, "ok": False, "witness": str(exc)})

    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "verify_report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump({"suite": args.suite, "seed": args.seed, "results": results}, fh, indent=2)
        fh.write("\n")
    _write_manifest(out_dir, args._argv, [], [report_path])
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anarchy",
        description="Equilibria and efficiency bounds for routing on parallel links.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one flow and print the table")
    p.add_argument("network", help="network JSON file")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--which", choices=("nash", "opt", "mn"), default="nash")
    p.add_argument("--mechanism", help="mechanism JSON file (needed for mn)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("curve", help="sweep the cost ratio into CSV/SVG")
    p.add_argument("network")
    p.add_argument("--mechanism")
    p.add_argument("--rmax", type=float)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--csv", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("bounds", help="evaluate a worst-case bound")
    p.add_argument("kind", choices=("simple2", "benign", "recurrence", "lower", "greedy"))
    p.add_argument("--R", type=float, nargs="+")
    p.add_argument("--links", type=int)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="run a built-in invariant suite")
    p.add_argument("--suite", choices=("core", "known", "random"), default="core")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for the report and manifest")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = argv
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(f"error: bad JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
              file=sys.stderr)
        return 2
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AnarchyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
