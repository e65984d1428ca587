"""Command-line front end.

Four subcommands tie the toolkit together:

* ``check``    explore a configured model and verify its properties
* ``graph``    export the explored state space as Graphviz text
* ``pgm``      augment a graphical model / list its derived processes
* ``leakage``  simulate, estimate, bound, and validate telemetry leakage

Exit status: 0 all checks passed, 1 a property was violated, 2 bad
arguments or unreadable input, 3 an exploration or export limit was hit.

Check reports are designed for diffing: everything above the ``workers``
and ``duration`` footer lines depends only on the configuration and the
selected properties, never on worker count or wall-clock time.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from typing import Optional

from . import leakage, pgm, uav
from .checker import (
    ActionInvariant,
    Bounds,
    CheckResult,
    Counts,
    LeadsTo,
    PartialExplorationError,
    SizeLimitError,
    StateInvariant,
    check_action_invariant,
    check_leads_to,
    check_state_invariant,
    check_termination,
    explore,
    export_dot,
    format_trace,
)
from .kernel import ChannelError, DomainError, ModelError

__all__ = ["main", "run_check", "RunOutcome", "select_properties"]


# --- check ---------------------------------------------------------------------


@dataclass
class RunOutcome:
    """Everything a ``check`` run produced, for printing or for tests."""

    code: int                      # 0 all pass, 1 violated
    body: str                      # deterministic report text
    results: list                  # CheckResult per selected check, in order
    counts: Counts
    duration: float


def select_properties(catalog: list, selectors: Optional[list]) -> list:
    """Resolve ``--props`` selectors against the catalog.

    ``None`` selects termination plus every catalog property.  A selector
    matches a property whose name equals it, or an instance family by
    prefix (``P5`` matches every ``P5(...)``).  The pseudo-check
    ``termination`` can be selected by name.  Unknown selectors are
    rejected.
    """
    if selectors is None:
        return ["termination"] + list(catalog)
    chosen: list = []
    for sel in selectors:
        if sel == "termination":
            hits: list = ["termination"]
        else:
            hits = [p for p in catalog if p.name == sel or p.name.startswith(sel + "(")]
        if not hits:
            raise uav.ConfigError(f"unknown property {sel!r}")
        for h in hits:
            if h not in chosen:
                chosen.append(h)
    return chosen


def _run_one(graph, item) -> CheckResult:
    if item == "termination":
        return check_termination(graph)
    if isinstance(item, StateInvariant):
        return check_state_invariant(graph, item)
    if isinstance(item, ActionInvariant):
        return check_action_invariant(graph, item)
    if isinstance(item, LeadsTo):
        return check_leads_to(graph, item)
    raise TypeError(f"not a checkable property: {item!r}")


def run_check(
    cfg: uav.UavConfig,
    selectors: Optional[list] = None,
    workers: int = 1,
    limit: Optional[int] = None,
) -> RunOutcome:
    """Explore the configured model and check the selected properties.

    Raises PartialExplorationError if ``limit`` cuts the exploration
    short.  The returned body text is identical for identical inputs
    regardless of ``workers``.
    """
    model = uav.build_model(cfg)
    catalog = uav.property_catalog(cfg)
    selection = select_properties(catalog, selectors)
    t0 = time.monotonic()
    bounds = Bounds(max_states=limit) if limit is not None else None
    graph, counts = explore(model, bounds, workers=workers)

    lines = [f"model: {model.name}", "config:"]
    for key, value in uav.config_items(cfg):
        lines.append(f"  {key} = {value}")
    lines.append(f"states: {counts.distinct} distinct, {counts.total} total")
    if limit is not None:
        lines.append(f"limit: {limit} states, not reached")

    results = []
    failed = 0
    for item in selection:
        r = _run_one(graph, item)
        results.append(r)
        lines.append(f"{r.name}: {r.verdict}")
        if not r.ok:
            failed += 1
            if r.detail:
                lines.append(f"  {r.detail}")
            if r.trace is not None:
                lines.append("counterexample:")
                for tl in format_trace(r.trace).rstrip("\n").split("\n"):
                    lines.append(f"  {tl}")
    if failed:
        lines.append(f"result: fail ({failed} of {len(results)} checks violated)")
    else:
        lines.append(f"result: pass ({len(results)} checks)")
    return RunOutcome(
        code=1 if failed else 0,
        body="\n".join(lines) + "\n",
        results=results,
        counts=counts,
        duration=time.monotonic() - t0,
    )


def _cmd_check(args) -> int:
    cfg = uav.load_config(args.config)
    selectors = args.props.split(",") if args.props is not None else None
    if args.workers < 1:
        raise uav.ConfigError(f"workers must be >= 1, got {args.workers}")
    out = run_check(cfg, selectors, workers=args.workers, limit=args.limit)
    sys.stdout.write(out.body)
    sys.stdout.write(f"workers: {args.workers}\n")
    sys.stdout.write(f"duration: {out.duration:.2f}s\n")
    return out.code


# --- graph ---------------------------------------------------------------------


def _cmd_graph(args) -> int:
    cfg = uav.load_config(args.config)
    model = uav.build_model(cfg)
    graph, counts = explore(model, Bounds(max_states=args.limit))
    dot = export_dot(graph, label_edges=args.labels, vertex_limit=args.limit)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(dot)
    print(f"states: {counts.distinct} distinct, {counts.total} total")
    print(f"wrote {args.out}")
    return 0


# --- pgm -----------------------------------------------------------------------


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _cmd_pgm_augment(args) -> int:
    g = pgm.parse_pgm(_read(args.path))
    sys.stdout.write(pgm.emit_pgm(pgm.augment(g)))
    return 0


def _cmd_pgm_processes(args) -> int:
    g = pgm.parse_pgm(_read(args.path))
    for sig in sorted(pgm.derive_processes(g), key=lambda s: s.target):
        print(f"{' '.join(sig.parents)} -> {sig.target}")
    return 0


# --- leakage -------------------------------------------------------------------


def _rates(text: str) -> leakage.HealthModel:
    try:
        return leakage.HealthModel(tuple(float(x) for x in text.split(",")))
    except ValueError as exc:
        if isinstance(exc, leakage.LeakageError):
            raise
        raise leakage.LeakageError(f"bad rate list {text!r}") from None


def _policy(text: str):
    items = text.split(",")
    try:
        return [int(x) for x in items]
    except ValueError:
        pass
    try:
        return [float(x) for x in items]
    except ValueError:
        raise leakage.LeakageError(f"bad policy {text!r}") from None


def _cmd_leak_simulate(args) -> int:
    model = _rates(args.rates)
    trace = leakage.simulate(model, _policy(args.policy), args.horizon, args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(leakage.emit_trace(trace))
    print(f"wrote {len(trace)} steps to {args.out}")
    return 0


def _cmd_leak_estimate(args) -> int:
    trace = leakage.parse_trace(_read(args.trace))
    sys.stdout.write(leakage.leakage_report(trace, args.eps))
    return 0


def _cmd_leak_bound(args) -> int:
    b = leakage.deviation_bound(args.lam, args.n, args.eps)
    print(f"bound: {float(b):g}")
    if args.delta is not None:
        print(f"samples: {leakage.required_samples(args.lam, args.eps, args.delta)}")
    return 0


def _cmd_leak_montecarlo(args) -> int:
    model = _rates(args.rates)
    rows = leakage.monte_carlo_check(model, args.n, args.trials, args.eps, args.seed)
    print(f"{'action':>6}  {'rate':>9}  {'mean':>9}  {'freq':>8}  {'bound':>8}")
    for r in rows:
        print(
            f"{r.action:>6}  {float(r.rate):>9.5f}  {float(r.mean_estimate):>9.5f}"
            f"  {float(r.deviation_frequency):>8.5f}  {float(r.bound):>8.5f}"
        )
    print()
    for r in rows:
        print(
            f"action={r.action} rate={r.rate} samples={r.samples} trials={r.trials}"
            f" mean={r.mean_estimate} freq={r.deviation_frequency} bound={r.bound}"
        )
    return 0


# --- wiring --------------------------------------------------------------------


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="twincheck",
        description="explicit-state checking and leakage analysis for digital-twin models",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("check", help="explore a model and check its properties")
    c.add_argument("--config", required=True, help="model configuration file")
    c.add_argument("--props", help="comma-separated property names (prefix matches instance families)")
    c.add_argument("--workers", type=int, default=1, help="exploration worker processes")
    c.add_argument("--limit", type=int, help="abort if the state count exceeds this")
    c.set_defaults(fn=_cmd_check)

    g = sub.add_parser("graph", help="export the state space as Graphviz text")
    g.add_argument("--config", required=True, help="model configuration file")
    g.add_argument("--out", required=True, help="output .dot path")
    g.add_argument("--limit", type=int, default=100_000, help="vertex limit")
    g.add_argument("--labels", action="store_true", help="label edges with process names")
    g.set_defaults(fn=_cmd_graph)

    p = sub.add_parser("pgm", help="graphical-model operations")
    psub = p.add_subparsers(dest="sub", required=True)
    pa = psub.add_parser("augment", help="rewrite distributed edges into channel structure")
    pa.add_argument("path", help="model file")
    pa.set_defaults(fn=_cmd_pgm_augment)
    pp = psub.add_parser("processes", help="list derived processes, one per line")
    pp.add_argument("path", help="model file")
    pp.set_defaults(fn=_cmd_pgm_processes)

    l = sub.add_parser("leakage", help="telemetry leakage analysis")
    lsub = l.add_subparsers(dest="sub", required=True)

    sim = lsub.add_parser("simulate", help="simulate a degradation episode")
    sim.add_argument("--rates", default="0.01,0.05", help="comma-separated per-action rates")
    sim.add_argument("--policy", default="0.5,0.5",
                     help="comma-separated action sequence (ints) or distribution (floats)")
    sim.add_argument("--horizon", type=int, default=1000, help="number of steps")
    sim.add_argument("--seed", type=_seed, default=0)
    sim.add_argument("--out", required=True, help="trace file to write")
    sim.set_defaults(fn=_cmd_leak_simulate)

    est = lsub.add_parser("estimate", help="estimate rates from a trace file")
    est.add_argument("trace", help="trace file")
    est.add_argument("--eps", type=float, default=0.05, help="deviation of interest")
    est.set_defaults(fn=_cmd_leak_estimate)

    bnd = lsub.add_parser("bound", help="deviation bound and sample complexity")
    bnd.add_argument("--lam", type=float, required=True, help="true rate")
    bnd.add_argument("--n", type=int, required=True, help="sample count")
    bnd.add_argument("--eps", type=float, required=True, help="deviation of interest")
    bnd.add_argument("--delta", type=float, help="also print samples needed for this miss probability")
    bnd.set_defaults(fn=_cmd_leak_bound)

    mc = lsub.add_parser("montecarlo", help="validate estimator and bound empirically")
    mc.add_argument("--rates", default="0.01,0.05", help="comma-separated per-action rates")
    mc.add_argument("--n", type=int, default=1000, help="samples per trial")
    mc.add_argument("--trials", type=int, default=10_000)
    mc.add_argument("--eps", type=float, default=0.02, help="deviation of interest")
    mc.add_argument("--seed", type=_seed, default=0)
    mc.set_defaults(fn=_cmd_leak_montecarlo)

    return ap


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (PartialExplorationError, SizeLimitError) as exc:
        print(f"limit hit: {exc}", file=sys.stderr)
        return 3
    except (
        uav.ConfigError,
        pgm.PgmError,
        leakage.LeakageError,
        ModelError,
        DomainError,
        ChannelError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
