"""Explicit-state exploration and verification over kernel models.

`explore` walks a model breadth-first into a `StateGraph`: every reachable
state, every transition edge, BFS depths and tree parents for shortest
traces, and the distinct/total counts. On top of the finished graph sit the
verdict passes: state and action invariants, termination, and fairness-aware
leads-to checking, each returning a `CheckResult` with a counterexample
trace on failure. `export_dot` renders small graphs for inspection and
`brute_force_explore` re-derives the same graph by naive recursion as an
independent oracle.

Counting convention: `total` is the number of initial states plus every
successor produced during exploration, counted with multiplicity; `distinct`
is the number of unique states. Both are exact and reproducible for a given
model regardless of worker count.

Liveness semantics: a leads-to property fails only on a fair run. Runs that
end (terminal state or deadlock) are complete and count as fair; infinite
runs are fair when every strongly-fair process enabled infinitely often is
taken infinitely often and every weakly-fair process continuously enabled is
eventually taken. Counterexamples are lassos; a run that dies in a dead-end
state is reported with a stutter loop (process `None`) on its final state.
"""

from __future__ import annotations

import sys
from array import array
from dataclasses import dataclass
from multiprocessing import get_context
from typing import Callable, Iterable, Optional

from .kernel import Fairness, Model, SystemState, digest_hex

Pred = Callable[[tuple], bool]
EdgePred = Callable[[tuple, tuple], bool]


class SizeLimitError(RuntimeError):
    """An output or oracle size guard was exceeded."""


class PartialExplorationError(RuntimeError):
    """Exploration hit a bound before the graph was complete.

    Carries progress so callers can still reason about what was seen: a
    capped run that admitted N distinct states proves the model has at least
    N distinct states, even though no verdicts may be drawn from the partial
    graph.
    """

    def __init__(self, message: str, distinct: int, total: int, depth: int):
        super().__init__(message)
        self.distinct = distinct
        self.total = total
        self.depth = depth


@dataclass(frozen=True)
class Bounds:
    """Exploration limits. `max_states` bounds distinct states admitted;
    `max_depth` bounds the BFS layer. Exceeding either raises
    `PartialExplorationError`; a bound that is never hit has no effect."""

    max_states: Optional[int] = None
    max_depth: Optional[int] = None


class Counts(tuple):
    """(distinct, total) with named access."""

    __slots__ = ()

    def __new__(cls, distinct: int, total: int):
        return super().__new__(cls, (distinct, total))

    @property
    def distinct(self) -> int:
        return self[0]

    @property
    def total(self) -> int:
        return self[1]

    def __repr__(self) -> str:
        return f"Counts(distinct={self[0]}, total={self[1]})"


# --- properties ---------------------------------------------------------------


@dataclass(frozen=True)
class StateInvariant:
    """Must hold in every reachable state."""

    name: str
    pred: Pred
    description: str = ""


@dataclass(frozen=True)
class ActionInvariant:
    """Must hold across every edge, as a predicate on (from, to) values."""

    name: str
    pred: EdgePred
    description: str = ""


@dataclass(frozen=True)
class LeadsTo:
    """Every fair run visiting a trigger state later visits a goal state."""

    name: str
    trigger: Pred
    goal: Pred
    description: str = ""


@dataclass
class Counterexample:
    """A violating run: `prefix` from an initial state, plus an optional
    `lasso` cycle for liveness failures. Entries are (process name, state);
    the prefix starts with (None, initial). A lasso's last entry returns to
    the state the prefix ends in; a lasso entry with process None is a
    stutter on a dead-end state."""

    prefix: list
    lasso: list

    def states(self) -> list:
        return [s for _, s in self.prefix] + [s for _, s in self.lasso]


@dataclass
class CheckResult:
    verdict: str  # "pass" | "fail"
    trace: Optional[Counterexample] = None
    name: str = ""
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict == "pass"


# --- the state graph ----------------------------------------------------------


class StateGraph:
    """The explored transition system.

    States are raw value tuples held in BFS discovery order; `index` maps a
    tuple back to its position. Edges are parallel arrays (source index,
    process index, destination index) in generation order, which is also
    ascending source order. Depth and tree-parent arrays give shortest paths
    back to an initial state.
    """

    def __init__(self, model: Model):
        self.model = model
        self.states: list = []
        self.index: dict = {}
        self.depth = array("i")
        self.parent = array("i")
        self.parent_proc = array("i")
        self.esrc = array("i")
        self.eproc = array("i")
        self.edst = array("i")
        self.initial: tuple = ()
        self.terminal_flags = bytearray()
        self.total = 0
        self._row: Optional[array] = None
        self._termination: Optional[CheckResult] = None

    # -- size and lookup --

    @property
    def distinct(self) -> int:
        return len(self.states)

    @property
    def n_edges(self) -> int:
        return len(self.esrc)

    @property
    def counts(self) -> Counts:
        return Counts(len(self.states), self.total)

    def state(self, i: int) -> SystemState:
        return SystemState(self.model, self.states[i])

    def is_terminal(self, i: int) -> bool:
        return bool(self.terminal_flags[i])

    def terminal_indices(self) -> Iterable[int]:
        flags = self.terminal_flags
        return (i for i in range(len(self.states)) if flags[i])

    def process_name(self, k: int) -> str:
        return self.model.processes[k].name

    # -- adjacency --

    def _ensure_rows(self) -> array:
        # esrc is nondecreasing (states are expanded in index order), so the
        # CSR row table falls out of one forward scan.
        if self._row is None:
            row = array("i", bytes(4 * (len(self.states) + 1)))
            esrc = self.esrc
            n = len(self.states)
            k = 0
            total = len(esrc)
            for s in range(n):
                while k < total and esrc[k] == s:
                    k += 1
                row[s + 1] = k
            self._row = row
        return self._row

    def out_edges(self, i: int) -> range:
        """Edge ids leaving state i."""
        row = self._ensure_rows()
        return range(row[i], row[i + 1])

    def out_degree(self, i: int) -> int:
        row = self._ensure_rows()
        return row[i + 1] - row[i]

    # -- traces --

    def path_to(self, i: int) -> list:
        """Shortest (process name, state) path from an initial state to i,
        starting with (None, initial)."""
        steps = []
        while True:
            p = self.parent[i]
            if p < 0:
                steps.append((None, self.state(i)))
                break
            steps.append((self.process_name(self.parent_proc[i]), self.state(i)))
            i = p
        steps.reverse()
        return steps

    # -- oracle views --

    def edge_set(self, limit: int = 200_000) -> frozenset:
        """Edges as (source digest, process name, destination digest) for
        cross-checking small graphs."""
        if len(self.esrc) > limit:
            raise SizeLimitError(f"edge_set on {len(self.esrc)} edges (limit {limit})")
        digests = [digest_hex(v) for v in self.states]
        names = [p.name for p in self.model.processes]
        triples = frozenset(
            (digests[self.esrc[k]], names[self.eproc[k]], digests[self.edst[k]])
            for k in range(len(self.esrc))
        )
        if len(triples) != len(self.esrc):
            raise SizeLimitError("digest collision while building edge set")
        return triples


# --- exploration ---------------------------------------------------------------

_FORK_MODEL: Optional[Model] = None


def _expand_chunk(chunk: list) -> list:
    model = _FORK_MODEL
    return [model.raw_successors(vals) for vals in chunk]


def explore(model: Model, bounds: Optional[Bounds] = None, workers: int = 1) -> tuple:
    """Breadth-first reachability. Returns (StateGraph, Counts).

    Deterministic regardless of `workers`: parallel workers only compute
    successor lists for disjoint chunks of the current layer, and the chunks
    are merged back in layer order, so insertion order, edge order, counts,
    and any later counterexample are identical to a sequential run. Workers
    are forked, so the model never crosses a pickle boundary (Linux only).

    Every newly admitted state is validated against the declared variable
    domains. Terminal states are recorded and never expanded.
    """
    max_states = bounds.max_states if bounds else None
    max_depth = bounds.max_depth if bounds else None

    g = StateGraph(model)
    states = g.states
    index = g.index
    depths = g.depth
    parents = g.parent
    pprocs = g.parent_proc
    esrc, eproc, edst = g.esrc, g.eproc, g.edst
    tflags = g.terminal_flags
    validate = model.validate
    terminal = model.terminal_raw

    def admit(vals: tuple, depth: int, par: int, via: int) -> int:
        i = len(states)
        index[vals] = i
        states.append(vals)
        validate(vals)
        depths.append(depth)
        parents.append(par)
        pprocs.append(via)
        tflags.append(terminal(vals))
        return i

    total = 0
    for vals in model.initial:
        if vals not in index:
            admit(vals, 0, -1, -1)
        total += 1
    g.initial = tuple(range(len(states)))

    if max_states is not None and len(states) > max_states:
        raise PartialExplorationError(
            f"{model.name}: state bound {max_states} exceeded at depth 0",
            len(states), total, 0)

    pool = None
    ctx = get_context("fork")
    if workers > 1:
        global _FORK_MODEL
        _FORK_MODEL = model
        pool = ctx.Pool(processes=workers)
        _FORK_MODEL = None

    try:
        layer_lo, layer_hi = 0, len(states)
        depth = 0
        while layer_lo < layer_hi:
            if max_depth is not None and depth >= max_depth:
                if any(not tflags[i] for i in range(layer_lo, layer_hi)):
                    raise PartialExplorationError(
                        f"{model.name}: depth bound {max_depth} hit with "
                        "unexpanded non-terminal states",
                        len(states), total, depth)
                break
            depth += 1
            if pool is None:
                produced = _sequential_layer(model, states, layer_lo, layer_hi, tflags)
            else:
                produced = _parallel_layer(pool, workers, states, layer_lo, layer_hi)
            for src, succ in produced:
                for k, nv in succ:
                    total += 1
                    j = index.get(nv)
                    if j is None:
                        j = admit(nv, depth, src, k)
                        if max_states is not None and j + 1 > max_states:
                            raise PartialExplorationError(
                                f"{model.name}: state bound {max_states} "
                                f"exceeded at depth {depth}",
                                len(states), total, depth)
                    esrc.append(src)
                    eproc.append(k)
                    edst.append(j)
            layer_lo, layer_hi = layer_hi, len(states)
    finally:
        if pool is not None:
            pool.terminate()
            pool.join()

    g.total = total
    return g, g.counts


def _sequential_layer(model, states, lo, hi, tflags):
    raw = model.raw_successors
    out = []
    for i in range(lo, hi):
        if tflags[i]:
            continue
        out.append((i, raw(states[i])))
    return out


def _parallel_layer(pool, workers, states, lo, hi):
    # Contiguous chunks keep the merged stream in the same order a
    # sequential pass would produce. Terminal states are filtered by
    # raw_successors inside the workers.
    span = hi - lo
    step = (span + workers - 1) // workers
    chunks = [states[lo + j:min(hi, lo + j + step)] for j in range(0, span, step)]
    merged = []
    offset = lo
    for chunk_result in pool.map(_expand_chunk, chunks):
        for local, succ in enumerate(chunk_result):
            merged.append((offset + local, succ))
        offset += len(chunk_result)
    return merged


def brute_force_explore(model: Model, bounds: Optional[Bounds] = None) -> tuple:
    """Depth-first reference enumeration. Returns (StateGraph, Counts).

    Deliberately naive: recursive descent and a plain visited list probed by
    linear scan, no hashing. Quadratic in state count and limited by the
    recursion depth of the longest simple path, so keep it to oracle-sized
    models; the default cap is 100000 states. Depth and parent data reflect
    the DFS tree, not shortest paths.
    """
    limit = 100_000
    if bounds and bounds.max_states is not None:
        limit = bounds.max_states

    g = StateGraph(model)
    states = g.states
    esrc, eproc, edst = g.esrc, g.eproc, g.edst
    raw = model.raw_successors
    validate = model.validate
    terminal = model.terminal_raw
    total = 0

    def find(vals: tuple) -> int:
        for j, seen in enumerate(states):
            if seen == vals:
                return j
        return -1

    def admit(vals: tuple, depth: int, par: int, via: int) -> int:
        i = len(states)
        if i >= limit:
            raise SizeLimitError(f"{model.name}: oracle exploration beyond {limit} states")
        states.append(vals)
        validate(vals)
        g.depth.append(depth)
        g.parent.append(par)
        g.parent_proc.append(via)
        g.terminal_flags.append(terminal(vals))
        return i

    def expand(i: int, depth: int) -> None:
        nonlocal total
        for k, nv in raw(states[i]):
            total += 1
            j = find(nv)
            fresh = j < 0
            if fresh:
                j = admit(nv, depth + 1, i, k)
            esrc.append(i)
            eproc.append(k)
            edst.append(j)
            if fresh:
                expand(j, depth + 1)

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 15_000))
    try:
        roots = []
        for vals in model.initial:
            total += 1
            if find(vals) < 0:
                roots.append(admit(vals, 0, -1, -1))
        g.initial = tuple(roots)
        for i in roots:
            expand(i, 0)
    finally:
        sys.setrecursionlimit(old_limit)

    g.total = total
    return g, g.counts


# --- safety checks --------------------------------------------------------------


def check_state_invariant(graph: StateGraph, p: StateInvariant) -> CheckResult:
    """Pass iff the predicate holds in every state. The first violation in
    BFS order gives a shortest counterexample."""
    pred = p.pred
    for i, vals in enumerate(graph.states):
        if not pred(vals):
            return CheckResult("fail", Counterexample(graph.path_to(i), []),
                               p.name, f"state invariant violated at depth {graph.depth[i]}")
    return CheckResult("pass", None, p.name)


def check_action_invariant(graph: StateGraph, p: ActionInvariant) -> CheckResult:
    """Pass iff the predicate holds across every edge. Edges are scanned in
    generation order, which is ascending source depth, so the first violation
    yields a shortest counterexample ending in the violating edge."""
    pred = p.pred
    states = graph.states
    esrc, eproc, edst = graph.esrc, graph.eproc, graph.edst
    for k in range(len(esrc)):
        a = states[esrc[k]]
        b = states[edst[k]]
        if not pred(a, b):
            steps = graph.path_to(esrc[k])
            steps.append((graph.process_name(eproc[k]), graph.state(edst[k])))
            return CheckResult("fail", Counterexample(steps, []), p.name,
                               f"edge {graph.process_name(eproc[k])} at depth "
                               f"{graph.depth[esrc[k]] + 1} violates the invariant")
    return CheckResult("pass", None, p.name)


# --- termination -----------------------------------------------------------------


def check_termination(graph: StateGraph) -> CheckResult:
    """Pass iff the non-terminal subgraph is acyclic and every dead-end state
    is terminal. The result is cached on the graph; leads-to checking reuses
    it as its fast path."""
    if graph._termination is not None:
        return graph._termination
    result = _termination_uncached(graph)
    graph._termination = result
    return result


def _termination_uncached(graph: StateGraph) -> CheckResult:
    n = graph.distinct
    tflags = graph.terminal_flags
    graph._ensure_rows()

    for i in range(n):
        if not tflags[i] and graph.out_degree(i) == 0:
            return CheckResult("fail", Counterexample(graph.path_to(i), []),
                               "termination", "non-terminal deadlock state")

    # Kahn's peeling over the non-terminal subgraph settles acyclicity with
    # flat arrays; the (rare) cyclic case falls through to an SCC pass over
    # whatever survived, purely to extract a concrete cycle.
    esrc, edst = graph.esrc, graph.edst
    indeg = array("i", bytes(4 * n))
    for k in range(len(esrc)):
        d = edst[k]
        if not tflags[d] and not tflags[esrc[k]]:
            indeg[d] += 1
    stack = [i for i in range(n) if not tflags[i] and indeg[i] == 0]
    alive = sum(1 for i in range(n) if not tflags[i])
    seen = 0
    while stack:
        i = stack.pop()
        seen += 1
        for k in graph.out_edges(i):
            d = edst[k]
            if tflags[d]:
                continue
            indeg[d] -= 1
            if indeg[d] == 0:
                stack.append(d)
    if seen == alive:
        return CheckResult("pass", None, "termination")

    leftover = [i for i in range(n) if not tflags[i] and indeg[i] > 0]
    cycle = _find_cycle(graph, set(leftover))
    entry = cycle[0][0] if cycle else leftover[0]
    prefix = graph.path_to(entry)
    lasso = [(graph.process_name(k), graph.state(dst)) for _, k, dst in cycle]
    return CheckResult("fail", Counterexample(prefix, lasso), "termination",
                       "cycle among non-terminal states")


def _find_cycle(graph: StateGraph, members: set) -> list:
    """A concrete cycle within `members`, as [(src, proc, dst), ...] edges
    returning to the first source. Iterative depth-first search; a back edge
    to a gray node closes the cycle."""
    GRAY, BLACK = 1, 2
    color = {}
    edst, eproc = graph.edst, graph.eproc
    for root in members:
        if root in color:
            continue
        color[root] = GRAY
        nodes = [root]
        iters = [iter(graph.out_edges(root))]
        path_edges = []
        while nodes:
            descended = False
            for k in iters[-1]:
                d = edst[k]
                if d not in members:
                    continue
                c = color.get(d)
                if c == GRAY:
                    at = nodes.index(d)
                    cycle = path_edges[at:] + [k]
                    return [(graph.esrc[e], eproc[e], edst[e]) for e in cycle]
                if c is None:
                    color[d] = GRAY
                    nodes.append(d)
                    iters.append(iter(graph.out_edges(d)))
                    path_edges.append(k)
                    descended = True
                    break
            if not descended:
                color[nodes.pop()] = BLACK
                iters.pop()
                if path_edges:
                    path_edges.pop()
    return []


# --- liveness --------------------------------------------------------------------


def check_leads_to(graph: StateGraph, p: LeadsTo, fairness: Optional[dict] = None) -> CheckResult:
    """Pass iff on every fair run, each trigger state is eventually followed
    by a goal state.

    Fast path: if termination holds for the graph and the goal covers every
    terminal state, every maximal run ends in a goal state and the property
    holds for any trigger, under any fairness. Otherwise the check restricts
    the graph to goal-free states and hunts for a reachable trigger state
    from which a fair goal-free run exists: either a dead-end (complete
    finite run) or a fair cycle, found by SCC decomposition plus fairness
    refinement. `fairness` overrides the per-process classes declared on the
    model, keyed by process name.
    """
    if fairness is None:
        fairness = graph.model.fairness_map()

    term = check_termination(graph)
    if term.ok:
        goal = p.goal
        if all(goal(graph.states[i]) for i in graph.terminal_indices()):
            return CheckResult("pass", None, p.name)

    return _leads_to_search(graph, p, fairness)


def _leads_to_search(graph: StateGraph, p: LeadsTo, fairness: dict) -> CheckResult:
    states = graph.states
    n = len(states)
    goal, trigger = p.goal, p.trigger
    in_a = bytearray(n)  # goal-free states
    for i in range(n):
        if not goal(states[i]):
            in_a[i] = 1

    graph._ensure_rows()
    edst = graph.edst

    # Seeds of unfair-free divergence: dead ends inside the goal-free region
    # (complete runs), and members of fair cycles.
    seeds = []
    for i in range(n):
        if in_a[i] and graph.out_degree(i) == 0:
            seeds.append(i)
    fair_cycles = _fair_sccs(graph, in_a, fairness)
    seed_set = set(seeds)
    for cyc in fair_cycles:
        seed_set.update(src for src, _, _ in cyc)

    if not seed_set:
        return CheckResult("pass", None, p.name)

    # Backward closure within the goal-free region.
    rev: dict = {}
    for k in range(len(edst)):
        s, d = graph.esrc[k], edst[k]
        if in_a[s] and in_a[d]:
            rev.setdefault(d, []).append(s)
    bad = set(seed_set)
    work = list(seed_set)
    while work:
        d = work.pop()
        for s in rev.get(d, ()):
            if s not in bad:
                bad.add(s)
                work.append(s)

    witness = None
    for i in range(n):
        if in_a[i] and i in bad and trigger(states[i]):
            witness = i
            break
    if witness is None:
        return CheckResult("pass", None, p.name)

    return CheckResult("fail", _divergence_trace(graph, witness, seed_set, in_a, fair_cycles),
                       p.name, "fair run never reaches the goal")


def _fair_sccs(graph: StateGraph, in_a: bytearray, fairness: dict) -> list:
    """Fair cycles within the goal-free region, one witness cycle per
    surviving component, as edge triples (src, proc, dst)."""
    comps = _sccs(graph, in_a)
    procs = graph.model.processes
    out = []
    for comp in comps:
        cyc = _refine_fair(graph, comp, fairness, procs)
        if cyc:
            out.append(cyc)
    return out


def _sccs(graph: StateGraph, in_a: bytearray) -> list:
    """Tarjan over the induced goal-free subgraph, iterative. Returns
    components that can sustain a cycle: size above one, or a self-loop."""
    n = graph.distinct
    edst = graph.edst
    indexv = {}
    low = {}
    onstack = set()
    stack = []
    comps = []
    counter = [0]

    def edges_of(v):
        return [edst[k] for k in graph.out_edges(v) if in_a[edst[k]]]

    for root in range(n):
        if not in_a[root] or root in indexv:
            continue
        work = [(root, iter(edges_of(root)))]
        indexv[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        onstack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in indexv:
                    indexv[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    onstack.add(w)
                    work.append((w, iter(edges_of(w))))
                    advanced = True
                    break
                if w in onstack and low[v] > indexv[w]:
                    low[v] = indexv[w]
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[u] > low[v]:
                    low[u] = low[v]
            if low[v] == indexv[v]:
                comp = []
                while True:
                    w = stack.pop()
                    onstack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1:
                    comps.append(comp)
                elif any(edst[k] == v for k in graph.out_edges(v)):
                    comps.append(comp)
    return comps


def _refine_fair(graph: StateGraph, comp: list, fairness: dict, procs) -> Optional[list]:
    """A witness fair cycle within one SCC, or None.

    A cycle is fair when every strongly-fair process enabled at any of its
    states is taken on it, and every weakly-fair process enabled at all of
    its states is taken on it. Strong-fairness refinement removes the states
    where a never-taken SF process is enabled and recurses on the remains; a
    never-taken WF process enabled throughout kills the component outright.
    """
    members = set(comp)
    if not members:
        return None
    edst, eproc = graph.edst, graph.eproc

    def inner_edges(mem):
        for s in mem:
            for k in graph.out_edges(s):
                if edst[k] in mem:
                    yield s, eproc[k], edst[k]

    def enabled(kp: int, i: int) -> bool:
        return len(procs[kp].step(graph.states[i])) > 0

    while True:
        taken = {kp for _, kp, _ in inner_edges(members)}
        if not taken:
            return None
        sf_missing = []
        for kp, proc in enumerate(procs):
            if kp in taken or fairness[proc.name] is not Fairness.SF:
                continue
            if any(enabled(kp, i) for i in members):
                sf_missing.append(kp)
        if sf_missing:
            members = {i for i in members
                       if not any(enabled(kp, i) for kp in sf_missing)}
            sub = _sub_sccs(graph, members)
            for comp2 in sub:
                cyc = _refine_fair(graph, comp2, fairness, procs)
                if cyc:
                    return cyc
            return None
        for kp, proc in enumerate(procs):
            if kp in taken or fairness[proc.name] is not Fairness.WF:
                continue
            if all(enabled(kp, i) for i in members):
                return None  # every cycle here starves a continuously enabled process
        return _cover_cycle(graph, members, taken, fairness, procs)


def _sub_sccs(graph: StateGraph, members: set) -> list:
    mask = bytearray(graph.distinct)
    for i in members:
        mask[i] = 1
    return _sccs(graph, mask)


def _cover_cycle(graph: StateGraph, members: set, taken: set, fairness: dict, procs) -> list:
    """Build a concrete fair cycle: a closed walk through every member state
    (so each weakly-fair process is either taken or seen disabled) plus one
    edge of every process taken in the component (covering the strong
    obligations). Strong connectivity makes the concatenation possible."""
    edst, eproc = graph.edst, graph.eproc

    def short_path(a: int, b: int) -> list:
        if a == b:
            return []
        seen = {a: None}
        queue = [a]
        qi = 0
        while qi < len(queue):
            v = queue[qi]
            qi += 1
            for k in graph.out_edges(v):
                d = edst[k]
                if d in members and d not in seen:
                    seen[d] = (v, k)
                    if d == b:
                        path = []
                        cur = b
                        while seen[cur] is not None:
                            pv, pk = seen[cur]
                            path.append((pv, eproc[pk], cur))
                            cur = pv
                        path.reverse()
                        return path
                    queue.append(d)
        raise AssertionError("walk endpoints not connected inside an SCC")

    need_edges = []
    for kp in sorted(taken):
        if fairness[procs[kp].name] is Fairness.UF:
            continue
        for s in sorted(members):
            hit = next((k for k in graph.out_edges(s)
                        if eproc[k] == kp and edst[k] in members), None)
            if hit is not None:
                need_edges.append((s, kp, edst[hit]))
                break

    stops = sorted(members)
    start = stops[0]
    walk = []
    cur = start
    for s, kp, d in need_edges:
        walk.extend(short_path(cur, s))
        walk.append((s, kp, d))
        cur = d
    for s in stops:
        if s == cur:
            continue
        walk.extend(short_path(cur, s))
        cur = s
    walk.extend(short_path(cur, start))
    if not walk:  # single state whose only inner edge is a self-loop
        k = next(k for k in graph.out_edges(start) if edst[k] == start)
        walk = [(start, eproc[k], start)]
    return walk


def _divergence_trace(graph: StateGraph, witness: int, seed_set: set,
                      in_a: bytearray, fair_cycles: list) -> Counterexample:
    """Prefix to the trigger state, onward inside the goal-free region to a
    seed, then the seed's divergence: a stutter at a dead end or the fair
    cycle through it."""
    edst, eproc = graph.edst, graph.eproc
    seen = {witness: None}
    queue = [witness]
    qi = 0
    target = witness if witness in seed_set else None
    while target is None and qi < len(queue):
        v = queue[qi]
        qi += 1
        for k in graph.out_edges(v):
            d = edst[k]
            if in_a[d] and d not in seen:
                seen[d] = (v, k)
                if d in seed_set:
                    target = d
                    break
                queue.append(d)

    mid = []
    cur = target
    while seen[cur] is not None:
        pv, pk = seen[cur]
        mid.append((graph.process_name(eproc[pk]), graph.state(cur)))
        cur = pv
    mid.reverse()

    prefix = graph.path_to(witness) + mid

    cycle = next((c for c in fair_cycles if any(s == target for s, _, _ in c)), None)
    if cycle is None:
        lasso = [(None, graph.state(target))]
    else:
        k0 = next(j for j, (s, _, _) in enumerate(cycle) if s == target)
        rotated = cycle[k0:] + cycle[:k0]
        lasso = [(graph.process_name(kp), graph.state(d)) for _, kp, d in rotated]
    return Counterexample(prefix, lasso)


# --- rendering -------------------------------------------------------------------


def export_dot(graph: StateGraph, label_edges: bool = False,
               vertex_limit: int = 100_000) -> str:
    """Graphviz text for the graph. Vertices are numbered in BFS discovery
    order starting at 1; initial states are blue, terminal states orange
    (an initial terminal keeps the blue outline and gets an orange fill),
    all others black. Refuses graphs above `vertex_limit` vertices."""
    n = graph.distinct
    if n > vertex_limit:
        raise SizeLimitError(f"{n} vertices exceed the export limit {vertex_limit}")
    initial = set(graph.initial)
    lines = [f'digraph "{graph.model.name}" {{']
    for i in range(n):
        attrs = []
        if i in initial:
            attrs.append("color=blue")
            if graph.terminal_flags[i]:
                attrs.append("style=filled")
                attrs.append("fillcolor=orange")
        elif graph.terminal_flags[i]:
            attrs.append("color=orange")
        else:
            attrs.append("color=black")
        lines.append(f"  {i + 1} [{', '.join(attrs)}];")
    esrc, eproc, edst = graph.esrc, graph.eproc, graph.edst
    names = [p.name for p in graph.model.processes]
    for k in range(len(esrc)):
        if label_edges:
            lines.append(f'  {esrc[k] + 1} -> {edst[k] + 1} [label="{names[eproc[k]]}"];')
        else:
            lines.append(f"  {esrc[k] + 1} -> {edst[k] + 1};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def format_trace(cex: Counterexample) -> str:
    """Human-readable trace: numbered steps, the process that moved, and the
    variables it changed. Step 0 prints the full initial assignment. A lasso
    is introduced by a loop marker; a stutter step means the run has reached
    a dead end and stays there."""
    out = []
    prev = None

    def emit(step_no: int, proc: Optional[str], state: SystemState) -> None:
        nonlocal prev
        if proc is None and step_no > 0:
            out.append(f"step {step_no} -> (run stays here forever)")
            prev = state
            return
        head = "step 0 (initial):" if proc is None else f"step {step_no} -> {proc}:"
        out.append(head)
        names = state._model.var_names
        for j, name in enumerate(names):
            if prev is None or prev.vals[j] != state.vals[j]:
                out.append(f"    {name} = {state.vals[j]!r}")
        prev = state

    no = 0
    for proc, state in cex.prefix:
        emit(no, proc, state)
        no += 1
    if cex.lasso:
        out.append("loop (repeats forever):")
        for proc, state in cex.lasso:
            emit(no, proc, state)
            no += 1
    return "\n".join(out) + "\n"


def trace_records(cex: Counterexample) -> list:
    """Machine form of a trace: one dict per step with the step index, the
    process name (None for the initial state or a stutter), and the changed
    variables mapped to repr strings. Lasso steps carry loop=True."""
    records = []
    prev = None
    no = 0

    def changed(state: SystemState) -> dict:
        names = state._model.var_names
        if prev is None:
            return {n: repr(v) for n, v in zip(names, state.vals)}
        return {n: repr(v) for n, v in zip(names, state.vals)
                if prev.vals[state._model.index_of(n)] != v}

    for proc, state in cex.prefix:
        records.append({"step": no, "process": proc, "vars": changed(state)})
        prev = state
        no += 1
    for proc, state in cex.lasso:
        records.append({"step": no, "process": proc, "vars": changed(state), "loop": True})
        prev = state
        no += 1
    return records
