"""Graphical models of a digital twin and their communication rewrite.

A model here is purely structural: named nodes and directed edges, where
an edge marks a dependence of the destination on the source.  Edges can
be flagged ``distributed`` (the dependence crosses a network boundary)
and ``load-sensitive`` (message delay depends on the sender's state).

Two derived artifacts matter downstream:

* ``augment`` rewrites every distributed edge into an explicit channel:
  the value travels ``v -> v_in -> w`` with a network node ``n_v``
  feeding the channel, so delay and loss become first-class nodes.
* ``derive_processes`` reads off one process signature per node that
  has at least one parent: the node is computed from exactly its
  in-neighbors.  Parentless nodes are inputs, not processes.

Both run on plain values and share no state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "PgmError",
    "Edge",
    "Pgm",
    "ProcessSignature",
    "parse_pgm",
    "emit_pgm",
    "augment",
    "derive_processes",
]


class PgmError(ValueError):
    """Malformed model text or an invalid structural operation."""


@dataclass(frozen=True, order=True)
class Edge:
    src: str
    dst: str
    distributed: bool = False
    load_sensitive: bool = False


@dataclass(frozen=True)
class Pgm:
    """An immutable node/edge structure.

    Invariants are checked on construction: every edge endpoint must be
    a declared node, and no two edges may share a (src, dst) pair.
    Self-edges are legal; they model dependence on the previous value
    of the same variable.
    """

    nodes: frozenset = field(default_factory=frozenset)
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(self, "edges", frozenset(self.edges))
        seen = set()
        for e in self.edges:
            if e.src not in self.nodes:
                raise PgmError(f"edge {e.src} -> {e.dst}: unknown node {e.src!r}")
            if e.dst not in self.nodes:
                raise PgmError(f"edge {e.src} -> {e.dst}: unknown node {e.dst!r}")
            if (e.src, e.dst) in seen:
                raise PgmError(f"duplicate edge {e.src} -> {e.dst}")
            seen.add((e.src, e.dst))


@dataclass(frozen=True)
class ProcessSignature:
    """One derived process: ``target`` is computed from ``parents``.

    ``parents`` is stored sorted so signatures compare by content.
    """

    target: str
    parents: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "parents", tuple(sorted(self.parents)))
        if not self.parents:
            raise PgmError(f"process for {self.target!r} has no parents")


_FLAGS = ("distributed", "load-sensitive")


def parse_pgm(text: str) -> Pgm:
    """Parse the line-oriented model format.

    Grammar, one directive per line::

        node <NAME>
        edge <SRC> <DST> [distributed] [load-sensitive]

    ``#`` starts a comment anywhere on a line; blank lines are skipped.
    Errors carry the 1-based line number they were found on.
    """
    nodes: set = set()
    edges: list = []
    pairs: set = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        if kind == "node":
            if len(tokens) != 2:
                raise PgmError(f"line {lineno}: expected 'node <NAME>'")
            name = tokens[1]
            if name in nodes:
                raise PgmError(f"line {lineno}: duplicate node {name!r}")
            nodes.add(name)
        elif kind == "edge":
            if len(tokens) < 3:
                raise PgmError(f"line {lineno}: expected 'edge <SRC> <DST> [flags]'")
            src, dst = tokens[1], tokens[2]
            flags = tokens[3:]
            for f in flags:
                if f not in _FLAGS:
                    raise PgmError(f"line {lineno}: unknown edge flag {f!r}")
            if len(set(flags)) != len(flags):
                raise PgmError(f"line {lineno}: repeated edge flag")
            if src not in nodes:
                raise PgmError(f"line {lineno}: edge references undeclared node {src!r}")
            if dst not in nodes:
                raise PgmError(f"line {lineno}: edge references undeclared node {dst!r}")
            if (src, dst) in pairs:
                raise PgmError(f"line {lineno}: duplicate edge {src} -> {dst}")
            pairs.add((src, dst))
            edges.append(
                Edge(
                    src,
                    dst,
                    distributed="distributed" in flags,
                    load_sensitive="load-sensitive" in flags,
                )
            )
        else:
            raise PgmError(f"line {lineno}: unknown directive {kind!r}")
    return Pgm(frozenset(nodes), frozenset(edges))


def emit_pgm(pgm: Pgm) -> str:
    """Serialize canonically: sorted nodes, then edges sorted by (src, dst).

    ``parse_pgm(emit_pgm(p)) == p`` for every valid ``p``; emitting an
    empty model yields the empty string.
    """
    out = []
    for name in sorted(pgm.nodes):
        out.append(f"node {name}")
    for e in sorted(pgm.edges, key=lambda e: (e.src, e.dst)):
        line = f"edge {e.src} {e.dst}"
        if e.distributed:
            line += " distributed"
        if e.load_sensitive:
            line += " load-sensitive"
        out.append(line)
    return "".join(s + "\n" for s in out)


def augment(pgm: Pgm) -> Pgm:
    """Rewrite distributed edges into explicit channel structure.

    Every distributed edge ``v -> w`` is replaced by the non-distributed
    edges ``v -> v_in``, ``n_v -> v_in`` and ``v_in -> w``, with fresh
    nodes ``v_in`` (the channel) and ``n_v`` (the network).  If the edge
    was flagged load-sensitive, ``v -> n_v`` is added as well, so the
    network's behaviour may depend on the sender.

    Raises ``PgmError`` on a distributed self-edge or when a ``v_in`` or
    ``n_v`` name is already taken; a second distributed edge out of the
    same source is such a collision.  A successful rewrite therefore
    always grows the node set by exactly two per distributed edge, and
    the result has no distributed edges, which makes the operation
    idempotent.
    """
    dist = [e for e in pgm.edges if e.distributed]
    if not dist:
        return pgm
    nodes = set(pgm.nodes)
    edges = {e for e in pgm.edges if not e.distributed}
    for e in sorted(dist):
        if e.src == e.dst:
            raise PgmError(f"distributed self-edge {e.src} -> {e.dst} not supported")
        chan = f"{e.src}_in"
        net = f"n_{e.src}"
        for fresh in (chan, net):
            if fresh in nodes:
                raise PgmError(f"augmented name {fresh!r} collides with existing node")
        nodes.update((chan, net))
        edges.add(Edge(e.src, chan))
        edges.add(Edge(net, chan))
        if e.load_sensitive:
            edges.add(Edge(e.src, net))
        edges.add(Edge(chan, e.dst))
    return Pgm(frozenset(nodes), frozenset(edges))


def derive_processes(pgm: Pgm) -> frozenset:
    """One ProcessSignature per node with parents.

    A node's parents are exactly its in-neighbors; a node with no
    incoming edge contributes nothing.  A self-edge makes a node its
    own parent.
    """
    parents: dict = {}
    for e in pgm.edges:
        parents.setdefault(e.dst, set()).add(e.src)
    return frozenset(
        ProcessSignature(target, tuple(sorted(ps))) for target, ps in parents.items()
    )
