"""Structural model parsing, augmentation, and process derivation."""

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twincheck.pgm import (
    Edge,
    Pgm,
    PgmError,
    ProcessSignature,
    augment,
    derive_processes,
    emit_pgm,
    parse_pgm,
)

MODELS = Path(__file__).resolve().parent.parent / "models"
GOLDEN = Path(__file__).resolve().parent / "golden"

UAV = """\
node S
node O
node D
node U
node Q
node R
edge S O
edge S S
edge U S
edge D D
edge O D
edge U D
edge D U
edge Q U
edge D Q
edge O R
edge D R
edge U R
edge Q R
"""


class TestParse:
    def test_minimal(self):
        p = parse_pgm("node S\nnode O\nedge S O\n")
        assert p.nodes == frozenset({"S", "O"})
        assert p.edges == frozenset({Edge("S", "O")})

    def test_comments_and_blanks(self):
        p = parse_pgm("# header\n\nnode A  # trailing\nnode B\n\nedge A B\n")
        assert p.nodes == frozenset({"A", "B"}) and len(p.edges) == 1

    def test_flags(self):
        p = parse_pgm("node A\nnode B\nedge A B distributed load-sensitive\n")
        (e,) = p.edges
        assert e.distributed and e.load_sensitive

    def test_self_edge_allowed(self):
        p = parse_pgm("node S\nedge S S\n")
        assert Edge("S", "S") in p.edges

    @pytest.mark.parametrize(
        "text, fragment",
        [
            ("edge S O\n", "line 1"),
            ("node A\nnode A\n", "line 2: duplicate node"),
            ("node A\nnode B\nedge A B\nedge A B\n", "line 4: duplicate edge"),
            ("node A\nnode B\nedge A B turbo\n", "unknown edge flag"),
            ("node A\nnode B\nedge A B distributed distributed\n", "repeated edge flag"),
            ("node A\nedge A\n", "line 2"),
            ("node\n", "line 1"),
            ("link A B\n", "unknown directive"),
        ],
    )
    def test_errors_carry_line_numbers(self, text, fragment):
        with pytest.raises(PgmError, match=fragment.replace("(", "").replace(")", "")):
            parse_pgm(text)

    def test_uav_description(self):
        p = parse_pgm(UAV)
        assert len(p.nodes) == 6 and len(p.edges) == 13


class TestDerive:
    def test_uav_signatures(self):
        sigs = derive_processes(parse_pgm(UAV))
        assert {(s.target, s.parents) for s in sigs} == {
            ("S", ("S", "U")),
            ("O", ("S",)),
            ("U", ("D", "Q")),
            ("D", ("D", "O", "U")),
            ("R", ("D", "O", "Q", "U")),
            ("Q", ("D",)),
        }

    def test_isolated_node_yields_nothing(self):
        assert derive_processes(parse_pgm("node A\n")) == frozenset()

    def test_source_only_node_yields_nothing(self):
        sigs = derive_processes(parse_pgm("node A\nnode B\nedge A B\n"))
        assert {s.target for s in sigs} == {"B"}

    def test_empty_parents_rejected(self):
        with pytest.raises(PgmError):
            ProcessSignature("A", ())


class TestAugment:
    def test_no_distributed_edges_is_identity(self):
        p = parse_pgm(UAV)
        assert augment(p) is p

    def test_two_node_example(self):
        aug = augment(parse_pgm("node A\nnode B\nedge A B distributed\n"))
        assert aug.nodes == frozenset({"A", "B", "A_in", "n_A"})
        assert {(e.src, e.dst) for e in aug.edges} == {
            ("A", "A_in"),
            ("n_A", "A_in"),
            ("A_in", "B"),
        }
        assert not any(e.distributed for e in aug.edges)

    def test_two_node_processes(self):
        aug = augment(parse_pgm("node A\nnode B\nedge A B distributed\n"))
        assert derive_processes(aug) == frozenset(
            {ProcessSignature("A_in", ("A", "n_A")), ProcessSignature("B", ("A_in",))}
        )

    def test_load_sensitive_gives_network_a_process(self):
        # With the optional sender dependence the rewrite yields three
        # processes: the channel, the network, and the consumer.
        aug = augment(parse_pgm("node A\nnode B\nedge A B distributed load-sensitive\n"))
        sigs = derive_processes(aug)
        assert len(sigs) == 3
        assert ProcessSignature("n_A", ("A",)) in sigs

    def test_distributed_uav(self):
        text = (MODELS / "uav_distributed.pgm").read_text()
        p = parse_pgm(text)
        dist = [e for e in p.edges if e.distributed]
        assert len(dist) == 3
        aug = augment(p)
        assert {"O1_in", "n_O1", "O2_in", "n_O2", "U_in", "n_U"} <= aug.nodes
        assert len(aug.nodes) == len(p.nodes) + 2 * len(dist)
        assert len(aug.edges) == len(p.edges) + 2 * len(dist)

    def test_idempotent(self):
        p = parse_pgm((MODELS / "uav_distributed.pgm").read_text())
        aug = augment(p)
        assert augment(aug) == aug

    def test_distributed_self_edge_rejected(self):
        with pytest.raises(PgmError, match="self-edge"):
            augment(parse_pgm("node A\nedge A A distributed\n"))

    def test_existing_name_collision_rejected(self):
        with pytest.raises(PgmError, match="collides"):
            augment(parse_pgm("node A\nnode B\nnode n_A\nedge A B distributed\n"))
        with pytest.raises(PgmError, match="collides"):
            augment(parse_pgm("node A\nnode B\nnode A_in\nedge A B distributed\n"))

    def test_shared_source_collides(self):
        with pytest.raises(PgmError, match="collides"):
            augment(
                parse_pgm(
                    "node A\nnode B\nnode C\nedge A B distributed\nedge A C distributed\n"
                )
            )


class TestEmit:
    def test_round_trip_uav(self):
        p = parse_pgm(UAV)
        assert parse_pgm(emit_pgm(p)) == p

    def test_empty(self):
        assert emit_pgm(Pgm()) == ""
        assert parse_pgm("") == Pgm()

    def test_canonical_order(self):
        text = emit_pgm(parse_pgm("node B\nnode A\nedge B A\nedge A B\n"))
        assert text == "node A\nnode B\nedge A B\nedge B A\n"

    def test_corpus_files_round_trip(self):
        for path in (MODELS / "uav.pgm", MODELS / "uav_distributed.pgm"):
            p = parse_pgm(path.read_text())
            assert parse_pgm(emit_pgm(p)) == p

    def test_golden_augmented_uav(self):
        p = parse_pgm((MODELS / "uav_distributed.pgm").read_text())
        golden = (GOLDEN / "uav_distributed_augmented.pgm").read_text()
        assert emit_pgm(augment(p)) == golden


# -- randomized structure ---------------------------------------------------

names = st.sampled_from(["A", "B", "C", "D", "E", "F"])


@st.composite
def pgms(draw):
    nodes = draw(st.frozensets(names, min_size=1, max_size=6))
    pool = sorted(nodes)
    pairs = draw(
        st.frozensets(
            st.tuples(st.sampled_from(pool), st.sampled_from(pool)), max_size=10
        )
    )
    edges = []
    for src, dst in sorted(pairs):
        edges.append(
            Edge(
                src,
                dst,
                distributed=draw(st.booleans()) and src != dst,
                load_sensitive=draw(st.booleans()),
            )
        )
    return Pgm(nodes, frozenset(edges))


@given(pgms())
@settings(max_examples=150)
def test_round_trip_random(p):
    assert parse_pgm(emit_pgm(p)) == p


@given(pgms())
@settings(max_examples=150)
def test_augment_invariants_random(p):
    dist = [e for e in p.edges if e.distributed]
    try:
        aug = augment(p)
    except PgmError:
        # collision (shared source or an unlucky name); nothing to check
        return
    assert not any(e.distributed for e in aug.edges)
    assert len(aug.nodes) == len(p.nodes) + 2 * len(dist)
    # each distributed edge becomes 3, plus the optional sender->network edge
    extra = sum(1 for e in dist if e.load_sensitive)
    assert len(aug.edges) == len(p.edges) + 2 * len(dist) + extra
    assert augment(aug) == aug
    sigs = {s.target: s.parents for s in derive_processes(aug)}
    for e in dist:
        assert sigs[f"{e.src}_in"] == tuple(sorted((e.src, f"n_{e.src}")))


@given(pgms())
@settings(max_examples=150)
def test_derived_parents_are_exactly_in_neighbors(p):
    naive = {}
    for e in p.edges:
        naive.setdefault(e.dst, set()).add(e.src)
    sigs = derive_processes(p)
    assert {s.target for s in sigs} == set(naive)
    for s in sigs:
        assert set(s.parents) == naive[s.target]
        assert list(s.parents) == sorted(s.parents)
