"""End-to-end command-line behavior: exit codes, report text, file outputs.

Everything drives ``main(argv)`` directly; stdout/stderr are captured by
pytest, so these tests exercise exactly what a shell user sees.
"""

from pathlib import Path

import pytest

from twincheck.cli import main, run_check, select_properties
from twincheck.uav import ConfigError, UavConfig, load_config, property_catalog

ROOT = Path(__file__).resolve().parent.parent
MODELS = ROOT / "models"
GOLDEN = Path(__file__).resolve().parent / "golden"

SMALL = str(MODELS / "small.cfg")
TINY = str(MODELS / "tiny.cfg")
BROKEN = str(MODELS / "broken_p3.cfg")


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# -- property selection ------------------------------------------------------------


class TestSelectProperties:
    def setup_method(self):
        self.catalog = property_catalog(UavConfig(m=1, eta=1))

    def test_default_is_everything(self):
        sel = select_properties(self.catalog, None)
        assert sel[0] == "termination"
        assert sel[1:] == list(self.catalog)

    def test_exact_name(self):
        sel = select_properties(self.catalog, ["P2"])
        assert [p.name for p in sel] == ["P2"]

    def test_family_prefix(self):
        sel = select_properties(self.catalog, ["P5"])
        assert [p.name for p in sel] == [f"P5(m=1,t={t})" for t in (1, 2, 3, 4)]

    def test_instance_name(self):
        sel = select_properties(self.catalog, ["P5(m=1,t=2)"])
        assert [p.name for p in sel] == ["P5(m=1,t=2)"]

    def test_termination_and_dedupe(self):
        sel = select_properties(self.catalog, ["termination", "P2", "P2"])
        assert sel[0] == "termination"
        assert [p.name for p in sel[1:]] == ["P2"]

    def test_unknown(self):
        with pytest.raises(ConfigError, match="unknown property"):
            select_properties(self.catalog, ["P99"])


# -- check --------------------------------------------------------------------------


class TestCheck:
    def test_all_pass(self, capsys):
        code, out, err = run(["check", "--config", SMALL], capsys)
        assert code == 0
        assert "model: uav-fixed" in out
        assert "states: 280 distinct, 312 total" in out
        assert "result: pass (9 checks)" in out
        for name in ["termination", "P1", "P2", "P4", "P5(m=1,t=1)",
                     "P5(m=1,t=2)", "P7(t=0)", "P7(t=1)", "P8"]:
            assert out.count(f"{name}: pass") == 1
        assert out.count("workers: 1\n") == 1
        assert "duration: " in out

    def test_config_echo(self, capsys):
        _, out, _ = run(["check", "--config", SMALL], capsys)
        assert "  M = 1\n" in out
        assert "  eta = 1\n" in out
        assert "  variant = fixed\n" in out
        assert "  sync_tol = 7\n" in out  # effective worst-case tolerance

    def test_violation_exits_one(self, capsys):
        code, out, err = run(["check", "--config", BROKEN], capsys)
        assert code == 1
        assert "states: 7932 distinct, 15558 total" in out
        assert out.count("P2: fail") == 1
        assert "counterexample:" in out
        assert "step 0 (initial):" in out
        assert "result: fail (1 of 11 checks violated)" in out

    def test_props_selection(self, capsys):
        code, out, _ = run(["check", "--config", BROKEN, "--props", "P8,termination"], capsys)
        assert code == 0  # the timestamp bug is not in this variant
        assert "P8: pass" in out
        assert "termination: pass" in out
        assert "P2" not in out
        assert "result: pass (2 checks)" in out

    def test_unknown_prop(self, capsys):
        code, out, err = run(["check", "--config", SMALL, "--props", "P99"], capsys)
        assert code == 2
        assert "error: unknown property 'P99'" in err

    def test_malformed_config(self, capsys, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("nonsense\n")
        code, _, err = run(["check", "--config", str(bad)], capsys)
        assert code == 2
        assert "error: line 1:" in err

    def test_missing_config(self, capsys):
        code, _, err = run(["check", "--config", str(MODELS / "nope.cfg")], capsys)
        assert code == 2
        assert "cannot read" in err

    def test_limit_hit(self, capsys):
        code, out, err = run(["check", "--config", SMALL, "--limit", "50"], capsys)
        assert code == 3
        assert err.startswith("limit hit:")
        assert out == ""  # no partial report

    def test_limit_echoed_when_roomy(self, capsys):
        code, out, _ = run(["check", "--config", SMALL, "--limit", "5000"], capsys)
        assert code == 0
        assert "limit: 5000 states, not reached" in out

    def test_bad_workers(self, capsys):
        code, _, err = run(["check", "--config", SMALL, "--workers", "0"], capsys)
        assert code == 2
        assert "workers" in err


class TestReportStability:
    def test_body_independent_of_workers(self):
        cfg = load_config(SMALL)
        one = run_check(cfg, workers=1)
        two = run_check(cfg, workers=2)
        assert one.body == two.body
        assert one.code == two.code == 0

    def test_footer_is_the_only_unstable_part(self, capsys):
        code1, out1, _ = run(["check", "--config", SMALL, "--workers", "1"], capsys)
        code2, out2, _ = run(["check", "--config", SMALL, "--workers", "2"], capsys)

        def body(text):
            lines = text.splitlines()
            assert lines[-2].startswith("workers: ")
            assert lines[-1].startswith("duration: ")
            return lines[:-2]

        assert body(out1) == body(out2)
        assert code1 == code2 == 0


# -- graph --------------------------------------------------------------------------


class TestGraph:
    def test_matches_golden(self, capsys, tmp_path):
        out_path = tmp_path / "tiny.dot"
        code, out, _ = run(["graph", "--config", TINY, "--out", str(out_path)], capsys)
        assert code == 0
        assert "states: 112 distinct, 128 total" in out
        assert f"wrote {out_path}" in out
        assert out_path.read_text() == (GOLDEN / "tiny.dot").read_text()

    def test_limit_hit(self, capsys, tmp_path):
        out_path = tmp_path / "x.dot"
        code, _, err = run(
            ["graph", "--config", SMALL, "--out", str(out_path), "--limit", "99"], capsys
        )
        assert code == 3
        assert "limit hit:" in err
        assert not out_path.exists()

    def test_labels_flag(self, capsys, tmp_path):
        out_path = tmp_path / "tiny-labeled.dot"
        code, _, _ = run(
            ["graph", "--config", TINY, "--out", str(out_path), "--labels"], capsys
        )
        assert code == 0
        assert '[label="pt_observe_emit_1"]' in out_path.read_text()


# -- pgm ----------------------------------------------------------------------------


class TestPgmCommands:
    def test_augment_matches_golden(self, capsys):
        code, out, _ = run(
            ["pgm", "augment", str(MODELS / "uav_distributed.pgm")], capsys
        )
        assert code == 0
        assert out == (GOLDEN / "uav_distributed_augmented.pgm").read_text()

    def test_augment_without_distributed_edges_is_canonical_echo(self, capsys):
        code, out, _ = run(["pgm", "augment", str(MODELS / "uav.pgm")], capsys)
        assert code == 0
        assert out.startswith("node ")
        assert "distributed" not in out

    def test_processes(self, capsys):
        code, out, _ = run(["pgm", "processes", str(MODELS / "uav.pgm")], capsys)
        assert code == 0
        lines = out.rstrip("\n").split("\n")
        assert len(lines) == 6
        assert all(" -> " in ln for ln in lines)
        targets = [ln.split(" -> ")[1] for ln in lines]
        assert targets == sorted(targets)

    def test_parse_failure(self, capsys, tmp_path):
        bad = tmp_path / "bad.pgm"
        bad.write_text("widget A\n")
        code, _, err = run(["pgm", "processes", str(bad)], capsys)
        assert code == 2
        assert "error: line 1:" in err

    def test_missing_file(self, capsys):
        code, _, err = run(["pgm", "augment", str(MODELS / "nope.pgm")], capsys)
        assert code == 2


# -- leakage ------------------------------------------------------------------------


class TestLeakageCommands:
    def test_simulate_then_estimate(self, capsys, tmp_path):
        trace = tmp_path / "episode.trace"
        code, out, _ = run(
            ["leakage", "simulate", "--horizon", "200", "--seed", "42",
             "--out", str(trace)], capsys
        )
        assert code == 0
        assert f"wrote 201 steps to {trace}" in out
        assert trace.read_text().startswith("m=2\n")

        code, out, _ = run(["leakage", "estimate", str(trace)], capsys)
        assert code == 0
        assert out.splitlines()[0].split() == ["action", "samples", "rate", "bound"]
        assert "action=1 " in out and "action=2 " in out

    def test_simulate_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.trace", tmp_path / "b.trace"
        run(["leakage", "simulate", "--seed", "9", "--horizon", "50", "--out", str(a)], capsys)
        run(["leakage", "simulate", "--seed", "9", "--horizon", "50", "--out", str(b)], capsys)
        assert a.read_text() == b.read_text()

    def test_estimate_needs_two_steps(self, capsys, tmp_path):
        trace = tmp_path / "short.trace"
        trace.write_text("m=1\n100 1\n")
        code, _, err = run(["leakage", "estimate", str(trace)], capsys)
        assert code == 2
        assert "too short" in err

    def test_bound_reference_value(self, capsys):
        code, out, _ = run(
            ["leakage", "bound", "--lam", "0.05", "--n", "100", "--eps", "0.1"], capsys
        )
        assert code == 0
        assert out == "bound: 0.05\n"

    def test_bound_with_sample_complexity(self, capsys):
        code, out, _ = run(
            ["leakage", "bound", "--lam", "0.05", "--n", "100", "--eps", "0.1",
             "--delta", "0.1"], capsys
        )
        assert code == 0
        assert out == "bound: 0.05\nsamples: 50\n"

    def test_bound_rejects_bad_epsilon(self, capsys):
        code, _, err = run(
            ["leakage", "bound", "--lam", "0.05", "--n", "100", "--eps", "0"], capsys
        )
        assert code == 2
        assert "epsilon" in err

    def test_montecarlo(self, capsys):
        code, out, _ = run(
            ["leakage", "montecarlo", "--rates", "0.05", "--n", "100",
             "--trials", "100", "--seed", "3"], capsys
        )
        assert code == 0
        header = out.splitlines()[0].split()
        assert header == ["action", "rate", "mean", "freq", "bound"]
        assert "action=1 rate=1/20 samples=100 trials=100" in out

    def test_montecarlo_bad_rates(self, capsys):
        code, _, err = run(
            ["leakage", "montecarlo", "--rates", "fast", "--trials", "100"], capsys
        )
        assert code == 2
        assert "bad rate list" in err

    def test_seed_must_fit(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["leakage", "simulate", "--seed", str(2**64), "--out", "x"])
        assert exc.value.code == 2
        capsys.readouterr()


# -- argparse contract ----------------------------------------------------------------


class TestUsageErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["check"],                    # missing --config
            ["frobnicate"],
            ["graph", "--config", SMALL],  # missing --out
            ["pgm"],
            ["leakage", "simulate"],      # missing --out
        ],
    )
    def test_usage_exits_two(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
        capsys.readouterr()
