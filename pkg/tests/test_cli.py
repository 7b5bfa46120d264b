"""Command-line interface: formats, exit codes, caching, determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from deconvtest.cli import (
    CSV_HEADER, EXIT_DATA, EXIT_OK, EXIT_USAGE, build_distribution,
    config_hash, main, read_data_file,
)

FIXTURE = Path(__file__).parent / "data" / "mod1_h0_n500.txt"

# keep CLI tests quick: small calibration, asymptotic where possible
FAST_TEST = ["--calibration", "mc", "--reps", "300"]


def run_cli(args):
    return main([str(a) for a in args])


class TestDataFile:
    def test_fixture_parses(self):
        data = read_data_file(str(FIXTURE))
        assert data.size == 500
        assert np.all(data >= 0)

    def test_comments_and_blanks(self, tmp_path):
        f = tmp_path / "d.txt"
        f.write_text("# header\n\n1.5\n 2.5 # trailing\n\n")
        np.testing.assert_allclose(read_data_file(str(f)), [1.5, 2.5])

    def test_bad_token_cites_line(self, tmp_path):
        f = tmp_path / "d.txt"
        f.write_text("1.0\n2.0\nabc\n4.0\n")
        with pytest.raises(Exception, match=":3:"):
            read_data_file(str(f))


class TestCmdTest:
    def test_fixture_does_not_reject(self, tmp_path, capsys):
        out = tmp_path / "res.json"
        code = run_cli(["test", FIXTURE, "--out", out, *FAST_TEST])
        assert code == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["result"]["reject"] is False
        assert doc["config"]["null"]["y"]["kind"] == "exponential"
        assert doc["schema"] == "deconvtest-result-v1"

    def test_exit_zero_even_when_rejecting(self, tmp_path):
        f = tmp_path / "far.txt"
        f.write_text("\n".join(["25.0"] * 200) + "\n")
        out = tmp_path / "res.json"
        code = run_cli(["test", f, "--calibration", "asymptotic", "--out", out])
        assert code == EXIT_OK
        assert json.loads(out.read_text())["result"]["reject"] is True

    def test_parse_error_exit_code(self, tmp_path, capsys):
        f = tmp_path / "bad.txt"
        f.write_text("1.0\n2.0\nabc\n")
        assert run_cli(["test", f]) == EXIT_DATA
        assert ":3:" in capsys.readouterr().err

    def test_negative_data_is_domain_error(self, tmp_path, capsys):
        f = tmp_path / "neg.txt"
        f.write_text("1.0\n-2.0\n")
        assert run_cli(["test", f, "--calibration", "asymptotic"]) == EXIT_DATA

    def test_discrete_reference_requires_integers(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "null": {"y": {"kind": "poisson", "mean": 1},
                     "z": {"kind": "geometric", "mean": 1},
                     "reference": {"kind": "geometric", "p": 0.5}}}))
        f = tmp_path / "d.txt"
        f.write_text("1\n2\n2.5\n")
        assert run_cli(["test", f, "--config", cfg]) == EXIT_DATA

    def test_alpha_lowers_critical_value(self, tmp_path):
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        base = ["test", FIXTURE, "--calibration", "asymptotic"]
        assert run_cli([*base, "--alpha", "0.05", "--out", out_a]) == EXIT_OK
        assert run_cli([*base, "--alpha", "0.5", "--out", out_b]) == EXIT_OK
        crit_a = json.loads(out_a.read_text())["result"]["critical_value"]
        crit_b = json.loads(out_b.read_text())["result"]["critical_value"]
        assert crit_b < crit_a

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"null": {"why": 1}}))
        assert run_cli(["test", FIXTURE, "--config", cfg]) == EXIT_USAGE
        assert "unknown key" in capsys.readouterr().err


class TestCmdCoeffs:
    def test_document_round_trip(self, tmp_path):
        coef = tmp_path / "c.json"
        assert run_cli(["coeffs", "--kmax", "6", "--out", coef]) == EXIT_OK
        doc = json.loads(coef.read_text())
        sigma = np.asarray(doc["sigma"])
        assert sigma.shape == (6, 6)
        np.testing.assert_allclose(sigma, sigma.T)
        assert np.linalg.eigvalsh(sigma)[0] > -1e-10
        assert doc["config_hash"]

        # cached and recomputed coefficients give identical results
        out_cached = tmp_path / "r1.json"
        out_fresh = tmp_path / "r2.json"
        base = ["test", FIXTURE, "--calibration", "asymptotic", "--kmax", "6"]
        assert run_cli([*base, "--coeffs-cache", coef,
                        "--out", out_cached]) == EXIT_OK
        assert run_cli([*base, "--out", out_fresh]) == EXIT_OK
        res_cached = json.loads(out_cached.read_text())["result"]
        res_fresh = json.loads(out_fresh.read_text())["result"]
        assert res_cached == res_fresh

    def test_stale_cache_rejected(self, tmp_path, capsys):
        coef = tmp_path / "c.json"
        assert run_cli(["coeffs", "--kmax", "4", "--out", coef]) == EXIT_OK
        cfg = tmp_path / "other.json"
        cfg.write_text(json.dumps({"null": {"z": {"kind": "chi_squared",
                                                  "df": 2}}}))
        code = run_cli(["test", FIXTURE, "--config", cfg,
                        "--coeffs-cache", coef, "--calibration", "asymptotic"])
        assert code == EXIT_USAGE
        assert "stale" in capsys.readouterr().err

    def test_order_zero_rejected(self, capsys):
        assert run_cli(["coeffs", "--kmax", "0"]) == EXIT_USAGE

    def test_order_required(self, capsys):
        assert run_cli(["coeffs"]) == EXIT_USAGE


class TestCmdSimulate:
    def _config(self, tmp_path):
        cfg = tmp_path / "sim.json"
        cfg.write_text(json.dumps({
            "test": {"mc_reps": 150, "mc_seed": 31},
            "sim": {"scenarios": ["Mod1"], "n": [50], "reps": 40,
                    "master_seed": 8}}))
        return cfg

    def test_csv_header_and_shape(self, tmp_path, capsys):
        cfg = self._config(tmp_path)
        out = tmp_path / "sim.csv"
        assert run_cli(["simulate", "--config", cfg, "--out", out]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 2
        assert lines[1].startswith("Mod1,50,40,")

    def test_json_twin_matches(self, tmp_path):
        cfg = self._config(tmp_path)
        out = tmp_path / "sim.csv"
        run_cli(["simulate", "--config", cfg, "--out", out])
        twin = json.loads((tmp_path / "sim.json").read_text())
        assert len(twin["rows"]) == 1
        row = twin["rows"][0]
        cells = out.read_text().splitlines()[1].split(",")
        assert row["scenario"] == cells[0]
        assert row["reject_rate"] == float(cells[3])
        assert "Mod1:50" in twin["timing_seconds"]

    def test_byte_identical_for_equal_seeds(self, tmp_path):
        cfg = self._config(tmp_path)
        out1, out2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
        run_cli(["simulate", "--config", cfg, "--out", out1])
        run_cli(["simulate", "--config", cfg, "--out", out2])
        assert out1.read_bytes() == out2.read_bytes()

    def test_scenario_flag_overrides(self, tmp_path):
        cfg = self._config(tmp_path)
        out = tmp_path / "sim.csv"
        code = run_cli(["simulate", "--config", cfg, "--out", out,
                        "--scenarios", "Mod1", "--n", "50,60"])
        assert code == EXIT_OK
        assert len(out.read_text().splitlines()) == 3

    def test_unknown_scenario_rejected(self, tmp_path, capsys):
        cfg = self._config(tmp_path)
        assert run_cli(["simulate", "--config", cfg, "--scenarios", "Alt9",
                        "--out", tmp_path / "x.csv"]) == EXIT_USAGE

    def test_single_scenario_keeps_default_sizes(self, tmp_path):
        # no sim.n in the config: the default grid is {50, 100, 500}
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"test": {"mc_reps": 150, "mc_seed": 2},
                                   "sim": {"reps": 10, "master_seed": 3}}))
        out = tmp_path / "one.csv"
        assert run_cli(["simulate", "--config", cfg, "--scenarios", "Mod1",
                        "--out", out]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 4
        assert [ln.split(",")[1] for ln in lines[1:]] == ["50", "100", "500"]

    def test_default_grid_is_24_rows(self, tmp_path):
        # all 8 scenarios x 3 sample sizes; tiny replication counts keep
        # the shape check quick
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"test": {"mc_reps": 150, "mc_seed": 1},
                                   "sim": {"reps": 10, "master_seed": 4}}))
        out = tmp_path / "grid.csv"
        assert run_cli(["simulate", "--config", cfg, "--out", out]) == EXIT_OK
        assert len(out.read_text().splitlines()) == 25


class TestNumericalFailure:
    def test_nonintegrable_axis_exits_4(self, tmp_path, capsys):
        # a gamma signal with tiny shape defeats the square-root
        # substitution, so the coefficient quadrature reports failure
        from deconvtest.cli import EXIT_NUMERIC
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "null": {"y": {"kind": "gamma", "shape": 0.18, "scale": 1.0},
                     "z": {"kind": "exponential", "mean": 1.0}},
            "test": {"calibration": "asymptotic"}}))
        f = tmp_path / "d.txt"
        f.write_text("\n".join(str(v) for v in np.linspace(0.1, 5, 60)))
        assert run_cli(["test", f, "--config", cfg]) == EXIT_NUMERIC
        assert "quadrature" in capsys.readouterr().err


class TestConfigHelpers:
    def test_distribution_builder_rejects_unknown_keys(self):
        with pytest.raises(Exception, match="unknown key"):
            build_distribution({"kind": "exponential", "rate": 2.0})

    def test_distribution_builder_nested_mixture(self):
        mix = build_distribution({
            "kind": "mixture", "weight": 0.5,
            "a": {"kind": "poisson", "mean": 2},
            "b": {"kind": "geometric", "mean": 2}})
        assert mix.mean() == pytest.approx(2.0)

    def test_config_hash_is_stable_and_sensitive(self):
        a = {"y": {"kind": "exponential", "mean": 1.0}}
        assert config_hash(a) == config_hash(json.loads(json.dumps(a)))
        assert config_hash(a) != config_hash(
            {"y": {"kind": "exponential", "mean": 2.0}})
