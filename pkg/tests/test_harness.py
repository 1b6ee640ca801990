import csv
import dataclasses

import numpy as np
import pytest

from stripe_sim.cli import load_config, main, parse_methods, parse_powers
from stripe_sim.exceptions import ConfigError
from stripe_sim.fronthaul import Phase, expected_load, serialized_transport
from stripe_sim.harness import (
    ALL_METHODS,
    ExperimentSpec,
    emit_csv,
    emit_fronthaul_csv,
    emit_plotdata,
    paired_test,
    run_experiment,
    run_trial,
    setup_rng,
    trial_rng,
)
from stripe_sim.oos_estimation import Method
from stripe_sim.topology import SystemConfig, place_entities

SMALL = ExperimentSpec(num_setups=4, symbols_per_setup=20)


@pytest.fixture(scope="module")
def small_report():
    return run_experiment(SMALL, workers=1)


class TestSpec:
    def test_defaults(self):
        spec = ExperimentSpec()
        assert spec.power_grid_db == (-10.0, -8.0, -6.0, -4.0, -2.0, 0.0)
        assert spec.num_setups == 200 and spec.num_symbols == 100
        assert spec.config.oos_power == pytest.approx(10 ** (-0.3) * spec.config.ue_power)

    def test_symbols_capped_by_block(self):
        assert ExperimentSpec(symbols_per_setup=10_000).num_symbols == 150

    @pytest.mark.parametrize(
        "kw",
        [
            dict(num_setups=0),
            dict(symbols_per_setup=0),
            dict(power_grid_db=()),
            dict(power_grid_db=(0.0, -2.0)),
            dict(methods=(Method.LOCAL, Method.LOCAL)),
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ConfigError):
            ExperimentSpec(**kw)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            ExperimentSpec(methods=("Kalman",))


class TestTrial:
    def test_seeding_is_per_trial(self):
        a = trial_rng(0, 3, 2).standard_normal(4)
        assert np.array_equal(a, trial_rng(0, 3, 2).standard_normal(4))
        assert not np.array_equal(a, trial_rng(0, 3, 1).standard_normal(4))
        assert not np.array_equal(a, setup_rng(0, 3).standard_normal(4))

    def test_serialized_transport_changes_nothing(self):
        cfg = SystemConfig().with_power_db(-4.0)
        placement = place_entities(cfg, setup_rng(7, 0))
        plain = run_trial(cfg, placement, ALL_METHODS, trial_rng(7, 0, 0), 30)
        wired = run_trial(cfg, placement, ALL_METHODS, trial_rng(7, 0, 0), 30, transport=serialized_transport)
        assert plain.bit_errors == wired.bit_errors
        for m in ALL_METHODS:
            for ph in Phase:
                np.testing.assert_array_equal(plain.ledgers[m].loads[ph], wired.ledgers[m].loads[ph])

    def test_ledgers_follow_table(self):
        cfg = SystemConfig()
        placement = place_entities(cfg, setup_rng(1, 0))
        trial = run_trial(cfg, placement, ALL_METHODS, trial_rng(1, 0, 0), 10)
        assert trial.num_bits == 2 * 5 * 10
        for m in ALL_METHODS:
            for ph in Phase:
                np.testing.assert_array_equal(trial.ledgers[m].per_period(ph), expected_load(m, ph, cfg))

    def test_clean_genie_is_error_free(self):
        cfg = dataclasses.replace(SystemConfig(), noise_var=0.0, oos_power=0.0)
        placement = place_entities(cfg, setup_rng(2, 0))
        trial = run_trial(cfg, placement, [Method.GENIE], trial_rng(2, 0, 0))
        assert trial.bit_errors[Method.GENIE] == 0
        assert trial.num_bits == 2 * 5 * 150


class TestExperiment:
    def test_shapes(self, small_report):
        r = small_report
        assert r.trial_errors.shape == (6, 4, 6)
        assert r.ber.shape == (6, 6)
        assert np.all((r.ber >= 0) & (r.ber <= 1))
        assert r.fronthaul_matches_table
        assert np.all(r.ci95() > 0)

    def test_deterministic(self, small_report, tmp_path):
        again = run_experiment(SMALL, workers=1)
        np.testing.assert_array_equal(again.trial_errors, small_report.trial_errors)
        emit_csv(small_report, tmp_path / "a.csv")
        emit_csv(again, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_parallel_matches_serial(self, small_report):
        par = run_experiment(SMALL, workers=2)
        np.testing.assert_array_equal(par.trial_errors, small_report.trial_errors)

    def test_seed_changes_outcome(self, small_report):
        other = dataclasses.replace(SMALL, config=dataclasses.replace(SMALL.config, rng_seed=1))
        assert not np.array_equal(run_experiment(other, workers=1).trial_errors, small_report.trial_errors)

    def test_paired_test_direction(self, small_report):
        diff, p = paired_test(small_report, Method.GENIE, Method.NO_SUPPRESSION, -10.0)
        assert diff > 0 and p < 0.5
        _, q = paired_test(small_report, Method.NO_SUPPRESSION, Method.GENIE, -10.0)
        assert q > 0.5

    def test_outputs(self, small_report, tmp_path):
        emit_csv(small_report, tmp_path / "ber.csv")
        emit_fronthaul_csv(small_report, tmp_path / "fh.csv")
        emit_plotdata(small_report, tmp_path / "plot.dat")
        rows = list(csv.DictReader((tmp_path / "ber.csv").open()))
        assert len(rows) == 36
        row = rows[0]
        assert float(row["ber"]) == pytest.approx(int(row["bit_errors"]) / int(row["bits_total"]))
        fh = list(csv.DictReader((tmp_path / "fh.csv").open()))
        assert len(fh) == 6 * 3 * 4
        gram = {(r["phase"], int(r["link"])): int(r["real_symbols"]) for r in fh if r["method"] == "Gramian"}
        assert gram[("pilot", 4)] == 2025 and gram[("payload", 1)] == 48
        lines = (tmp_path / "plot.dat").read_text().splitlines()
        assert lines[0].startswith("# power_db,")
        assert len(lines) == 7
        assert np.loadtxt(tmp_path / "plot.dat", delimiter=",").shape == (6, 7)

    def test_unwritable(self, small_report, tmp_path):
        with pytest.raises(OSError):
            emit_csv(small_report, tmp_path / "missing" / "ber.csv")


class TestCli:
    def _config_file(self, tmp_path, text="num_aps = 4\nantennas_per_ap = 4\n"):
        path = tmp_path / "sim.cfg"
        path.write_text(text)
        return path

    def test_load_config(self, tmp_path):
        cfg = load_config(self._config_file(tmp_path, "num_ues = 3  # served\nnoise_floor_db = -120\n"))
        assert cfg.num_ues == 3 and cfg.noise_floor_db == -120.0

    @pytest.mark.parametrize("text", ["bogus = 1\n", "num_aps = four\n", "num_ues = 60\n"])
    def test_bad_config(self, tmp_path, text):
        with pytest.raises(ConfigError):
            load_config(self._config_file(tmp_path, text))

    def test_parse_powers(self):
        assert parse_powers("-10:0:2") == (-10.0, -8.0, -6.0, -4.0, -2.0, 0.0)
        assert parse_powers("0:0:1") == (0.0,)
        for bad in ("1:2", "0:-1:1", "0:1:0", "a:b:c"):
            with pytest.raises(ConfigError):
                parse_powers(bad)

    def test_parse_methods(self):
        assert parse_methods("Genie, Local") == (Method.GENIE, Method.LOCAL)
        with pytest.raises(ConfigError):
            parse_methods("Genie,Kalman")

    def test_run(self, tmp_path):
        out = tmp_path / "out"
        argv = ["--config", str(self._config_file(tmp_path)), "--out", str(out), "--seed", "3",
                "--methods", "Genie,Gramian,NoSuppression", "--powers", "-4:0:4", "--setups", "2", "--symbols", "10"]
        assert main(argv) == 0
        rows = (out / "ber.csv").read_text().splitlines()
        assert rows[0] == "method,power_db,ber,ci95,bits_total,bit_errors"
        assert len(rows) == 1 + 3 * 2
        assert (out / "fronthaul.csv").exists() and (out / "plotdata.dat").exists()
        first = (out / "ber.csv").read_bytes()
        assert main(argv) == 0
        assert (out / "ber.csv").read_bytes() == first

    def test_validation_failure(self, tmp_path, capsys):
        code = main(["--config", str(self._config_file(tmp_path, "pilot_len = 3\n")), "--out", str(tmp_path)])
        assert code != 0
        assert "simulate:" in capsys.readouterr().err

    def test_missing_config(self, tmp_path, capsys):
        assert main(["--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) != 0
        assert capsys.readouterr().err

    def test_threads_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("STRIPE_SIM_THREADS", "1")
        out = tmp_path / "o"
        argv = ["--config", str(self._config_file(tmp_path)), "--out", str(out), "--setups", "1", "--symbols", "4",
                "--powers", "0:0:1"]
        assert main(argv) == 0
