import json

import numpy as np
import pytest

from pdm_nfdm import cli
from pdm_nfdm.errors import ConfigurationError, NearZeroDenominatorError
from pdm_nfdm.experiment import aggregate, read_records
from pdm_nfdm.fiber import FieldState
from pdm_nfdm.nft import DualPolSignal, TimeGrid
from pdm_nfdm.plotting import PlotSpec, emit_plots, load_plot_spec
from pdm_nfdm.signal_io import read_signal, write_signal

SMALL_INI = """
[experiment]
experiment_id = tiny
mode = nfdm
model = lossless
power_dbm = -8, -6
n_bursts = 2
n_realizations = 1
[link]
n_spans = 1
[burst]
n_subcarriers = 8
burst_duration_ns = 1
guard_duration_ns = 1
oversampling = 16
"""


def gaussian_signal(n=256):
    grid = TimeGrid.centered(n, 16.0 / n)
    t = grid.t
    return DualPolSignal(0.3 * np.exp(-(t**2)), 0.2j * np.exp(-((t - 1) ** 2)), grid)


class TestSignalIo:
    def test_normalized_round_trip(self, tmp_path):
        sig = gaussian_signal()
        path = tmp_path / "s.nfdm"
        write_signal(path, sig)
        back = read_signal(path)
        assert isinstance(back, DualPolSignal)
        assert back.grid == sig.grid
        np.testing.assert_array_equal(back.stacked, sig.stacked)

    def test_physical_round_trip(self, tmp_path):
        grid = TimeGrid(-1e-9, 64, 1e-11)
        fld = FieldState(np.arange(64) * 1e-3, 1j * np.ones(64), grid)
        path = tmp_path / "f.nfdm"
        write_signal(path, fld)
        back = read_signal(path)
        assert isinstance(back, FieldState)
        np.testing.assert_array_equal(back.stacked, fld.stacked)

    def test_size_is_header_plus_samples(self, tmp_path):
        path = tmp_path / "s.nfdm"
        write_signal(path, gaussian_signal(128))
        assert path.stat().st_size == 28 + 2 * 128 * 16

    @pytest.mark.parametrize("mutate", ["magic", "version", "truncate"])
    def test_malformed(self, tmp_path, mutate):
        path = tmp_path / "s.nfdm"
        write_signal(path, gaussian_signal(64))
        raw = bytearray(path.read_bytes())
        if mutate == "magic":
            raw[:4] = b"XXXX"
        elif mutate == "version":
            raw[4] = 9
        else:
            raw = raw[:-8]
        path.write_bytes(bytes(raw))
        with pytest.raises(ConfigurationError):
            read_signal(path)


def agg_record(exp, power, q, osnr=None, taps=None, ber=1e-3):
    return dict(
        kind="aggregate", experiment_id=exp, power_dbm=power, osnr_db=osnr, n_taps=taps,
        q_db=q, q_evm_db=q, ber=ber, ber_ci_low=ber / 2, ber_ci_high=ber * 2,
    )


class TestPlots:
    def test_empty_selection(self, tmp_path):
        spec = PlotSpec("p", "q_vs_power", ("missing",))
        with pytest.raises(ConfigurationError):
            emit_plots([agg_record("e", 0.0, 8.0)], [spec], tmp_path)
        assert list(tmp_path.iterdir()) == []

    def test_empty_record_set(self, tmp_path):
        with pytest.raises(ConfigurationError):
            emit_plots([], [PlotSpec("p", "q_vs_power", ("e",))], tmp_path)
        assert list(tmp_path.iterdir()) == []

    def test_single_point(self, tmp_path):
        paths = emit_plots([agg_record("e", 0.0, 8.0)], [PlotSpec("p", "q_vs_power", ("e",))], tmp_path)
        assert sorted(p.rsplit(".", 1)[1] for p in paths) == ["csv", "svg"]
        rows = (tmp_path / "p.csv").read_text().strip().splitlines()
        assert len(rows) == 2 and rows[1].startswith("e,0.0,8.0")
        assert "<svg" in (tmp_path / "p.svg").read_text()

    def test_two_curves_sorted(self, tmp_path):
        recs = [agg_record("a", 3.0, 9.0), agg_record("a", 0.0, 8.0), agg_record("b", -3.0, 6.0)]
        emit_plots(recs, [PlotSpec("p", "q_vs_power", ("a", "b"))], tmp_path)
        rows = (tmp_path / "p.csv").read_text().strip().splitlines()[1:]
        assert [r.split(",")[:2] for r in rows] == [["a", "0.0"], ["a", "3.0"], ["b", "-3.0"]]

    def test_osnr_and_taps(self, tmp_path):
        recs = [agg_record("a", -3.1, None, osnr=o, ber=10 ** -o / 3) for o in (10.0, 14.0)]
        recs += [agg_record("t", 0.5, 8 + 0.1 * n, taps=n) for n in (1, 3)] + [agg_record("t", 3.0, 1.0, taps=1)]
        specs = [PlotSpec("ber", "ber_vs_osnr", ("a",)), PlotSpec("taps", "q_vs_taps", ("t",), power_dbm=0.5)]
        emit_plots(recs, specs, tmp_path)
        assert len((tmp_path / "ber.csv").read_text().strip().splitlines()) == 3
        assert len((tmp_path / "taps.csv").read_text().strip().splitlines()) == 3

    def test_spec_file(self, tmp_path):
        path = tmp_path / "plots.ini"
        path.write_text("[plot fig5]\nkind = q_vs_power\nexperiments = a, b\n")
        (spec,) = load_plot_spec(path)
        assert spec == PlotSpec("fig5", "q_vs_power", ("a", "b"))
        path.write_text("[plot x]\nkind = pie\nexperiments = a\n")
        with pytest.raises(ConfigurationError):
            load_plot_spec(path)


class TestCli:
    def test_validate_defaults(self, tmp_path, capsys):
        path = tmp_path / "c.ini"
        path.write_text("[experiment]\nmode = nfdm\n")
        assert cli.main(["validate", str(path)]) == 0
        out = capsys.readouterr().out
        assert "224 Gbit/s" in out and "44.8 Gbit/s" in out

    def test_validate_guard_warning(self, tmp_path, capsys):
        path = tmp_path / "c.ini"
        path.write_text("[burst]\nguard_duration_ns = 8\n")
        assert cli.main(["validate", str(path)]) == 0
        assert "warning" in capsys.readouterr().out

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "c.ini"
        path.write_text("[experiment]\npower_mw = -1\n")
        assert cli.main(["validate", str(path)]) == cli.EXIT_CONFIG
        assert cli.main(["run", str(tmp_path / "nope.ini")]) == cli.EXIT_CONFIG

    def test_run_then_plot(self, tmp_path):
        cfg = tmp_path / "tiny.ini"
        cfg.write_text(SMALL_INI)
        out = tmp_path / "tiny.jsonl"
        assert cli.main(["run", str(cfg), "--out", str(out), "--workers", "1", "--quiet"]) == 0
        recs = read_records(out)
        assert sum(r["kind"] == "realization" for r in recs) == 2
        assert [r for r in recs if r["kind"] == "aggregate"] == aggregate(recs)
        first = out.read_bytes()
        assert cli.main(["run", str(cfg), "--out", str(out), "--workers", "1", "--quiet"]) == 0
        assert out.read_bytes() == first
        spec = tmp_path / "plots.ini"
        spec.write_text("[plot q]\nkind = q_vs_power\nexperiments = tiny\n")
        assert cli.main(["plot", str(out), str(spec), "--out-dir", str(tmp_path / "figs")]) == 0
        assert (tmp_path / "figs" / "q.svg").exists()

    def test_plot_empty_selection_exit_code(self, tmp_path):
        recs = tmp_path / "r.jsonl"
        recs.write_text(json.dumps(agg_record("e", 0.0, 8.0)) + "\n")
        spec = tmp_path / "plots.ini"
        spec.write_text("[plot q]\nkind = q_vs_power\nexperiments = other\n")
        assert cli.main(["plot", str(recs), str(spec), "--out-dir", str(tmp_path)]) == cli.EXIT_CONFIG

    def test_nft_roundtrip(self, tmp_path, capsys):
        path = tmp_path / "s.nfdm"
        write_signal(path, gaussian_signal())
        assert cli.main(["nft", "roundtrip", str(path)]) == 0
        out = capsys.readouterr().out
        err = float(out.split("time-domain error")[1].split()[0])
        assert err < 1e-5

    def test_numerical_failure_exit_code(self, tmp_path, monkeypatch):
        def fail(sig):
            raise NearZeroDenominatorError(3, 1e-15, 1e-12)

        monkeypatch.setattr(cli, "nft_spectrum", fail)
        path = tmp_path / "s.nfdm"
        write_signal(path, gaussian_signal(64))
        assert cli.main(["nft", "roundtrip", str(path)]) == cli.EXIT_NUMERICAL
