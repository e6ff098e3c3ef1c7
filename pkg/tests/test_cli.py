import os

import numpy as np
import pytest

from chdlink.cli import (CSV_FIELDS, derive_cell_seed, load_config, main,
                         parse_results, run_and_emit)
from chdlink.engine import ConfigError, run_cell

TINY_BODY = """
# desk-scale smoke configuration
K = 2
N = 3
Ms = 1
U = 1
V = 2
J = 2
T = 10
packets = 3
calibration = 10
snr_db = 0, 10
"""


def _write(tmp_path, body, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(body, encoding="utf-8")
    return str(path)


class TestLoadConfig:
    def test_defaults_fill_missing(self, tmp_path):
        spec = load_config(_write(tmp_path, "K = 5\nN = 10\nMs = 2\n"))
        assert spec.values["J"] == 6
        assert spec.values["T"] == 100
        assert spec.values["n0"] == 1.0
        assert spec.values["gamma"] == 1.0
        assert spec.snr_db == [0.0, 2.0, 4.0, 6.0, 8.0, 10.0]

    def test_sweep_lists(self, tmp_path):
        spec = load_config(_write(tmp_path, TINY_BODY + "p = 0.1, 0.2\n"))
        assert spec.sweeps["p"] == [0.1, 0.2]
        assert len(spec.combinations()) == 2

    def test_rejects_bad_buffer_size(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, "Ms = 2\nJ = 5\n"))

    def test_rejects_p_out_of_range(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, "p = 1.5\n"))

    def test_parse_error_names_line(self, tmp_path):
        with pytest.raises(ConfigError, match=":2:"):
            load_config(_write(tmp_path, "K = 2\nbogus line\n"))

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(_write(tmp_path, "quux = 3\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "nope.cfg"))


class TestRunAndEmit:
    def test_row_count_is_cartesian(self, tmp_path):
        spec = load_config(_write(tmp_path, TINY_BODY + "p = 0.0, 0.5\n"))
        out = str(tmp_path / "results.csv")
        n = run_and_emit(spec, out)
        rows = parse_results(out)
        assert n == len(rows) == 2 * 2  # two p values x two SNR points

    def test_byte_identical_reruns(self, tmp_path):
        spec = load_config(_write(tmp_path, TINY_BODY))
        out1 = str(tmp_path / "a.csv")
        out2 = str(tmp_path / "b.csv")
        run_and_emit(load_config(_write(tmp_path, TINY_BODY)), out1)
        run_and_emit(spec, out2)
        assert open(out1, "rb").read() == open(out2, "rb").read()

    def test_round_trip_exact(self, tmp_path):
        spec = load_config(_write(tmp_path, TINY_BODY))
        out = str(tmp_path / "results.csv")
        run_and_emit(spec, out)
        rows = parse_results(out)
        # repr-based formatting: re-emitting parsed values reproduces the file
        body = open(out, encoding="utf-8").read()
        lines = [",".join(CSV_FIELDS)]
        for row in rows:
            cells = []
            for f in CSV_FIELDS:
                v = row[f]
                cells.append("" if v is None else (repr(v) if isinstance(v, float) else str(v)))
            lines.append(",".join(cells))
        assert body == "\n".join(lines) + "\n"

    def test_rows_reproducible_in_isolation(self, tmp_path):
        spec = load_config(_write(tmp_path, TINY_BODY))
        out = str(tmp_path / "results.csv")
        run_and_emit(spec, out)
        rows = parse_results(out)
        # rebuild one cell from the documented seed derivation
        combo = spec.combinations()[0]
        cfg = spec.config_for(combo, derive_cell_seed(spec.values["seed"], 0,
                                                      spec.seeds[0]))
        stats = run_cell(cfg, spec.snr_db[1], 1)
        assert rows[1]["ber"] == stats.ber
        assert rows[1]["pep_theory_mean"] == stats.pep_mean

    def test_parallel_jobs_identical(self, tmp_path):
        spec = load_config(_write(tmp_path, TINY_BODY))
        seq = str(tmp_path / "seq.csv")
        par = str(tmp_path / "par.csv")
        run_and_emit(spec, seq, jobs=1)
        run_and_emit(spec, par, jobs=2)
        assert open(seq, "rb").read() == open(par, "rb").read()

    def test_rates_and_delays_within_bounds(self, tmp_path):
        spec = load_config(_write(tmp_path, TINY_BODY))
        out = str(tmp_path / "results.csv")
        run_and_emit(spec, out)
        for row in parse_results(out):
            assert 0.0 <= row["ber"] <= 1.0
            assert 0.0 <= row["mmd_rate_ul"] <= 1.0
            assert 0.0 <= row["mmd_rate_dl"] <= 1.0
            assert row["avg_delay_slots"] is None or row["avg_delay_slots"] >= 1.0


class TestMain:
    def test_success_exit_zero(self, tmp_path, capsys):
        cfg = _write(tmp_path, TINY_BODY)
        out = str(tmp_path / "results.csv")
        assert main(["--config", cfg, "--out", out]) == 0
        assert os.path.exists(out)

    def test_config_error_exit_one(self, tmp_path, capsys):
        cfg = _write(tmp_path, "p = 7\n")
        assert main(["--config", cfg]) == 1

    def test_unwritable_output_no_partial_file(self, tmp_path, capsys):
        cfg = _write(tmp_path, TINY_BODY)
        out = str(tmp_path / "missing_dir" / "results.csv")
        assert main(["--config", cfg, "--out", out]) == 1
        assert not os.path.exists(out)

    def test_seed_and_packets_overrides(self, tmp_path, capsys):
        cfg = _write(tmp_path, TINY_BODY)
        out1 = str(tmp_path / "r1.csv")
        out2 = str(tmp_path / "r2.csv")
        assert main(["--config", cfg, "--out", out1, "--seed", "7",
                     "--packets", "2"]) == 0
        assert main(["--config", cfg, "--out", out2, "--seed", "8",
                     "--packets", "2"]) == 0
        assert open(out1).read() != open(out2).read()


def test_seed_derivation_is_pure():
    a = derive_cell_seed(12345, 3, 1)
    b = derive_cell_seed(12345, 3, 1)
    c = derive_cell_seed(12345, 4, 1)
    assert a == b and a != c
