import numpy as np
import pytest

import fpl
from fpl.app import main
from fpl.diagnostics import DiagnosticsRecord
from fpl.persist import (
    CsvSink,
    Manifest,
    load_snapshot,
    read_diagnostics_csv,
    save_snapshot,
)


def write_config(path, **overrides):
    base = {
        "grid": {"n_modes": "8", "half_length": "4.5"},
        "kernel": {"lambda": "1.0"},
        "time": {"dt": "auto", "t_final": "0.004", "output_stride": "2"},
        "solver": {"padding": "on"},
        "initial": {"kind": "maxwellian", "rho": "1.0", "temperature": "1.0"},
    }
    for section, kv in overrides.items():
        base.setdefault(section, {}).update(kv)
    lines = []
    for section, kv in base.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in kv.items())
        lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


class TestPrecompute:
    def test_builds_table_and_manifest(self, tmp_path):
        cfg = write_config(tmp_path / "c.ini")
        out = tmp_path / "cache"
        rc = main(["precompute", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        tables = list(out.glob("*.fplw"))
        assert len(tables) == 1
        events = Manifest(out / "manifest.jsonl").read()
        assert events[0]["event"] == "start"
        assert events[-1]["exit_status"] == 0

    def test_rerun_hits_cache(self, tmp_path):
        cfg = write_config(tmp_path / "c.ini")
        out = tmp_path / "cache"
        assert main(["precompute", "--config", str(cfg), "--out", str(out)]) == 0
        assert main(["precompute", "--config", str(cfg), "--out", str(out)]) == 0
        events = Manifest(out / "manifest.jsonl").read()
        cache_events = [e for e in events if e["event"] == "table"]
        assert cache_events[0]["cache"] == "built"
        assert cache_events[1]["cache"] == "hit"
        assert cache_events[0]["checksum"] == cache_events[1]["checksum"]

    def test_soft_potential_rejected(self, tmp_path):
        cfg = write_config(tmp_path / "c.ini", kernel={"lambda": "-3.0"})
        rc = main(["precompute", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_missing_config(self, tmp_path):
        rc = main(["precompute", "--config", str(tmp_path / "nope.ini")])
        assert rc == 2

    def test_auto_half_length_uses_tail_bound(self, tmp_path):
        from fpl.app import parse_config

        cfg_path = write_config(
            tmp_path / "c.ini",
            grid={"half_length": "auto"},
            domain={"rho0": "1.0", "temperature": "1.0", "tail_tol": "1e-8"},
        )
        cfg, _ = parse_config(cfg_path)
        assert cfg.half_length == fpl.choose_domain(1.0, 1.0, 1.0, 1.0, 1e-8)


class TestRun:
    def test_smoke_run(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FPL_CACHE_DIR", str(tmp_path / "cache"))
        cfg = write_config(tmp_path / "c.ini")
        out = tmp_path / "run"
        rc = main(["run", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        header, cols = read_diagnostics_csv(out / "diagnostics.csv")
        assert header == DiagnosticsRecord.fieldnames()
        assert len(cols["t"]) >= 2
        # conservation audit across the whole run
        from fpl.suites import moment_drift

        assert moment_drift(out / "diagnostics.csv") <= 1e-10
        # manifest carries config echo, table checksum, stepping report, exit
        events = Manifest(out / "manifest.jsonl").read()
        kinds = [e["event"] for e in events]
        assert kinds[0] == "start" and "config" in events[0]
        assert "table" in kinds and "stepping" in kinds
        assert events[-1]["event"] == "end" and events[-1]["exit_status"] == 0

    def test_snapshot_roundtrip_bit_exact(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FPL_CACHE_DIR", str(tmp_path / "cache"))
        cfg = write_config(tmp_path / "c.ini")
        out = tmp_path / "run"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        field, t = load_snapshot(out / "final.fpls")
        resaved = tmp_path / "resaved.fpls"
        save_snapshot(resaved, field, t)
        assert resaved.read_bytes() == (out / "final.fpls").read_bytes()

    def test_csv_format(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FPL_CACHE_DIR", str(tmp_path / "cache"))
        cfg = write_config(tmp_path / "c.ini")
        out = tmp_path / "run"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        raw = (out / "diagnostics.csv").read_bytes()
        assert b"\r" not in raw
        lines = raw.decode("utf-8").splitlines()
        n_cols = len(DiagnosticsRecord.fieldnames())
        assert all(len(line.split(",")) == n_cols for line in lines if line)
        assert ";" not in raw.decode("utf-8")

    def test_stability_breach_exit_code(self, tmp_path, monkeypatch):
        # N=8 under-resolves the beams: the negative-part monitor halts the run
        monkeypatch.setenv("FPL_CACHE_DIR", str(tmp_path / "cache"))
        cfg = write_config(
            tmp_path / "c.ini",
            time={"t_final": "0.25", "dt": "auto"},
            initial={"kind": "bimaxwellian", "rho": "1.0", "temperature": "0.5",
                     "shift": "1 0 0"},
        )
        out = tmp_path / "run"
        rc = main(["run", "--config", str(cfg), "--out", str(out)])
        assert rc == 4
        events = Manifest(out / "manifest.jsonl").read()
        end = events[-1]
        assert end["exit_status"] == 4
        assert end["halt_time"] > 0
        assert end["ratio"] > 0.25


class TestVerify:
    def test_unknown_suite_lists_available(self, capsys):
        rc = main(["verify", "--suite", "bogus"])
        assert rc == 2
        err = capsys.readouterr().err
        for name in ("oracle", "maxwellian", "relaxation"):
            assert name in err

    def test_oracle_suite_passes(self, capsys):
        rc = main(["verify", "--suite", "oracle"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_maxwellian_suite_reports_decreasing_table(self, capsys):
        rc = main(["verify", "--suite", "maxwellian"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "strictly decreasing: True" in out
        for tag in ("N=8", "N=16", "N=32"):
            assert tag in out


def synthetic_csv(path, t, dist, entropy=None):
    sink = CsvSink(path)
    n = len(t)
    entropy = entropy if entropy is not None else -np.linspace(1.0, 2.0, n)
    for i in range(n):
        sink(
            DiagnosticsRecord(
                t=float(t[i]), rho=1.0, vx=0.0, vy=0.0, vz=0.0,
                temperature=1.0, temperature_raw=1.0,
                m0=1.0, m2=4.0, m3=6.0, m4=10.0,
                l2_norm=0.2, l2_weighted2=0.5, h1_norm=0.3, h2_norm=0.6,
                entropy=float(entropy[i]), neg_ratio=0.0,
                dist_to_eq=float(dist[i]), correction_norm=0.0, tail_norm=0.0,
            )
        )
    sink.close()


class TestAnalyze:
    def test_exact_exponential_half_life(self, tmp_path, capsys):
        t = np.linspace(0.0, 2.0, 41)
        rate = 1.7
        synthetic_csv(tmp_path / "diagnostics.csv", t, np.exp(-rate * t))
        rc = main(["analyze", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        half = float(out.split("half-life of ||g - M_eq||_2:")[1].splitlines()[0])
        assert abs(half - np.log(2.0) / rate) <= 0.01 * np.log(2.0) / rate
        assert "violations (> 1e-8): 0" in out

    def test_empty_csv_rejected(self, tmp_path):
        (tmp_path / "diagnostics.csv").write_text("", encoding="utf-8")
        rc = main(["analyze", str(tmp_path)])
        assert rc == 2

    def test_entropy_violations_counted(self, tmp_path, capsys):
        t = np.linspace(0.0, 1.0, 11)
        ent = -np.linspace(1.0, 2.0, 11)
        ent[5] = ent[4] + 1e-4  # one genuine increase
        synthetic_csv(tmp_path / "diagnostics.csv", t, np.exp(-t), ent)
        rc = main(["analyze", str(tmp_path)])
        assert rc == 0
        assert "violations (> 1e-8): 1" in capsys.readouterr().out
