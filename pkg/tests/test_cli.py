"""Config parsing, presets, scenario orchestration, and file outputs."""

import os

import numpy as np
import pytest

from timolab import cli
from timolab import config as C
from timolab import laws as L


class TestParseConfig:
    def test_minimal_scenario_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("scenario = conservative\n")
        cfg = C.parse_config(str(path))
        assert cfg.scenario == "conservative"
        assert cfg.params.delta == 0.0
        assert cfg.N == 128

    def test_overrides_and_comments(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# a comment\n"
            "scenario = linear\n"
            "N = 32        # inline comment\n"
            "dt = 0.01\n"
            "T = 1.5\n")
        cfg = C.parse_config(str(path))
        assert cfg.N == 32 and cfg.dt == 0.01 and cfg.T == 1.5

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("scenario = linear\nbogus = 1\n")
        with pytest.raises(C.ConfigError, match="bogus"):
            C.parse_config(str(path))

    def test_negative_rho1_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("rho1 = -1\n")
        with pytest.raises(C.ConfigError, match="rho1"):
            C.parse_config(str(path))

    def test_law_round_trip(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("law = power\np = 3\n")
        cfg = C.parse_config(str(path))
        law = cfg.make_law()
        assert L.eval_g(law, 2.0) == pytest.approx(8.0, rel=1e-14)

    def test_type_errors_name_the_key(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("N = lots\n")
        with pytest.raises(C.ConfigError, match="N"):
            C.parse_config(str(path))

    def test_missing_file(self):
        with pytest.raises(C.ConfigError):
            C.parse_config("/nonexistent/run.cfg")


class TestPresets:
    def test_list_contains_required_names(self):
        names = [name for name, _ in C.list_presets()]
        for required in ("conservative", "linear", "example1_p2",
                         "example1_p3", "example2", "bump_omega",
                         "equal_speeds_chi0"):
            assert required in names

    def test_every_preset_builds(self):
        for name, _ in C.list_presets():
            cfg = C.preset_config(name)
            cfg.make_law()
            grid_cls = __import__("timolab.solver", fromlist=["Grid"]).Grid
            cfg.make_profile(grid_cls(cfg.N))
            cfg.make_initial_state(grid_cls(cfg.N))

    def test_unknown_preset(self):
        with pytest.raises(C.ConfigError):
            C.preset_config("nope")


def quick_cfg(tmp_path, name="conservative", **kw):
    cfg = C.preset_config(name, **kw)
    cfg.out = str(tmp_path / "out")
    return cfg


class TestRunScenario:
    def test_conservative_success(self, tmp_path):
        cfg = quick_cfg(tmp_path, T=2.0)
        assert cli.run_scenario(cfg) == 0
        for fname in ("energy.csv", "envelopes.csv", "report.txt"):
            assert os.path.exists(os.path.join(cfg.out, fname))
        report = open(os.path.join(cfg.out, "report.txt")).read()
        assert "stability number" in report
        assert "PASS" in report

    def test_energy_csv_schema(self, tmp_path):
        cfg = quick_cfg(tmp_path, T=1.0)
        cli.run_scenario(cfg)
        lines = open(os.path.join(cfg.out, "energy.csv")).read().splitlines()
        assert lines[0] == "t,E,Estar,Ecal,D,theta_mean"
        data = np.loadtxt(lines[1:], delimiter=",")
        assert data.shape[1] == 6
        assert np.all(np.isfinite(data))

    def test_determinism(self, tmp_path):
        cfg1 = quick_cfg(tmp_path / "a", name="linear", N=32, dt=5e-3, T=0.5)
        cfg2 = quick_cfg(tmp_path / "b", name="linear", N=32, dt=5e-3, T=0.5)
        cli.run_scenario(cfg1)
        cli.run_scenario(cfg2)
        a = open(os.path.join(cfg1.out, "energy.csv")).read()
        b = open(os.path.join(cfg2.out, "energy.csv")).read()
        assert a == b

    def test_verdict_failure_exit_2(self, tmp_path):
        # an anti-damping tabulated law pumps energy: monotonicity verdict
        # fails and the scenario exits 2, but report.txt is still written
        from timolab import solver as S

        table = tmp_path / "anti.csv"
        s = np.linspace(0.01, 5.0, 30)
        table.write_text("\n".join(f"{a},{-5.0 * a}" for a in s))
        cfg = C.preset_config("linear", N=32, dt=5e-3, T=1.0)
        cfg.law = f"table:{table}"
        cfg.params = S.PhysicalParams(beta=1e-4)
        cfg.out = str(tmp_path / "out")
        assert cli.run_scenario(cfg) == 2
        report = open(os.path.join(cfg.out, "report.txt")).read()
        assert "FAIL" in report

    def test_snapshot_files(self, tmp_path):
        cfg = quick_cfg(tmp_path, name="linear", N=32, dt=1e-2, T=1.0)
        cfg.snapshot_times = (0.5,)
        cli.run_scenario(cfg)
        path = os.path.join(cfg.out, "snapshot_0.5.csv")
        assert os.path.exists(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert data.shape == (33, 7)


class TestMain:
    def test_list_flag(self, capsys):
        assert cli.main(["--list"]) == 0
        out = capsys.readouterr().out
        assert "example1_p2" in out and "conservative" in out

    def test_scenario_with_overrides(self, tmp_path):
        out = str(tmp_path / "o")
        code = cli.main(["--scenario", "conservative", "--out", out,
                         "--T", "1.0", "--N", "32", "--dt", "0.01"])
        assert code == 0
        assert os.path.exists(os.path.join(out, "report.txt"))

    def test_config_flag(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(f"scenario = conservative\nT = 1\nN = 32\n"
                        f"dt = 0.01\nout = {tmp_path / 'o'}\n")
        assert cli.main(["--config", str(path)]) == 0

    def test_bad_config_exits_1(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("scenario = nope\n")
        assert cli.main(["--config", str(path)]) == 1

    def test_sweep(self, tmp_path):
        sweep = tmp_path / "sweep"
        sweep.mkdir()
        for i in range(2):
            (sweep / f"r{i}.cfg").write_text(
                "scenario = conservative\nT = 0.5\nN = 32\ndt = 0.01\n")
        assert cli.main(["--sweep", str(sweep)]) == 0
        assert os.path.exists(sweep / "r0.out" / "report.txt")
        assert os.path.exists(sweep / "r1.out" / "report.txt")
