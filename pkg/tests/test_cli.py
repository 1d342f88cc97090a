import filecmp
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from backflow.cli import main
from backflow.config import load_alberti_states, load_scenario
from backflow.errors import ConfigError

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


MINIMAL = """
[dynamics]
preset = "example2_cos"

[grid]
t_end = 6.283185307179586
points = 60

[[ensembles]]
weights = [0.7, 0.3]
bloch = [[1.0, 1.5707963267948966, 1.5707963267948966], [0.6, 3.141592653589793, 0.0]]

[[quantifiers]]
kind = "P1P2"
p1 = 2.0
p2 = 3.0

[analyses]
run = ["trajectories", "cpd"]
"""


class TestConfigLoading:
    def test_minimal_scenario(self, tmp_path):
        cfg = load_scenario(write(tmp_path / "s.toml", MINIMAL))
        assert cfg.family.label == "example2_cos"
        assert len(cfg.grid) == 60
        assert cfg.ensembles[0].weights[0] == pytest.approx(0.7)
        assert cfg.quantifiers[0].kind == "P1P2"

    def test_missing_analyses_rejected(self, tmp_path):
        bad = MINIMAL.replace('run = ["trajectories", "cpd"]', "run = []")
        with pytest.raises(ConfigError):
            load_scenario(write(tmp_path / "s.toml", bad))

    def test_unknown_analysis_rejected(self, tmp_path):
        bad = MINIMAL.replace('"cpd"', '"frobnicate"')
        with pytest.raises(ConfigError):
            load_scenario(write(tmp_path / "s.toml", bad))

    def test_bloch_length_validated(self, tmp_path):
        bad = MINIMAL.replace("[1.0, 1.5707963267948966", "[1.4, 1.5707963267948966")
        with pytest.raises(ConfigError):
            load_scenario(write(tmp_path / "s.toml", bad))

    def test_expression_dynamics(self, tmp_path):
        text = """
[dynamics]
source = "pauli-rates"
gamma1 = "1"
gamma2 = "1"
gamma3 = "sin(t)"

[grid]
t_end = 2.0
points = 10

[analyses]
run = ["cpd"]
"""
        cfg = load_scenario(write(tmp_path / "s.toml", text))
        lam = cfg.family.lambda_at(1.0)
        assert lam[3] == pytest.approx(np.exp(-4.0), rel=1e-9)

    def test_channel_grid_dynamics(self, tmp_path):
        from backflow.channels import QuantumChannel
        from backflow.dynamics import pauli_channel

        times = np.array([0.0, 0.5, 1.0])
        superops = np.stack([
            QuantumChannel.identity(2).superop,
            pauli_channel([1.0, 0.9, 0.9, 0.81]).superop,
            pauli_channel([1.0, 0.8, 0.8, 0.64]).superop,
        ])
        np.savez(tmp_path / "grid.npz", times=times, superops=superops)
        text = """
[dynamics]
source = "channel-grid"
file = "grid.npz"

[grid]
t_end = 1.0
points = 3

[analyses]
run = ["cpd"]
"""
        cfg = load_scenario(write(tmp_path / "s.toml", text))
        assert cfg.family.kind == "channel_grid"

    def test_matrix_states(self, tmp_path):
        text = MINIMAL.replace(
            "bloch = [[1.0, 1.5707963267948966, 1.5707963267948966], "
            "[0.6, 3.141592653589793, 0.0]]",
            "matrices = [[[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]], "
            "[[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]]")
        cfg = load_scenario(write(tmp_path / "s.toml", text))
        assert cfg.ensembles[0].members[0][1].dim == 2


class TestSimulate:
    def test_artifacts_and_backflow(self, tmp_path):
        out = tmp_path / "out"
        code = main(["simulate", "--config", str(SCENARIOS / "case_b.toml"),
                     "--out", str(out)])
        assert code == 0
        traj = out / "traj_e0_q0_p1p2_p2-p3.csv"
        assert traj.exists() and (out / "summary.txt").exists()
        header = traj.read_text().splitlines()[0]
        assert header == "t,phi,dphi_dt,violation_flag"
        summary = (out / "summary.txt").read_text()
        assert "status: backflow" in summary
        assert "measure_N:" in summary

    def test_determinism_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", str(SCENARIOS / "case_a.toml"),
                     "--out", str(a)]) == 0
        assert main(["simulate", "--config", str(SCENARIOS / "case_a.toml"),
                     "--out", str(b)]) == 0
        for name in sorted(p.name for p in a.iterdir()):
            assert filecmp.cmp(a / name, b / name, shallow=False), name

    def test_example1_monotone_and_not_cpd(self, tmp_path):
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(SCENARIOS / "example1.toml"),
                     "--out", str(out)]) == 0
        summary = (out / "summary.txt").read_text()
        assert "status: monotone" in summary
        assert "measure_N: 0\n" in summary
        assert "[cpd]" in summary and "verdict: VIOLATION" in summary
        scan = (out / "scan_cpd.csv").read_text().splitlines()
        assert scan[0] == "t,witness,verdict"
        assert any(line.endswith(",0") for line in scan[1:])

    def test_golden_scan_columns(self, tmp_path):
        out = tmp_path / "out"
        cfg = write(tmp_path / "s.toml", MINIMAL.replace(
            'run = ["trajectories", "cpd"]', 'run = ["cpd", "pdiv", "gtde"]'))
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        for name in ("scan_cpd.csv", "scan_pdiv.csv", "scan_gtde.csv"):
            lines = (out / name).read_text().splitlines()
            assert lines[0] == "t,witness,verdict"
            assert len(lines) == 60  # header + 59 steps


class TestExitCodes:
    def test_missing_config_is_config_error(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.toml"),
                     "--out", str(tmp_path / "o")]) == 1

    def test_empty_analyses_is_config_error(self, tmp_path):
        cfg = write(tmp_path / "s.toml",
                    MINIMAL.replace('run = ["trajectories", "cpd"]', "run = []"))
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1

    def test_usage_error(self):
        assert main(["simulate"]) == 1

    def test_unknown_subcommand(self):
        assert main(["transmogrify"]) == 1

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_console_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "backflow.cli", "--version"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "backflow" in proc.stdout


class TestCheckCommand:
    def test_check_cpd_output(self, tmp_path, capsys):
        cfg = write(tmp_path / "s.toml", MINIMAL)
        assert main(["check", "cpd", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "criterion: CPD" in out and "VIOLATION" in out

    def test_check_writes_csv(self, tmp_path, capsys):
        cfg = write(tmp_path / "s.toml", MINIMAL)
        out = tmp_path / "scans"
        assert main(["check", "gtde", "--config", str(cfg), "--out", str(out),
                     "--seed", "3"]) == 0
        assert (out / "scan_gtde.csv").exists()

    def test_tol_override(self, tmp_path, capsys):
        cfg = write(tmp_path / "s.toml", MINIMAL)
        assert main(["check", "cpd", "--config", str(cfg), "--tol", "10.0"]) == 0
        out = capsys.readouterr().out
        assert "pass" in out  # an absurdly loose tolerance accepts everything


class TestClassifyCommand:
    def test_classify_semigroup(self, tmp_path, capsys):
        text = """
[dynamics]
source = "pauli-rates"
gamma1 = "1"
gamma2 = "1"
gamma3 = "1"

[grid]
t_end = 2.0
points = 40

[analyses]
run = ["classify"]

[sampling]
pdiv_samples = 100
gtde_trials = 60
pq_ensembles = 1
"""
        cfg = write(tmp_path / "s.toml", text)
        assert main(["classify", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "CPD" in out and "Markovian" in out


class TestAlbertiCommand:
    def test_feasible_pair(self, tmp_path, capsys):
        states = write(tmp_path / "states.toml", """
[rho1]
bloch = [1.0, 0.0, 0.0]
[rho2]
bloch = [1.0, 3.141592653589793, 0.0]
[sigma1]
bloch = [0.0, 0.0, 0.0]
[sigma2]
bloch = [0.0, 0.0, 0.0]
""")
        assert main(["alberti", "--states", str(states)]) == 0
        out = capsys.readouterr().out
        assert "feasible_evidence: True" in out

    def test_infeasible_pair(self, tmp_path, capsys):
        states = write(tmp_path / "states.toml", """
[rho1]
bloch = [0.0, 0.0, 0.0]
[rho2]
bloch = [0.0, 0.0, 0.0]
[sigma1]
bloch = [1.0, 0.0, 0.0]
[sigma2]
bloch = [1.0, 3.141592653589793, 0.0]
""")
        assert main(["alberti", "--states", str(states)]) == 0
        out = capsys.readouterr().out
        assert "feasible_evidence: False" in out
        assert "at x = 1" in out

    def test_loader_requires_all_states(self, tmp_path):
        states = write(tmp_path / "states.toml", "[rho1]\nbloch = [0.0, 0.0, 0.0]\n")
        with pytest.raises(ConfigError):
            load_alberti_states(states)


class TestGoldenFiles:
    GOLDEN = Path(__file__).parent / "golden"

    def test_trajectory_csv_matches_golden(self, tmp_path):
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(self.GOLDEN / "golden_scenario.toml"),
                     "--out", str(out)]) == 0
        got = (out / "traj_e0_q0_p1p2_p2-p3.csv").read_text(encoding="utf-8")
        expected = (self.GOLDEN / "traj_expected.csv").read_text(encoding="utf-8")
        assert got == expected

    def test_scan_csv_matches_golden(self, tmp_path):
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(self.GOLDEN / "golden_scenario.toml"),
                     "--out", str(out)]) == 0
        got = (out / "scan_cpd.csv").read_text(encoding="utf-8")
        expected = (self.GOLDEN / "scan_cpd_expected.csv").read_text(encoding="utf-8")
        assert got == expected


class TestErrorExitCodes:
    def test_inconsistency_maps_to_exit_two(self, tmp_path, monkeypatch):
        from backflow import cli as cli_module
        from backflow.errors import InconsistencyError

        def boom(*args, **kwargs):
            raise InconsistencyError("rigged")

        monkeypatch.setattr(cli_module, "classify", boom)
        cfg = write(tmp_path / "s.toml", MINIMAL.replace(
            'run = ["trajectories", "cpd"]', 'run = ["classify"]'))
        assert main(["classify", "--config", str(cfg)]) == 2

    def test_numeric_failure_maps_to_exit_three(self, tmp_path):
        text = """
[dynamics]
source = "pauli-rates"
gamma1 = "1"
gamma2 = "1"
gamma3 = "1/(t-1)"

[grid]
t_end = 2.0
points = 3

[analyses]
run = ["cpd"]
"""
        cfg = write(tmp_path / "s.toml", text)
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


class TestQuantifierSerialization:
    def test_round_trip_through_config_tables(self):
        from backflow.config import _parse_quantifier, quantifier_to_table
        from backflow.quantifiers import QuantifierSpec, lift_s_to_sa

        specs = [
            QuantifierSpec("BLP"),
            QuantifierSpec("PNorm", p=2.5),
            QuantifierSpec("P1P2", p1=2.0, p2=3.0),
            QuantifierSpec("QFI", dtheta=5e-4, generator="x"),
            lift_s_to_sa(QuantifierSpec("GTD")),
        ]
        for spec in specs:
            assert _parse_quantifier(quantifier_to_table(spec), 0) == spec


class TestSimulateWithClassify:
    def test_classify_analysis_writes_all_scan_files(self, tmp_path):
        text = MINIMAL.replace('run = ["trajectories", "cpd"]',
                               'run = ["classify"]') + """
[sampling]
pdiv_samples = 100
gtde_trials = 50
pq_ensembles = 1
"""
        cfg = write(tmp_path / "s.toml", text)
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        for name in ("scan_cpd.csv", "scan_pdiv.csv", "scan_gtde.csv"):
            assert (out / name).exists(), name
        summary = (out / "summary.txt").read_text()
        assert "[classification]" in summary
