import hashlib

import numpy as np
import pytest

from funmix import io as fio
from funmix.cli import cli_dispatch
from helpers import synth_library


@pytest.fixture()
def library_file(tmp_path):
    path = tmp_path / "D.fumx"
    fio.write_matrix(path, synth_library(40, 30, seed=5))
    return path


def _digest(path, drop_timing=False):
    data = path.read_bytes()
    if drop_timing:
        data = b"\n".join(
            line for line in data.split(b"\n") if not line.startswith(b"wall_time")
        )
    return hashlib.sha256(data).hexdigest()


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self):
        assert cli_dispatch(["--bogus"]) == 1

    def test_unknown_subcommand_is_usage_error(self):
        assert cli_dispatch(["frobnicate"]) == 1

    def test_help_exits_zero(self, capsys):
        assert cli_dispatch(["--help"]) == 0
        assert "simulate" in capsys.readouterr().out

    def test_missing_file_is_runtime_error(self, tmp_path, capsys):
        code = cli_dispatch(["eval", "--true", str(tmp_path / "no.fumx"),
                             "--est", str(tmp_path / "no.fumx")])
        assert code == 2

    def test_dim_mismatch_is_runtime_error(self, tmp_path):
        a = tmp_path / "a.fumx"
        b = tmp_path / "b.fumx"
        fio.write_matrix(a, np.ones((2, 3)))
        fio.write_matrix(b, np.ones((3, 2)))
        assert cli_dispatch(["eval", "--true", str(a), "--est", str(b)]) == 2

    def test_fclsu_requires_endmember_matrix(self, tmp_path, library_file, capsys):
        y = tmp_path / "Y.fumx"
        fio.write_matrix(y, np.ones((40, 5)))
        code = cli_dispatch(["unmix", "--method", "fclsu", "--input", str(y),
                             "--out", str(tmp_path / "out")])
        assert code == 1
        assert "endmember-matrix" in capsys.readouterr().err

    def test_fasun_requires_library_and_r(self, tmp_path):
        y = tmp_path / "Y.fumx"
        fio.write_matrix(y, np.ones((40, 5)))
        assert cli_dispatch(["unmix", "--method", "fasun", "--input", str(y),
                             "--out", str(tmp_path / "out")]) == 1

    def test_simulate_purity_requires_rho_and_pixels(self, tmp_path, library_file):
        base = ["simulate", "--kind", "purity", "--endmembers", "3",
                "--library", str(library_file), "--out", str(tmp_path / "b")]
        assert cli_dispatch(base + ["--pixels", "10"]) == 1  # rho missing
        assert cli_dispatch(base + ["--rho", "0.9"]) == 1  # pixels missing

    def test_simulate_dc1_requires_side(self, tmp_path, library_file):
        assert cli_dispatch(["simulate", "--kind", "dc1", "--endmembers", "3",
                             "--library", str(library_file),
                             "--out", str(tmp_path / "b")]) == 1

    def test_infeasible_rho_is_runtime_error(self, tmp_path, library_file):
        assert cli_dispatch(["simulate", "--kind", "purity", "--pixels", "10",
                             "--endmembers", "6", "--rho", "0.3",
                             "--library", str(library_file),
                             "--out", str(tmp_path / "b")]) == 2


class TestEval:
    def test_identical_matrices_print_inf(self, tmp_path, capsys):
        a = tmp_path / "a.fumx"
        fio.write_matrix(a, np.ones((3, 4)))
        assert cli_dispatch(["eval", "--true", str(a), "--est", str(a)]) == 0
        assert "inf" in capsys.readouterr().out

    def test_known_value(self, tmp_path, capsys):
        a = tmp_path / "a.fumx"
        b = tmp_path / "b.fumx"
        M = np.full((2, 2), 0.5)
        fio.write_matrix(a, M)
        fio.write_matrix(b, 0.9 * M)
        assert cli_dispatch(["eval", "--true", str(a), "--est", str(b)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("SRE (dB): ")
        assert float(out.split(":")[1]) == pytest.approx(20.0, rel=1e-12)


class TestPrune:
    def test_writes_pruned_library(self, tmp_path, capsys):
        import math

        x = np.array([1.0, 0.0, 0.2])
        near = np.array([math.cos(math.radians(1.0)), math.sin(math.radians(1.0)), 0.2])
        far = np.array([0.1, 1.0, 0.9])
        src = tmp_path / "D.fumx"
        fio.write_matrix(src, np.column_stack([x, near, far]))
        out = tmp_path / "Dp.fumx"
        assert cli_dispatch(["prune", "--library", str(src), "--min-angle", "4.44",
                             "--out", str(out)]) == 0
        pruned = fio.read_matrix(out)
        assert pruned.shape[1] == 2
        assert "kept 2 of 3" in capsys.readouterr().out


class TestUnmixOutputs:
    def test_fasun_writes_all_artifacts(self, tmp_path, library_file):
        assert cli_dispatch(["simulate", "--kind", "dc1", "--side", "12",
                             "--endmembers", "3", "--seed", "4", "--snr", "35",
                             "--library", str(library_file),
                             "--out", str(tmp_path / "bundle")]) == 0
        assert cli_dispatch(["unmix", "--method", "fasun",
                             "--input", str(tmp_path / "bundle" / "Y.fumx"),
                             "--library", str(library_file), "--r", "3",
                             "--outer", "50", "--out", str(tmp_path / "run")]) == 0
        for name in ("A_raw.fumx", "A_feasible.fumx", "B.fumx", "E.fumx",
                     "diagnostics.txt"):
            assert (tmp_path / "run" / name).is_file()
        A_raw = fio.read_matrix(tmp_path / "run" / "A_raw.fumx")
        assert np.abs(A_raw.sum(axis=0) - 1.0).max() < 1e-10
        diag = (tmp_path / "run" / "diagnostics.txt").read_text()
        assert "objective 49 " in diag
        assert "wall_time_s = " in diag

    def test_fclsu_run(self, tmp_path, library_file):
        D = fio.read_matrix(library_file)
        E = D[:, [0, 5]]
        e_path = tmp_path / "E.fumx"
        fio.write_matrix(e_path, E)
        rng = np.random.default_rng(0)
        A = rng.dirichlet(np.ones(2), size=30).T
        y_path = tmp_path / "Y.fumx"
        fio.write_matrix(y_path, E @ A)
        assert cli_dispatch(["unmix", "--method", "fclsu", "--input", str(y_path),
                             "--endmember-matrix", str(e_path), "--outer", "500",
                             "--out", str(tmp_path / "run")]) == 0
        assert not (tmp_path / "run" / "B.fumx").exists()
        A_hat = fio.read_matrix(tmp_path / "run" / "A_feasible.fumx")
        assert np.abs(A_hat - A).max() < 1e-3

    def test_profile_flag_recorded(self, tmp_path, library_file):
        y = tmp_path / "Y.fumx"
        fio.write_matrix(y, np.abs(synth_library(40, 8, seed=9)))
        assert cli_dispatch(["unmix", "--method", "fasun", "--input", str(y),
                             "--library", str(library_file), "--r", "2",
                             "--outer", "3", "--profile", "real",
                             "--out", str(tmp_path / "run")]) == 0
        diag = (tmp_path / "run" / "diagnostics.txt").read_text()
        assert "mu_a = 400.0" in diag
        assert "mu_b1 = 20.0" in diag


class TestThreadCap:
    def test_thread_cap_env_var_accepted(self, tmp_path, monkeypatch, capsys):
        a = tmp_path / "a.fumx"
        fio.write_matrix(a, np.ones((3, 4)))
        monkeypatch.setenv("FUNMIX_THREADS", "1")
        assert cli_dispatch(["eval", "--true", str(a), "--est", str(a)]) == 0

    def test_invalid_thread_cap_warns_and_proceeds(self, tmp_path, monkeypatch, capsys):
        a = tmp_path / "a.fumx"
        fio.write_matrix(a, np.ones((3, 4)))
        monkeypatch.setenv("FUNMIX_THREADS", "zero")
        assert cli_dispatch(["eval", "--true", str(a), "--est", str(a)]) == 0
        assert "FUNMIX_THREADS" in capsys.readouterr().err


class TestDeterminism:
    def test_pipeline_reproduces_byte_identical_artifacts(self, tmp_path, library_file, capsys):
        outputs = []
        for tag in ("one", "two"):
            bundle_dir = tmp_path / f"bundle_{tag}"
            run_dir = tmp_path / f"run_{tag}"
            assert cli_dispatch(["simulate", "--kind", "purity", "--pixels", "60",
                                 "--endmembers", "3", "--rho", "0.85", "--snr", "30",
                                 "--seed", "11", "--library", str(library_file),
                                 "--out", str(bundle_dir)]) == 0
            assert cli_dispatch(["unmix", "--method", "suns",
                                 "--input", str(bundle_dir / "Y.fumx"),
                                 "--library", str(library_file), "--r", "3",
                                 "--outer", "40", "--out", str(run_dir)]) == 0
            assert cli_dispatch(["eval", "--true", str(bundle_dir / "A_true.fumx"),
                                 "--est", str(run_dir / "A_feasible.fumx")]) == 0
            sre_line = capsys.readouterr().out.strip().splitlines()[-1]
            digests = {p.name: _digest(p, p.name == "diagnostics.txt")
                       for p in list(bundle_dir.iterdir()) + list(run_dir.iterdir())}
            outputs.append((sre_line, digests))
        assert outputs[0] == outputs[1]
