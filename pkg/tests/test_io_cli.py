import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from unksize import ModelSpec, ValidationError, ecm_fit, load_csv, log_likelihood
from unksize.cli import EXIT_OK, EXIT_OPTIMIZATION, EXIT_VALIDATION, main
from unksize.io import load_fit_json, mbovis_path

DATA = Path(__file__).parent / "data"
TINY = DATA / "tiny.csv"
TINY_SPEC = ModelSpec("count", covariates=("dose",))


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCsv:
    def test_mbovis_shape(self, mbovis):
        assert mbovis.r == 129 and mbovis.rho == 12
        assert mbovis.column_names[0] == "(intercept)"
        assert mbovis.column_names[1].startswith("level[")

    def test_single_row(self, tmp_path):
        data = load_csv(write(tmp_path, "y,x\n0,0.5\n"), ModelSpec("y", ("x",)))
        assert data.r == 1 and data.rho == 2 and data.y.tolist() == [0]

    def test_non_numeric_response_names_line(self, tmp_path):
        p = write(tmp_path, "y,x\n4,0.5\n3,1\nabc,2\n")
        with pytest.raises(ValidationError, match="line 4"):
            load_csv(p, ModelSpec("y", ("x",)))

    def test_negative_response(self, tmp_path):
        with pytest.raises(ValidationError, match="line 2"):
            load_csv(write(tmp_path, "y,x\n-1,0\n"), ModelSpec("y", ("x",)))

    def test_missing_column(self, tmp_path):
        with pytest.raises(ValidationError, match="dose"):
            load_csv(write(tmp_path, "y,x\n4,0.5\n"), ModelSpec("y", ("dose",)))

    def test_rank_deficiency(self, tmp_path):
        p = write(tmp_path, "y,a,b\n1,1,2\n2,2,4\n3,3,6\n")
        with pytest.raises(ValidationError, match="rank"):
            load_csv(p, ModelSpec("y", ("a", "b")))

    def test_ragged_row(self, tmp_path):
        with pytest.raises(ValidationError, match="fields"):
            load_csv(write(tmp_path, "y,x\n1,2,3\n"), ModelSpec("y", ("x",)))

    def test_factor_coding(self, tmp_path):
        p = write(tmp_path, "y,g\n1,b\n2,a\n3,b\n4,c\n")
        data = load_csv(p, ModelSpec("y", factors=("g",)))
        assert data.column_names == ("(intercept)", "g[a]", "g[c]")
        assert data.X[:, 1].tolist() == [0, 1, 0, 0]

    def test_checksum_verified(self):
        assert mbovis_path().name == "mbovis.csv"


class TestCli:
    def test_fit_matches_library(self, tmp_path, capsys):
        out = tmp_path / "fit.json"
        assert main(["fit", "--data", str(TINY), "--response", "count", "--covariates", "dose",
                     "--K", "1", "--json", str(out)]) == EXIT_OK
        d, theta = load_fit_json(out)
        lib = ecm_fit(load_csv(TINY, TINY_SPEC), 1)
        assert np.allclose(theta.beta, lib.beta, rtol=0, atol=1e-12)
        assert d["loglik"] == lib.loglik
        assert "loglik" in capsys.readouterr().out

    def test_json_round_trip_loglik(self, tmp_path):
        out = tmp_path / "fit.json"
        main(["fit", "--data", str(TINY), "--response", "count", "--covariates", "dose",
              "--K", "2", "--json", str(out)])
        d, theta = load_fit_json(out)
        data = load_csv(TINY, ModelSpec.from_dict(d["model"]))
        assert abs(log_likelihood(data, theta) - d["loglik"]) < 1e-9

    def test_fitted_csv(self, tmp_path):
        out = tmp_path / "fitted.csv"
        main(["fit", "--data", str(TINY), "--response", "count", "--covariates", "dose",
              "--K", "1", "--fitted", str(out)])
        lines = out.read_text().splitlines()
        assert lines[0] == "index,y,fitted,group_mean"
        assert len(lines) == 22
        first = lines[1].split(",")
        assert first[0] == "1" and first[1] == "73"
        # group mean of the three dose-0 rows
        assert float(first[3]) == pytest.approx((73 + 71 + 64) / 3)

    def test_validation_exit_code(self, tmp_path, capsys):
        p = write(tmp_path, "y,x\nz,1\n")
        assert main(["fit", "--data", str(p), "--response", "y", "--covariates", "x", "--K", "1"]) == EXIT_VALIDATION
        assert "line 2" in capsys.readouterr().err

    def test_missing_data_flag(self, capsys):
        assert main(["fit", "--K", "1"]) == EXIT_VALIDATION

    def test_bad_K(self):
        assert main(["fit", "--data", str(TINY), "--response", "count", "--K", "0"]) == EXIT_VALIDATION

    def test_bootstrap_cli(self, tmp_path):
        out = tmp_path / "b.json"
        assert main(["bootstrap", "--data", str(TINY), "--response", "count", "--covariates", "dose",
                     "--K", "1", "--resamples", "10", "--json", str(out)]) == EXIT_OK
        d = json.loads(out.read_text())
        assert len(d["bootstrap"]["se"]) == 2 and d["bootstrap"]["n_resamples"] == 10

    def test_simulate_cli(self, tmp_path):
        out = tmp_path / "s.json"
        assert main(["simulate", "--setting", "1", "--samples", "4", "--starts", "2",
                     "--json", str(out)]) == EXIT_OK
        d = json.loads(out.read_text())
        assert d["n_ok"] + d["n_failed"] == 4

    def test_select_example(self, tmp_path, capsys):
        out = tmp_path / "sel.json"
        assert main(["select", "--example", "mbovis", "--kmax", "3", "--json", str(out)]) == EXIT_OK
        d = json.loads(out.read_text())
        assert d["K"] == 3 and [row["K"] for row in d["selection"]] == [1, 2, 3]
        assert "selected K = 3" in capsys.readouterr().out

    def test_bit_identical_runs(self, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            p = tmp_path / name
            cmd = [sys.executable, "-m", "unksize", "fit", "--data", str(TINY), "--response", "count",
                   "--covariates", "dose", "--K", "2", "--seed", "3", "--json", str(p)]
            res = subprocess.run(cmd, capture_output=True, text=True, check=True)
            outs.append((res.stdout, p.read_bytes()))
        assert outs[0] == outs[1]

    def test_non_converged_exit_code(self, tmp_path, monkeypatch):
        from unksize import cli, ecm

        monkeypatch.setattr(cli, "_ecm_config",
                            lambda args: ecm.EcmConfig(n_starts=1, max_outer_iterations=2))
        out = tmp_path / "f.json"
        code = main(["fit", "--data", str(TINY), "--response", "count", "--covariates", "dose",
                     "--K", "2", "--json", str(out)])
        assert code == EXIT_OPTIMIZATION
        assert json.loads(out.read_text())["failed"] is True
