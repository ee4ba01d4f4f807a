"""End-to-end CLI behavior: files, exit codes, determinism."""

import csv
import json

import numpy as np
import pytest

import oracles
from vspline import SingularSystemError
from vspline.cli import main, simulate_dataset
from vspline.errors import DegenerateGridError
from vspline.fit import rescale_domain


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in row] for row in rows[1:]])


class TestSimulate:
    def test_line_noiseless_is_exact(self, tmp_path):
        out = tmp_path / "line.csv"
        rc = main(["simulate", "--kind", "line", "--n", "9", "--noise", "0",
                   "--seed", "3", "--out", str(out)])
        assert rc == 0
        header, data = _read_csv(out)
        assert header == ["t", "y", "v"]
        np.testing.assert_allclose(data[:, 1], 1.0 + 2.5 * data[:, 0], atol=1e-15)
        np.testing.assert_allclose(data[:, 2], 2.5, atol=1e-15)

    def test_same_seed_same_file(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            main(["simulate", "--kind", "iwp", "--n", "30", "--noise", "0.1",
                  "--seed", "11", "--out", str(out)])
        assert a.read_bytes() == b.read_bytes()

    def test_write_read_round_trip(self, tmp_path):
        out = tmp_path / "d.csv"
        main(["simulate", "--kind", "sine", "--n", "14", "--noise", "0.2",
              "--seed", "5", "--out", str(out)])
        t, y, v = simulate_dataset("sine", 14, 0.2, 5)
        _, data = _read_csv(out)
        np.testing.assert_array_equal(data, np.column_stack([t, y, v]))

    def test_iwp_variance_growth(self):
        # position variance of the doubly integrated noise is t^3/3
        finals = []
        for seed in range(1000):
            _, y, _ = simulate_dataset("iwp", 9, 0.0, seed)
            finals.append(y[-1])
        var = np.var(finals)
        assert var == pytest.approx(1.0 / 3.0, rel=0.15)

    def test_flag_validation(self, tmp_path):
        assert main(["simulate", "--kind", "line", "--n", "1", "--noise", "0",
                     "--seed", "1", "--out", str(tmp_path / "x.csv")]) == 2
        assert main(["simulate", "--kind", "line", "--n", "5", "--noise", "-1",
                     "--seed", "1", "--out", str(tmp_path / "x.csv")]) == 2


class TestFit:
    def test_line_dataset_reproduced(self, tmp_path):
        data = tmp_path / "line.csv"
        rep = tmp_path / "rep.json"
        main(["simulate", "--kind", "line", "--n", "12", "--noise", "0",
              "--seed", "1", "--out", str(data)])
        rc = main(["fit", str(data), "--lambda", "0.5", "--gamma", "2.0",
                   "--grid", "80", "--out", str(rep)])
        assert rc == 0
        report = json.loads(rep.read_text())
        _, curve = _read_csv(report["curve_file"])
        assert curve.shape == (80, 3)
        np.testing.assert_allclose(curve[:, 1], 1.0 + 2.5 * curve[:, 0], atol=1e-8)
        np.testing.assert_allclose(curve[:, 2], 2.5, atol=1e-8)

    def test_gamma_zero_matches_classical_oracle(self, tmp_path):
        rng = np.random.default_rng(8)
        t_raw = np.linspace(0.0, 3.0, 15)
        y = np.sin(t_raw * 2.1) + 0.1 * rng.standard_normal(15)
        v = np.zeros(15)
        data = tmp_path / "d.csv"
        with open(data, "w") as fh:
            fh.write("t,y,v\n")
            for row in zip(t_raw, y, v):
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
        rep = tmp_path / "rep.json"
        lam = 1e-4
        rc = main(["fit", str(data), "--lambda", repr(lam), "--gamma", "0",
                   "--grid", "120", "--out", str(rep)])
        assert rc == 0
        report = json.loads(rep.read_text())
        _, curve = _read_csv(report["curve_file"])
        # classical smoothing spline on the internally rescaled knots
        tu, yu, _, scale = rescale_domain(t_raw, y, v, margin=0.05)
        spline, fitted = oracles.reference_smoothing_curve(tu, yu, 15 * lam)
        want = spline(scale.to_unit(curve[:, 0]))
        np.testing.assert_allclose(curve[:, 1], want, atol=1e-6)

    def test_missing_file_exit_2(self, tmp_path, capsys):
        rc = main(["fit", str(tmp_path / "nope.csv"), "--lambda", "0.1",
                   "--out", str(tmp_path / "r.json")])
        assert rc == 2
        assert "nope.csv" in capsys.readouterr().err

    def test_bad_rows_exit_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,y,v\n1,2,oops\n2,3,4\n")
        assert main(["fit", str(bad), "--lambda", "0.1",
                     "--out", str(tmp_path / "r.json")]) == 2
        dup = tmp_path / "dup.csv"
        dup.write_text("t,y,v\n1,2,0\n1,3,0\n2,3,4\n")
        assert main(["fit", str(dup), "--lambda", "0.1",
                     "--out", str(tmp_path / "r.json")]) == 2

    def test_numerical_failure_exit_3(self, tmp_path, capsys, monkeypatch):
        data = tmp_path / "d.csv"
        main(["simulate", "--kind", "sine", "--n", "8", "--noise", "0.1",
              "--seed", "2", "--out", str(data)])
        import vspline.cli as cli_mod

        def boom(*args, **kwargs):
            raise SingularSystemError("forced failure")

        monkeypatch.setattr(cli_mod, "fit_theta", boom)
        rc = main(["fit", str(data), "--lambda", "0.1",
                   "--out", str(tmp_path / "r.json")])
        assert rc == 3
        assert "fitting" in capsys.readouterr().err

    def test_weights_file(self, tmp_path):
        data = tmp_path / "d.csv"
        main(["simulate", "--kind", "sine", "--n", "10", "--noise", "0.1",
              "--seed", "4", "--out", str(data)])
        wfile = tmp_path / "w.txt"
        wfile.write_text("\n".join(["1.0"] * 11) + "\n")
        rc = main(["fit", str(data), "--lambda", "0.01", "--gamma", "1",
                   "--weights", str(wfile), "--out", str(tmp_path / "r.json")])
        assert rc == 0
        short = tmp_path / "short.txt"
        short.write_text("1.0\n1.0\n")
        assert main(["fit", str(data), "--lambda", "0.01",
                     "--weights", str(short),
                     "--out", str(tmp_path / "r.json")]) == 2

    def test_corr_file(self, tmp_path):
        data = tmp_path / "d.csv"
        main(["simulate", "--kind", "sine", "--n", "6", "--noise", "0.1",
              "--seed", "4", "--out", str(data)])
        corr = tmp_path / "c.csv"
        blocks = np.vstack([np.eye(6), np.eye(6)])
        np.savetxt(corr, blocks, delimiter=",")
        rc = main(["fit", str(data), "--lambda", "0.01", "--gamma", "1",
                   "--corr", str(corr), "--out", str(tmp_path / "r.json")])
        assert rc == 0
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["method"] == "hermite-basis"


class TestSelect:
    def test_pipeline_interior_minimum_and_determinism(self, tmp_path):
        data = tmp_path / "d.csv"
        main(["simulate", "--kind", "sine", "--n", "40", "--noise", "0.4",
              "--seed", "1", "--out", str(data)])
        out1 = tmp_path / "sel1.json"
        out2 = tmp_path / "sel2.json"
        args = ["select", str(data), "--criterion", "cv", "--grid", "50"]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        rep1 = json.loads(out1.read_text())
        rep2 = json.loads(out2.read_text())
        assert rep1["selection"]["lambda"] == rep2["selection"]["lambda"]
        assert rep1["selection"]["score"] == rep2["selection"]["score"]
        lam = rep1["selection"]["lambda"]
        assert 1e-7 <= lam <= 10.0  # interior of the default 1e-8..1e2 grid
        _, surface = _read_csv(rep1["selection"]["surface_file"])
        assert surface.shape == (15 * 13, 3)

    def test_cv_close_to_gcv_on_equispaced_case(self, tmp_path):
        data = tmp_path / "d.csv"
        main(["simulate", "--kind", "sine", "--n", "24", "--noise", "0.3",
              "--seed", "9", "--out", str(data)])
        from vspline import KernelConfig, cv_closed_form, gcv_score
        t, y, v = simulate_dataset("sine", 24, 0.3, 9)
        tu, yu, vu, _ = rescale_domain(t, y, v, margin=0.05)
        cv = cv_closed_form(tu, yu, vu, 0.01, 1.0, KernelConfig.uniform()).value
        gcv = gcv_score(tu, yu, vu, 0.01, 1.0, KernelConfig.uniform()).value
        assert abs(cv - gcv) / cv <= 0.1

    def test_all_degenerate_exit_4(self, tmp_path, capsys, monkeypatch):
        data = tmp_path / "d.csv"
        main(["simulate", "--kind", "sine", "--n", "10", "--noise", "0.1",
              "--seed", "2", "--out", str(data)])
        import vspline.cli as cli_mod

        def boom(*args, **kwargs):
            raise DegenerateGridError("all degenerate")

        monkeypatch.setattr(cli_mod, "optimize_params", boom)
        rc = main(["select", str(data), "--out", str(tmp_path / "r.json")])
        assert rc == 4
        assert "selecting" in capsys.readouterr().err


class TestRoundTrip:
    def test_simulate_fit_tiny_lambda_reproduces_knots(self, tmp_path):
        data = tmp_path / "d.csv"
        rep = tmp_path / "r.json"
        main(["simulate", "--kind", "sine", "--n", "10", "--noise", "0",
              "--seed", "6", "--out", str(data)])
        rc = main(["fit", str(data), "--lambda", "1e-9", "--gamma", "1",
                   "--out", str(rep)])
        assert rc == 0
        report = json.loads(rep.read_text())
        _, raw = _read_csv(data)
        np.testing.assert_allclose(report["knot_fit"]["f"], raw[:, 1], atol=1e-4)
        np.testing.assert_allclose(report["knot_fit"]["df_raw"], raw[:, 2], atol=1e-4)

    def test_outputs_parse_back(self, tmp_path):
        data = tmp_path / "d.csv"
        rep = tmp_path / "r.json"
        main(["simulate", "--kind", "iwp", "--n", "12", "--noise", "0.05",
              "--seed", "8", "--out", str(data)])
        main(["fit", str(data), "--lambda", "1e-3", "--out", str(rep)])
        report = json.loads(rep.read_text())
        _, curve = _read_csv(report["curve_file"])
        assert np.all(np.isfinite(curve))
        # write-read-write idempotence of the dataset representation
        _, d1 = _read_csv(data)
        data2 = tmp_path / "d2.csv"
        with open(data2, "w") as fh:
            fh.write("t,y,v\n")
            for row in d1:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
        _, d2 = _read_csv(data2)
        np.testing.assert_array_equal(d1, d2)
