import filecmp
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from multwave.cli import build_parser, main
from multwave.harness import read_records
from multwave.model import DesignSample, test_function as get_function
from multwave.svg import boxplot_svg, loglog_svg


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out if capsys is not None else ""
    return code, out


def data_rows(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


class TestSimulate:
    def test_rows_and_header(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        code, _ = run(["simulate", "--function", "blip", "--n", 4096, "--sigma2", 0.01, "--seed", 1, "--out", out], capsys)
        assert code == 0
        rows = data_rows(out)
        assert rows[0] == "x,y" and len(rows) == 4097
        assert out.read_text().startswith("# function=blip n=4096")

    def test_idempotent(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            assert main(["simulate", "--n", "256", "--seed", "42", "--out", str(p)]) == 0
        assert filecmp.cmp(a, b, shallow=False)

    def test_not_power_of_two(self, tmp_path):
        assert main(["simulate", "--n", "1000", "--out", str(tmp_path / "x.csv")]) == 2

    def test_bad_choice(self):
        with pytest.raises(SystemExit) as e:
            main(["simulate", "--function", "doppler"])
        assert e.value.code == 2

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as e:
            main(["simulate", "--frobnicate"])
        assert e.value.code == 2

    def test_unwritable(self, tmp_path):
        assert main(["simulate", "--n", "256", "--out", str(tmp_path / "missing" / "x.csv")]) == 3


class TestEstimate:
    def test_full_run(self, tmp_path, capsys):
        sample = tmp_path / "s.csv"
        run(["simulate", "--n", 1024, "--seed", 3, "--out", sample])
        code, out = run(["estimate", "--input", sample, "--out-dir", tmp_path / "e"], capsys)
        assert code == 0
        for f in ("estimate.csv", "coefficients.csv", "true_coefficients.csv", "jstar_scores.csv", "threshold_scores.csv"):
            assert (tmp_path / "e" / f).exists()
        assert data_rows(tmp_path / "e" / "estimate.csv")[0] == "x,r_hat_linear,r_hat_nonlinear,r_true"
        assert "jstar=" in out and "mse_linear=" in out

    def test_explicit_parameters(self, tmp_path, capsys):
        code, out = run(["estimate", "--n", 1024, "--method", "linear", "--jstar", 4, "--out-dir", tmp_path], capsys)
        assert code == 0
        assert "jstar=4" in out
        assert not (tmp_path / "jstar_scores.csv").exists()
        assert data_rows(tmp_path / "estimate.csv")[0] == "x,r_hat_linear,r_true"

    def test_universal_rule(self, tmp_path, capsys):
        code, out = run(["estimate", "--n", 1024, "--jstar", 3, "--rule", "universal", "--out-dir", tmp_path], capsys)
        assert code == 0
        assert f"threshold={float(np.sqrt(np.log(1024) / 1024))!r}" in out

    def test_noiseless_matches_r(self, tmp_path):
        run(["estimate", "--function", "blip", "--n", 4096, "--sigma2", 0, "--u-law", "constant", "--raw-u",
             "--jstar", 7, "--method", "linear", "--out-dir", tmp_path])
        data = np.loadtxt(tmp_path / "estimate.csv", delimiter=",", comments="#", skiprows=2)
        err = data[:, 1] - data[:, 2]
        # away from the jump at 0.8 and the periodic seam
        x = data[:, 0]
        mask = (np.abs(x - 0.8) > 0.05) & (x > 0.05) & (x < 0.95)
        assert np.sqrt(np.mean(err[mask] ** 2)) < 0.02

    def test_missing_input(self, tmp_path):
        assert main(["estimate", "--input", str(tmp_path / "nope.csv")]) == 3

    def test_bad_level(self, tmp_path):
        assert main(["estimate", "--n", "256", "--jstar", "9", "--out-dir", str(tmp_path)]) == 2

    def test_input_sample_is_used(self, tmp_path):
        sample = tmp_path / "s.csv"
        run(["simulate", "--n", 512, "--seed", 8, "--function", "ramp", "--out", sample])
        run(["estimate", "--input", sample, "--jstar", 3, "--method", "linear", "--out-dir", tmp_path])
        r_true = np.loadtxt(tmp_path / "estimate.csv", delimiter=",", comments="#", skiprows=2)[:, 2]
        np.testing.assert_allclose(r_true, get_function("ramp")(np.arange(512) / 512))
        assert DesignSample.from_csv(sample).n == 512


class TestMonteCarloCommand:
    def test_outputs(self, tmp_path, capsys):
        code, out = run(["mc", "--n", 256, "--N", 4, "--seed", 7, "--out-dir", tmp_path], capsys)
        assert code == 0
        recs = read_records(tmp_path / "records.csv")
        assert len(recs) == 4
        summary = json.loads((tmp_path / "summary.json").read_text())
        med = np.median([r.mse_lin_2fcv for r in recs])
        entry = [e for e in summary["summaries"] if e["method"] == "lin_2fcv" and e["metric"] == "mse"][0]
        assert entry["median"] == pytest.approx(med, rel=1e-15)
        ET.parse(tmp_path / "boxplot.svg")
        assert "median_mse_lin_2fcv" in out

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\nfunction = ramp\nn=256\nN=2\n--sigma2=0.025\n")
        assert main(["mc", "--config", str(cfg), "--out-dir", str(tmp_path), "--N", "3"]) == 0
        head = (tmp_path / "records.csv").read_text().splitlines()[0]
        assert "function=ramp" in head and "N=3" in head and "sigma2=0.025" in head
        assert len(read_records(tmp_path / "records.csv")) == 3

    @pytest.mark.parametrize("text", ["bogus=1\n", "n\n", "n=abc\n", "function=doppler\n"])
    def test_bad_config(self, tmp_path, text):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(text)
        assert main(["mc", "--config", str(cfg)]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["mc", "--config", str(tmp_path / "none.cfg")]) == 3


class TestRateCommand:
    def test_slope_printed_equals_csv(self, tmp_path, capsys):
        code, out = run(["rate", "--function", "parabolas", "--n-list", "256,512,1024", "--N", 3,
                         "--out-dir", tmp_path], capsys)
        assert code == 0
        printed = float(out.strip().split("=")[1])
        rows = data_rows(tmp_path / "rate.csv")
        assert all(float(r.split(",")[-1]) == printed for r in rows[1:])
        ET.parse(tmp_path / "rate.svg")

    def test_needs_three_sizes(self, tmp_path):
        assert main(["rate", "--n-list", "256,512", "--out-dir", str(tmp_path)]) == 2

    def test_noiseless_negative_slope(self, tmp_path, capsys):
        code, out = run(["rate", "--n-list", "256,512,1024,2048", "--N", 4, "--sigma2", 0, "--u-law", "constant",
                         "--raw-u", "--out-dir", tmp_path], capsys)
        assert code == 0
        assert float(out.strip().split("=")[1]) < 0


class TestDeterminism:
    @pytest.mark.parametrize(
        "argv",
        [
            ["simulate", "--n", "512", "--seed", "5", "--out", "{d}/s.csv"],
            ["estimate", "--n", "512", "--seed", "5", "--out-dir", "{d}"],
            ["mc", "--n", "256", "--N", "3", "--seed", "5", "--out-dir", "{d}"],
            ["rate", "--n-list", "256,512,1024", "--N", "2", "--seed", "5", "--out-dir", "{d}"],
        ],
    )
    def test_rerun_identical(self, tmp_path, argv):
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            d.mkdir()
            assert main([a.format(d=d) for a in argv]) == 0
        names = sorted(p.name for p in dirs[0].iterdir())
        assert names == sorted(p.name for p in dirs[1].iterdir())
        for name in names:
            assert filecmp.cmp(dirs[0] / name, dirs[1] / name, shallow=False), name


class TestHelp:
    @pytest.mark.parametrize("cmd", ["simulate", "estimate", "mc", "rate"])
    def test_every_flag_listed(self, cmd, capsys):
        _, sub = build_parser()
        p = sub.choices[cmd]
        with pytest.raises(SystemExit):
            main([cmd, "--help"])
        text = capsys.readouterr().out
        for action in p._actions:
            for opt in action.option_strings:
                assert opt in text


class TestSvg:
    def test_boxplot_wellformed(self):
        box = {"min": 0.001, "q1": 0.002, "median": 0.003, "q3": 0.004, "max": 0.006}
        root = ET.fromstring(boxplot_svg({"a": box, "b<c": box}, "t & u"))
        assert root.tag.endswith("svg")

    def test_loglog_wellformed(self):
        svg = loglog_svg([256, 512, 1024], [0.1, 0.05, 0.026], -0.95, 2.9, "rate")
        root = ET.fromstring(svg)
        assert len([e for e in root.iter() if e.tag.endswith("circle")]) == 3
