"""CLI command behavior and output determinism."""

import json
import os

import numpy as np
import pandas as pd
import pytest

from firmfacts import panel as P
from firmfacts.cli import main
from firmfacts.synth import SynthConfig, flat_deflators, generate_panel


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    synth_dir = root / "synth"
    assert main(["synth", "--out", str(synth_dir), "--firms", "150",
                 "--years", "12", "--seed", "17"]) == 0
    store_dir = root / "store"
    assert main(["ingest", "--panel", str(synth_dir / "panel.csv"),
                 "--deflators", str(synth_dir / "deflators.csv"),
                 "--out", str(store_dir)]) == 0
    return root, synth_dir, store_dir


def _store(workspace):
    return str(workspace[2] / "firmyears.csv")


class TestIngest:
    def test_counts_reported(self, workspace):
        _, _, store_dir = workspace
        summary = json.load(open(store_dir / "ingest_summary.json"))
        assert summary["firms"] == 150
        assert summary["rows_good"] <= summary["rows"]

    def test_empty_file_names_missing_header(self, tmp_path, capsys):
        f = tmp_path / "empty.csv"
        f.write_text("firm_id\n")
        rc = main(["ingest", "--panel", str(f), "--out", str(tmp_path / "o")])
        assert rc == 1
        err = capsys.readouterr().err
        assert "ESCHEMA" in err and "fiscal_year" in err

    def test_subcutoff_firm_shrinks_good(self, tmp_path):
        cfg = SynthConfig(n_firms=30, n_years=6, seed=23)
        df, _ = generate_panel(cfg)
        # shrink one firm below the 1M cutoff
        tiny = df["firm_id"] == df["firm_id"].iloc[0]
        n_tiny = int(tiny.sum())
        for col in ("mve", "lt", "ppent", "at", "sl"):
            df.loc[tiny, col] = df.loc[tiny, col] * 1e-9
        panel_csv = tmp_path / "panel.csv"
        df.to_csv(panel_csv, index=False)
        defl = tmp_path / "defl.csv"
        flat_deflators(df["fiscal_year"]).to_csv(defl, index=False)
        out = tmp_path / "store"
        assert main(["ingest", "--panel", str(panel_csv), "--deflators",
                     str(defl), "--out", str(out)]) == 0
        summary = json.load(open(out / "ingest_summary.json"))
        frame = pd.read_csv(out / "firmyears.csv")
        lag_ok = frame.dropna(subset=["IT"])
        assert summary["rows_good"] <= summary["rows"] - n_tiny


class TestFitTest:
    def test_skipped_pvalues_with_zero_reps(self, workspace, tmp_path):
        out = tmp_path / "fit"
        rc = main(["fit-test", "--panel", _store(workspace),
                   "--var", "intensity.CF.KT", "--families", "laplace,dln",
                   "--reps", "0", "--out", str(out)])
        assert rc == 0
        payload = json.load(open(out / "fit_intensity_CF_KT_good.json"))
        assert payload["families"]["dln"]["ks"]["pvalue"] is None
        assert payload["families"]["dln"]["ks"]["stat"] > 0
        assert payload["comparison"]["aic_rl"]["dln"] == 1.0

    def test_qq_self_consistency_at_scale(self, tmp_path):
        # income intensity is an exact DLN draw by construction, so fitting
        # its own family at n ~ 1e5 must put the q-q points on the diagonal
        cfg = SynthConfig(n_firms=10_000, n_years=11, seed=37)
        df, _ = generate_panel(cfg)
        p = tmp_path / "p.csv"
        df.to_csv(p, index=False)
        out = tmp_path / "fitq"
        rc = main(["fit-test", "--panel", str(p), "--var",
                   "intensity.CF.KT", "--families", "dln", "--reps", "0",
                   "--out", str(out)])
        assert rc == 0
        qq = pd.read_csv(out / "qq_intensity_CF_KT_good.csv")
        assert len(qq) == 99
        dev = np.abs(qq["empirical"] - qq["fitted_dln"])
        assert dev.max() < 0.05

    def test_histogram_columns(self, workspace, tmp_path):
        out = tmp_path / "fith"
        main(["fit-test", "--panel", _store(workspace), "--var", "CF",
              "--families", "dln", "--reps", "0", "--out", str(out)])
        hist = pd.read_csv(out / "hist_CF_good.csv")
        assert {"left", "right", "center", "count", "density_dln"} <= set(
            hist.columns)
        assert hist["count"].sum() > 0

    def test_unknown_variable_is_error(self, workspace, tmp_path, capsys):
        rc = main(["fit-test", "--panel", _store(workspace), "--var",
                   "BOGUS", "--families", "dln", "--out",
                   str(tmp_path / "x")])
        assert rc == 1
        assert "EDOMAIN" in capsys.readouterr().err


class TestAdjust:
    def test_single_year_time_adjust_is_identity(self, tmp_path):
        cfg = SynthConfig(n_firms=120, n_years=1, seed=29)
        df, _ = generate_panel(cfg)
        panel_csv = tmp_path / "p.csv"
        df.to_csv(panel_csv, index=False)
        out = tmp_path / "adj"
        rc = main(["adjust", "--panel", str(panel_csv), "--var", "scale.KT",
                   "--mode", "time", "--out", str(out)])
        assert rc == 0
        frame = pd.read_csv(out / "firmyears.csv")
        got = frame["adj_scale_KT"].to_numpy()
        want = np.log(frame["KT"].to_numpy())
        np.testing.assert_allclose(got, want, rtol=1e-9)

    def test_missing_basis_is_config_error(self, workspace, tmp_path, capsys):
        rc = main(["adjust", "--panel", _store(workspace), "--var",
                   "dlog.SL", "--mode", "scale", "--basis", "NOPE",
                   "--out", str(tmp_path / "y")])
        assert rc == 1
        assert "ECONFIG" in capsys.readouterr().err

    def test_anchors_written(self, workspace, tmp_path):
        out = tmp_path / "adj2"
        rc = main(["adjust", "--panel", _store(workspace), "--var",
                   "dlog.SL", "--mode", "both", "--basis", "KT",
                   "--bins", "15", "--out", str(out)])
        assert rc == 0
        anchors = json.load(open(out / "anchors_dlog_SL.json"))
        assert "scale" in anchors and "b1_dis" in anchors["scale"]


class TestTables:
    def test_binscatter_monotone_median_on_identity(self, workspace, tmp_path):
        out = tmp_path / "bs"
        rc = main(["binscatter", "--panel", _store(workspace), "--var",
                   "scale.KT", "--basis", "KT", "--bins", "12",
                   "--out", str(out)])
        assert rc == 0
        frame = pd.read_csv(out / "binscatter_scale_KT_by_scale_KT.csv")
        assert frame["p50"].is_monotonic_increasing

    def test_growth_summary_mean(self, workspace, tmp_path):
        out = tmp_path / "gr"
        rc = main(["growth", "--panel", _store(workspace), "--var",
                   "dlog.SL", "--out", str(out)])
        assert rc == 0
        summary = json.load(open(out / "growth_dlog_SL_summary.json"))
        assert abs(summary["mean"]) < 0.02  # no drift planted

    def test_dynamism_immortal_panel(self, tmp_path):
        cfg = SynthConfig(n_firms=80, n_years=12, hazard=0.0, seed=31)
        df, _ = generate_panel(cfg)
        p = tmp_path / "p.csv"
        df.to_csv(p, index=False)
        out = tmp_path / "dyn"
        rc = main(["dynamism", "--panel", str(p), "--horizon", "5",
                   "--out", str(out)])
        assert rc == 0
        exit_bins = pd.read_csv(out / "dynamism_exit_by_bin.csv")
        assert (exit_bins["probability"] == 0.0).all()

    def test_report_aggregates(self, workspace, tmp_path):
        out = tmp_path / "rep"
        os.makedirs(out)
        (out / "a.json").write_text('{"x": 1}')
        rc = main(["report", "--out", str(out)])
        assert rc == 0
        rep = json.load(open(out / "report.json"))
        assert rep["artifacts"]["a.json"]["x"] == 1


class TestDeterminism:
    def test_rerun_is_byte_identical(self, workspace, tmp_path):
        args_sets = []
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert main(["synth", "--out", str(out / "synth"), "--firms",
                         "60", "--years", "8", "--seed", "7"]) == 0
            assert main(["ingest", "--panel", str(out / "synth/panel.csv"),
                         "--deflators", str(out / "synth/deflators.csv"),
                         "--out", str(out / "store")]) == 0
            assert main(["fit-test", "--panel",
                         str(out / "store/firmyears.csv"), "--var",
                         "intensity.CF.KT", "--families", "normal,laplace",
                         "--reps", "249", "--seed", "3",
                         "--out", str(out / "fit")]) == 0
            assert main(["dynamism", "--panel",
                         str(out / "store/firmyears.csv"), "--horizon", "4",
                         "--out", str(out / "dyn")]) == 0
        for rel in ("synth/panel.csv", "synth/truth.json",
                    "store/firmyears.csv", "store/ingest_summary.json",
                    "fit/fit_intensity_CF_KT_good.json",
                    "fit/qq_intensity_CF_KT_good.csv",
                    "dyn/dynamism_summary.json"):
            a = (out_a / rel).read_bytes()
            b = (out_b / rel).read_bytes()
            assert a == b, rel
