import json

import pytest

from mimodab.cli import build_parser, main


def write_cfg(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestParser:
    def test_subcommands_exist(self):
        parser = build_parser()
        for kind in ("pattern", "rate_cdf", "snr_sweep", "power_control",
                     "ee_cdf", "convergence", "oob_psd", "gradcheck"):
            args = parser.parse_args([kind, "--config", "x.json"])
            assert args.experiment == kind

    def test_experiment_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_gradcheck_size_flags(self):
        args = build_parser().parse_args(["gradcheck", "--b", "4", "--u", "2"])
        assert args.b == 4 and args.u == 2


class TestExitCodes:
    def test_config_required(self, capsys):
        assert main(["rate_cdf"]) == 2
        assert "--config is required" in capsys.readouterr().err

    def test_experiment_mismatch(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {"experiment": "pattern", "b": 4, "u": 1,
                                   "scenario": {"rho_tot_dbm": 30.0}})
        assert main(["rate_cdf", "--config", cfg]) == 2
        assert "config is for 'pattern'" in capsys.readouterr().err

    def test_gradcheck_passes(self, tmp_path, capsys):
        assert main(["gradcheck", "--b", "3", "--u", "2",
                     "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "max relative gradient error:" in out

    def test_gradcheck_fails_on_coarse_step(self, tmp_path, capsys):
        # a huge finite-difference step makes the central reference wrong,
        # so the comparison must report failure
        cfg = write_cfg(tmp_path, {
            "experiment": "gradcheck", "b": 3, "u": 2,
            "out_dir": str(tmp_path),
            "optimizer": {"delta": 0.5}})
        assert main(["gradcheck", "--config", cfg]) == 1


class TestEndToEnd:
    def test_pattern_run(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {
            "experiment": "pattern", "b": 4, "u": 1,
            "scenario": {"rho_tot_dbm": 30.0},
            "angle_step_deg": 90.0})
        code = main(["pattern", "--config", cfg, "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "results.csv").exists()
        assert (tmp_path / "manifest.json").exists()
        assert (tmp_path / "pattern_mrt.csv").exists()
        assert "wrote" in capsys.readouterr().out

    def test_seed_override_lands_in_manifest(self, tmp_path):
        cfg = write_cfg(tmp_path, {
            "experiment": "gradcheck", "b": 3, "u": 2, "master_seed": 1})
        assert main(["gradcheck", "--config", cfg, "--seed", "42",
                     "--out", str(tmp_path)]) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["master_seed"] == 42

    def test_threads_flag_runs(self, tmp_path):
        cfg = write_cfg(tmp_path, {
            "experiment": "rate_cdf", "b": 4, "u": 2,
            "n_realizations": 2,
            "scenario": {"rho_tot_dbm": 30.0},
            "optimizer": {"n_inits": 2, "n_iter": 5}})
        assert main(["rate_cdf", "--config", cfg, "--out", str(tmp_path),
                     "--threads", "2"]) == 0
