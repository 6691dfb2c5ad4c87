"""CLI and configuration tests: fail-closed parsing, presets, overrides,
artifact emission, manifests, exit codes, and byte-identical reruns.
"""

import json
import math

import numpy as np
import pytest

from gomimo.cli import main
from gomimo.config import (PRESETS, apply_overrides, load_config_file,
                           load_preset, render_ini, resolve_scenario,
                           train_config_from)
from gomimo.errors import ConfigError


class TestConfigParsing:
    def test_defaults_resolve(self):
        scenario = resolve_scenario(load_preset("table1_center"))
        assert scenario.channel.entries.shape == (4, 4)
        assert scenario.location_label == "center"
        assert scenario.scheme.kind == "gosm"

    def test_all_presets_resolve(self):
        for name in PRESETS:
            scenario = resolve_scenario(load_preset(name))
            assert scenario.channel.entries.max() > 0

    def test_unknown_preset_rejected(self):
        with pytest.raises(ConfigError):
            load_preset("table9_nonsense")

    def test_unknown_key_rejected_with_line(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[scheme]\nkind = gosm\nbogus_key = 1\n")
        with pytest.raises(ConfigError) as err:
            load_config_file(str(path))
        assert "bogus_key" in str(err.value)
        assert ":3:" in str(err.value)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[nonsense]\nx = 1\n")
        with pytest.raises(ConfigError) as err:
            load_config_file(str(path))
        assert "nonsense" in str(err.value)

    def test_config_file_round_trip(self, tmp_path):
        base = load_preset("table3_gosmp_corner")
        path = tmp_path / "cfg.ini"
        path.write_text(render_ini(base))
        reread = load_config_file(str(path))
        assert reread.values == base.values

    def test_overrides_take_precedence(self):
        config = apply_overrides(load_preset("table1_center"),
                                 ["run.seed=99", "scheme.kind=gosmp"])
        assert config.getint("run", "seed") == 99
        scenario = resolve_scenario(config)
        assert scenario.scheme.kind == "gosmp"

    def test_bad_override_shape_rejected(self):
        with pytest.raises(ConfigError):
            apply_overrides(load_preset("table1_center"), ["seed=99"])
        with pytest.raises(ConfigError):
            apply_overrides(load_preset("table1_center"), ["run.bogus=1"])

    def test_train_config_extraction(self):
        cfg = train_config_from(load_preset("table2_gosm_corner"))
        assert cfg.training_snr_db == 160.0
        assert cfg.learning_rate == 0.001
        assert cfg.scaling_factor == 2e5
        assert cfg.train_size == 150_000

    def test_corner_receiver_positions(self):
        scenario = resolve_scenario(load_preset("table1_corner"))
        assert scenario.geometry.pd_positions[:, 0].min() < 0
        assert scenario.location_label == "corner"

    def test_explicit_receiver_point(self):
        config = apply_overrides(load_preset("table1_center"),
                                 ["geometry.receiver=1.0, 2.0"])
        scenario = resolve_scenario(config)
        np.testing.assert_allclose(scenario.geometry.pd_positions[0, :2],
                                   [0.95, 1.95])


class TestCliCommands:
    def test_channel_dump(self, tmp_path, center_channel):
        out = tmp_path / "run"
        assert main(["channel-dump", "--preset", "table1_center",
                     "--out", str(out)]) == 0
        rows = [line.split(",") for line in
                (out / "channel.csv").read_text().strip().splitlines()]
        dumped = np.array([[float(v) for v in row] for row in rows])
        np.testing.assert_allclose(dumped, center_channel.entries, rtol=1e-16)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "channel-dump"
        assert manifest["config"]["run"]["seed"] == "1"
        assert "numpy" in manifest["versions"]

    def test_codebook_dump_row_count(self, tmp_path):
        out = tmp_path / "run"
        assert main(["codebook-dump", "--preset", "table3_gosmp_center",
                     "--out", str(out)]) == 0
        lines = (out / "codebook.csv").read_text().strip().splitlines()
        assert len(lines) == 65  # header + 2^6 codewords

    def test_codebook_dump_matches_codec(self, tmp_path, gosm):
        from gomimo.modulation import map_bits
        out = tmp_path / "run"
        main(["codebook-dump", "--preset", "table2_gosm_center", "--out", str(out)])
        lines = (out / "codebook.csv").read_text().strip().splitlines()[1:]
        assert len(lines) == 16
        for line in lines:
            bits_text, *values = line.split(",")
            frame = [int(b) for b in bits_text]
            np.testing.assert_allclose([float(v) for v in values],
                                       map_bits(gosm, frame), rtol=1e-15)

    def test_ber_sweep_byte_identical_rerun(self, tmp_path):
        args = ["ber-sweep", "--preset", "table1_center",
                "--set", "sweep.snr_list_db=138, 142",
                "--set", "sweep.vectors_per_point=5000"]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert (out1 / "ber_sweep.csv").read_bytes() \
            == (out2 / "ber_sweep.csv").read_bytes()
        header = (out1 / "ber_sweep.csv").read_text().splitlines()[0]
        assert header == "detector,scheme,location,snr_db,bits,errors,ber,stderr,censored"

    def test_missing_model_is_config_error(self, tmp_path):
        code = main(["ber-sweep", "--preset", "table2_gosm_center",
                     "--out", str(tmp_path / "x")])
        assert code == 2

    def test_unknown_key_exit_code(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[run]\nwhatever = 3\n")
        assert main(["channel-dump", "--config", str(bad),
                     "--out", str(tmp_path / "y")]) == 2

    def test_conflicting_sources_rejected(self, tmp_path):
        cfg = tmp_path / "ok.ini"
        cfg.write_text("[run]\nseed = 4\n")
        assert main(["channel-dump", "--config", str(cfg), "--preset",
                     "table1_center", "--out", str(tmp_path / "z")]) == 2

    def test_env_var_default_output(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GOMIMO_OUT", str(tmp_path / "envout"))
        monkeypatch.chdir(tmp_path)
        assert main(["channel-dump", "--preset", "table1_center"]) == 0
        assert (tmp_path / "envout" / "channel.csv").exists()

    def test_train_then_sweep_uses_model(self, tmp_path):
        out = tmp_path / "run"
        train_args = ["train", "--preset", "table2_gosm_center",
                      "--set", "train.train_size=3000",
                      "--set", "train.validation_size=500",
                      "--set", "train.epochs=2",
                      "--out", str(out)]
        assert main(train_args) == 0
        assert (out / "model_gosm_blind.npz").exists()
        assert (out / "mse_log.csv").exists()
        sweep_args = ["ber-sweep", "--preset", "table2_gosm_center",
                      "--set", "sweep.snr_list_db=135, 140",
                      "--set", "sweep.vectors_per_point=2000",
                      "--out", str(out)]
        assert main(sweep_args) == 0
        body = (out / "ber_sweep.csv").read_text().splitlines()
        assert len(body) == 3
        assert body[1].startswith("blind_dnn,gosm,center,")

    def test_interpolation_failure_exit_code(self, tmp_path, monkeypatch):
        # Censor everything by sweeping at an absurdly clean SNR: the
        # ablation readout at BER 1e-3 is then unbracketed -> exit 4.
        args = ["ablate-input", "--preset", "table2_gosm_center",
                "--set", "train.train_size=2000",
                "--set", "train.validation_size=400",
                "--set", "train.epochs=1",
                "--set", "sweep.snr_list_db=300, 310",
                "--set", "sweep.vectors_per_point=1000",
                "--out", str(tmp_path / "w")]
        assert main(args) == 4

    def test_mse_log_command(self, tmp_path):
        out = tmp_path / "m"
        args = ["mse-log", "--preset", "table2_gosm_center",
                "--set", "train.train_size=2000",
                "--set", "train.validation_size=400",
                "--set", "train.epochs=2",
                "--set", "train.training_snr_list_db=135, 145",
                "--out", str(out)]
        assert main(args) == 0
        lines = (out / "mse_log.csv").read_text().strip().splitlines()
        assert lines[0] == "training_snr_db,epoch,train_mse,val_mse"
        assert len(lines) == 5  # 2 SNRs x 2 epochs + header
        for line in lines[1:]:
            assert all(math.isfinite(float(v)) for v in line.split(","))

    def test_alpha_sweep_command(self, tmp_path):
        out = tmp_path / "al"
        args = ["alpha-sweep", "--preset", "table2_gosm_center",
                "--set", "train.train_size=2000",
                "--set", "train.validation_size=400",
                "--set", "train.epochs=1",
                "--set", "sweep.alpha_list=1e5, 1e6",
                "--set", "sweep.snr_fixed_db=140",
                "--set", "sweep.vectors_per_point=2000",
                "--out", str(out)]
        assert main(args) == 0
        lines = (out / "alpha_sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "alpha,snr_db,ber"
        assert len(lines) == 3

    def test_bench_command(self, tmp_path):
        out = tmp_path / "b"
        args = ["bench", "--preset", "table3_gosmp_center",
                "--set", "train.train_size=2000",
                "--set", "train.validation_size=400",
                "--set", "train.epochs=1",
                "--set", "sweep.timing_vectors=300",
                "--out", str(out)]
        assert main(args) == 0
        lines = (out / "timing.csv").read_text().strip().splitlines()
        assert lines[0] == "detector,scheme,vectors,wall_seconds,per_vector_us"
        assert len(lines) == 5  # four detectors
        assert (out / "model_gosmp_blind.npz").exists()
        assert (out / "model_gosmp_zf.npz").exists()

    def test_reproduce_figure_4_all_detectors(self, tmp_path):
        out = tmp_path / "f4"
        args = ["reproduce-figure", "4",
                "--set", "train.train_size=2000",
                "--set", "train.validation_size=400",
                "--set", "train.epochs=1",
                "--set", "sweep.snr_list_db=138, 142",
                "--set", "sweep.vectors_per_point=2000",
                "--out", str(out)]
        assert main(args) == 0
        lines = (out / "ber_sweep.csv").read_text().strip().splitlines()
        detectors = {line.split(",")[0] for line in lines[1:]}
        assert detectors == {"joint_ml", "zf_ml", "zf_dnn", "blind_dnn"}
        assert len(lines) == 9  # 4 detectors x 2 points + header

    def test_reproduce_figure_rejects_unknown(self, tmp_path):
        assert main(["reproduce-figure", "9", "--out", str(tmp_path / "x")]) == 2

    def test_reproduce_figure_6_writes_curves_even_unbracketed(self, tmp_path):
        # Tiny budgets rarely bracket BER 1e-3; the curves must still land
        # on disk, with exit 4 signalling the missing gain readout.
        out = tmp_path / "f6"
        args = ["reproduce-figure", "6",
                "--set", "train.train_size=2000",
                "--set", "train.validation_size=400",
                "--set", "train.epochs=1",
                "--set", "sweep.snr_list_db=138, 142",
                "--set", "sweep.vectors_per_point=2000",
                "--out", str(out)]
        code = main(args)
        assert code in (0, 4)
        lines = (out / "ablation.csv").read_text().strip().splitlines()
        assert lines[0] == "scheme,input,snr_db,bits,errors,ber,stderr,censored"
        assert len(lines) == 9  # 2 schemes x 2 arms x 2 points + header
