"""Trainer unit tests: model shapes, data pairing, config, predict I/O."""

import subprocess
import sys

import numpy as np
import pytest
import torch

from phasorloc.errors import ValidationError
from phasorloc.formats import read_columns, read_grid, read_map_pair, write_grid
from phasorloc_trainer import (ToyMapNet, ToyNetConfig, load_checkpoint,
                               predict, read_train_config, train,
                               write_train_config)


def run_primary(args):
    result = subprocess.run([sys.executable, "-m", "phasorloc.cli"] + args,
                            capture_output=True, text=True)
    assert result.returncode == 0, result.stderr
    return result


@pytest.fixture(scope="module")
def mini_dataset(tmp_path_factory):
    """A 48-frame single-emitter dataset via the primary CLI."""
    root = tmp_path_factory.mktemp("mini")
    cfg = root / "cfg.txt"
    cfg.write_text("camera.width = 16\ncamera.height = 16\n"
                   "sim.density = 0.390625\nsim.photon_mean = 20000\n"
                   "sim.photon_sigma = 1000\n")
    run_primary(["simulate", "--config", str(cfg), "--frames", "48",
                 "--seed", "9", "--out", str(root / "data")])
    run_primary(["encode", "--config", str(cfg),
                 "--gt", str(root / "data" / "emitters.csv"),
                 "--frames", "48", "--out", str(root / "maps")])
    return root


class TestModel:
    def test_output_is_two_channels_at_4x(self):
        net = ToyMapNet(ToyNetConfig())
        with torch.no_grad():
            y = net(torch.zeros(3, 1, 16, 16))
        assert tuple(y.shape) == (3, 2, 64, 64)

    def test_indivisible_frame_size_rejected(self):
        net = ToyMapNet(ToyNetConfig(depth=3))
        with pytest.raises(ValidationError):
            net(torch.zeros(1, 1, 15, 15))

    def test_zero_input_gives_input_independent_bounded_maps(self):
        # Padding effects keep the untrained output from being exactly
        # constant, but it must not depend on which zero frame comes in and
        # must stay bounded near the init scale.
        torch.manual_seed(0)
        net = ToyMapNet(ToyNetConfig())
        net.eval()
        with torch.no_grad():
            a = net(torch.zeros(1, 1, 16, 16))
            b = net(torch.zeros(1, 1, 16, 16))
        assert torch.equal(a, b)
        assert float(a.abs().max()) < 5.0

    def test_nearest_mode_builds(self):
        net = ToyMapNet(ToyNetConfig(upsample_mode="nearest"))
        with torch.no_grad():
            y = net(torch.zeros(1, 1, 16, 16))
        assert tuple(y.shape) == (1, 2, 64, 64)


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = ToyNetConfig(depth=2, base_channels=8, upsample_mode="nearest",
                           epochs=3, batch_size=4, lr=0.01, seed=5)
        path = tmp_path / "train.txt"
        write_train_config(path, cfg)
        assert read_train_config(path) == cfg

    def test_validation(self):
        with pytest.raises(ValidationError):
            ToyNetConfig(upsample_mode="bicubic")
        with pytest.raises(ValidationError):
            ToyNetConfig(epochs=0)


@pytest.fixture(scope="module")
def trained(mini_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt")
    cfg = ToyNetConfig(epochs=2, batch_size=8, seed=1)
    path = train(mini_dataset / "data", mini_dataset / "maps", cfg, out)
    return mini_dataset, path


class TestTrainPredict:
    def test_checkpoint_and_loss_curve_written(self, trained):
        mini, ckpt = trained
        assert ckpt.exists()
        names, data = read_columns(ckpt.parent / "loss_curve.txt")
        assert names == ["epoch", "train_loss", "val_loss"]
        assert data.shape[0] == 2
        assert np.all(np.isfinite(data[:, 1]))

    def test_predicted_grids_pass_primary_reader(self, trained):
        mini, ckpt = trained
        out = ckpt.parent / "pred"
        written = predict(ckpt, mini / "data" / "frames", out)
        assert len(written) == 48  # one output per input frame
        pair = read_map_pair(written[0])  # primary reader validates 2ch
        assert pair.re.shape == (64, 64)
        assert pair.upsample_factor == 4
        grid = read_grid(written[0])
        assert grid.pixel_pitch_nm == pytest.approx(25.0)
        assert (grid.z_min, grid.z_max) == (-750.0, 750.0)

    def test_predict_rejects_wrong_dims(self, trained, tmp_path):
        mini, ckpt = trained
        bad_dir = tmp_path / "bad"
        bad_dir.mkdir()
        write_grid(bad_dir / "frame_000000.grid",
                   np.zeros((1, 8, 8), "<f4"), 100.0)
        with pytest.raises(ValidationError):
            predict(ckpt, bad_dir, tmp_path / "out")

    def test_checkpoint_reload_matches(self, trained):
        mini, ckpt = trained
        model, payload = load_checkpoint(ckpt)
        x = torch.zeros(1, 1, 16, 16)
        with torch.no_grad():
            a = model(x)
            model2, _ = load_checkpoint(ckpt)
            b = model2(x)
        assert torch.equal(a, b)
        assert payload["frame_shape"] == (16, 16)


class TestDataValidation:
    def test_missing_maps_rejected(self, mini_dataset, tmp_path):
        from phasorloc_trainer.data import PairedGridDataset

        empty = tmp_path / "empty"
        empty.mkdir()
        with pytest.raises(ValidationError):
            PairedGridDataset(mini_dataset / "data" / "frames", empty,
                              100.0, 20000.0)

    def test_non_4x_targets_rejected(self, mini_dataset, tmp_path):
        from phasorloc_trainer.data import PairedGridDataset

        bad = tmp_path / "badmaps"
        bad.mkdir()
        for i in range(48):
            write_grid(bad / f"map_{i:06d}.grid", np.zeros((2, 32, 32), "<f4"),
                       25.0, -750.0, 750.0)
        with pytest.raises(ValidationError):
            PairedGridDataset(mini_dataset / "data" / "frames", bad,
                              100.0, 20000.0)

    def test_normalization_from_dataset(self, mini_dataset):
        from phasorloc_trainer.data import normalization_from_dataset

        baseline, scale = normalization_from_dataset(mini_dataset / "data")
        assert baseline == 100.0
        assert scale == 20000.0
