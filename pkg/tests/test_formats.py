"""On-disk formats: CSV, binary grids, run configs, reports, columns."""

import struct

import numpy as np
import pytest

from phasorloc import formats, metrics, presets, sim
from phasorloc.codec import ComplexMapPair, LocalizationSet
from phasorloc.errors import (BadMagicError, FormatError, HeaderMismatchError,
                              TruncatedPayloadError, ValidationError)


def sample_sets():
    a = sim.EmitterSet(0, [0, 1], [100.5, 900.25], [200.0, 1300.0],
                       [-50.0, 600.0], [1000.0, 2000.0])
    b = sim.EmitterSet(2, [0], [57.125], [44.5], [0.0], [1.5])
    return [a, b]


def sample_seeds():
    return LocalizationSet(
        np.array([0, 0, 3], dtype=np.int64),
        np.array([10.5, 20.25, 30.125]), np.array([1.0, 2.0, 3.0]),
        np.array([-700.0, 0.0, 700.0]), np.array([0.9, 0.8, 0.7]),
        np.array([1.2, 1.1, 1.0]), np.array([0.0, 0.05, 0.1]))


class TestEmitterCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "gt.csv"
        formats.write_emitters(path, sample_sets())
        back = formats.read_emitters(path)
        assert [s.frame_id for s in back] == [0, 2]
        assert np.array_equal(back[0].ids, [0, 1])
        assert np.allclose(back[0].x, [100.5, 900.25])
        assert np.allclose(back[1].photons, [1.5])

    def test_canonical_idempotence(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        formats.write_emitters(p1, sample_sets())
        formats.write_emitters(p2, formats.read_emitters(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_file_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        formats.write_emitters(path, [])
        assert path.read_text() == formats.GT_HEADER + "\n"
        assert formats.read_emitters(path) == []

    def test_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("frame,id,x,y,z,photons\n")
        with pytest.raises(HeaderMismatchError):
            formats.read_emitters(path)

    def test_field_count_mismatch_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(formats.GT_HEADER + "\n0,0,1.0,2.0,3.0\n")
        with pytest.raises(HeaderMismatchError) as err:
            formats.read_emitters(path)
        assert err.value.line == 2

    def test_bad_number_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(formats.GT_HEADER + "\n0,0,oops,2.0,3.0,10\n")
        with pytest.raises(FormatError) as err:
            formats.read_emitters(path)
        assert err.value.line == 2


class TestSeedCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "seeds.csv"
        seeds = sample_seeds()
        formats.write_seeds(path, seeds)
        text = path.read_text()
        assert text.splitlines()[0] == formats.SEED_HEADER
        assert ",-1," in text.splitlines()[1]
        back = formats.read_seeds(path)
        assert back.n == 3
        assert np.allclose(back.x, seeds.x)
        assert np.allclose(back.phase_dispersion, seeds.phase_dispersion)
        assert np.array_equal(back.frame_ids, seeds.frame_ids)

    def test_canonical_idempotence(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        formats.write_seeds(p1, sample_seeds())
        formats.write_seeds(p2, formats.read_seeds(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_seed_set(self, tmp_path):
        path = tmp_path / "seeds.csv"
        formats.write_seeds(path, LocalizationSet.empty())
        assert formats.read_seeds(path).n == 0


class TestGridFile:
    def test_frame_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        frame = sim.Frame(0, rng.random((12, 10)) * 500.0, 100.0, 100.0)
        p1, p2 = tmp_path / "a.grid", tmp_path / "b.grid"
        formats.write_frame_grid(p1, frame)
        back = formats.read_frame_grid(p1, frame_id=0)
        formats.write_frame_grid(p2, back)
        assert p1.read_bytes() == p2.read_bytes()
        assert back.adu.shape == (12, 10)
        assert np.array_equal(back.adu,
                              frame.adu.astype(np.float32).astype(np.float64))

    def test_map_pair_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        pair = ComplexMapPair(rng.normal(size=(16, 16)),
                              rng.normal(size=(16, 16)), 100.0, 100.0,
                              (-750.0, 750.0))
        path = tmp_path / "pair.grid"
        formats.write_map_pair(path, pair)
        back = formats.read_map_pair(path)
        assert back.pixel_pitch_x == 100.0
        assert back.z_range == (-750.0, 750.0)
        assert np.array_equal(
            back.re, pair.re.astype(np.float32).astype(np.float64))

    def test_truncated_payload_names_expected_count(self, tmp_path):
        # one float short of the declared 2 x 8 x 16 = 256: the error must
        # name the expected count
        path = tmp_path / "trunc.grid"
        header = struct.pack("<4sHHIIIddd", b"LUGR", 1, 0, 2, 8, 16,
                             25.0, -750.0, 750.0)
        payload = np.zeros(255, dtype="<f4").tobytes()
        path.write_bytes(header + payload)
        with pytest.raises(TruncatedPayloadError) as err:
            formats.read_grid(path)
        assert "255" in str(err.value) and "256" in str(err.value)

    def test_magic_mismatch(self, tmp_path):
        path = tmp_path / "bad.grid"
        path.write_bytes(b"NOPE" + bytes(60))
        with pytest.raises(BadMagicError):
            formats.read_grid(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v9.grid"
        header = struct.pack("<4sHHIIIddd", b"LUGR", 9, 0, 1, 1, 1,
                             25.0, 0.0, 0.0)
        path.write_bytes(header + np.zeros(1, "<f4").tobytes())
        with pytest.raises(HeaderMismatchError):
            formats.read_grid(path)

    def test_anisotropic_pitch_rejected_on_write(self, tmp_path):
        frame = sim.Frame(0, np.zeros((4, 4)), 117.0, 127.0)
        with pytest.raises(ValidationError):
            formats.write_frame_grid(tmp_path / "x.grid", frame)

    def test_channel_count_checked(self, tmp_path):
        path = tmp_path / "one.grid"
        formats.write_grid(path, np.zeros((1, 4, 4), "<f4"), 25.0)
        with pytest.raises(HeaderMismatchError):
            formats.read_map_pair(path)


class TestRunConfig:
    def test_defaults_round_trip(self, tmp_path):
        path = tmp_path / "cfg.txt"
        formats.write_config(path, presets.default_config())
        values = formats.read_config(path)
        assert values == presets.default_config()

    def test_canonical_idempotence(self, tmp_path):
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        formats.write_config(p1, presets.expand_preset("AI-5"))
        formats.write_config(p2, formats.read_config(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_preset_ai5_values(self):
        values = presets.expand_preset("AI-5")
        assert values["sim.photon_mean"] == 5000.0
        assert values["sim.photon_sigma"] == 250.0
        assert values["sim.density"] == 4.13
        assert values["meta.preset"] == "AI-5"

    def test_preset_ai1_and_ai9(self):
        ai1 = presets.expand_preset("AI-1")
        assert (ai1["sim.photon_mean"], ai1["sim.photon_sigma"]) == (1000.0, 50.0)
        assert ai1["sim.density"] == 0.77
        ai9 = presets.expand_preset("AI-9")
        assert (ai9["sim.photon_mean"], ai9["sim.photon_sigma"]) == (20000.0, 1000.0)
        assert ai9["sim.density"] == 15.5

    def test_modality_presets(self):
        assert presets.expand_preset("AI-AS")["psf.modality"] == sim.ASTIGMATIC
        assert presets.expand_preset("AI-DH")["psf.modality"] == sim.DOUBLE_HELIX

    def test_unknown_preset_rejected(self):
        with pytest.raises(ValidationError):
            presets.expand_preset("AI-99")

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("sim.densty = 4\n")
        with pytest.raises(FormatError) as err:
            formats.read_config(path)
        assert err.value.line == 1

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("# comment\n\nsim.density = 2.5  # trailing\n")
        assert formats.read_config(path)["sim.density"] == 2.5

    def test_bad_value_type_names_line(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("sim.n_frames = twelve\n")
        with pytest.raises(FormatError) as err:
            formats.read_config(path)
        assert err.value.line == 1


class TestReportAndColumns:
    def make_report(self):
        acc = metrics.MetricAccumulator()
        m = metrics.Matching(np.array([0]), np.array([0]), np.array([3.0]),
                             np.array([4.0]), np.array([0.0]), 1, 1, 250, 500)
        acc.add(m)
        return acc.report(density=4.13)

    def test_report_round_trip(self, tmp_path):
        path = tmp_path / "report.txt"
        report = self.make_report()
        formats.write_report(path, report)
        back = formats.read_report(path)
        assert back.ji == pytest.approx(report.ji)
        assert back.rmse_lateral == pytest.approx(5.0)
        assert back.n_tp == 1 and back.n_fp == 1 and back.n_fn == 1
        assert back.density == 4.13

    def test_columns_round_trip(self, tmp_path):
        path = tmp_path / "cols.txt"
        rows = [[0.1, 0.99, 5.25], [0.2, 0.98, 4.5]]
        formats.write_columns(path, ["rate", "ji", "rmse_3d"], rows)
        names, data = formats.read_columns(path)
        assert names == ["rate", "ji", "rmse_3d"]
        assert np.allclose(data, rows)

    def test_report_write_idempotent(self, tmp_path):
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        formats.write_report(p1, self.make_report())
        formats.write_report(p2, formats.read_report(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_columns_write_idempotent(self, tmp_path):
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        formats.write_columns(p1, ["a", "b"], [[1.0 / 3.0, 2.5e-7]])
        names, data = formats.read_columns(p1)
        formats.write_columns(p2, names, data)
        assert p1.read_bytes() == p2.read_bytes()

    def test_read_localizations_any_accepts_both(self, tmp_path):
        gt_path = tmp_path / "gt.csv"
        formats.write_emitters(gt_path, sample_sets())
        loc = formats.read_localizations_any(gt_path)
        assert loc.n == 3
        assert np.all(loc.phase_dispersion == 0.0)
        seed_path = tmp_path / "seeds.csv"
        formats.write_seeds(seed_path, sample_seeds())
        loc2 = formats.read_localizations_any(seed_path)
        assert np.allclose(loc2.peak_magnitude, [0.9, 0.8, 0.7])

    def test_columns_header_required(self, tmp_path):
        path = tmp_path / "cols.txt"
        path.write_text("0.1 0.99\n")
        with pytest.raises(HeaderMismatchError):
            formats.read_columns(path)
