"""Simulator: sampling statistics, PSF models, rendering, noise chain."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasorloc import sim
from phasorloc.errors import ModalityMismatchError, ValidationError


def noiseless_camera(**kw):
    defaults = dict(background_rate=0.0, read_noise_sigma=0.0, baseline=0.0)
    defaults.update(kw)
    return sim.CameraModel(**defaults)


class TestConfigValidation:
    def test_zero_density_rejected(self):
        with pytest.raises(ValidationError):
            sim.SimConfig(density=0.0)

    def test_negative_photon_sigma_rejected(self):
        with pytest.raises(ValidationError):
            sim.SimConfig(photon_sigma=-1.0)

    def test_unordered_z_range_rejected(self):
        with pytest.raises(ValidationError):
            sim.SimConfig(z_range=(100.0, -100.0))

    def test_camera_rejects_nonpositive_gain(self):
        with pytest.raises(ValidationError):
            sim.CameraModel(gain=0.0)

    def test_camera_allows_zero_background_and_read_noise(self):
        cam = noiseless_camera()
        assert cam.background_rate == 0.0 and cam.read_noise_sigma == 0.0

    def test_duplicate_emitter_ids_rejected(self):
        with pytest.raises(ValidationError):
            sim.EmitterSet(0, [1, 1], [0.0, 1.0], [0.0, 1.0], [0.0, 0.0],
                           [10.0, 10.0])


class TestSampleEmitters:
    def test_sparse_preset_mean_count(self):
        # 40x40 px at 100 nm = 16 um^2; density 0.035870 -> mean 0.574.
        cfg = sim.SimConfig(density=0.035870, rng_seed=3)
        counts = [sim.sample_emitters(cfg, fid).n for fid in range(4000)]
        assert np.mean(counts) == pytest.approx(0.035870 * 16.0, rel=0.05)

    def test_dense_mean_count_within_2_percent(self):
        cfg = sim.SimConfig(density=30.99174, rng_seed=5)
        counts = [sim.sample_emitters(cfg, fid).n for fid in range(10000)]
        assert np.mean(counts) == pytest.approx(30.99174 * 16.0, rel=0.02)

    def test_photon_draws_truncated_at_one(self):
        cfg = sim.SimConfig(density=10.0, photon_mean=2.0, photon_sigma=5.0,
                            rng_seed=1)
        em = sim.sample_emitters(cfg, 0)
        assert np.all(em.photons >= 1.0)

    def test_photon_mean_matches_config(self):
        cfg = sim.SimConfig(density=20.0, photon_mean=5000.0,
                            photon_sigma=250.0, rng_seed=2)
        photons = np.concatenate(
            [sim.sample_emitters(cfg, fid).photons for fid in range(200)])
        assert photons.mean() == pytest.approx(5000.0, rel=0.01)

    def test_positions_inside_frame(self):
        cfg = sim.SimConfig(density=30.0, rng_seed=4)
        em = sim.sample_emitters(cfg, 0)
        assert np.all((em.x >= 0) & (em.x < cfg.camera.width_nm))
        assert np.all((em.y >= 0) & (em.y < cfg.camera.height_nm))
        assert np.all((em.z >= cfg.z_range[0]) & (em.z <= cfg.z_range[1]))

    def test_min_separation_enforced(self):
        cfg = sim.SimConfig(density=30.99174, rng_seed=6)
        em = sim.sample_emitters(cfg, 0, min_separation_nm=100.0)
        d2 = (em.x[:, None] - em.x) ** 2 + (em.y[:, None] - em.y) ** 2
        np.fill_diagonal(d2, np.inf)
        assert em.n > 100
        assert np.sqrt(d2.min()) >= 100.0


class TestAstigmaticPsf:
    def test_symmetric_at_focus(self):
        psf = sim.PsfModel()
        sx, sy = sim.psf_sigmas(0.0, psf)
        assert sx == pytest.approx(sy)

    def test_sigma_x_equals_sigma0_at_gamma(self):
        psf = sim.PsfModel()
        sx, _ = sim.psf_sigmas(psf.gamma, psf)
        assert sx == pytest.approx(psf.sigma0)

    def test_hand_evaluated_width(self):
        # 130 * sqrt(1 + (100/400)^2) = 134.0009...
        psf = sim.PsfModel(sigma0=130.0, gamma=300.0, d=400.0)
        sx, _ = sim.psf_sigmas(400.0, psf)
        assert sx == pytest.approx(130.0 * np.sqrt(1.0 + 0.25**2), abs=1e-9)
        assert sx == pytest.approx(134.0, abs=0.01)

    def test_wrong_modality_raises(self):
        psf = sim.PsfModel(modality=sim.DOUBLE_HELIX)
        with pytest.raises(ModalityMismatchError):
            sim.psf_sigmas(0.0, psf)

    @given(st.floats(-750.0, 750.0))
    def test_mirror_symmetry(self, z):
        psf = sim.PsfModel()
        sx_pos, sy_pos = sim.psf_sigmas(z, psf)
        sx_neg, sy_neg = sim.psf_sigmas(-z, psf)
        assert sx_pos == pytest.approx(sy_neg, rel=1e-12)
        assert sy_pos == pytest.approx(sx_neg, rel=1e-12)


class TestDoubleHelixPsf:
    def test_lobes_on_x_axis_at_focus(self):
        psf = sim.PsfModel(modality=sim.DOUBLE_HELIX)
        lobe1, lobe2, sigma = sim.psf_dh_lobes(0.0, psf)
        assert lobe1 == pytest.approx([psf.dh_lobe_distance / 2, 0.0])
        assert lobe2 == pytest.approx([-psf.dh_lobe_distance / 2, 0.0])
        assert sigma == psf.sigma0

    def test_quarter_turn_puts_lobes_on_y_axis(self):
        psf = sim.PsfModel(modality=sim.DOUBLE_HELIX)
        z = (np.pi / 2) / psf.dh_rotation_rate
        lobe1, _, _ = sim.psf_dh_lobes(z, psf)
        assert lobe1 == pytest.approx([0.0, psf.dh_lobe_distance / 2], abs=1e-9)

    @given(st.floats(-750.0, 750.0))
    def test_separation_is_depth_invariant(self, z):
        psf = sim.PsfModel(modality=sim.DOUBLE_HELIX)
        lobe1, lobe2, _ = sim.psf_dh_lobes(z, psf)
        sep = np.hypot(*(lobe1 - lobe2))
        assert sep == pytest.approx(psf.dh_lobe_distance, rel=1e-12)

    def test_wrong_modality_raises(self):
        with pytest.raises(ModalityMismatchError):
            sim.psf_dh_lobes(0.0, sim.PsfModel(modality=sim.ASTIGMATIC))


def quadrature_pixel_sum(x0, y0, sigma_x, sigma_y, photons, camera, n_sub=201):
    """Independent oracle: numerically integrate the PSF over each pixel."""
    from scipy.integrate import simpson

    img = np.zeros((camera.height, camera.width))
    for row in range(camera.height):
        for col in range(camera.width):
            xs = np.linspace(col * camera.pixel_pitch_x,
                             (col + 1) * camera.pixel_pitch_x, n_sub)
            ys = np.linspace(row * camera.pixel_pitch_y,
                             (row + 1) * camera.pixel_pitch_y, n_sub)
            gx = simpson(np.exp(-((xs - x0) ** 2) / (2 * sigma_x**2)), x=xs) \
                / (sigma_x * np.sqrt(2 * np.pi))
            gy = simpson(np.exp(-((ys - y0) ** 2) / (2 * sigma_y**2)), x=ys) \
                / (sigma_y * np.sqrt(2 * np.pi))
            img[row, col] = photons * gx * gy
    return img


class TestRenderCleanFrame:
    def test_empty_set_gives_uniform_background(self):
        cam = sim.CameraModel(background_rate=7.5)
        img = sim.render_clean_frame(sim.EmitterSet.empty(0), cam,
                                     sim.PsfModel())
        assert img.shape == (cam.height, cam.width)
        assert np.all(img == 7.5)

    def test_photon_conservation_interior_emitter(self):
        cam = noiseless_camera()
        em = sim.EmitterSet(0, [0], [2000.0], [2000.0], [0.0], [1234.0])
        img = sim.render_clean_frame(em, cam, sim.PsfModel())
        assert img.sum() == pytest.approx(1234.0, rel=1e-3)

    def test_photon_conservation_double_helix(self):
        cam = noiseless_camera()
        psf = sim.PsfModel(modality=sim.DOUBLE_HELIX)
        em = sim.EmitterSet(0, [0], [2000.0], [2000.0], [100.0], [900.0])
        img = sim.render_clean_frame(em, cam, psf)
        assert img.sum() == pytest.approx(900.0, rel=1e-3)

    def test_matches_quadrature_oracle(self):
        cam = noiseless_camera(width=9, height=9)
        psf = sim.PsfModel()
        x0, y0, z0 = 433.0, 392.0, 150.0
        em = sim.EmitterSet(0, [0], [x0], [y0], [z0], [1000.0])
        img = sim.render_clean_frame(em, cam, psf)
        sx, sy = sim.psf_sigmas(z0, psf)
        oracle = quadrature_pixel_sum(x0, y0, sx, sy, 1000.0, cam)
        assert np.allclose(img, oracle, rtol=1e-6, atol=1e-9)

    def test_brightest_pixel_at_emitter_center(self):
        cam = noiseless_camera()
        # Emitter at the center of pixel (20, 20).
        em = sim.EmitterSet(0, [0], [2050.0], [2050.0], [0.0], [1000.0])
        img = sim.render_clean_frame(em, cam, sim.PsfModel())
        assert np.unravel_index(img.argmax(), img.shape) == (20, 20)


class TestCameraNoise:
    def test_degenerate_zero_everything(self):
        cam = noiseless_camera(gain=1.0)
        rng = np.random.default_rng(0)
        frame = sim.apply_camera_noise(np.zeros((8, 8)), cam, rng)
        assert np.all(frame.adu == 0.0)

    def test_poisson_statistics(self):
        # 1e5 pixels at expected 1e4 photons: mean within 1 percent,
        # variance/mean of the Poisson stage within 5 percent of 1.
        cam = noiseless_camera(width=1000, height=100, gain=1.0)
        rng = np.random.default_rng(12)
        img = np.full((100, 1000), 1.0e4)
        frame = sim.apply_camera_noise(img, cam, rng)
        electrons = frame.adu
        assert electrons.mean() == pytest.approx(1.0e4, rel=0.01)
        assert electrons.var() / electrons.mean() == pytest.approx(1.0, rel=0.05)

    def test_noise_chain_order(self):
        # gain and baseline applied after the Poisson stage
        cam = noiseless_camera(gain=2.0, baseline=50.0)
        rng = np.random.default_rng(3)
        frame = sim.apply_camera_noise(np.zeros((4, 4)), cam, rng)
        assert np.all(frame.adu == 50.0)

    def test_determinism_same_seed(self):
        cam = sim.CameraModel()
        img = np.full((16, 16), 100.0)
        a = sim.apply_camera_noise(img, cam, np.random.default_rng(42)).adu
        b = sim.apply_camera_noise(img, cam, np.random.default_rng(42)).adu
        assert np.array_equal(a, b)

    def test_negative_expectation_rejected(self):
        with pytest.raises(ValidationError):
            sim.apply_camera_noise(np.full((2, 2), -1.0), sim.CameraModel(),
                                   np.random.default_rng(0))


class TestSimulateDataset:
    def test_zero_frames_is_empty(self):
        cfg = sim.SimConfig(n_frames=0)
        assert list(sim.simulate_dataset(cfg)) == []

    def test_frame_reproducible_in_isolation(self):
        cfg = sim.SimConfig(density=2.0, n_frames=6, rng_seed=9)
        stream = list(sim.simulate_dataset(cfg))
        frame5, em5 = sim.simulate_frame(cfg, 5)
        assert np.array_equal(stream[5][0].adu, frame5.adu)
        assert np.array_equal(stream[5][1].x, em5.x)
        assert np.array_equal(stream[5][1].photons, em5.photons)

    def test_full_determinism(self):
        cfg = sim.SimConfig(density=1.0, n_frames=3, rng_seed=11)
        a = [f.adu for f, _ in sim.simulate_dataset(cfg)]
        b = [f.adu for f, _ in sim.simulate_dataset(cfg)]
        for x, y in zip(a, b):
            assert np.array_equal(x, y)
