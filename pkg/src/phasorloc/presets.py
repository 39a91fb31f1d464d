"""Run-configuration schema, named presets and config -> object builders.

A run configuration is a flat key = value mapping covering the simulator,
codec, metric, filter and render parameters. Presets AI-1..AI-9 select the
photon (mean, sigma) and training-density combinations of the reference
models; AI-AS / AI-DH additionally select the PSF modality.
"""

from typing import Dict

from . import render as render_mod
from .codec import DecodeConfig
from .errors import ValidationError
from .sim import ASTIGMATIC, DOUBLE_HELIX, CameraModel, PsfModel, SimConfig

# key -> (type, default). Types: float, int, bool, str. A default of None
# marks an optional key that canonical writers omit when unset.
CONFIG_SCHEMA: Dict[str, tuple] = {
    "sim.density": ("float", 1.0),
    "sim.photon_mean": ("float", 5000.0),
    "sim.photon_sigma": ("float", 250.0),
    "sim.z_min": ("float", -750.0),
    "sim.z_max": ("float", 750.0),
    "sim.n_frames": ("int", 100),
    "sim.seed": ("int", 0),
    "camera.pixel_pitch_x": ("float", 100.0),
    "camera.pixel_pitch_y": ("float", 100.0),
    "camera.width": ("int", 40),
    "camera.height": ("int", 40),
    "camera.background_rate": ("float", 20.0),
    "camera.gain": ("float", 1.0),
    "camera.baseline": ("float", 100.0),
    "camera.read_noise_sigma": ("float", 1.0),
    "psf.modality": ("str", ASTIGMATIC),
    "psf.sigma0": ("float", 130.0),
    "psf.gamma": ("float", 300.0),
    "psf.d": ("float", 400.0),
    "psf.dh_lobe_distance": ("float", 600.0),
    "psf.dh_rotation_rate": ("float", 0.00174532925),
    "decode.detection_threshold": ("float", 0.3),
    "decode.nms_radius": ("float", 2.0),
    "decode.phase_window": ("int", 3),
    "decode.target_sigma": ("float", 1.0),
    "decode.amplitude": ("float", 1.0),
    "metrics.tol_lateral": ("float", 250.0),
    "metrics.tol_axial": ("float", 500.0),
    "metrics.lateral_only": ("bool", False),
    "metrics.residual_rel_tolerance": ("float", 0.01),
    "metrics.residual_checkpoint": ("int", 1000),
    "metrics.residual_patience": ("int", 5),
    "filter.c1": ("float", 3.0),
    "filter.c2": ("float", 0.85),
    "render.bin_size": ("float", 5.0),
    "render.color_mode": ("str", "depth"),
    "render.intensity_scale": ("str", "sqrt"),
    "render.colormap": ("str", "viridis"),
    "render.z_clip_min": ("float", None),
    "render.z_clip_max": ("float", None),
    "render.region_x0": ("float", None),
    "render.region_x1": ("float", None),
    "render.region_y0": ("float", None),
    "render.region_y1": ("float", None),
    "render.cross_axis": ("str", None),
    "render.cross_center": ("float", None),
    "render.cross_thickness": ("float", None),
    "meta.preset": ("str", None),
}

# Photon intensity (mean, sigma) and training density per named model.
PRESETS: Dict[str, Dict[str, object]] = {
    "AI-1": {"sim.photon_mean": 1000.0, "sim.photon_sigma": 50.0, "sim.density": 0.77},
    "AI-2": {"sim.photon_mean": 5000.0, "sim.photon_sigma": 250.0, "sim.density": 0.77},
    "AI-3": {"sim.photon_mean": 20000.0, "sim.photon_sigma": 1000.0, "sim.density": 0.77},
    "AI-4": {"sim.photon_mean": 1000.0, "sim.photon_sigma": 50.0, "sim.density": 4.13},
    "AI-5": {"sim.photon_mean": 5000.0, "sim.photon_sigma": 250.0, "sim.density": 4.13},
    "AI-6": {"sim.photon_mean": 20000.0, "sim.photon_sigma": 1000.0, "sim.density": 4.13},
    "AI-7": {"sim.photon_mean": 1000.0, "sim.photon_sigma": 50.0, "sim.density": 15.5},
    "AI-8": {"sim.photon_mean": 5000.0, "sim.photon_sigma": 250.0, "sim.density": 15.5},
    "AI-9": {"sim.photon_mean": 20000.0, "sim.photon_sigma": 1000.0, "sim.density": 15.5},
    "AI-AS": {"sim.photon_mean": 1000.0, "sim.photon_sigma": 300.0,
              "sim.density": 0.62, "psf.modality": ASTIGMATIC},
    "AI-DH": {"sim.photon_mean": 3600.0, "sim.photon_sigma": 1000.0,
              "sim.density": 0.62, "psf.modality": DOUBLE_HELIX},
}

# Evaluation densities (emitters / um^2) used by the reference sweeps.
EVAL_DENSITIES = (0.035870, 0.103306, 0.206612, 0.464876, 1.033058,
                  2.376033, 5.630165, 9.297520, 15.49587, 30.99174)


def default_config() -> Dict[str, object]:
    return {key: default for key, (_, default) in CONFIG_SCHEMA.items()}


def expand_preset(name: str) -> Dict[str, object]:
    """Full config dict for a named preset (defaults + preset overrides)."""
    if name not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise ValidationError(f"unknown preset {name!r}; known presets: {known}")
    values = default_config()
    values.update(PRESETS[name])
    values["meta.preset"] = name
    return values


def build_camera(values: Dict[str, object]) -> CameraModel:
    return CameraModel(
        pixel_pitch_x=values["camera.pixel_pitch_x"],
        pixel_pitch_y=values["camera.pixel_pitch_y"],
        width=values["camera.width"],
        height=values["camera.height"],
        background_rate=values["camera.background_rate"],
        gain=values["camera.gain"],
        baseline=values["camera.baseline"],
        read_noise_sigma=values["camera.read_noise_sigma"])


def build_psf(values: Dict[str, object]) -> PsfModel:
    return PsfModel(
        modality=values["psf.modality"],
        sigma0=values["psf.sigma0"],
        gamma=values["psf.gamma"],
        d=values["psf.d"],
        dh_lobe_distance=values["psf.dh_lobe_distance"],
        dh_rotation_rate=values["psf.dh_rotation_rate"])


def build_sim_config(values: Dict[str, object]) -> SimConfig:
    return SimConfig(
        density=values["sim.density"],
        photon_mean=values["sim.photon_mean"],
        photon_sigma=values["sim.photon_sigma"],
        z_range=(values["sim.z_min"], values["sim.z_max"]),
        camera=build_camera(values),
        psf=build_psf(values),
        n_frames=values["sim.n_frames"],
        rng_seed=values["sim.seed"])


def build_decode_config(values: Dict[str, object]) -> DecodeConfig:
    return DecodeConfig(
        detection_threshold=values["decode.detection_threshold"],
        nms_radius=values["decode.nms_radius"],
        phase_window=values["decode.phase_window"],
        target_sigma=values["decode.target_sigma"],
        amplitude=values["decode.amplitude"])


def build_render_config(values: Dict[str, object]) -> "render_mod.RenderConfig":
    z_clip = None
    if values["render.z_clip_min"] is not None and values["render.z_clip_max"] is not None:
        z_clip = (values["render.z_clip_min"], values["render.z_clip_max"])
    region = None
    region_keys = ("render.region_x0", "render.region_x1",
                   "render.region_y0", "render.region_y1")
    if all(values[k] is not None for k in region_keys):
        region = tuple(values[k] for k in region_keys)
    cross = None
    if values["render.cross_axis"] is not None:
        if values["render.cross_center"] is None or values["render.cross_thickness"] is None:
            raise ValidationError("cross-section needs axis, center and thickness")
        cross = render_mod.CrossSection(values["render.cross_axis"],
                                        values["render.cross_center"],
                                        values["render.cross_thickness"])
    return render_mod.RenderConfig(
        bin_size=values["render.bin_size"],
        color_mode=values["render.color_mode"],
        z_clip=z_clip,
        intensity_scale=values["render.intensity_scale"],
        region=region,
        cross_section=cross,
        colormap=values["render.colormap"])
