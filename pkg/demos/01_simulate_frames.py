"""Simulate camera frames at the named presets.

Walks through the simulation stages for one frame: ground-truth sampling,
noise-free PSF rendering, and the camera noise chain. Writes a side-by-side
PNG of the clean and noisy frame plus the dataset files.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from phasorloc import presets, sim

out_dir = "demo_output"
os.makedirs(out_dir, exist_ok=True)

# Expand the medium-SNR, medium-density preset and look at its values.
values = presets.expand_preset("AI-5")
config = presets.build_sim_config(values)
print(f"preset AI-5: photons ({config.photon_mean:.0f}, "
      f"{config.photon_sigma:.0f}), density {config.density} /um^2")

# Stage 1: ground truth for frame 0. The per-frame generator makes this
# reproducible no matter how many frames were simulated before it.
emitters = sim.sample_emitters(config, frame_id=0)
print(f"frame 0 carries {emitters.n} emitters "
      f"(expected {config.density * config.camera.area_um2:.1f})")

# Stage 2: expected photons per pixel (exact pixel-area integration).
clean = sim.render_clean_frame(emitters, config.camera, config.psf)
print(f"clean frame: total signal {clean.sum() - config.camera.background_rate * clean.size:.0f} photons")

# Stage 3: Poisson shot noise -> gain -> read noise -> baseline.
# simulate_frame reruns both stages from the frame's own generator.
frame, _ = sim.simulate_frame(config, 0)

fig, axes = plt.subplots(1, 2, figsize=(9, 4.2))
for ax, img, title in ((axes[0], clean, "expected photons"),
                       (axes[1], frame.adu, "camera ADU")):
    im = ax.imshow(img, cmap="magma")
    ax.scatter(emitters.x / config.camera.pixel_pitch_x - 0.5,
               emitters.y / config.camera.pixel_pitch_y - 0.5,
               s=12, facecolors="none", edgecolors="cyan", linewidths=0.6)
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8)
fig.tight_layout()
fig.savefig(os.path.join(out_dir, "simulated_frame.png"), dpi=130)
print(f"wrote {out_dir}/simulated_frame.png")

# The double-helix modality encodes depth in the lobe angle instead.
dh_psf = sim.PsfModel(modality=sim.DOUBLE_HELIX)
for z in (-600.0, 0.0, 600.0):
    lobe1, _, _ = sim.psf_dh_lobes(z, dh_psf)
    angle = np.degrees(np.arctan2(lobe1[1], lobe1[0]))
    print(f"double helix at z={z:+6.0f} nm: lobe angle {angle:+.1f} deg")
