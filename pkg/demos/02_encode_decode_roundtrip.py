"""The complex-domain codec, end to end on one dense frame.

Encodes ground truth into the x4 super-resolution (re, im) pair, shows the
magnitude/phase split, decodes it back, and reports the recovered accuracy.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from phasorloc import codec, metrics, sim

out_dir = "demo_output"
os.makedirs(out_dir, exist_ok=True)

camera = sim.CameraModel(background_rate=0.0, read_noise_sigma=0.0,
                         baseline=0.0)
config = sim.SimConfig(density=15.49587, camera=camera, rng_seed=4)
decode_cfg = codec.DecodeConfig()

# Ultra-high density, but pairwise separation kept above 4 super-res px
# (100 nm) so every emitter stays individually resolvable.
emitters = sim.sample_emitters(config, 0, min_separation_nm=100.0)
print(f"{emitters.n} emitters at density {config.density} /um^2")

pair = codec.encode_targets(emitters, camera, config.z_range, decode_cfg)
magnitude = pair.magnitude
phase = np.arctan2(pair.im, pair.re)

fig, axes = plt.subplots(1, 2, figsize=(10, 4.4))
axes[0].imshow(magnitude, cmap="gray")
axes[0].set_title("magnitude = lateral likelihood")
im = axes[1].imshow(np.where(magnitude > 0.05, phase, np.nan), cmap="twilight",
                    vmin=-np.pi, vmax=np.pi)
axes[1].set_title("phase = depth (where magnitude > 0.05)")
fig.colorbar(im, ax=axes[1], shrink=0.8, label="rad")
fig.tight_layout()
fig.savefig(os.path.join(out_dir, "complex_maps.png"), dpi=130)
print(f"wrote {out_dir}/complex_maps.png")

# Decode: peak finding + NMS, per-axis log-quadratic refinement, and
# magnitude-weighted phase averaging for depth.
seeds = codec.decode(pair, decode_cfg, frame_id=0)
print(f"decoded {seeds.n} seeds "
      f"({seeds.n_border} border-flagged, {seeds.n_dropped_depth} dropped)")

m = metrics.match_localizations(emitters, seeds)
print(f"recall {m.n_tp}/{emitters.n}")
print(f"lateral RMSE {metrics.rmse(m, 'lateral'):.3f} nm, "
      f"axial RMSE {metrics.rmse(m, 'axial'):.3f} nm  (noiseless round trip)")

# The phase mapping keeps a 10% guard band against wrap-around: depth spans
# [-750, 750] nm -> phase spans +/- 0.9 pi.
for z in (-750.0, 0.0, 750.0):
    print(f"z = {z:+6.0f} nm -> phase {codec.z_to_phase(z, config.z_range):+.3f} rad")
