"""SMLM frame simulation, complex-domain super-resolution encoding/decoding,
and localization evaluation."""

from .codec import (ComplexMapPair, DecodeConfig, LocalizationSet, decode,
                    encode_targets, estimate_depth, find_peaks, phase_to_z,
                    subpixel_refine, z_to_phase)
from .errors import (FormatError, ModalityMismatchError, OutOfRangeError,
                     PhasorlocError, UndefinedDepthError, UndefinedMetricError,
                     ValidationError)
from .filtering import (UncertaintyScore, filter_by_rate, filter_sweep,
                        proxy_uncertainty)
from .metrics import (Matching, MetricReport, density_sweep, efficiency,
                      jaccard_index, match_localizations, pixel_bias_histogram,
                      residual_convergence, rmse)
from .render import (CrossSection, RenderConfig, RenderResult,
                     render_cross_section, render_histogram)
from .sim import (ASTIGMATIC, DOUBLE_HELIX, CameraModel, EmitterSet, Frame,
                  PsfModel, SimConfig, apply_camera_noise, psf_dh_lobes,
                  psf_sigmas, render_clean_frame, sample_emitters,
                  simulate_dataset, simulate_frame)

__version__ = "0.1.0"
