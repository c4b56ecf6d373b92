"""Desk-scale link simulator for an indoor optical-wireless MIMO system
whose receiver focuses the LED array through a steerable liquid lens onto
a photodiode grid.

Subpackages: `neural` (from-scratch network blocks for the learned lens
predictor) and `harness` (config file handling, dataset generation, CLI).
"""

from .ber import BerReport, ber_bound, bound_batch, monte_carlo_ber, pep, q_function
from .dynamics import (ArParams, ClothoidParams, Trajectory, ar_polar_series,
                       clothoid_path, make_trajectory)
from .geometry import (LensState, Pose, ReceiverConfig, RoomConfig,
                       lens_normal, lens_world_position, receiver_normal,
                       receiver_rotation)
from .gsm import (GsmCodebook, GsmConfig, average_snr, build_codebook,
                  intensity_levels, ml_detect, sigma_for_snr, transmit)
from .optics import channel_matrix, intersection_area, los_gain, project_spot, refract
from .optimizers import (LensBounds, OptResult, closest_led, cls_lens,
                         exhaustive_search, reference_lens, solve_p1, vulo_lens)

__version__ = "0.1.0"

__all__ = [
    "ArParams", "BerReport", "ClothoidParams", "GsmCodebook", "GsmConfig",
    "LensBounds", "LensState", "OptResult", "Pose", "ReceiverConfig",
    "RoomConfig", "Trajectory", "ar_polar_series", "average_snr",
    "ber_bound", "bound_batch", "build_codebook", "channel_matrix",
    "closest_led", "clothoid_path", "cls_lens", "exhaustive_search",
    "intensity_levels", "intersection_area", "lens_normal",
    "lens_world_position", "los_gain", "make_trajectory", "ml_detect",
    "monte_carlo_ber", "pep", "project_spot", "q_function",
    "receiver_normal", "receiver_rotation", "reference_lens",
    "sigma_for_snr", "solve_p1", "transmit", "vulo_lens",
]
