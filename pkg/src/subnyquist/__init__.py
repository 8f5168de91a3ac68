"""Recovery of sparse multiband signals from random sub-Nyquist samples."""

from .errors import (
    BandPlanError, ConfigError, DivergenceError, FrameError, MaskError, PackingError,
    SubNyquistError, SymmetryError,
)
from .frames import SupportSet, forward_transform, frame_power, inverse_transform, support_of
from .metrics import EvalReport, evaluate, snr_db
from .recovery import (
    Adaptive, Exponential, RecoveryConfig, RecoveryTrace, hybrid_imat_recover, imat_recover,
    known_support_recover, preset_config, recover,
)
from .sampling import Mask, NoiseStats, apply_mask, gen_mask
from .siggen import BandPlan, RfSignalSpec, add_awgn, gen_fm_multiband, gen_multiband, random_band_plan

__version__ = "0.1.0"

__all__ = [
    "BandPlanError", "ConfigError", "DivergenceError", "FrameError", "MaskError", "PackingError",
    "SubNyquistError", "SymmetryError", "SupportSet", "forward_transform", "frame_power",
    "inverse_transform", "support_of", "EvalReport", "evaluate", "snr_db", "Adaptive", "Exponential",
    "RecoveryConfig", "RecoveryTrace", "hybrid_imat_recover", "imat_recover", "known_support_recover",
    "preset_config", "recover", "Mask", "NoiseStats", "apply_mask", "gen_mask", "BandPlan",
    "RfSignalSpec", "add_awgn", "gen_fm_multiband", "gen_multiband", "random_band_plan",
]
