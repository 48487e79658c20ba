from .vocoder import FeatureSet, analyze, synthesize
from .spectrum import (
    MCEPTrack,
    NormalizedSpectrum,
    mcep,
    mcep_to_log_sp,
    mel_with_deltas,
    sp_denormalize,
    sp_normalize,
)
from .align import dtw_align, mcd, MCD_CONSTANT
from .stats import F0Statistics, f0_statistics
from .cache import read_features, write_features, feature_cache_path

__all__ = [
    "FeatureSet",
    "analyze",
    "synthesize",
    "NormalizedSpectrum",
    "sp_normalize",
    "sp_denormalize",
    "MCEPTrack",
    "mcep",
    "mcep_to_log_sp",
    "mel_with_deltas",
    "dtw_align",
    "mcd",
    "MCD_CONSTANT",
    "F0Statistics",
    "f0_statistics",
    "read_features",
    "write_features",
    "feature_cache_path",
]
