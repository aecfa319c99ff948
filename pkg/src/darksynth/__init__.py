"""Low-light RAW noise synthesis from hypothesized system gain and sampled dark frames."""

__version__ = "0.1.0"

from .dark_bank import (  # noqa: E402
    DarkBank,
    DarkShading,
    calibrate_shading,
    load_bank,
    recalibrate_online,
    sample_dark,
)
from .frames import CFA, LinearFrame, RawFrame, SensorProfile, quantize, to_linear  # noqa: E402
from .hbnr import HbnrModel, expand_bit_depth, fit_hbnr  # noqa: E402
from .pairing import (  # noqa: E402
    SynthesisRecipe,
    apply_inference_correction,
    enumerate_pairs,
    synthesize_pair,
)
from .ptc import PtcFit, compare_k, ptc_from_flatfields  # noqa: E402
from .rawio import read_rawb, write_rawb  # noqa: E402
from .rng import Rng  # noqa: E402
from .shot_noise import GainHypothesis, add_shot_noise, hypothesize_k, poisson_sample  # noqa: E402

__all__ = [
    "CFA",
    "DarkBank",
    "DarkShading",
    "GainHypothesis",
    "HbnrModel",
    "LinearFrame",
    "PtcFit",
    "RawFrame",
    "Rng",
    "SensorProfile",
    "SynthesisRecipe",
    "add_shot_noise",
    "apply_inference_correction",
    "calibrate_shading",
    "compare_k",
    "enumerate_pairs",
    "expand_bit_depth",
    "fit_hbnr",
    "hypothesize_k",
    "load_bank",
    "poisson_sample",
    "ptc_from_flatfields",
    "quantize",
    "read_rawb",
    "recalibrate_online",
    "sample_dark",
    "synthesize_pair",
    "to_linear",
    "write_rawb",
]
