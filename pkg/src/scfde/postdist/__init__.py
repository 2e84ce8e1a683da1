"""Symbol-rate nonlinear post-distorters and the memoryless MM baseline."""

from .gpr import GPRPostDistorter, GprSegmentModel, blue_fuse, fit_segment, fit_shared_noise, se_kernel
from .io import FORMAT_VERSION, load_model, save_model
from .mm import MMDetector, mm_correct, mm_fit
from .nn import NnModel, NNPostDistorter, lm_train, nn_forward
from .regressor import build_regressor, n_features, regressor_matrix, stack_blocks
from .volterra import VolterraPostDistorter

__all__ = [
    "FORMAT_VERSION",
    "GPRPostDistorter",
    "GprSegmentModel",
    "MMDetector",
    "NNPostDistorter",
    "NnModel",
    "VolterraPostDistorter",
    "blue_fuse",
    "build_regressor",
    "fit_segment",
    "fit_shared_noise",
    "lm_train",
    "load_model",
    "mm_correct",
    "mm_fit",
    "n_features",
    "nn_forward",
    "regressor_matrix",
    "save_model",
    "se_kernel",
    "stack_blocks",
]
