"""Semi-supervised cross-modal hashing.

Three stages: supervised hashing on the labeled rows, fuzzy estimation of
labels for the unlabeled rows, and a second supervised hashing pass over all
rows that produces the unified binary codes.
"""

from .code_stage import encode_out_of_sample, train_code_stage
from .data import (
    Hyperparameters,
    ProjectionSet,
    TrainedModel,
    encode_labels,
    holdout_split,
    pack_codes,
    shuffle_split,
    unpack_codes,
    zero_center,
)
from .errors import (
    ConfigError,
    DimensionError,
    DivergenceError,
    FormatError,
    InvalidLabelError,
    ParameterError,
    SemihashError,
    SingularityError,
    TruncatedFileError,
    VersionError,
)
from .fuzzy import estimate_labels
from .io import load_matrix, load_model, save_matrix, save_model
from .label_stage import train_label_stage
from .pipeline import fit
from .retrieval import evaluate_cross_modal, mean_average_precision
from .synth import SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DimensionError",
    "DivergenceError",
    "FormatError",
    "Hyperparameters",
    "InvalidLabelError",
    "ParameterError",
    "ProjectionSet",
    "SemihashError",
    "SingularityError",
    "SynthSpec",
    "TrainedModel",
    "TruncatedFileError",
    "VersionError",
    "encode_labels",
    "encode_out_of_sample",
    "estimate_labels",
    "evaluate_cross_modal",
    "fit",
    "generate",
    "holdout_split",
    "load_matrix",
    "load_model",
    "mean_average_precision",
    "pack_codes",
    "save_matrix",
    "save_model",
    "shuffle_split",
    "train_code_stage",
    "train_label_stage",
    "unpack_codes",
    "zero_center",
]
