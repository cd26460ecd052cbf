"""Python bindings for the shloss C++ core."""

from ._shloss import (
    Error,
    InvalidArgument,
    NumericError,
    ParseError,
    StageError,
    bce,
    beta_sh,
    cb_focal,
    cb_weight,
    ce,
    clean_codes,
    compare_losses,
    cosine,
    exponent_for_ratio,
    focal,
    loss_and_grad,
    micro_f1,
    run_pipeline,
    segment_all,
    segment_tail,
    sh,
    sh_focal,
    synth,
)

__all__ = [
    "Error",
    "InvalidArgument",
    "NumericError",
    "ParseError",
    "StageError",
    "bce",
    "beta_sh",
    "cb_focal",
    "cb_weight",
    "ce",
    "clean_codes",
    "compare_losses",
    "cosine",
    "exponent_for_ratio",
    "focal",
    "loss_and_grad",
    "micro_f1",
    "run_pipeline",
    "segment_all",
    "segment_tail",
    "sh",
    "sh_focal",
    "synth",
]
