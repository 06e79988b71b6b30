"""Closed-form editing of cross-attention key/value projections.

The heavy lifting lives in the compiled `_core` module; this package just
re-exports its surface.
"""

from timedit._core import (  # noqa: F401
    TimeditError,
    __version__,
    align_tokens,
    attention_map,
    attention_output,
    classify,
    delta_p,
    edit_layer,
    gd_minimize,
    generate_feature,
    harmonic_mean,
    load_tensors,
    ridge_closed_form,
    ridge_loss,
    save_tensors,
    search_lambda,
    spd_solve,
)

__all__ = [
    "TimeditError",
    "__version__",
    "align_tokens",
    "attention_map",
    "attention_output",
    "classify",
    "delta_p",
    "edit_layer",
    "gd_minimize",
    "generate_feature",
    "harmonic_mean",
    "load_tensors",
    "ridge_closed_form",
    "ridge_loss",
    "save_tensors",
    "search_lambda",
    "spd_solve",
]
