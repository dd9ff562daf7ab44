"""Context-aware preference alignment for hotel review responses.

Thin wrapper over the native core. The CLI (`prefalign`) is the main entry
point; this module exposes the pieces that are handy from notebooks.
"""

import json

from . import _core
from ._core import (
    Error,
    ValidationError,
    bertscore,
    bertscore_text,
    classify_negative,
    classify_positive,
    config_values,
    dpo_closed_form,
    optimize_objective,
    pipeline_stages,
    run_pipeline,
    set_log_level,
    theorybench,
)

__version__ = "0.1.0"


def make_toy_corpus(n_reviews, seed):
    """Synthetic reviews as dicts; each carries its `intended_type`."""
    return [json.loads(line) for line in _core.make_toy_corpus(n_reviews, seed)]


__all__ = [
    "Error",
    "ValidationError",
    "bertscore",
    "bertscore_text",
    "classify_negative",
    "classify_positive",
    "config_values",
    "dpo_closed_form",
    "make_toy_corpus",
    "optimize_objective",
    "pipeline_stages",
    "run_pipeline",
    "set_log_level",
    "theorybench",
]
