"""Python bindings for the aya C++ core."""

from ._core import (
    AyaError,
    ClientError,
    InputError,
    Model,
    Tokenizer,
    bleu,
    cosine_lr,
    count_parameters,
    expected_max_toxicity,
    kv_cache_bytes,
    model_config,
    preset_names,
    rouge_l,
    strict_match,
    toxicity_probability,
    win_rate,
)

__all__ = [
    "AyaError",
    "ClientError",
    "InputError",
    "Model",
    "Tokenizer",
    "bleu",
    "cosine_lr",
    "count_parameters",
    "expected_max_toxicity",
    "kv_cache_bytes",
    "model_config",
    "preset_names",
    "rouge_l",
    "strict_match",
    "toxicity_probability",
    "win_rate",
]
