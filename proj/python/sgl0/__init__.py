"""Python bindings for the sgl0 training core."""

import json as _json

from ._sgl0 import (
    ConfigError,
    DimensionError,
    Error,
    ParseError,
    __version__,
    config_hash,
    lenet5_counts,
    normalize_config,
    prox_l0,
    report,
    summarize,
    train,
)
from ._sgl0 import evaluate as _evaluate


def evaluate(checkpoint, config=None, tau_w=1e-5, tau_n=1e-5):
    """Metrics of the pruned checkpoint as a dict; raises RuntimeError on failure."""
    code, out, err = _evaluate(str(checkpoint), None if config is None else str(config), tau_w, tau_n)
    if code != 0:
        raise RuntimeError(err.strip())
    return _json.loads(out)


__all__ = [
    "ConfigError",
    "DimensionError",
    "Error",
    "ParseError",
    "__version__",
    "config_hash",
    "evaluate",
    "lenet5_counts",
    "normalize_config",
    "prox_l0",
    "report",
    "summarize",
    "train",
]
