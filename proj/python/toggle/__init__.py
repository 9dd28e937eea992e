"""STL-constrained transformer compression search."""

from ._toggle import (  # noqa: F401
    RunConfig,
    default_run_config,
    evaluate,
    pareto_front,
    prune,
    quantize,
    robustness,
    search,
)

__all__ = [
    "RunConfig",
    "default_run_config",
    "evaluate",
    "pareto_front",
    "prune",
    "quantize",
    "robustness",
    "search",
]
