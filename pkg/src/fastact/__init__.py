"""Fast approximations of neural-network activation functions.

Submodules load lazily so the CLI can pin BLAS thread counts before numpy
comes in.
"""
from .errors import (
    BenchError,
    CoeffsParseError,
    ConfigError,
    DataError,
    EvaluationSingularity,
    FastactError,
    FitFailure,
    PoleError,
)

__version__ = "0.1.0"

_SUBMODULES = ("activations", "fitting", "comparators", "kernels", "data",
               "nn", "bench", "cli")

__all__ = [
    "BenchError", "CoeffsParseError", "ConfigError", "DataError",
    "EvaluationSingularity", "FastactError", "FitFailure", "PoleError",
    "__version__", *_SUBMODULES,
]


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib
        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(_SUBMODULES))
