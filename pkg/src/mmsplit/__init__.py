"""Domain-driven decomposition of monolith models into microservice candidates."""

from mmsplit.decompose import DecompositionResult, ServiceCandidate, decompose
from mmsplit.model import MonolithModel, parse_model, validate_model
from mmsplit.recommend import recommend

__version__ = "0.1.0"

__all__ = [
    "DecompositionResult",
    "MonolithModel",
    "ServiceCandidate",
    "__version__",
    "decompose",
    "parse_model",
    "recommend",
    "validate_model",
]
