"""Channel Reliability Engine - Zuverlässigkeits-Codierung für LLM-Kanäle."""

from .exceptions import (
    AllBranchesFailedError,
    CapabilityError,
    ChannelTransportError,
    ConfigValidationError,
    ReliabilityError,
)

__version__ = "0.1.0"

__all__ = [
    "AllBranchesFailedError",
    "CapabilityError",
    "ChannelTransportError",
    "ConfigValidationError",
    "ReliabilityError",
    "__version__",
]
