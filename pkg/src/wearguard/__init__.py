"""Real-time tool-wear anomaly detection for cutting-force streams."""

from wearguard.errors import (
    ConfigError,
    ConsistencyError,
    DataError,
    DecodeError,
    InsufficientDataError,
    StreamIntegrityError,
    WearguardError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConsistencyError",
    "DataError",
    "DecodeError",
    "InsufficientDataError",
    "StreamIntegrityError",
    "WearguardError",
    "__version__",
]
