"""Time-frequency features and random-forest scoring for suspicious transaction monitoring."""

__version__ = "0.1.0"

from ._kernels import BACKEND_NAME  # noqa: E402

__all__ = ["BACKEND_NAME", "__version__"]
