"""Multi-user LT fountain codes over linear multiple-access channels."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402
