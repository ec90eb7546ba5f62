"""Error taxonomy: configuration rejections vs mathematical domain violations.

Numerical failures (NaN/Inf mid-run) are not exceptions; they mark the
trajectory record with status ``numerical_failure`` instead.
"""

from __future__ import annotations

__all__ = ["ConfigError", "DomainError"]


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operator."""
