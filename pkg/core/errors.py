"""
Exception types shared across yieldcast.

All derive from built-in exceptions so callers can keep catching
ValueError / RuntimeError at the boundaries.
"""


class DatasetError(ValueError):
    """Ingestion or validation failure (names the row, column or key)."""


class ShapeError(ValueError):
    """Layer input does not match the expected shape."""

    def __init__(self, layer: str, expected, actual):
        self.layer = layer
        self.expected = expected
        self.actual = actual
        super().__init__(f"{layer}: expected shape {expected}, got {actual}")


class ManifestMismatchError(ValueError):
    """Feature manifest or cache hash differs from what a model was built on."""


class TrainingError(RuntimeError):
    """Non-finite loss or gradient during optimization."""


class ConfigError(ValueError):
    """Missing or invalid run-config key."""
