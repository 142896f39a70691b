from __future__ import annotations


class GeometryError(ValueError):
    """Input or patch extents do not describe a valid token grid."""


class ModelError(ValueError):
    """A forward pass or model assembly referenced something the model does not have."""


class TransferError(ValueError):
    """A weight-transfer or embedding conversion was requested with inconsistent inputs."""
