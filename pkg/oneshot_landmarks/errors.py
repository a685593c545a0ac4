"""
Exception types shared across the toolkit.

Every error carries a machine-readable ``code`` so callers (and the CLI) can branch on
the failure kind without parsing messages.
"""
from pathlib import Path
from typing import Optional, Union


class LandmarkError(Exception):
    """
    Base exception for landmark detection failures.
    """

    def __init__(self, code: str, message: Optional[str] = None):
        """
        Initialize the error.

        Args:
            code: Short error code, e.g. ``"zero-anchor"``
            message: Human readable detail
        """
        self.code = code
        self.message = message or code
        super().__init__(f"{code}: {self.message}" if message else code)


class GeometryError(LandmarkError):
    """Invalid coordinates, grids or crop windows."""
    pass


class BackboneError(LandmarkError):
    """Feature extraction or adapter failures."""
    pass


class DecoderError(LandmarkError):
    """Invalid decoder inputs or checkpoints."""
    pass


class SimilarityError(LandmarkError):
    """Invalid similarity maps, targets or anchors."""
    pass


class MatchingError(LandmarkError):
    """Invalid matching requests."""
    pass


class AugmentationError(LandmarkError):
    """Template augmentation could not produce a valid sample."""
    pass


class TrainingError(LandmarkError):
    """
    Decoder training failed.
    """

    def __init__(self, code: str, message: Optional[str] = None, step: Optional[int] = None):
        super().__init__(code, message)
        self.step = step


class DatasetError(LandmarkError):
    """
    Dataset ingestion failed for a specific file.
    """

    def __init__(self, code: str, message: Optional[str] = None, path: Optional[Union[str, Path]] = None):
        super().__init__(code, message)
        self.path = str(path) if path is not None else None


class BundleError(LandmarkError):
    """Trained-state bundle could not be read or written."""
    pass
