"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: configuration/usage problems exit 1,
I/O and decoding problems exit 2, numeric/convergence failures exit 3.
"""


class WoodtexError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(WoodtexError, ValueError):
    """An operation was called with arguments violating its contract."""


class ConfigError(WoodtexError):
    """Bad configuration file or command-line usage."""


class DecodeError(WoodtexError):
    """A file could not be decoded as a PNG or JPEG image."""

    def __init__(self, path, reason=""):
        self.path = str(path)
        msg = f"cannot decode image file: {self.path}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class DatasetError(WoodtexError):
    """Dataset directory layout violates the one-directory-per-class contract."""


class NoKeypointsError(WoodtexError):
    """An image produced zero keypoint descriptors and cannot be encoded."""

    def __init__(self, image_id=""):
        self.image_id = image_id
        super().__init__(f"no keypoints detected in image {image_id!r}; "
                         "cannot build a keypoint histogram")


class ConvergenceError(WoodtexError):
    """An iterative solver hit its iteration cap before reaching tolerance."""
