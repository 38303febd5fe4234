"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes (config -> 1, data -> 2,
artifact corruption -> 3), so new exceptions should subclass one of the
three roots below.
"""


class RclutError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RclutError):
    """Invalid network/training configuration or CLI flags."""


class DataError(RclutError):
    """Problems with input images or datasets."""


class UnsupportedImageError(DataError):
    """PNG with a bit depth or color type outside the 8-bit gray/RGB contract."""


class EmptyImageError(DataError):
    """Zero-sized image where pixels are required."""


class CorruptPackError(RclutError):
    """LUT pack file is truncated, mislabeled, or fails its checksum."""
