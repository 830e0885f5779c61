"""Exception types shared across the package."""


class WxhierError(Exception):
    """Base class for all package errors."""


class ParseError(WxhierError):
    """Malformed input document (PPM header, manifest CSV, config file, ...)."""


class ValidationError(WxhierError):
    """Structurally parseable input that violates a content contract."""


class UnknownLabelError(ValidationError):
    """A label string that is not one of the known leaf classes."""


class DimensionError(WxhierError):
    """Non-positive or otherwise impossible target dimensions."""


class DegenerateError(WxhierError):
    """Statistically degenerate input, e.g. zero variance."""


class EmptyManifestError(WxhierError):
    """A dataset operation received no entries."""


class ShapeError(WxhierError):
    """Tensor or layer shapes are inconsistent."""


class ConfigError(WxhierError):
    """Invalid training or run configuration value."""


class MissingClassError(WxhierError):
    """A class required for training has no samples."""


class FormatError(WxhierError):
    """Corrupt or truncated binary container."""


class VersionError(FormatError):
    """Container version tag is not supported."""


class LabelRangeError(WxhierError):
    """An integer label lies outside the declared class count."""


class EmptyMatrixError(WxhierError):
    """Metrics requested on a confusion matrix with no samples."""
