"""Exception hierarchy shared across the package."""


class XanesUnmixError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(XanesUnmixError):
    """Array shapes inconsistent with the declared geometry or grid."""


class CubeFormatError(XanesUnmixError):
    """Base class for cube-container file problems."""


class BadMagicError(CubeFormatError):
    """File does not start with the cube container magic bytes."""


class TruncatedFileError(CubeFormatError):
    """File ends before the declared payload is complete."""


class HeaderMismatchError(CubeFormatError):
    """Header fields disagree with the payload or with each other."""


class VcaRankError(XanesUnmixError):
    """Data does not span enough independent directions for the request."""


class DenoiserError(XanesUnmixError):
    """Unknown denoiser id, duplicate registration, or a failing denoiser."""
