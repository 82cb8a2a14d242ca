"""Exception types raised across csaeo"""


class CsaeoError(Exception):
    pass


class ConfigError(CsaeoError):
    """Invalid or unreadable run configuration"""


class ArtifactExistsError(CsaeoError):
    """An output artifact already exists and overwrite was not requested"""

    def __init__(self, path):
        super().__init__(str(path))
        self.path = path


class MsimFormatError(CsaeoError):
    """Malformed MSIM raw tensor file"""


class BadMagicError(MsimFormatError):
    pass


class TruncatedPayloadError(MsimFormatError):
    pass


class DimensionOverflowError(MsimFormatError):
    pass


class CheckpointError(CsaeoError):
    """Malformed or incompatible codec checkpoint"""


class DivergenceError(CsaeoError):
    """Training produced a non-finite loss"""


class ShapeMismatchError(CsaeoError, ValueError):
    pass


__all__ = (
    'CsaeoError', 'ConfigError', 'ArtifactExistsError', 'MsimFormatError', 'BadMagicError',
    'TruncatedPayloadError', 'DimensionOverflowError', 'CheckpointError', 'DivergenceError',
    'ShapeMismatchError',
)
