"""Exception hierarchy shared by every module of the package."""


class MLHError(ValueError):
    """Base class for all errors raised by mlhnet."""


# mesh_io
class MalformedHeader(MLHError):
    pass


class MalformedRecord(MLHError):
    pass


class TruncatedFile(MLHError):
    pass


class IndexOutOfRange(MLHError):
    pass


class InvalidParams(MLHError):
    pass


class InvalidMesh(MLHError):
    pass


# sampling / descriptors
class ZeroAreaMesh(MLHError):
    pass


class EmptyCloud(MLHError):
    pass


class EmptyList(MLHError):
    pass


class LayerOutOfRange(MLHError):
    pass


class PointOutOfRange(MLHError):
    pass


class ResolutionMismatch(MLHError):
    pass


# neural network
class ShapeMismatch(MLHError):
    pass


class LabelOutOfRange(MLHError):
    pass


class UnsupportedK(MLHError):
    pass


class ConfigInvalid(MLHError):
    pass


# file formats / datasets
class BadMagic(MLHError):
    pass


class VersionUnsupported(MLHError):
    pass


class LengthMismatch(MLHError):
    pass


class EmptyClass(MLHError):
    pass


class ParseError(MLHError):
    """A mesh file inside a dataset tree failed to parse; carries the path."""

    def __init__(self, path, cause):
        self.path = str(path)
        self.cause = cause
        super().__init__(f"{self.path}: {cause}")
