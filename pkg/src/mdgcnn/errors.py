"""Exception hierarchy shared by all modules."""


class MdgcnnError(Exception):
    """Base class for all errors raised by the package."""


class MeshError(MdgcnnError):
    pass


class ParseError(MeshError):
    """Malformed mesh file."""


class NonManifold(MeshError):
    """An edge belongs to more than two faces, or the mesh is not orientable."""


class NonManifoldStar(NonManifold):
    """The faces around a vertex do not form a single fan."""


class DegenerateFace(MeshError):
    pass


class TargetTooSmall(MeshError):
    """Simplification cannot reach the requested vertex count."""


class SourceOutOfRange(MdgcnnError, IndexError):
    pass


class NotAdjacent(MdgcnnError, ValueError):
    pass


class NotFound(MdgcnnError, LookupError):
    """A window point lies outside the planar image of a GPC patch."""


class TooManyInvalid(MdgcnnError):
    """Too many window points of a vertex could not be located."""


class ShapeMismatch(MdgcnnError, ValueError):
    pass


class MissingContext(MdgcnnError):
    """Backward called without a saved forward context."""


class ConfigInvalid(MdgcnnError, ValueError):
    pass


class NonFiniteLoss(MdgcnnError, FloatingPointError):
    pass


class ContainerError(MdgcnnError):
    """Corrupt, mismatched or unsupported binary container."""
