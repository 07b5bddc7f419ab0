"""Exception hierarchy shared by all topoflow modules.

``TopoflowError`` is the base; ``InputError`` groups everything caused by bad
user input (malformed files, schema violations, inconsistent scenes), which
the CLI maps to exit code 2. Everything else maps to exit code 1.
"""


class TopoflowError(Exception):
    pass


class InputError(TopoflowError):
    """Bad input data or configuration (CLI exit code 2)."""


# --- mesh / OBJ ---------------------------------------------------------


class ParseError(InputError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class EmptyMesh(InputError):
    pass


class TopologyMismatch(InputError):
    pass


# --- geometry -----------------------------------------------------------


class NonOrthonormal(InputError):
    pass


class BehindCamera(TopoflowError):
    def __init__(self, index: int, z: float):
        super().__init__(f"vertex {index} has camera-frame depth {z:.6g} <= 1e-6 m")
        self.index = index
        self.z = z


class DegenerateTriangle(TopoflowError):
    pass


class CellTooSmall(InputError):
    pass


# --- flow / warping -----------------------------------------------------


class IndexOutOfRange(TopoflowError):
    pass


class SizeMismatch(TopoflowError):
    pass


class MissingUVs(InputError):
    pass


class MissingObjectTexture(InputError):
    pass


class LayoutMismatch(TopoflowError):
    pass


# --- composition --------------------------------------------------------


class AllForeground(TopoflowError):
    pass


class NoVisibleHand(TopoflowError):
    pass


# --- metrics ------------------------------------------------------------


class DegenerateConfiguration(TopoflowError):
    pass


class EmptyInput(InputError):
    pass


class EmptyVertices(InputError):
    pass


# --- file formats / config ----------------------------------------------


class FormatError(InputError):
    """Base for binary-format violations."""


class BadMagic(FormatError):
    pass


class TruncatedPayload(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class SchemaError(InputError):
    def __init__(self, path: str, reason: str = "missing or invalid"):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason
