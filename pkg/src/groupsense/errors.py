"""Exception taxonomy.

``EngineError`` covers everything caused by bad inputs or bad calls; the CLI
maps it to exit code 1.  Anything else escaping the pipeline is treated as an
internal invariant failure (exit code 2).
"""


class EngineError(Exception):
    """Base class for all input/contract errors raised by the engine."""


class DegenerateRay(EngineError):
    """Ray endpoints coincide; no direction can be derived."""


class DegenerateHead(EngineError):
    """Nose sits on the ear midpoint; no gaze direction can be derived."""


class DegenerateDigit(EngineError):
    """Index fingertip sits on its MCP joint; no pointing axis exists."""


class InsufficientWindow(EngineError):
    """Hand-track window does not span the required duration."""


class TooManyBodies(EngineError):
    """More than three bodies cannot be seated."""


class DuplicateBodyId(EngineError):
    """Two bodies in one frame share an id."""


class EmptyBatch(EngineError):
    """A training step was requested on an empty batch."""


class MissingSeatModel(EngineError):
    """No classifier is available for the requested seat."""


class MissingModelFile(EngineError):
    """Posture classification enabled but a seat model file is absent."""


class MalformedInterval(EngineError):
    """An interval timeline violates its ordering/overlap preconditions."""


class NonMonotoneTime(EngineError):
    """Timestamps in a session stream are not strictly increasing."""


class ParseError(EngineError):
    """A record in an input file could not be parsed."""


class DuplicateObjectId(EngineError):
    """Two task objects share an id."""


class InvalidAabb(EngineError):
    """An axis-aligned box has min > max (or is a degenerate point)."""


class InvalidScript(EngineError):
    """A scenario script references unknown ids or out-of-range times."""
