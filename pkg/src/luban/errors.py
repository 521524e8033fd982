"""Typed errors shared by every stage of the pipeline.

Each error carries a stable ``code`` (the class name unless overridden) so the
CLI and the reflection packets can report failures without string matching.
"""
from __future__ import annotations


class LubanError(Exception):
    """Base class. ``line``/``col`` are 1-based source locations when known."""

    code = "LubanError"

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if "code" not in cls.__dict__:
            cls.code = cls.__name__

    def __str__(self) -> str:
        if self.line is not None:
            where = f"line {self.line}" + (f", column {self.col}" if self.col is not None else "")
            return f"{self.code} at {where}: {self.message}"
        return f"{self.code}: {self.message}"


# --- DSL / JSON front ends ---------------------------------------------------

class DslSyntaxError(LubanError):
    code = "SyntaxError"


class DuplicateName(LubanError):
    pass


class UnknownReference(LubanError):
    pass


class BadOrientation(LubanError):
    pass


class NonPositiveDimension(LubanError):
    pass


class BadVerificationType(LubanError):
    pass


class EmptyAnnotation(LubanError):
    pass


class PanelPlacedTwice(LubanError):
    pass


class DuplicateCheckId(LubanError):
    pass


class UnknownCheckKind(LubanError):
    pass


class MalformedLocSpec(LubanError):
    pass


class MalformedCheck(LubanError):
    pass


class EmptyCheckProgram(LubanError):
    pass


class MalformedAction(LubanError):
    pass


class UnknownMaterial(LubanError):
    pass


# --- solid kernel ------------------------------------------------------------

class MisalignedFeature(LubanError):
    pass


class OutOfPanel(LubanError):
    pass


class UnknownBase(LubanError):
    pass


class RefillWithoutHole(LubanError):
    pass


class PlacementMisaligned(LubanError):
    pass


# --- rendering / world / build -------------------------------------------------

class SceneTooLarge(LubanError):
    pass


class OutOfBounds(LubanError):
    pass


class FixtureTooLargeForWorld(LubanError):
    pass


class UnknownTask(LubanError):
    pass


class OutOfWorld(LubanError):
    pass


# --- gateway -----------------------------------------------------------------

class BackendUnavailable(LubanError):
    pass


class TranscriptMiss(LubanError):
    pass


class ExtractionFailed(LubanError):
    pass


class BudgetExceeded(LubanError):
    pass


class AllCandidatesInvalid(LubanError):
    pass


class StageError(LubanError):
    """Wraps a typed error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: LubanError):
        super().__init__(f"stage {stage!r} failed: {cause.message}", cause.line, cause.col)
        self.stage = stage
        self.cause = cause
        self.code = cause.code


# --- evaluation --------------------------------------------------------------

class EmptyGroup(LubanError):
    pass


class InvalidRecord(LubanError):
    pass


class LengthMismatch(LubanError):
    pass


class TooFewSamples(LubanError):
    pass


class ProtocolMismatch(LubanError):
    pass


# --- configuration -------------------------------------------------------------

class ConfigError(LubanError):
    pass
