"""Error hierarchy shared by the library, the CLI, and the HTTP service.

Every error carries a stable ``code`` (its class name) which is what the
wire-level ``error_code`` field and the CLI error output report.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from .model import UnclassifiableSeries


class BidsBuilderError(Exception):
    """Base class for all library errors."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    @property
    def code(self) -> str:
        return type(self).__name__


# --- label normalization ---------------------------------------------------


class LabelError(BidsBuilderError):
    """A subject/session label failed normalization."""


class EmptyLabel(LabelError):
    pass


class IllegalCharacter(LabelError):
    pass


# --- request parsing -------------------------------------------------------


class RequestError(BidsBuilderError):
    """The request document failed parsing or validation."""


class MalformedJson(RequestError):
    pass


class MissingKey(RequestError):
    def __init__(self, key: str):
        super().__init__(f"required key {key!r} is missing")
        self.key = key


class UnknownKey(RequestError):
    pass


class EmptyScans(RequestError):
    pass


class BadLabel(RequestError):
    pass


class IllegalOverride(RequestError):
    pass


class BodyTooLarge(RequestError):
    pass


# --- converter adapter -----------------------------------------------------


class ConverterError(BidsBuilderError):
    """Running the external (or mock) converter failed."""


class ConverterNotFound(ConverterError):
    pass


class ConverterFailed(ConverterError):
    def __init__(self, message: str, exit_code: int | None = None, output: str = ""):
        super().__init__(message)
        self.exit_code = exit_code
        self.output = output


class Timeout(ConverterError):
    pass


class NoSeriesProduced(ConverterError):
    pass


# --- sidecar parsing -------------------------------------------------------


class SidecarError(BidsBuilderError):
    """A converter sidecar carried unusable sequence parameters."""


class NegativeTime(SidecarError):
    pass


class BadFlipAngle(SidecarError):
    pass


# --- dataset building ------------------------------------------------------


class DatasetError(BidsBuilderError):
    """A create/update operation could not run against the target dataset."""


class OutputNotEmpty(DatasetError):
    pass


class ClassificationFailed(DatasetError):
    """One or more series could not be classified; nothing was committed."""

    def __init__(self, failures: Sequence["UnclassifiableSeries"]):
        names = ", ".join(f"{f.series_name} ({f.reason})" for f in failures)
        super().__init__(f"{len(failures)} series could not be classified: {names}")
        self.failures = list(failures)


class IoError(DatasetError):
    pass


class StateFileMissing(DatasetError):
    pass


class SessionConflict(DatasetError):
    pass


class StateVersionUnsupported(DatasetError):
    pass


class MalformedState(DatasetError):
    pass


class Busy(DatasetError):
    pass


# --- validation ------------------------------------------------------------


class NotADirectory(BidsBuilderError):
    pass


def error_body(err: Exception) -> dict:
    """Wire shape for an error: ``error_code``, ``message``, optional ``failed_series``."""
    if isinstance(err, BidsBuilderError):
        body: dict = {"error_code": err.code, "message": err.message}
    else:
        body = {"error_code": "InternalError", "message": str(err)}
    if isinstance(err, ClassificationFailed):
        body["failed_series"] = [
            {"series_name": f.series_name, "reason": f.reason} for f in err.failures
        ]
    return body
