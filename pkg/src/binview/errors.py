"""Typed errors raised across the pipeline.

Every error carries a stable ``code`` (the class name) and a ``details`` dict
so the CLI can emit a machine-readable JSON object on stderr.
"""

from __future__ import annotations

from typing import Any


class BinviewError(Exception):
    """Base class for input and validation errors (CLI exit code 1)."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_json(self) -> dict:
        out = {"error": self.code, "message": self.message}
        out.update({k: v for k, v in self.details.items() if v is not None})
        return out


# PE header inspection

class PEFormatError(BinviewError):
    pass


class MissingDosMagic(PEFormatError):
    pass


class TruncatedHeader(PEFormatError):
    pass


class BadPeSignature(PEFormatError):
    pass


class UnknownOptionalMagic(PEFormatError):
    pass


# ingestion

class SchemaViolation(BinviewError):
    def __init__(self, path: str, reason: str, file: str | None = None):
        where = f"{file}: " if file else ""
        super().__init__(f"{where}{path}: {reason}", path=path, reason=reason, file=file)
        self.path = path
        self.reason = reason


class DuplicateFunctionAddress(BinviewError):
    pass


class NonMonotonicSequence(BinviewError):
    pass


class UnknownRegister(BinviewError):
    def __init__(self, token: str, bitness: str, file: str | None = None, path: str | None = None):
        super().__init__(
            f"register {token!r} is not valid under {bitness}",
            token=token, bitness=bitness, file=file, path=path,
        )
        self.token = token
        self.bitness = bitness


class EmptyToken(BinviewError):
    pass


class EmptyBundle(BinviewError):
    pass


class IdentityMismatch(BinviewError):
    pass


class DuplicateArtifactId(BinviewError):
    pass


# numerics / encoder

class EmptyInput(BinviewError):
    pass


class DimensionMismatch(BinviewError):
    pass


class ZeroVector(BinviewError):
    pass


class InsufficientRows(BinviewError):
    pass


class KTooLarge(BinviewError):
    pass


class TraceTooShort(BinviewError):
    pass


# comparison

class LayoutMismatch(BinviewError):
    pass


class EncoderMismatch(BinviewError):
    pass


class NoCommonViews(BinviewError):
    pass


class FormatError(BinviewError):
    """An on-disk document is not the format a subcommand expects."""
