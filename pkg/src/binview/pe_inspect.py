"""PE32 / PE32+ classification from the DOS, COFF and optional headers.

Only the header chain needed to read the optional-header magic is walked;
sections and data directories are never touched.

Layout reference: https://learn.microsoft.com/en-us/windows/win32/debug/pe-format
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .errors import BadPeSignature, MissingDosMagic, TruncatedHeader, UnknownOptionalMagic

DOS_MAGIC = 0x5A4D  # "MZ"
E_LFANEW_OFFSET = 0x3C
PE_SIGNATURE = b"PE\0\0"
COFF_HEADER_SIZE = 20

OPTIONAL_MAGIC_PE32 = 0x10B
OPTIONAL_MAGIC_PE32PLUS = 0x20B

MACHINE_NAMES = {
    0x14C: "i386",
    0x8664: "amd64",
    0x1C0: "arm",
    0xAA64: "arm64",
}


class Bitness(str, enum.Enum):
    PE32 = "PE32"
    PE32Plus = "PE32Plus"

    @classmethod
    def parse(cls, text: str) -> "Bitness":
        norm = text.strip().replace("+", "Plus")
        for member in cls:
            if member.value.lower() == norm.lower():
                return member
        raise ValueError(f"unknown bitness {text!r}")


@dataclass(frozen=True)
class PEIdentity:
    artifact_id: str
    bitness: Bitness
    machine_code: int
    optional_header_magic: int

    def __post_init__(self):
        if not self.artifact_id:
            raise ValueError("artifact_id must be non-empty")
        expected = OPTIONAL_MAGIC_PE32 if self.bitness is Bitness.PE32 else OPTIONAL_MAGIC_PE32PLUS
        if self.optional_header_magic != expected:
            raise ValueError(
                f"bitness {self.bitness.value} inconsistent with magic 0x{self.optional_header_magic:x}"
            )

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "bitness": self.bitness.value,
            "machine_code": self.machine_code,
            "optional_header_magic": self.optional_header_magic,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PEIdentity":
        return cls(
            artifact_id=d["artifact_id"],
            bitness=Bitness(d["bitness"]),
            machine_code=int(d["machine_code"]),
            optional_header_magic=int(d["optional_header_magic"]),
        )


def detect_bitness(raw: bytes, artifact_id: str = "artifact") -> PEIdentity:
    """Classify ``raw`` as PE32 or PE32+ by its optional-header magic.

    The machine field is recorded but never used for the decision.
    """
    if len(raw) >= 2 and struct.unpack_from("<H", raw, 0)[0] != DOS_MAGIC:
        raise MissingDosMagic("DOS header magic 'MZ' not found", offset=0)
    if len(raw) < 0x40:
        raise TruncatedHeader(f"file is {len(raw)} bytes, DOS header needs 64", offset=0)

    e_lfanew = struct.unpack_from("<I", raw, E_LFANEW_OFFSET)[0]
    if e_lfanew + len(PE_SIGNATURE) + COFF_HEADER_SIZE > len(raw):
        raise TruncatedHeader(f"e_lfanew 0x{e_lfanew:x} points past end of file", offset=e_lfanew)
    if raw[e_lfanew:e_lfanew + 4] != PE_SIGNATURE:
        raise BadPeSignature(
            f"expected PE signature at 0x{e_lfanew:x}, found {raw[e_lfanew:e_lfanew + 4]!r}",
            offset=e_lfanew,
        )

    coff = e_lfanew + 4
    machine, _nsections, _ts, _symptr, _nsyms, opt_size, _chars = struct.unpack_from(
        "<HHIIIHH", raw, coff
    )
    opt = coff + COFF_HEADER_SIZE
    if opt_size < 2 or opt + 2 > len(raw):
        raise TruncatedHeader("optional header missing or beyond end of file", offset=opt)

    magic = struct.unpack_from("<H", raw, opt)[0]
    if magic == OPTIONAL_MAGIC_PE32:
        bitness = Bitness.PE32
    elif magic == OPTIONAL_MAGIC_PE32PLUS:
        bitness = Bitness.PE32Plus
    else:
        raise UnknownOptionalMagic(f"optional header magic 0x{magic:x} is neither 0x10b nor 0x20b", offset=opt)

    return PEIdentity(artifact_id=artifact_id, bitness=bitness, machine_code=machine,
                      optional_header_magic=magic)


def build_minimal_pe(bitness: Bitness = Bitness.PE32, machine: int | None = None) -> bytes:
    """Return a header-only PE image; enough for :func:`detect_bitness`.

    Used for synthetic fixtures and tests; the result is not loadable.
    """
    if machine is None:
        machine = 0x14C if bitness is Bitness.PE32 else 0x8664
    magic = OPTIONAL_MAGIC_PE32 if bitness is Bitness.PE32 else OPTIONAL_MAGIC_PE32PLUS
    opt_size = 0xE0 if bitness is Bitness.PE32 else 0xF0
    e_lfanew = 0x80

    buf = bytearray(0x200)
    struct.pack_into("<H", buf, 0, DOS_MAGIC)
    struct.pack_into("<I", buf, E_LFANEW_OFFSET, e_lfanew)
    buf[e_lfanew:e_lfanew + 4] = PE_SIGNATURE
    struct.pack_into("<HHIIIHH", buf, e_lfanew + 4, machine, 0, 0, 0, 0, opt_size, 0x0102)
    struct.pack_into("<H", buf, e_lfanew + 4 + COFF_HEADER_SIZE, magic)
    return bytes(buf)
