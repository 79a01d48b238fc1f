"""Register family canonicalization and per-family usage summaries.

Architecture-specific names collapse onto 19 families (18 named plus OTHER)
so that 32-bit and 64-bit traces land in the same vector layout.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import EmptyToken, UnknownRegister
from .model import CATEGORIES, TraceEvent
from .pe_inspect import Bitness


class RegisterFamily(enum.Enum):
    ACC = "ACC"
    BASE = "BASE"
    COUNT = "COUNT"
    DATA = "DATA"
    SI = "SI"
    DI = "DI"
    SP = "SP"
    BP = "BP"
    IP = "IP"
    FLAGS = "FLAGS"
    EXT8 = "EXT8"
    EXT9 = "EXT9"
    EXT10 = "EXT10"
    EXT11 = "EXT11"
    EXT12 = "EXT12"
    EXT13 = "EXT13"
    EXT14 = "EXT14"
    EXT15 = "EXT15"
    OTHER = "OTHER"


FAMILY_ORDER: tuple[RegisterFamily, ...] = tuple(RegisterFamily)
FAMILY_INDEX = {fam: i for i, fam in enumerate(FAMILY_ORDER)}

# (family, names valid in both modes, names valid only in 64-bit mode)
_GP_TABLE = [
    (RegisterFamily.ACC, ("eax", "ax", "al", "ah"), ("rax",)),
    (RegisterFamily.BASE, ("ebx", "bx", "bl", "bh"), ("rbx",)),
    (RegisterFamily.COUNT, ("ecx", "cx", "cl", "ch"), ("rcx",)),
    (RegisterFamily.DATA, ("edx", "dx", "dl", "dh"), ("rdx",)),
    (RegisterFamily.SI, ("esi", "si"), ("rsi", "sil")),
    (RegisterFamily.DI, ("edi", "di"), ("rdi", "dil")),
    (RegisterFamily.SP, ("esp", "sp"), ("rsp", "spl")),
    (RegisterFamily.BP, ("ebp", "bp"), ("rbp", "bpl")),
    (RegisterFamily.IP, ("eip", "ip"), ("rip",)),
    (RegisterFamily.FLAGS, ("eflags", "flags"), ("rflags",)),
]

_FAMILY_OF: dict[str, RegisterFamily] = {}
_X64_ONLY: set[str] = set()

for _fam, _both, _wide in _GP_TABLE:
    for _name in _both:
        _FAMILY_OF[_name] = _fam
    for _name in _wide:
        _FAMILY_OF[_name] = _fam
        _X64_ONLY.add(_name)

for _n in range(8, 16):
    _fam = RegisterFamily[f"EXT{_n}"]
    for _name in (f"r{_n}", f"r{_n}d", f"r{_n}w", f"r{_n}b"):
        _FAMILY_OF[_name] = _fam
        _X64_ONLY.add(_name)


def _other_registers() -> tuple[set[str], set[str]]:
    """Recognized non-GP registers, split into (any mode, 64-bit only)."""
    both: set[str] = set()
    wide: set[str] = set()
    for i in range(32):
        for prefix in ("xmm", "ymm", "zmm"):
            name = f"{prefix}{i}"
            (both if i < 8 else wide).add(name)
    for i in range(8):
        both.update({f"st{i}", f"st({i})", f"mm{i}", f"k{i}", f"dr{i}"})
    both.update({"st", "cs", "ds", "es", "fs", "gs", "ss", "mxcsr", "fpcw", "fpsw", "fptw",
                 "cr0", "cr2", "cr3", "cr4", "gdtr", "idtr", "ldtr", "tr"})
    wide.add("cr8")
    return both, wide


_OTHER_ANY, _OTHER_X64 = _other_registers()
for _name in _OTHER_ANY | _OTHER_X64:
    _FAMILY_OF[_name] = RegisterFamily.OTHER
_X64_ONLY |= _OTHER_X64


def canonicalize_register(token: str, bitness: Bitness) -> RegisterFamily:
    if not token:
        raise EmptyToken("register token is empty")
    name = token.lower()
    fam = _FAMILY_OF.get(name)
    if fam is None:
        raise UnknownRegister(token, bitness.value)
    if bitness is Bitness.PE32 and name in _X64_ONLY:
        raise UnknownRegister(token, bitness.value)
    return fam


def known_registers(bitness: Bitness) -> dict[str, RegisterFamily]:
    """Every accepted register name under ``bitness`` with its family."""
    return {
        name: fam for name, fam in _FAMILY_OF.items()
        if bitness is Bitness.PE32Plus or name not in _X64_ONLY
    }


@dataclass(frozen=True)
class RegisterSummary:
    family: RegisterFamily
    update_count: int
    read_count: int
    write_count: int
    read_write_ratio: float
    context_histogram: Mapping[str, int]

    def __post_init__(self):
        assert self.update_count == self.write_count
        assert sum(self.context_histogram.values()) == self.read_count + self.write_count


def summarize_registers(trace: Iterable[TraceEvent], bitness: Bitness) -> list[RegisterSummary]:
    reads: Counter = Counter()
    writes: Counter = Counter()
    contexts: dict[RegisterFamily, Counter] = {}

    for event in trace:
        for token in event.regs_read:
            fam = canonicalize_register(token, bitness)
            reads[fam] += 1
            contexts.setdefault(fam, Counter())[event.category] += 1
        for token in event.regs_written:
            fam = canonicalize_register(token, bitness)
            writes[fam] += 1
            contexts.setdefault(fam, Counter())[event.category] += 1

    out = []
    for fam in FAMILY_ORDER:
        r, w = reads[fam], writes[fam]
        if r + w == 0:
            continue
        hist = contexts[fam]
        out.append(RegisterSummary(
            family=fam,
            update_count=w,
            read_count=r,
            write_count=w,
            read_write_ratio=r / (r + w),
            context_histogram={c: hist[c] for c in CATEGORIES if hist[c]},
        ))
    return out
