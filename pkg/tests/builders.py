"""Small constructors for hand-made evidence in tests."""

from __future__ import annotations

from binview.model import ArtifactBundle, FunctionRecord, ProvenanceTag, SourceTool, SymbolRecord, TraceEvent
from binview.pe_inspect import Bitness, PEIdentity

_STATIC = ProvenanceTag(SourceTool.manual, "<test>", 0)


def identity(artifact_id: str = "t", bitness: Bitness = Bitness.PE32) -> PEIdentity:
    magic = 0x10B if bitness is Bitness.PE32 else 0x20B
    return PEIdentity(artifact_id, bitness, 0x14C if bitness is Bitness.PE32 else 0x8664, magic)


def function(address: int, params=2, locals_=4, in_deg=1, out_deg=3, size=16, conv="cdecl",
             varargs=False, name=None) -> FunctionRecord:
    return FunctionRecord(name or f"FUN_{address:08x}", address, params, locals_, conv, varargs,
                          in_deg, out_deg, size, _STATIC)


def symbol(name: str, library: str = "KERNEL32.DLL", kind: str = "import", address: int = 0x1000,
           namespace: str = "KERNEL32", primary: bool = True, source: str = "IMPORTED") -> SymbolRecord:
    return SymbolRecord(kind, name, library, address, namespace, primary, source, _STATIC)


def event(seq: int, mnemonic: str, category: str = "other", reads=(), writes=(), ip: int = 0x401000) -> TraceEvent:
    return TraceEvent(seq, ip + seq, mnemonic, (), category, tuple(reads), tuple(writes),
                      ProvenanceTag(SourceTool.dynamic_tracer, "<test>", seq))


def trace(mnemonics, categories=None) -> tuple[TraceEvent, ...]:
    categories = categories or ["other"] * len(mnemonics)
    return tuple(event(i, m, c) for i, (m, c) in enumerate(zip(mnemonics, categories)))


def bundle(artifact_id="t", functions=(), imports=(), exports=(), events=(), bitness=Bitness.PE32):
    return ArtifactBundle(identity(artifact_id, bitness), tuple(functions), tuple(imports),
                          tuple(exports), tuple(events))
