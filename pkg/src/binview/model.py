"""Evidence records shared by ingestion, register summaries and view building."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .pe_inspect import PEIdentity

# Fixed order; the trace activity vector uses this layout.
CATEGORIES = ("memory_read", "memory_write", "control_flow", "arithmetic", "data_move", "other")


class SourceTool(str, enum.Enum):
    static_analyzer = "static_analyzer"
    dynamic_tracer = "dynamic_tracer"
    manual = "manual"


@dataclass(frozen=True)
class ProvenanceTag:
    source_tool: SourceTool
    source_file: str
    record_index: int

    def to_list(self) -> list:
        return [self.source_tool.value, self.source_file, self.record_index]

    @classmethod
    def from_list(cls, item) -> "ProvenanceTag":
        tool, path, index = item
        return cls(SourceTool(tool), path, int(index))


@dataclass(frozen=True)
class FunctionRecord:
    name: str
    address: int
    parameter_count: int
    local_count: int
    calling_convention: str
    is_varargs: bool
    call_in_degree: int
    call_out_degree: int
    size_bytes: int
    provenance: ProvenanceTag


@dataclass(frozen=True)
class SymbolRecord:
    kind: str  # "import" | "export"
    name: str
    library: str
    address: int
    namespace: str
    is_primary: bool
    source: str
    provenance: ProvenanceTag


@dataclass(frozen=True)
class TraceEvent:
    sequence: int
    ip: int
    mnemonic: str
    operand_tokens: tuple[str, ...]
    category: str
    regs_read: tuple[str, ...]
    regs_written: tuple[str, ...]
    provenance: ProvenanceTag


@dataclass(frozen=True)
class ArtifactBundle:
    identity: PEIdentity
    functions: tuple[FunctionRecord, ...] = field(default_factory=tuple)
    imports: tuple[SymbolRecord, ...] = field(default_factory=tuple)
    exports: tuple[SymbolRecord, ...] = field(default_factory=tuple)
    trace: tuple[TraceEvent, ...] = field(default_factory=tuple)

    @property
    def artifact_id(self) -> str:
        return self.identity.artifact_id

    @property
    def bitness(self):
        return self.identity.bitness
