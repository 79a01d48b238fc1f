"""Parsing and validation of static exports and trace logs, and the merge
into one provenance-tagged :class:`ArtifactBundle`.

Input formats
-------------
``bin2vec-static-v1``
    One JSON document with ``functions``, ``imports`` and ``exports`` arrays.
``bin2vec-trace-v1``
    JSON lines, one executed instruction per line.

Mnemonics and register names are lowercased on the way in; symbol names keep
their case. Instruction categories are validated, never inferred.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import IO, Iterable, NamedTuple, Union

from jsonschema import Draft202012Validator

from .errors import (
    DuplicateFunctionAddress,
    EmptyBundle,
    FormatError,
    IdentityMismatch,
    NonMonotonicSequence,
    SchemaViolation,
    UnknownRegister,
)
from .model import (
    CATEGORIES,
    ArtifactBundle,
    FunctionRecord,
    ProvenanceTag,
    SourceTool,
    SymbolRecord,
    TraceEvent,
)
from .pe_inspect import Bitness, PEIdentity
from .registers import canonicalize_register

STATIC_FORMAT = "bin2vec-static-v1"
TRACE_FORMAT = "bin2vec-trace-v1"
BUNDLE_FORMAT = "bin2vec-bundle-v1"

_HEX = {"type": "string", "pattern": "^0x0*[0-9a-fA-F]{1,16}$"}
_TOKEN = {"type": "string", "minLength": 1}
_COUNT = {"type": "integer", "minimum": 0}

_FUNCTION_SCHEMA = {
    "type": "object",
    "required": ["name", "address", "parameter_count", "local_count", "calling_convention",
                 "is_varargs", "call_in_degree", "call_out_degree", "size_bytes"],
    "properties": {
        "name": _TOKEN,
        "address": _HEX,
        "parameter_count": _COUNT,
        "local_count": _COUNT,
        "calling_convention": _TOKEN,
        "is_varargs": {"type": "boolean"},
        "call_in_degree": _COUNT,
        "call_out_degree": _COUNT,
        "size_bytes": {"type": "integer", "minimum": 1},
    },
}


def _symbol_schema(library_required: bool) -> dict:
    return {
        "type": "object",
        "required": ["name", "library", "address", "namespace", "is_primary", "source"],
        "properties": {
            "name": _TOKEN,
            "library": _TOKEN if library_required else {"type": "string"},
            "address": _HEX,
            "namespace": {"type": "string"},
            "is_primary": {"type": "boolean"},
            "source": _TOKEN,
        },
    }


STATIC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["format", "artifact_id", "functions", "imports", "exports"],
    "properties": {
        "format": {"const": STATIC_FORMAT},
        "artifact_id": _TOKEN,
        "functions": {"type": "array", "items": _FUNCTION_SCHEMA},
        "imports": {"type": "array", "items": _symbol_schema(library_required=True)},
        "exports": {"type": "array", "items": _symbol_schema(library_required=False)},
    },
}

TRACE_LINE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["seq", "ip", "mnemonic", "operands", "category", "regs_read", "regs_written"],
    "properties": {
        "seq": _COUNT,
        "ip": _HEX,
        "mnemonic": _TOKEN,
        "operands": {"type": "array", "items": {"type": "string"}},
        "category": {"enum": list(CATEGORIES)},
        "regs_read": {"type": "array", "items": _TOKEN},
        "regs_written": {"type": "array", "items": _TOKEN},
    },
}

_static_validator = Draft202012Validator(STATIC_SCHEMA)
_trace_validator = Draft202012Validator(TRACE_LINE_SCHEMA)

Source = Union[bytes, str, Path, IO]


class StaticExport(NamedTuple):
    functions: list[FunctionRecord]
    symbols: list[SymbolRecord]
    artifact_id: str

    @property
    def imports(self) -> list[SymbolRecord]:
        return [s for s in self.symbols if s.kind == "import"]

    @property
    def exports(self) -> list[SymbolRecord]:
        return [s for s in self.symbols if s.kind == "export"]


def format_path(parts: Iterable, root: str = "$") -> str:
    out = root
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _first_violation(validator: Draft202012Validator, doc, root: str = "$"):
    errors = list(validator.iter_errors(doc))
    if not errors:
        return None

    def where(err):
        parts = list(err.absolute_path)
        if err.validator == "required":
            missing = [p for p in err.validator_value if p not in err.instance]
            parts.append(missing[0])
            return parts, f"required field {missing[0]!r} is missing"
        return parts, err.message

    located = [where(e) for e in errors]
    located.sort(key=lambda item: [(0, p, "") if isinstance(p, int) else (1, 0, p) for p in item[0]])
    parts, reason = located[0]
    return format_path(parts, root), reason


def _read(source: Source) -> tuple[bytes, str]:
    if isinstance(source, bytes):
        return source, "<bytes>"
    if isinstance(source, (str, Path)):
        path = Path(source)
        return path.read_bytes(), path.as_posix()
    data = source.read()
    if isinstance(data, str):
        data = data.encode("utf-8")
    return data, getattr(source, "name", "<stream>")


def parse_hex(text: str) -> int:
    return int(text, 16)


def parse_static_export(source: Source, source_file: str | None = None) -> StaticExport:
    """Parse a ``bin2vec-static-v1`` document.

    ``record_index`` in each provenance tag is the element's position in its
    source array (``functions``, ``imports`` or ``exports``).
    """
    raw, name = _read(source)
    source_file = source_file or name
    try:
        doc = json.loads(raw)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolation("$", f"invalid JSON: {exc}", file=source_file) from None

    violation = _first_violation(_static_validator, doc)
    if violation:
        raise SchemaViolation(*violation, file=source_file)

    functions = []
    seen: dict[int, int] = {}
    for i, f in enumerate(doc["functions"]):
        addr = parse_hex(f["address"])
        if addr in seen:
            raise DuplicateFunctionAddress(
                f"functions[{seen[addr]}] and functions[{i}] share address 0x{addr:x}",
                file=source_file, path=f"$.functions[{i}].address",
            )
        seen[addr] = i
        functions.append(FunctionRecord(
            name=f["name"],
            address=addr,
            parameter_count=f["parameter_count"],
            local_count=f["local_count"],
            calling_convention=f["calling_convention"],
            is_varargs=f["is_varargs"],
            call_in_degree=f["call_in_degree"],
            call_out_degree=f["call_out_degree"],
            size_bytes=f["size_bytes"],
            provenance=ProvenanceTag(SourceTool.static_analyzer, source_file, i),
        ))

    symbols = []
    for kind, key in (("import", "imports"), ("export", "exports")):
        for i, s in enumerate(doc[key]):
            symbols.append(SymbolRecord(
                kind=kind,
                name=s["name"],
                library=s["library"],
                address=parse_hex(s["address"]),
                namespace=s["namespace"],
                is_primary=s["is_primary"],
                source=s["source"],
                provenance=ProvenanceTag(SourceTool.static_analyzer, source_file, i),
            ))
    return StaticExport(functions, symbols, doc["artifact_id"])


def parse_trace_log(source: Source, bitness: Bitness, source_file: str | None = None) -> list[TraceEvent]:
    """Parse ``bin2vec-trace-v1`` JSON lines.

    ``record_index`` is the 0-based physical line number; blank lines are
    skipped but still counted.
    """
    raw, name = _read(source)
    source_file = source_file or name
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SchemaViolation("$", f"trace is not UTF-8: {exc}", file=source_file) from None

    events: list[TraceEvent] = []
    prev_seq = None
    for lineno, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        root = f"$[{lineno}]"
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(root, f"invalid JSON on line {lineno + 1}: {exc}", file=source_file) from None
        violation = _first_violation(_trace_validator, rec, root)
        if violation:
            raise SchemaViolation(*violation, file=source_file)

        seq = rec["seq"]
        if prev_seq is not None and seq <= prev_seq:
            raise NonMonotonicSequence(
                f"seq {seq} on line {lineno + 1} does not follow {prev_seq}",
                file=source_file, path=f"{root}.seq",
            )
        prev_seq = seq

        regs = {}
        for key in ("regs_read", "regs_written"):
            tokens = tuple(t.lower() for t in rec[key])
            for j, tok in enumerate(tokens):
                try:
                    canonicalize_register(tok, bitness)
                except UnknownRegister:
                    raise UnknownRegister(tok, bitness.value, file=source_file,
                                          path=f"{root}.{key}[{j}]") from None
            regs[key] = tokens

        events.append(TraceEvent(
            sequence=seq,
            ip=parse_hex(rec["ip"]),
            mnemonic=rec["mnemonic"].lower(),
            operand_tokens=tuple(rec["operands"]),
            category=rec["category"],
            regs_read=regs["regs_read"],
            regs_written=regs["regs_written"],
            provenance=ProvenanceTag(SourceTool.dynamic_tracer, source_file, lineno),
        ))
    return events


def merge_artifact(
    identity: PEIdentity,
    static: StaticExport | None = None,
    trace: Iterable[TraceEvent] | None = None,
) -> ArtifactBundle:
    if static is not None and static.artifact_id != identity.artifact_id:
        raise IdentityMismatch(
            f"static export describes {static.artifact_id!r}, binary is {identity.artifact_id!r}",
            expected=identity.artifact_id, found=static.artifact_id,
        )
    trace = tuple(trace or ())
    for event in trace:
        for tok in event.regs_read + event.regs_written:
            canonicalize_register(tok, identity.bitness)

    bundle = ArtifactBundle(
        identity=identity,
        functions=tuple(static.functions) if static else (),
        imports=tuple(static.imports) if static else (),
        exports=tuple(static.exports) if static else (),
        trace=trace,
    )
    if not (bundle.functions or bundle.imports or bundle.exports or bundle.trace):
        raise EmptyBundle(f"artifact {identity.artifact_id!r} has no evidence")
    return bundle


# merged on-disk form

def _hex(value: int) -> str:
    return f"0x{value:x}"


def bundle_to_dict(bundle: ArtifactBundle) -> dict:
    def symbol(s: SymbolRecord) -> dict:
        return {"name": s.name, "library": s.library, "address": _hex(s.address),
                "namespace": s.namespace, "is_primary": s.is_primary, "source": s.source,
                "provenance": s.provenance.to_list()}

    return {
        "format": BUNDLE_FORMAT,
        "identity": bundle.identity.to_dict(),
        "functions": [
            {"name": f.name, "address": _hex(f.address), "parameter_count": f.parameter_count,
             "local_count": f.local_count, "calling_convention": f.calling_convention,
             "is_varargs": f.is_varargs, "call_in_degree": f.call_in_degree,
             "call_out_degree": f.call_out_degree, "size_bytes": f.size_bytes,
             "provenance": f.provenance.to_list()}
            for f in bundle.functions
        ],
        "imports": [symbol(s) for s in bundle.imports],
        "exports": [symbol(s) for s in bundle.exports],
        "trace": [
            {"seq": e.sequence, "ip": _hex(e.ip), "mnemonic": e.mnemonic,
             "operands": list(e.operand_tokens), "category": e.category,
             "regs_read": list(e.regs_read), "regs_written": list(e.regs_written),
             "provenance": e.provenance.to_list()}
            for e in bundle.trace
        ],
    }


def bundle_from_dict(doc: dict) -> ArtifactBundle:
    if doc.get("format") != BUNDLE_FORMAT:
        raise FormatError(f"expected a {BUNDLE_FORMAT} document, got {doc.get('format')!r}")
    identity = PEIdentity.from_dict(doc["identity"])

    def symbols(kind: str, items: list) -> tuple:
        return tuple(
            SymbolRecord(kind=kind, name=s["name"], library=s["library"],
                         address=parse_hex(s["address"]), namespace=s["namespace"],
                         is_primary=s["is_primary"], source=s["source"],
                         provenance=ProvenanceTag.from_list(s["provenance"]))
            for s in items
        )

    functions = tuple(
        FunctionRecord(name=f["name"], address=parse_hex(f["address"]),
                       parameter_count=f["parameter_count"], local_count=f["local_count"],
                       calling_convention=f["calling_convention"], is_varargs=f["is_varargs"],
                       call_in_degree=f["call_in_degree"], call_out_degree=f["call_out_degree"],
                       size_bytes=f["size_bytes"], provenance=ProvenanceTag.from_list(f["provenance"]))
        for f in doc["functions"]
    )
    trace = tuple(
        TraceEvent(sequence=e["seq"], ip=parse_hex(e["ip"]), mnemonic=e["mnemonic"],
                   operand_tokens=tuple(e["operands"]), category=e["category"],
                   regs_read=tuple(e["regs_read"]), regs_written=tuple(e["regs_written"]),
                   provenance=ProvenanceTag.from_list(e["provenance"]))
        for e in doc["trace"]
    )
    for event in trace:
        for tok in event.regs_read + event.regs_written:
            canonicalize_register(tok, identity.bitness)
    bundle = ArtifactBundle(identity, functions, symbols("import", doc["imports"]),
                            symbols("export", doc["exports"]), trace)
    if not (bundle.functions or bundle.imports or bundle.exports or bundle.trace):
        raise EmptyBundle(f"artifact {identity.artifact_id!r} has no evidence")
    return bundle
