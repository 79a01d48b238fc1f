import copy
import json

import pytest

from binview.errors import (
    DuplicateFunctionAddress, EmptyBundle, IdentityMismatch, NonMonotonicSequence,
    SchemaViolation, UnknownRegister,
)
from binview.ingest import (
    bundle_from_dict, bundle_to_dict, merge_artifact, parse_static_export, parse_trace_log,
)
from binview.pe_inspect import Bitness

from builders import identity

FUNC = {"name": "FUN_1", "address": "0x401000", "parameter_count": 2, "local_count": 1,
        "calling_convention": "cdecl", "is_varargs": False, "call_in_degree": 0,
        "call_out_degree": 2, "size_bytes": 40}
IMP = {"name": "ReadFile", "library": "KERNEL32.DLL", "address": "0x420000", "namespace": "KERNEL32",
       "is_primary": True, "source": "IMPORTED"}


def static_doc(**overrides) -> dict:
    doc = {
        "format": "bin2vec-static-v1", "artifact_id": "t",
        "functions": [FUNC, dict(FUNC, name="FUN_2", address="0x401100")],
        "imports": [IMP, dict(IMP, name="WriteFile"), dict(IMP, name="Sleep", address="0x420008")],
        "exports": [],
    }
    doc.update(overrides)
    return doc


def line(seq, mnemonic="mov", category="data_move", reads=("eax",), writes=("ebx",)):
    return json.dumps({"seq": seq, "ip": f"0x{0x401000 + seq:x}", "mnemonic": mnemonic,
                       "operands": ["ebx", "eax"], "category": category,
                       "regs_read": list(reads), "regs_written": list(writes)})


def test_static_counts_and_indices():
    out = parse_static_export(json.dumps(static_doc()).encode(), source_file="s.json")
    assert len(out.functions) == 2 and len(out.symbols) == 3
    assert [f.provenance.record_index for f in out.functions] == [0, 1]
    assert [s.provenance.record_index for s in out.imports] == [0, 1, 2]
    assert out.functions[0].address == 0x401000
    assert out.artifact_id == "t"


def test_missing_size_bytes():
    doc = static_doc()
    del doc["functions"][1]["size_bytes"]
    with pytest.raises(SchemaViolation) as ei:
        parse_static_export(json.dumps(doc).encode())
    assert ei.value.path == "$.functions[1].size_bytes"


def test_zero_size():
    doc = copy.deepcopy(static_doc())
    doc["functions"][0]["size_bytes"] = 0
    with pytest.raises(SchemaViolation) as ei:
        parse_static_export(json.dumps(doc).encode())
    assert ei.value.path == "$.functions[0].size_bytes"


def test_duplicate_function_address():
    doc = static_doc(functions=[FUNC, dict(FUNC, name="other")])
    with pytest.raises(DuplicateFunctionAddress):
        parse_static_export(json.dumps(doc).encode())


def test_invalid_json():
    with pytest.raises(SchemaViolation) as ei:
        parse_static_export(b"{not json")
    assert ei.value.path == "$"


def test_symbol_case_kept_and_duplicates_kept():
    doc = static_doc(imports=[IMP, IMP])
    out = parse_static_export(json.dumps(doc).encode())
    assert [s.name for s in out.imports] == ["ReadFile", "ReadFile"]


def test_trace_three_lines():
    text = "\n".join([line(0), line(1), line(5, "JMP", "control_flow", ("EIP",), ("eip",))]) + "\n"
    events = parse_trace_log(text.encode(), Bitness.PE32, source_file="t.jsonl")
    assert [e.sequence for e in events] == [0, 1, 5]
    assert events[2].mnemonic == "jmp"
    assert events[2].regs_read == ("eip",)
    assert [e.provenance.record_index for e in events] == [0, 1, 2]


def test_trace_record_index_is_physical_line():
    text = line(0) + "\n\n" + line(1) + "\n"
    events = parse_trace_log(text.encode(), Bitness.PE32)
    assert [e.provenance.record_index for e in events] == [0, 2]


def test_trace_rax_under_pe32():
    with pytest.raises(UnknownRegister) as ei:
        parse_trace_log(line(0, writes=("rax",)).encode(), Bitness.PE32)
    assert ei.value.token == "rax"
    assert ei.value.details["path"] == "$[0].regs_written[0]"


def test_trace_non_monotonic():
    text = "\n".join([line(0), line(2), line(1)])
    with pytest.raises(NonMonotonicSequence):
        parse_trace_log(text.encode(), Bitness.PE32)


def test_trace_bad_category():
    with pytest.raises(SchemaViolation) as ei:
        parse_trace_log(line(0, category="jump").encode(), Bitness.PE32)
    assert ei.value.path == "$[0].category"


def test_merge_static_only():
    static = parse_static_export(json.dumps(static_doc()).encode())
    b = merge_artifact(identity("t"), static, [])
    assert len(b.functions) == 2 and b.trace == ()


def test_merge_empty():
    static = parse_static_export(json.dumps(static_doc(functions=[], imports=[])).encode())
    with pytest.raises(EmptyBundle):
        merge_artifact(identity("t"), static, [])


def test_merge_identity_mismatch():
    static = parse_static_export(json.dumps(static_doc()).encode())
    with pytest.raises(IdentityMismatch):
        merge_artifact(identity("other"), static)


def test_merge_rechecks_registers_against_bitness():
    events = parse_trace_log(line(0, writes=("rax",)).encode(), Bitness.PE32Plus)
    with pytest.raises(UnknownRegister):
        merge_artifact(identity("t", Bitness.PE32), None, events)


def test_bundle_round_trip(bundles):
    for b in bundles.values():
        doc = json.loads(json.dumps(bundle_to_dict(b)))
        assert bundle_from_dict(doc) == b


def test_provenance_locates_source(bundles, fixtures_dir):
    b = bundles["alpha"]
    lines = (fixtures_dir / "alpha.trace.jsonl").read_text().splitlines()
    for e in b.trace[::97]:
        assert json.loads(lines[e.provenance.record_index])["seq"] == e.sequence
    doc = json.loads((fixtures_dir / "alpha.static.json").read_text())
    for f in b.functions:
        assert int(doc["functions"][f.provenance.record_index]["address"], 16) == f.address
    for s in b.imports:
        assert doc["imports"][s.provenance.record_index]["name"] == s.name
