import random

import pytest

from binview.errors import EmptyToken, UnknownRegister
from binview.pe_inspect import Bitness
from binview.registers import FAMILY_ORDER, RegisterFamily, canonicalize_register, summarize_registers

from builders import event

F = RegisterFamily
# independent restatement of the mapping table
GP_32 = {
    F.ACC: ["eax", "ax", "al", "ah"], F.BASE: ["ebx", "bx", "bl", "bh"],
    F.COUNT: ["ecx", "cx", "cl", "ch"], F.DATA: ["edx", "dx", "dl", "dh"],
    F.SI: ["esi", "si"], F.DI: ["edi", "di"], F.SP: ["esp", "sp"], F.BP: ["ebp", "bp"],
    F.IP: ["eip", "ip"], F.FLAGS: ["eflags", "flags"],
}
GP_64_ONLY = {
    F.ACC: ["rax"], F.BASE: ["rbx"], F.COUNT: ["rcx"], F.DATA: ["rdx"],
    F.SI: ["rsi", "sil"], F.DI: ["rdi", "dil"], F.SP: ["rsp", "spl"], F.BP: ["rbp", "bpl"],
    F.IP: ["rip"], F.FLAGS: ["rflags"],
}
for n in range(8, 16):
    GP_64_ONLY[F[f"EXT{n}"]] = [f"r{n}", f"r{n}d", f"r{n}w", f"r{n}b"]


def test_family_layout():
    assert [f.value for f in FAMILY_ORDER] == [
        "ACC", "BASE", "COUNT", "DATA", "SI", "DI", "SP", "BP", "IP", "FLAGS",
        "EXT8", "EXT9", "EXT10", "EXT11", "EXT12", "EXT13", "EXT14", "EXT15", "OTHER",
    ]


@pytest.mark.parametrize("token,bitness,family", [
    ("eax", Bitness.PE32, F.ACC),
    ("rax", Bitness.PE32Plus, F.ACC),
    ("r9d", Bitness.PE32Plus, F.EXT9),
    ("xmm0", Bitness.PE32, F.OTHER),
    ("EAX", Bitness.PE32, F.ACC),
    ("st0", Bitness.PE32, F.OTHER),
    ("fs", Bitness.PE32Plus, F.OTHER),
])
def test_examples(token, bitness, family):
    assert canonicalize_register(token, bitness) is family


def test_rax_under_pe32():
    with pytest.raises(UnknownRegister):
        canonicalize_register("rax", Bitness.PE32)


def test_empty_and_unknown():
    with pytest.raises(EmptyToken):
        canonicalize_register("", Bitness.PE32)
    with pytest.raises(UnknownRegister):
        canonicalize_register("foo", Bitness.PE32Plus)
    with pytest.raises(UnknownRegister):
        canonicalize_register("xmm8", Bitness.PE32)


def test_summary_counts():
    trace = [event(0, "mov", "data_move", writes=["eax"]),
             event(1, "add", "arithmetic", reads=["eax"], writes=["eax"]),
             event(2, "mov", "data_move", writes=["al"])]
    (acc,) = summarize_registers(trace, Bitness.PE32)
    assert acc.family is F.ACC
    assert (acc.update_count, acc.read_count, acc.write_count) == (3, 1, 3)
    assert acc.read_write_ratio == 0.25
    assert dict(acc.context_histogram) == {"arithmetic": 2, "data_move": 2}


def test_summary_empty_and_stack_only():
    assert summarize_registers([], Bitness.PE32) == []
    trace = [event(0, "push", "memory_write", reads=["ebp", "esp"], writes=["esp"]),
             event(1, "mov", "data_move", reads=["esp"], writes=["ebp"])]
    fams = [s.family for s in summarize_registers(trace, Bitness.PE32)]
    assert fams == [F.SP, F.BP]


def test_summary_propagates_unknown_register():
    with pytest.raises(UnknownRegister):
        summarize_registers([event(0, "mov", writes=["r8"])], Bitness.PE32)
