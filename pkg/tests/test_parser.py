import pytest

from eosscan.errors import MalformedBinary, UnsupportedVersion
from eosscan.wasm import (
    ModuleBuilder,
    decode_function_body,
    decode_instructions,
    parse_module,
    serialize_module,
)

EMPTY = b"\x00asm" + (1).to_bytes(4, "little")


def test_minimal_module():
    mod = parse_module(EMPTY)
    assert mod.version == 1
    assert mod.types == []
    assert mod.imports == []
    assert mod.functions == []
    assert mod.code == []
    assert mod.exports == {}
    assert mod.data_segments == []


def test_bad_magic():
    with pytest.raises(MalformedBinary):
        parse_module(b"\x00bsm" + (1).to_bytes(4, "little"))


def test_bad_version():
    with pytest.raises(UnsupportedVersion):
        parse_module(b"\x00asm" + (2).to_bytes(4, "little"))


def _apply_module():
    b = ModuleBuilder()
    b.function(
        "apply",
        params=("i64", "i64", "i64"),
        body=[("nop",), ("end",)],
    )
    b.export_function("apply", "apply")
    b.memory(1)
    return b.build()


def test_exported_apply_function():
    # The builder acts as the independent reference assembler here.
    mod = parse_module(_apply_module())
    assert mod.exports["apply"] == ("function", 0)
    sig = mod.signature_of(0)
    assert sig.params == ("i64", "i64", "i64")
    assert sig.results == ()


def test_truncated_code_section():
    data = bytearray(_apply_module())
    with pytest.raises(MalformedBinary):
        parse_module(bytes(data[:-2]))


def test_function_code_mismatch():
    # Function section declares one function but code section is empty.
    data = EMPTY + bytes([3, 2, 1, 0])  # function section: count=1, type 0
    with pytest.raises(MalformedBinary):
        parse_module(data)


def test_decode_simple_body():
    b = ModuleBuilder()
    b.function("f", results=("i64",), body=[("i64.const", 0), ("end",)])
    mod = parse_module(b.build())
    instrs = decode_function_body(mod.body_of(0))
    assert [i.name for i in instrs] == ["i64.const", "end"]
    assert instrs[0].immediates == (0,)


def test_decode_br_table_immediates():
    b = ModuleBuilder()
    b.function(
        "f",
        params=("i32",),
        body=[
            ("block", None),
            ("block", None),
            ("block", None),
            ("local.get", 0),
            ("br_table", (0, 1, 2), 0),
            ("end",),
            ("end",),
            ("end",),
            ("end",),
        ],
    )
    mod = parse_module(b.build())
    instrs = decode_function_body(mod.body_of(0))
    table = [i for i in instrs if i.name == "br_table"]
    assert len(table) == 1
    targets, default = table[0].immediates
    assert targets == (0, 1, 2)
    assert default == 0
    # 3 explicit targets + the default
    assert len(targets) + 1 == 4


def test_body_missing_terminal_end():
    with pytest.raises(MalformedBinary):
        decode_instructions(bytes([0x41, 0x00]))  # i32.const 0, no end


def test_unbalanced_nesting():
    with pytest.raises(MalformedBinary):
        decode_instructions(bytes([0x02, 0x40, 0x0B]) + b"")[0]  # block end, missing outer end
    with pytest.raises(MalformedBinary):
        decode_instructions(bytes([0x02, 0x40]))  # block never closed


def test_unknown_opcode():
    with pytest.raises(MalformedBinary):
        decode_instructions(bytes([0xFE, 0x0B]))


def test_leb_overflow_rejected():
    # 6-byte u32 LEB: one continuation too many.
    data = EMPTY + bytes([1, 7, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0x7F])
    with pytest.raises(MalformedBinary):
        parse_module(data)


def test_custom_section_retained_and_name_decoded():
    b = ModuleBuilder()
    b.function("apply", params=("i64", "i64", "i64"), body=[("end",)])
    b.export_function("apply", "apply")
    raw = bytearray(b.build())
    # Append a name section: subsection 1 (function names), one entry.
    name_payload = bytes([1]) + _name_subsection({0: "apply"})
    sec_body = _string(b"name") + name_payload[1:]
    raw += bytes([0]) + _uleb(len(sec_body)) + sec_body
    mod = parse_module(bytes(raw))
    assert mod.custom_sections and mod.custom_sections[0][0] == "name"
    assert mod.name_map == {0: "apply"}
    assert serialize_module(mod) == bytes(raw)


def _uleb(n):
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        out.append(b | 0x80 if n else b)
        if not n:
            return bytes(out)


def _string(raw):
    return _uleb(len(raw)) + raw


def _name_subsection(names):
    entries = bytearray(_uleb(len(names)))
    for idx, name in names.items():
        entries += _uleb(idx) + _string(name.encode())
    return bytes([1]) + _uleb(len(entries)) + bytes(entries)


def test_parse_deterministic():
    data = _apply_module()
    m1, m2 = parse_module(data), parse_module(data)
    assert m1 == m2


def test_roundtrip_builder_outputs():
    modules = [EMPTY, _apply_module()]
    b = ModuleBuilder()
    b.import_function("env", "current_time", results=("i64",))
    b.function(
        "apply",
        params=("i64", "i64", "i64"),
        locals=((2, "i64"),),
        body=[
            ("call", 0),
            ("local.set", 3),
            ("block", None),
            ("local.get", 3),
            ("i64.const", -5),
            ("i64.eq",),
            ("br_if", 0),
            ("end",),
            ("end",),
        ],
    )
    b.export_function("apply", "apply")
    b.memory(1, 4)
    b.data(16, b"hello\x00")
    modules.append(b.build())
    for data in modules:
        assert serialize_module(parse_module(data)) == data
