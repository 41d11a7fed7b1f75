"""Canonical (minimal-LEB) re-encoder for parsed modules.

Re-serializing a module produced by parser.parse_module reproduces the input
bytes exactly for binaries that were themselves canonically encoded, which
covers everything the corpus builder emits.
"""

from ..errors import MalformedBinary
from . import opcodes as op
from .parser import decode_instructions


def uleb(value):
    if value < 0:
        raise MalformedBinary("unsigned LEB from negative value")
    out = bytearray()
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def sleb(value):
    out = bytearray()
    while True:
        b = value & 0x7F
        value >>= 7
        done = (value == 0 and not b & 0x40) or (value == -1 and b & 0x40)
        out.append(b if done else b | 0x80)
        if done:
            return bytes(out)


def _string(s):
    raw = s.encode("utf-8")
    return uleb(len(raw)) + raw


def encode_instruction(instr):
    name, kind = op.OPCODES[instr.opcode]
    out = bytearray([instr.opcode])
    imms = instr.immediates
    if kind == "":
        pass
    elif kind == "idx":
        out += uleb(imms[0])
    elif kind == "memarg":
        out += uleb(imms[0]) + uleb(imms[1])
    elif kind == "i32" or kind == "i64":
        out += sleb(imms[0])
    elif kind == "blocktype":
        out.append(op.BLOCKTYPE_EMPTY if imms[0] is None else op.VALTYPE_CODES[imms[0]])
    elif kind == "br_table":
        targets, default = imms
        out += uleb(len(targets))
        for t in targets:
            out += uleb(t)
        out += uleb(default)
    elif kind == "typeidx+b":
        out += uleb(imms[0])
        out.append(imms[1])
    elif kind == "byte":
        out.append(imms[0])
    elif kind in ("f32", "f64"):
        out += imms[0]
    else:  # pragma: no cover
        raise MalformedBinary(f"bad immediate kind {kind} for {name}")
    return bytes(out)


def encode_expression(instructions):
    return b"".join(encode_instruction(i) for i in instructions)


def _limits(lims):
    lo, hi = lims
    if hi is None:
        return b"\x00" + uleb(lo)
    return b"\x01" + uleb(lo) + uleb(hi)


def _const_expr(name, value):
    return bytes([op.NAME_TO_OPCODE[name]]) + sleb(value) + b"\x0b"


def _section(sec_id, payload):
    return bytes([sec_id]) + uleb(len(payload)) + payload


def serialize_module(mod):
    """Encode a WasmModule back to binary, honoring recorded section order."""
    chunks = [b"\x00asm", mod.version.to_bytes(4, "little")]
    order = mod.section_order or _default_order(mod)
    for entry in order:
        if isinstance(entry, tuple):
            _, custom_idx = entry
            _, raw = mod.custom_sections[custom_idx]
            chunks.append(_section(op.SEC_CUSTOM, raw))
            continue
        payload = _SECTION_WRITERS[entry](mod)
        if payload is None:
            continue
        chunks.append(_section(entry, payload))
    return b"".join(chunks)


def _default_order(mod):
    order = []
    if mod.types:
        order.append(op.SEC_TYPE)
    if mod.imports:
        order.append(op.SEC_IMPORT)
    if mod.functions:
        order.append(op.SEC_FUNCTION)
    if mod.tables:
        order.append(op.SEC_TABLE)
    if mod.memory_limits:
        order.append(op.SEC_MEMORY)
    if mod.globals:
        order.append(op.SEC_GLOBAL)
    if mod.exports:
        order.append(op.SEC_EXPORT)
    if mod.start is not None:
        order.append(op.SEC_START)
    if mod.element_segments:
        order.append(op.SEC_ELEMENT)
    if mod.code:
        order.append(op.SEC_CODE)
    if mod.data_segments:
        order.append(op.SEC_DATA)
    order.extend(("custom", i) for i in range(len(mod.custom_sections)))
    return order


def _write_type(mod):
    out = bytearray(uleb(len(mod.types)))
    for sig in mod.types:
        out.append(0x60)
        out += uleb(len(sig.params))
        for p in sig.params:
            out.append(op.VALTYPE_CODES[p])
        out += uleb(len(sig.results))
        for r in sig.results:
            out.append(op.VALTYPE_CODES[r])
    return bytes(out)


def _write_import(mod):
    out = bytearray(uleb(len(mod.imports)))
    for imp in mod.imports:
        out += _string(imp.module) + _string(imp.field)
        if imp.kind == "function":
            out.append(0)
            out += uleb(imp.type_index)
        elif imp.kind == "table":
            out.append(1)
            out.append(imp.desc[0])
            out += _limits(imp.desc[1:])
        elif imp.kind == "memory":
            out.append(2)
            out += _limits(imp.desc)
        else:
            out.append(3)
            out.append(op.VALTYPE_CODES[imp.desc[0]])
            out.append(imp.desc[1])
    return bytes(out)


def _write_function(mod):
    out = bytearray(uleb(len(mod.functions)))
    for ti in mod.functions:
        out += uleb(ti)
    return bytes(out)


def _write_table(mod):
    out = bytearray(uleb(len(mod.tables)))
    for _, lo, hi in mod.tables:
        out.append(0x70)
        out += _limits((lo, hi))
    return bytes(out)


def _write_memory(mod):
    return uleb(1) + _limits(mod.memory_limits)


def _write_global(mod):
    out = bytearray(uleb(len(mod.globals)))
    for g in mod.globals:
        out.append(op.VALTYPE_CODES[g.valtype])
        out.append(1 if g.mutable else 0)
        out += _const_expr(f"{g.valtype}.const", g.init_value)
    return bytes(out)


def _write_export(mod):
    kinds = {"function": 0, "table": 1, "memory": 2, "global": 3}
    out = bytearray(uleb(len(mod.exports)))
    for name, (kind, idx) in mod.exports.items():
        out += _string(name)
        out.append(kinds[kind])
        out += uleb(idx)
    return bytes(out)


def _write_start(mod):
    return uleb(mod.start)


def _write_element(mod):
    out = bytearray(uleb(len(mod.element_segments)))
    for seg in mod.element_segments:
        out += uleb(0)
        out += _const_expr("i32.const", seg.offset)
        out += uleb(len(seg.func_indices))
        for fi in seg.func_indices:
            out += uleb(fi)
    return bytes(out)


def _write_code(mod):
    out = bytearray(uleb(len(mod.code)))
    for body in mod.code:
        entry = bytearray(uleb(len(body.locals)))
        for count, vt in body.locals:
            entry += uleb(count)
            entry.append(op.VALTYPE_CODES[vt])
        entry += body.expr
        out += uleb(len(entry)) + entry
    return bytes(out)


def _write_data(mod):
    out = bytearray(uleb(len(mod.data_segments)))
    for seg in mod.data_segments:
        out += uleb(0)
        out += _const_expr("i32.const", seg.offset)
        out += uleb(len(seg.data)) + seg.data
    return bytes(out)


_SECTION_WRITERS = {
    op.SEC_TYPE: _write_type,
    op.SEC_IMPORT: _write_import,
    op.SEC_FUNCTION: _write_function,
    op.SEC_TABLE: _write_table,
    op.SEC_MEMORY: _write_memory,
    op.SEC_GLOBAL: _write_global,
    op.SEC_EXPORT: _write_export,
    op.SEC_START: _write_start,
    op.SEC_ELEMENT: _write_element,
    op.SEC_CODE: _write_code,
    op.SEC_DATA: _write_data,
}


def roundtrips(data):
    """True when parse -> serialize reproduces the exact input bytes."""
    from .parser import parse_module

    return serialize_module(parse_module(data)) == data
