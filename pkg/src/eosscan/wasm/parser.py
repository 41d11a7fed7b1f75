"""Binary Wasm (version 1) decoder.

Decoding is total and deterministic: the same bytes always produce the same
module, and anything outside the understood grammar raises MalformedBinary
instead of guessing. Custom sections are kept verbatim so a parsed module can
be re-serialized byte-exactly.
"""

from ..errors import MalformedBinary, UnsupportedVersion
from . import opcodes as op
from .module import (
    DataSegment,
    ElementSegment,
    FuncSignature,
    FunctionBody,
    GlobalDef,
    ImportEntry,
    Instruction,
    WasmModule,
)

MAGIC = b"\x00asm"


class _Cursor:
    __slots__ = ("data", "pos", "end")

    def __init__(self, data, pos=0, end=None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def eof(self):
        return self.pos >= self.end

    def byte(self):
        if self.pos >= self.end:
            raise MalformedBinary("unexpected end of input")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def raw(self, n):
        if self.pos + n > self.end:
            raise MalformedBinary("truncated byte run")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return bytes(out)

    def u32(self):
        return self._uleb(32)

    def s32(self):
        return self._sleb(32)

    def s64(self):
        return self._sleb(64)

    def _uleb(self, bits):
        result = shift = 0
        maxbytes = (bits + 6) // 7
        for _ in range(maxbytes):
            b = self.byte()
            result |= (b & 0x7F) << shift
            shift += 7
            if not (b & 0x80):
                if result >> bits:
                    raise MalformedBinary("LEB128 overflow")
                return result
        raise MalformedBinary("LEB128 overflow")

    def _sleb(self, bits):
        result = shift = 0
        maxbytes = (bits + 6) // 7
        for _ in range(maxbytes):
            b = self.byte()
            result |= (b & 0x7F) << shift
            shift += 7
            if not (b & 0x80):
                if b & 0x40 and shift < bits + 7:
                    result |= -(1 << shift)
                lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
                if not lo <= result <= hi:
                    raise MalformedBinary("signed LEB128 overflow")
                return result
        raise MalformedBinary("signed LEB128 overflow")

    def string(self):
        n = self.u32()
        try:
            return self.raw(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedBinary("invalid UTF-8 name") from exc

    def valtype(self):
        b = self.byte()
        if b not in op.VALTYPES:
            raise MalformedBinary(f"unknown value type 0x{b:02x}")
        return op.VALTYPES[b]


def decode_instructions(expr, base_offset=0):
    """Decode an expression (bytes ending in `end`) to an instruction list.

    The list keeps the terminal `end`. Nesting must balance; an unknown
    opcode or a body that runs out before closing raises MalformedBinary.
    """
    cur = _Cursor(expr)
    out = []
    depth = 0
    while True:
        if cur.eof():
            raise MalformedBinary("expression missing terminal end")
        at = cur.pos
        code = cur.byte()
        if code not in op.OPCODES:
            raise MalformedBinary(f"unknown opcode 0x{code:02x} at {base_offset + at}")
        name, imm_kind = op.OPCODES[code]
        imms = _decode_immediates(cur, imm_kind)
        out.append(Instruction(code, name, imms, base_offset + at))
        if name in ("block", "loop", "if"):
            depth += 1
        elif name == "end":
            if depth == 0:
                if not cur.eof():
                    raise MalformedBinary("trailing bytes after terminal end")
                return out
            depth -= 1
    raise MalformedBinary("unbalanced nesting")  # pragma: no cover


def _decode_immediates(cur, kind):
    if kind == "":
        return ()
    if kind == "idx":
        return (cur.u32(),)
    if kind == "memarg":
        return (cur.u32(), cur.u32())
    if kind == "i32":
        return (cur.s32(),)
    if kind == "i64":
        return (cur.s64(),)
    if kind == "blocktype":
        b = cur.byte()
        if b == op.BLOCKTYPE_EMPTY:
            return (None,)
        if b not in op.VALTYPES:
            raise MalformedBinary(f"unsupported block type 0x{b:02x}")
        return (op.VALTYPES[b],)
    if kind == "br_table":
        n = cur.u32()
        targets = tuple(cur.u32() for _ in range(n))
        default = cur.u32()
        return (targets, default)
    if kind == "typeidx+b":
        return (cur.u32(), cur.byte())
    if kind == "byte":
        return (cur.byte(),)
    if kind == "f32":
        return (cur.raw(4),)
    if kind == "f64":
        return (cur.raw(8),)
    raise MalformedBinary(f"bad immediate kind {kind}")  # pragma: no cover


def decode_function_body(body):
    """Decode one FunctionBody's expression to instructions."""
    return decode_instructions(body.expr, body.body_offset)


def _const_expr(cur, want=("i32.const", "i64.const")):
    """Initializer expressions are restricted to a single const + end."""
    instrs = decode_instructions(cur.data[cur.pos:cur.end], cur.pos)
    cur.pos = cur.end
    if len(instrs) != 2 or instrs[0].name not in want or instrs[1].name != "end":
        raise MalformedBinary("initializer must be a single constant expression")
    return instrs[0].immediates[0]


def parse_module(data):
    """Decode a binary Wasm module.

    Raises MalformedBinary for structural damage and UnsupportedVersion when
    the version word is not 1.
    """
    if len(data) < 8 or data[:4] != MAGIC:
        raise MalformedBinary("bad magic number")
    version = int.from_bytes(data[4:8], "little")
    if version != 1:
        raise UnsupportedVersion(f"wasm version {version} not supported")

    mod = WasmModule(version=version)
    cur = _Cursor(data, 8)
    last_id = 0
    while not cur.eof():
        sec_id = cur.byte()
        size = cur.u32()
        if cur.pos + size > cur.end:
            raise MalformedBinary("truncated section")
        body = _Cursor(data, cur.pos, cur.pos + size)
        cur.pos += size
        if sec_id == op.SEC_CUSTOM:
            _parse_custom(body, mod)
            mod.section_order.append(("custom", len(mod.custom_sections) - 1))
            continue
        if sec_id in _SECTION_PARSERS:
            if sec_id <= last_id:
                raise MalformedBinary(f"section {sec_id} out of order")
            last_id = sec_id
            _SECTION_PARSERS[sec_id](body, mod)
            if not body.eof():
                raise MalformedBinary(f"section {sec_id} has trailing bytes")
            mod.section_order.append(sec_id)
        else:
            raise MalformedBinary(f"unknown section id {sec_id}")

    _check_module(mod)
    return mod


def _parse_custom(cur, mod):
    start = cur.pos
    name = cur.string()
    payload = cur.raw(cur.end - cur.pos)
    mod.custom_sections.append((name, bytes(cur.data[start:cur.end])))
    if name == "name":
        try:
            mod.name_map = _parse_name_section(payload)
        except MalformedBinary:
            mod.name_map = None  # diagnostics only; never fatal


def _parse_name_section(payload):
    cur = _Cursor(payload)
    names = {}
    while not cur.eof():
        sub_id = cur.byte()
        size = cur.u32()
        sub = _Cursor(payload, cur.pos, cur.pos + size)
        cur.pos += size
        if sub_id == 1:  # function names
            count = sub.u32()
            for _ in range(count):
                idx = sub.u32()
                names[idx] = sub.string()
    return names


def _parse_type(cur, mod):
    for _ in range(cur.u32()):
        form = cur.byte()
        if form != 0x60:
            raise MalformedBinary("type section entry is not a func type")
        params = tuple(cur.valtype() for _ in range(cur.u32()))
        results = tuple(cur.valtype() for _ in range(cur.u32()))
        if len(results) > 1:
            raise MalformedBinary("multi-value results not supported")
        mod.types.append(FuncSignature(params, results))


def _parse_import(cur, mod):
    for _ in range(cur.u32()):
        module = cur.string()
        field = cur.string()
        kind = cur.byte()
        if kind == 0:
            idx = cur.u32()
            mod.imports.append(ImportEntry(module, field, "function", type_index=idx))
        elif kind == 1:
            elemtype = cur.byte()
            desc = (elemtype,) + _limits(cur)
            mod.imports.append(ImportEntry(module, field, "table", desc=desc))
        elif kind == 2:
            mod.imports.append(ImportEntry(module, field, "memory", desc=_limits(cur)))
        elif kind == 3:
            desc = (cur.valtype(), cur.byte())
            mod.imports.append(ImportEntry(module, field, "global", desc=desc))
        else:
            raise MalformedBinary(f"unknown import kind {kind}")


def _limits(cur):
    flag = cur.byte()
    if flag == 0:
        return (cur.u32(), None)
    if flag == 1:
        return (cur.u32(), cur.u32())
    raise MalformedBinary(f"bad limits flag {flag}")


def _parse_function(cur, mod):
    mod.functions = [cur.u32() for _ in range(cur.u32())]


def _parse_table(cur, mod):
    for _ in range(cur.u32()):
        elemtype = cur.byte()
        if elemtype != 0x70:
            raise MalformedBinary("table element type must be funcref")
        mod.tables.append(("funcref",) + _limits(cur))


def _parse_memory(cur, mod):
    n = cur.u32()
    if n > 1:
        raise MalformedBinary("at most one memory supported")
    if n:
        mod.memory_limits = _limits(cur)


def _parse_global(cur, mod):
    for _ in range(cur.u32()):
        valtype = cur.valtype()
        mutable = cur.byte()
        if mutable not in (0, 1):
            raise MalformedBinary("bad global mutability flag")
        want = ("i32.const",) if valtype == "i32" else ("i64.const",)
        value = _const_expr(_globals_expr(cur), want)
        mod.globals.append(GlobalDef(valtype, bool(mutable), value))


def _globals_expr(cur):
    # Initializer expressions are not length-prefixed; scan to the `end`.
    start = cur.pos
    depth = 0
    probe = _Cursor(cur.data, cur.pos, cur.end)
    while True:
        code = probe.byte()
        if code not in op.OPCODES:
            raise MalformedBinary(f"unknown opcode 0x{code:02x} in initializer")
        name, imm_kind = op.OPCODES[code]
        _decode_immediates(probe, imm_kind)
        if name in ("block", "loop", "if"):
            depth += 1
        elif name == "end":
            if depth == 0:
                break
            depth -= 1
    sub = _Cursor(cur.data, start, probe.pos)
    cur.pos = probe.pos
    return sub


def _parse_export(cur, mod):
    kinds = {0: "function", 1: "table", 2: "memory", 3: "global"}
    for _ in range(cur.u32()):
        name = cur.string()
        kind = cur.byte()
        if kind not in kinds:
            raise MalformedBinary(f"unknown export kind {kind}")
        if name in mod.exports:
            raise MalformedBinary(f"duplicate export {name!r}")
        mod.exports[name] = (kinds[kind], cur.u32())


def _parse_start(cur, mod):
    mod.start = cur.u32()


def _parse_element(cur, mod):
    for _ in range(cur.u32()):
        table_idx = cur.u32()
        if table_idx != 0:
            raise MalformedBinary("element segment must target table 0")
        offset = _const_expr(_globals_expr(cur), ("i32.const",))
        funcs = tuple(cur.u32() for _ in range(cur.u32()))
        mod.element_segments.append(ElementSegment(offset, funcs))


def _parse_code(cur, mod):
    for _ in range(cur.u32()):
        size = cur.u32()
        body_end = cur.pos + size
        if body_end > cur.end:
            raise MalformedBinary("truncated code entry")
        sub = _Cursor(cur.data, cur.pos, body_end)
        locals_ = []
        for _ in range(sub.u32()):
            count = sub.u32()
            locals_.append((count, sub.valtype()))
        expr_offset = sub.pos
        expr = sub.raw(body_end - sub.pos)
        decode_instructions(expr, expr_offset)  # reject malformed bodies eagerly
        mod.code.append(FunctionBody(tuple(locals_), expr, expr_offset))
        cur.pos = body_end


def _parse_data(cur, mod):
    for _ in range(cur.u32()):
        mem_idx = cur.u32()
        if mem_idx != 0:
            raise MalformedBinary("data segment must target memory 0")
        offset = _const_expr(_globals_expr(cur), ("i32.const",))
        data = cur.raw(cur.u32())
        mod.data_segments.append(DataSegment(offset, data))


_SECTION_PARSERS = {
    op.SEC_TYPE: _parse_type,
    op.SEC_IMPORT: _parse_import,
    op.SEC_FUNCTION: _parse_function,
    op.SEC_TABLE: _parse_table,
    op.SEC_MEMORY: _parse_memory,
    op.SEC_GLOBAL: _parse_global,
    op.SEC_EXPORT: _parse_export,
    op.SEC_START: _parse_start,
    op.SEC_ELEMENT: _parse_element,
    op.SEC_CODE: _parse_code,
    op.SEC_DATA: _parse_data,
}


def _check_module(mod):
    if len(mod.code) != len(mod.functions):
        raise MalformedBinary(
            f"function/code section mismatch ({len(mod.functions)} vs {len(mod.code)})"
        )
    n = mod.num_functions
    for ti in mod.functions:
        if ti >= len(mod.types):
            raise MalformedBinary("function type index out of range")
    for imp in mod.imported_functions:
        if imp.type_index >= len(mod.types):
            raise MalformedBinary("import type index out of range")
    for name, (kind, idx) in mod.exports.items():
        if kind == "function" and idx >= n:
            raise MalformedBinary(f"export {name!r} index out of range")
    for seg in mod.element_segments:
        for fi in seg.func_indices:
            if fi >= n:
                raise MalformedBinary("element function index out of range")
