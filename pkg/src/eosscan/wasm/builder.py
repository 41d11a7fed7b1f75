"""Programmatic Wasm module builder.

Assembles version-1 binaries from instruction tuples, used to craft the test
corpus and as the independent reference encoder the parser tests compare
against. Function operands of `call` may be names of functions declared on
the builder; they resolve to flat indices at build() time.
"""

from ..errors import MalformedBinary
from . import opcodes as op
from .module import Instruction
from .serializer import encode_instruction, sleb, uleb


class ModuleBuilder:
    def __init__(self):
        self._types = []
        self._imports = []          # (module, field, type index)
        self._funcs = []            # (name, type index, locals, body)
        self._exports = []          # (name, kind code, index or func name)
        self._memory = None
        self._globals = []          # (valtype, mutable, init)
        self._data = []             # (offset, bytes)
        self._elements = []         # (offset, [func name or index])
        self._table = None

    def _type_index(self, params, results):
        sig = (tuple(params), tuple(results))
        for i, existing in enumerate(self._types):
            if existing == sig:
                return i
        self._types.append(sig)
        return len(self._types) - 1

    def import_function(self, module, field, params=(), results=()):
        self._imports.append((module, field, self._type_index(params, results)))
        return len(self._imports) - 1

    def function(self, name, params=(), results=(), locals=(), body=()):
        """Declare a local function; body is a list of (mnemonic, *immediates)."""
        ti = self._type_index(params, results)
        self._funcs.append((name, ti, tuple(locals), list(body)))
        return name

    def export_function(self, export_name, func_name):
        self._exports.append((export_name, 0, func_name))

    def export_memory(self, export_name="memory"):
        self._exports.append((export_name, 2, 0))

    def memory(self, min_pages=1, max_pages=None):
        self._memory = (min_pages, max_pages)

    def global_(self, valtype, mutable, init):
        self._globals.append((valtype, mutable, init))
        return len(self._globals) - 1

    def data(self, offset, raw):
        self._data.append((offset, bytes(raw)))

    def table_elements(self, offset, funcs):
        self._elements.append((offset, list(funcs)))

    def func_index(self, name):
        for i, (fname, *_rest) in enumerate(self._funcs):
            if fname == name:
                return len(self._imports) + i
        raise KeyError(name)

    # -- encoding --

    def _resolve(self, operand):
        return self.func_index(operand) if isinstance(operand, str) else operand

    def _encode_body(self, body):
        out = bytearray()
        for entry in body:
            mnemonic, *imms = entry if isinstance(entry, tuple) else (entry,)
            code = op.NAME_TO_OPCODE.get(mnemonic)
            if code is None:
                raise MalformedBinary(f"unknown mnemonic {mnemonic!r}")
            kind = op.OPCODES[code][1]
            if mnemonic in ("call",):
                imms = [self._resolve(imms[0])]
            if kind == "memarg" and len(imms) == 1:
                imms = [0, imms[0]]       # (offset,) shorthand, align 0
            if kind == "memarg" and not imms:
                imms = [0, 0]
            if kind == "byte" and not imms:
                imms = [0]
            if kind == "typeidx+b" and len(imms) == 1:
                imms = [self._type_index(*imms[0]) if isinstance(imms[0], tuple) else imms[0], 0]
            if kind == "br_table":
                targets, default = imms
                imms = [tuple(targets), default]
            out += encode_instruction(Instruction(code, mnemonic, tuple(imms), 0))
        if not body or body[-1] != ("end",) and body[-1] != "end":
            out += b"\x0b"
        return bytes(out)

    def build(self):
        chunks = [b"\x00asm", (1).to_bytes(4, "little")]

        def section(sec_id, payload):
            chunks.append(bytes([sec_id]) + uleb(len(payload)) + payload)

        if self._types:
            out = bytearray(uleb(len(self._types)))
            for params, results in self._types:
                out.append(0x60)
                out += uleb(len(params))
                out += bytes(op.VALTYPE_CODES[p] for p in params)
                out += uleb(len(results))
                out += bytes(op.VALTYPE_CODES[r] for r in results)
            section(op.SEC_TYPE, bytes(out))

        if self._imports:
            out = bytearray(uleb(len(self._imports)))
            for module, field, ti in self._imports:
                for s in (module, field):
                    raw = s.encode()
                    out += uleb(len(raw)) + raw
                out.append(0)
                out += uleb(ti)
            section(op.SEC_IMPORT, bytes(out))

        if self._funcs:
            out = bytearray(uleb(len(self._funcs)))
            for _, ti, _, _ in self._funcs:
                out += uleb(ti)
            section(op.SEC_FUNCTION, bytes(out))

        if self._elements and self._table is None:
            slots = max(off + len(fs) for off, fs in self._elements)
            self._table = (slots, slots)
        if self._table:
            lo, hi = self._table
            payload = uleb(1) + b"\x70" + (b"\x01" + uleb(lo) + uleb(hi))
            section(op.SEC_TABLE, payload)

        if self._memory:
            lo, hi = self._memory
            if hi is None:
                section(op.SEC_MEMORY, uleb(1) + b"\x00" + uleb(lo))
            else:
                section(op.SEC_MEMORY, uleb(1) + b"\x01" + uleb(lo) + uleb(hi))

        if self._globals:
            out = bytearray(uleb(len(self._globals)))
            for valtype, mutable, init in self._globals:
                out.append(op.VALTYPE_CODES[valtype])
                out.append(1 if mutable else 0)
                out.append(op.NAME_TO_OPCODE[f"{valtype}.const"])
                out += sleb(init)
                out.append(0x0B)
            section(op.SEC_GLOBAL, bytes(out))

        if self._exports:
            out = bytearray(uleb(len(self._exports)))
            for name, kind, target in self._exports:
                raw = name.encode()
                out += uleb(len(raw)) + raw
                out.append(kind)
                out += uleb(self._resolve(target) if kind == 0 else target)
            section(op.SEC_EXPORT, bytes(out))

        if self._elements:
            out = bytearray(uleb(len(self._elements)))
            for offset, funcs in self._elements:
                out += uleb(0)
                out.append(op.NAME_TO_OPCODE["i32.const"])
                out += sleb(offset)
                out.append(0x0B)
                out += uleb(len(funcs))
                for f in funcs:
                    out += uleb(self._resolve(f))
            section(op.SEC_ELEMENT, bytes(out))

        if self._funcs:
            out = bytearray(uleb(len(self._funcs)))
            for _, _, locals_, body in self._funcs:
                entry = bytearray(uleb(len(locals_)))
                for count, vt in locals_:
                    entry += uleb(count)
                    entry.append(op.VALTYPE_CODES[vt])
                entry += self._encode_body(body)
                out += uleb(len(entry)) + entry
            section(op.SEC_CODE, bytes(out))

        if self._data:
            out = bytearray(uleb(len(self._data)))
            for offset, raw in self._data:
                out += uleb(0)
                out.append(op.NAME_TO_OPCODE["i32.const"])
                out += sleb(offset)
                out.append(0x0B)
                out += uleb(len(raw)) + raw
            section(op.SEC_DATA, bytes(out))

        return b"".join(chunks)
