"""Structured representation of a decoded Wasm module."""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class FuncSignature:
    params: tuple
    results: tuple

    def __str__(self):
        return f"({','.join(self.params)})->({','.join(self.results)})"


@dataclass(frozen=True)
class ImportEntry:
    module: str
    field: str
    kind: str               # 'function' | 'table' | 'memory' | 'global'
    type_index: int = None  # functions only
    desc: tuple = None      # raw descriptor for non-function imports


@dataclass(frozen=True)
class Instruction:
    opcode: int
    name: str
    immediates: tuple
    byte_offset: int

    def __repr__(self):
        if self.immediates:
            return f"<{self.name} {' '.join(map(str, self.immediates))} @{self.byte_offset}>"
        return f"<{self.name} @{self.byte_offset}>"


@dataclass
class FunctionBody:
    locals: tuple           # ((count, valtype), ...) as declared
    expr: bytes             # raw expression bytes, terminal 'end' included
    body_offset: int = 0    # offset of expr within the original binary


@dataclass
class GlobalDef:
    valtype: str
    mutable: bool
    init_value: int


@dataclass
class DataSegment:
    offset: int
    data: bytes


@dataclass
class ElementSegment:
    offset: int
    func_indices: tuple


@dataclass
class WasmModule:
    version: int = 1
    types: list = field(default_factory=list)            # [FuncSignature]
    imports: list = field(default_factory=list)          # [ImportEntry]
    functions: list = field(default_factory=list)        # [type index] per local function
    tables: list = field(default_factory=list)           # [(elemtype, min, max)]
    memory_limits: tuple = None                          # (min_pages, max_pages|None)
    globals: list = field(default_factory=list)          # [GlobalDef]
    exports: dict = field(default_factory=dict)          # name -> (kind, index)
    start: int = None
    element_segments: list = field(default_factory=list)  # [ElementSegment]
    code: list = field(default_factory=list)             # [FunctionBody]
    data_segments: list = field(default_factory=list)    # [DataSegment]
    custom_sections: list = field(default_factory=list)  # [(name, raw bytes)]
    name_map: dict = None                                # func index -> debug name
    section_order: list = field(default_factory=list)    # ids / ('custom', i) in file order

    # -- flat function index space (imports first, then local definitions) --

    @property
    def imported_functions(self):
        return [imp for imp in self.imports if imp.kind == "function"]

    @property
    def num_imported_functions(self):
        return sum(1 for imp in self.imports if imp.kind == "function")

    @property
    def num_functions(self):
        return self.num_imported_functions + len(self.functions)

    def is_imported(self, func_index):
        return func_index < self.num_imported_functions

    def signature_of(self, func_index):
        n = self.num_imported_functions
        if func_index < n:
            return self.types[self.imported_functions[func_index].type_index]
        return self.types[self.functions[func_index - n]]

    def import_name(self, func_index):
        return self.imported_functions[func_index].field

    def body_of(self, func_index):
        return self.code[func_index - self.num_imported_functions]

    @property
    def elements(self):
        """Table initializer function indices, in slot order."""
        out = []
        for seg in self.element_segments:
            out.extend(seg.func_indices)
        return out

    def element_slots(self):
        """Map of table slot -> function index from all element segments."""
        slots = {}
        for seg in self.element_segments:
            for i, fi in enumerate(seg.func_indices):
                slots[seg.offset + i] = fi
        return slots

    def memory_bound(self):
        """Byte bound of the linear memory (one page when undeclared)."""
        pages = self.memory_limits[0] if self.memory_limits else 1
        return max(pages, 1) * 65536

    def function_label(self, func_index):
        if self.name_map and func_index in self.name_map:
            return self.name_map[func_index]
        if self.is_imported(func_index):
            return self.import_name(func_index)
        return f"func{func_index}"
