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
from .parser import decode_function_body, decode_instructions, parse_module
from .serializer import serialize_module
from .builder import ModuleBuilder

__all__ = [
    "DataSegment",
    "ElementSegment",
    "FuncSignature",
    "FunctionBody",
    "GlobalDef",
    "ImportEntry",
    "Instruction",
    "WasmModule",
    "ModuleBuilder",
    "decode_function_body",
    "decode_instructions",
    "parse_module",
    "serialize_module",
]
