import random

import pytest

from eosscan.errors import AddressOverflow, MemoryAuditError, WidthMismatch
from eosscan.symbolic import expr as E
from eosscan.symbolic.memory import SymbolicMemory


class FlatOracle:
    """Reference semantics: a plain byte array plus a written mask."""

    def __init__(self, size=65536):
        self.data = bytearray(size)
        self.written = bytearray(size)

    def store(self, dest, length, value):
        for i in range(length):
            self.data[dest + i] = (value >> (8 * i)) & 0xFF
            self.written[dest + i] = 1

    def load(self, src, length):
        v = 0
        for i in reversed(range(length)):
            v = (v << 8) | self.data[src + i]
        return v

    def fully_written(self, src, length):
        return all(self.written[src + i] for i in range(length))


def test_paper_worked_example():
    # {(0,2) -> a0|a1, (3,4) -> a3}; storing (2,4) -> a2|a3' merges to one key.
    a0, a1, a3 = E.var(8, "a0"), E.var(8, "a1"), E.var(8, "a3")
    a2, a3p = E.var(8, "a2"), E.var(8, "a3'")
    sm = SymbolicMemory(bound=64)
    sm.store(0, 2, E.concat(a1, a0))
    sm.store(3, 1, a3)
    assert sm.keys() == [(0, 2), (3, 4)]
    sm.store(2, 2, E.concat(a3p, a2))
    assert sm.keys() == [(0, 4)]
    sm.audit()
    merged = sm.load(0, 4)
    for i, byte_var in enumerate((a0, a1, a2, a3p)):
        assert E.extract(merged, 8 * i + 7, 8 * i) == byte_var


def test_store_into_empty_memory():
    sm = SymbolicMemory()
    sm.store(100, 4, E.bv(32, 0xDEADBEEF))
    assert sm.keys() == [(100, 104)]
    sm.audit()


def test_overlap_update_preserves_remainders():
    sm = SymbolicMemory(bound=32)
    sm.store(0, 8, E.bv(64, 0x1122334455667788))
    sm.store(2, 2, E.bv(16, 0xAABB))
    assert sm.keys() == [(0, 8)]
    got = sm.load(0, 8)
    assert got.is_const()
    # bytes [2,4) replaced: bits [16,32) now 0xAABB
    assert got.value == 0x11223344AABB7788


def test_read_after_write_identity():
    sm = SymbolicMemory()
    sm.store(16, 4, E.bv(32, 0x01020304))
    assert sm.load(16, 4) == E.bv(32, 0x01020304)


def test_load_within_single_key_extracts():
    v = E.var(64, "x")
    sm = SymbolicMemory()
    sm.store(0, 8, v)
    assert sm.load(2, 2) == E.extract(v, 31, 16)


def test_unwritten_bytes_memoized():
    sm = SymbolicMemory()
    first = sm.load(40, 1)
    second = sm.load(40, 1)
    assert first == second
    assert isinstance(first, E.Var)


def test_bounds_and_width_errors():
    sm = SymbolicMemory(bound=64)
    with pytest.raises(AddressOverflow):
        sm.store(60, 8, E.bv(64, 0))
    with pytest.raises(AddressOverflow):
        sm.load(64, 1)
    with pytest.raises(WidthMismatch):
        sm.store(0, 4, E.bv(16, 0))
    with pytest.raises(WidthMismatch):
        sm.store(0, 0, E.bv(8, 0))


def test_audit_catches_corruption():
    sm = SymbolicMemory()
    sm.store(0, 2, E.bv(16, 1))
    sm.store(4, 2, E.bv(16, 2))
    sm._his[0] = 5  # forced overlap
    with pytest.raises(MemoryAuditError):
        sm.audit()


def test_randomized_against_flat_oracle():
    rng = random.Random(0xE05)
    sm = SymbolicMemory()
    oracle = FlatOracle()
    for step in range(20000):
        dest = rng.randrange(0, 65536 - 16)
        length = rng.randint(1, 16)
        if rng.random() < 0.7:
            value = rng.getrandbits(8 * length)
            sm.store(dest, length, E.bv(8 * length, value))
            oracle.store(dest, length, value)
        elif oracle.fully_written(dest, length):
            got = sm.load(dest, length)
            assert got.is_const(), f"load at {dest} not concrete"
            assert got.value == oracle.load(dest, length)
        if step % 509 == 0:
            sm.audit()
    sm.audit()
    # Final sweep: all written runs must match byte-for-byte.
    pos = 0
    while pos < 65536:
        if oracle.written[pos]:
            end = pos
            while end < 65536 and oracle.written[end]:
                end += 1
            got = sm.load(pos, end - pos)
            assert got.is_const() and got.value == oracle.load(pos, end - pos)
            pos = end
        else:
            pos += 1
