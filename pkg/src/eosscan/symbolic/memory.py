"""Interval-keyed symbolic memory.

Linear memory is a sorted map from half-open byte ranges [lo, hi) to bitvector
values of width 8*(hi-lo), little-endian: the byte at address lo+i is bits
[8i, 8i+8) of the value. Stores run the memory-merging discipline: new data
wins on overlap, old remainders are concatenated back, and adjacent ranges
always merge, so no two keys ever overlap or touch.
"""

import bisect

from ..errors import AddressOverflow, MemoryAuditError, WidthMismatch
from . import expr as E


class SymbolicMemory:
    __slots__ = ("bound", "_los", "_his", "_vals")

    def __init__(self, bound=65536):
        self.bound = bound
        self._los = []
        self._his = []
        self._vals = []

    def copy(self):
        m = SymbolicMemory(self.bound)
        m._los = self._los.copy()
        m._his = self._his.copy()
        m._vals = self._vals.copy()
        return m

    def keys(self):
        return list(zip(self._los, self._his))

    def items(self):
        return list(zip(self._los, self._his, self._vals))

    def __len__(self):
        return len(self._los)

    def _check_range(self, addr, length):
        if length < 1:
            raise WidthMismatch(f"byte count must be >= 1, got {length}")
        if addr < 0 or addr + length > self.bound:
            raise AddressOverflow(f"[{addr}, {addr + length}) outside bound {self.bound}")

    def store(self, dest, length, data):
        if data.width != 8 * length:
            raise WidthMismatch(f"data width {data.width} != {8 * length} bits")
        self._check_range(dest, length)
        los, his, vals = self._los, self._his, self._vals
        end = dest + length

        # Overlapping keys: his[i] > dest and los[i] < end.
        first = bisect.bisect_right(his, dest)
        last = bisect.bisect_left(los, end)  # exclusive
        if first >= last:
            idx = first
            los.insert(idx, dest)
            his.insert(idx, end)
            vals.insert(idx, data)
        else:
            # New data wins on the overlap; remainders of the boundary keys
            # are concatenated back around it.
            new_lo = min(los[first], dest)
            new_hi = max(his[last - 1], end)
            parts = [data]
            if los[first] < dest:
                keep_bits = (dest - los[first]) * 8
                parts.append(E.extract(vals[first], keep_bits - 1, 0))
            if his[last - 1] > end:
                lo_bit = (end - los[last - 1]) * 8
                hi_bit = (his[last - 1] - los[last - 1]) * 8 - 1
                parts.insert(0, E.extract(vals[last - 1], hi_bit, lo_bit))
            value = E.concat(*parts)
            del los[first:last]
            del his[first:last]
            del vals[first:last]
            idx = first
            los.insert(idx, new_lo)
            his.insert(idx, new_hi)
            vals.insert(idx, value)

        # Merge with touching neighbors so every gap stays >= one byte.
        if idx + 1 < len(los) and his[idx] == los[idx + 1]:
            vals[idx] = E.concat(vals[idx + 1], vals[idx])
            his[idx] = his[idx + 1]
            del los[idx + 1], his[idx + 1], vals[idx + 1]
        if idx > 0 and his[idx - 1] == los[idx]:
            vals[idx - 1] = E.concat(vals[idx], vals[idx - 1])
            his[idx - 1] = his[idx]
            del los[idx], his[idx], vals[idx]

    def load(self, src, length, fresh=None):
        """Read [src, src+length) as one 8*length-bit expression.

        Bytes never written materialize through `fresh(addr)` (default: a
        memoized 8-bit variable named mem!{addr}) and are stored back, so a
        repeated load of the same unwritten byte yields the same variable.
        """
        self._check_range(src, length)
        end = src + length
        self._materialize_gaps(src, end, fresh)
        los, his, vals = self._los, self._his, self._vals
        i = bisect.bisect_right(his, src)
        parts = []
        pos = src
        while pos < end:
            lo, hi, val = los[i], his[i], vals[i]
            take_lo = (pos - lo) * 8
            take_hi = (min(end, hi) - lo) * 8 - 1
            parts.append(E.extract(val, take_hi, take_lo))
            pos = hi
            i += 1
        return E.concat(*reversed(parts))

    def _materialize_gaps(self, src, end, fresh):
        gaps = []
        pos = src
        i = bisect.bisect_right(self._his, src)
        while pos < end:
            if i < len(self._los) and self._los[i] <= pos:
                pos = self._his[i]
                i += 1
                continue
            gap_end = min(end, self._los[i]) if i < len(self._los) else end
            gaps.append((pos, gap_end))
            pos = gap_end
        for lo, hi in gaps:
            make = fresh if fresh is not None else _default_fresh
            parts = [make(a) for a in range(lo, hi)]
            self.store(lo, hi - lo, E.concat(*reversed(parts)))

    def audit(self):
        """Raise MemoryAuditError unless all key-space invariants hold."""
        los, his, vals = self._los, self._his, self._vals
        prev_hi = None
        for lo, hi, val in zip(los, his, vals):
            if not 0 <= lo < hi <= self.bound:
                raise MemoryAuditError(f"bad key ({lo}, {hi})")
            if prev_hi is not None and lo <= prev_hi:
                kind = "overlapping" if lo < prev_hi else "adjacent"
                raise MemoryAuditError(f"{kind} keys at {lo}")
            if val.width != 8 * (hi - lo):
                raise MemoryAuditError(
                    f"key ({lo}, {hi}) holds {val.width} bits, wants {8 * (hi - lo)}"
                )
            prev_hi = hi


def _default_fresh(addr):
    return E.Var(8, f"mem!{addr}")
