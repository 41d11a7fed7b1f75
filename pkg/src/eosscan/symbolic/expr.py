"""Symbolic bitvector expressions.

Nodes are immutable, structurally hashable, and carry a taint set: the union
of the origin tags of every leaf underneath. Constructors fold constants and
apply a small set of normalizing rewrites so path constraints keep a
predictable shape (comparison atoms with the constant on the right).
"""

from ..errors import WidthMismatch

# Origin tags used by the engine/emulator.
TAINT_BLOCKCHAIN_STATE = "blockchain_state"
TAINT_APPLY_CODE = "apply_arg_code"
TAINT_APPLY_ACTION = "apply_arg_action"
TAINT_APPLY_RECEIVER = "apply_arg_receiver"


def import_return_tag(name):
    return f"import_return({name})"


class EvalTrap(Exception):
    """Concrete evaluation hit a Wasm trap (division by zero / overflow)."""


_EMPTY = frozenset()


class SymExpr:
    __slots__ = ("width", "taint", "_key", "_hash")

    def __eq__(self, other):
        return self is other or (isinstance(other, SymExpr) and self._key == other._key)

    def __hash__(self):
        return self._hash

    def key(self):
        return self._key

    def is_const(self, value=None):
        return isinstance(self, Const) and (value is None or self.value == value)


class Const(SymExpr):
    __slots__ = ("value",)

    def __init__(self, width, value):
        self.width = width
        self.value = value & ((1 << width) - 1)
        self.taint = _EMPTY
        self._key = ("c", width, self.value)
        self._hash = hash(self._key)

    def __repr__(self):
        return f"{self.value}:{self.width}"


class Var(SymExpr):
    __slots__ = ("name", "origins")

    def __init__(self, width, name, origins=()):
        self.width = width
        self.name = name
        self.origins = frozenset(origins)
        self.taint = self.origins
        self._key = ("v", width, name, self.origins)
        self._hash = hash(self._key)

    def __repr__(self):
        return f"{self.name}:{self.width}"


class Op(SymExpr):
    __slots__ = ("op", "args", "params")

    def __init__(self, op, width, args, params=()):
        self.op = op
        self.width = width
        self.args = tuple(args)
        self.params = tuple(params)
        t = _EMPTY
        for a in self.args:
            t = t | a.taint
        self.taint = t
        self._key = (op, width, self.params, tuple(a._key for a in self.args))
        self._hash = hash(self._key)

    def __repr__(self):
        inner = " ".join(map(repr, self.args))
        p = ",".join(map(str, self.params))
        return f"({self.op}{'[' + p + ']' if p else ''} {inner})"


TRUE = Const(1, 1)
FALSE = Const(1, 0)


def bv(width, value):
    return Const(width, value)


def var(width, name, origins=()):
    return Var(width, name, origins)


def _mask(width):
    return (1 << width) - 1


def _signed(value, width):
    sign = 1 << (width - 1)
    return value - (1 << width) if value & sign else value


def _check_same_width(a, b, op):
    if a.width != b.width:
        raise WidthMismatch(f"{op}: {a.width} vs {b.width}")


_COMMUTATIVE = {"add", "mul", "and", "or", "xor"}

_ARITH_FOLD = {
    "add": lambda a, b, w: a + b,
    "sub": lambda a, b, w: a - b,
    "mul": lambda a, b, w: a * b,
    "and": lambda a, b, w: a & b,
    "or": lambda a, b, w: a | b,
    "xor": lambda a, b, w: a ^ b,
    "shl": lambda a, b, w: a << (b % w),
    "shr_u": lambda a, b, w: a >> (b % w),
    "shr_s": lambda a, b, w: _signed(a, w) >> (b % w),
    "rotl": lambda a, b, w: (a << (b % w)) | (a >> (w - b % w)) if b % w else a,
    "rotr": lambda a, b, w: (a >> (b % w)) | (a << (w - b % w)) if b % w else a,
}


def _fold_div(op, a, b, w):
    if op == "div_u":
        if b == 0:
            raise EvalTrap("division by zero")
        return a // b
    if op == "rem_u":
        if b == 0:
            raise EvalTrap("remainder by zero")
        return a % b
    sa, sb = _signed(a, w), _signed(b, w)
    if op == "div_s":
        if sb == 0:
            raise EvalTrap("division by zero")
        q = abs(sa) // abs(sb) * (1 if (sa < 0) == (sb < 0) else -1)
        if q == 1 << (w - 1):
            raise EvalTrap("signed division overflow")
        return q
    if op == "rem_s":
        if sb == 0:
            raise EvalTrap("remainder by zero")
        return sa - sb * (abs(sa) // abs(sb) * (1 if (sa < 0) == (sb < 0) else -1))
    raise AssertionError(op)


def binop(op, a, b):
    """Wasm integer binary operation over symbolic operands."""
    _check_same_width(a, b, op)
    w = a.width
    if isinstance(a, Const) and isinstance(b, Const):
        if op in _ARITH_FOLD:
            return Const(w, _ARITH_FOLD[op](a.value, b.value, w))
        if b.value != 0 or op not in ("div_u", "div_s", "rem_u", "rem_s"):
            return Const(w, _fold_div(op, a.value, b.value, w))
        # constant division by zero: keep the node, the engine traps instead
    if op in _COMMUTATIVE and isinstance(a, Const) and not isinstance(b, Const):
        a, b = b, a
    if isinstance(b, Const):
        v = b.value
        if op in ("add", "sub", "or", "xor", "shl", "shr_u", "shr_s", "rotl", "rotr") and v == 0:
            return a
        if op == "mul":
            if v == 0:
                return Const(w, 0)
            if v == 1:
                return a
        if op == "and":
            if v == 0:
                return Const(w, 0)
            if v == _mask(w):
                return a
        if op == "or" and v == _mask(w):
            return Const(w, _mask(w))
    return Op(op, w, (a, b))


def unop(op, a):
    w = a.width
    if isinstance(a, Const):
        v = a.value
        if op == "clz":
            return Const(w, w - v.bit_length() if v else w)
        if op == "ctz":
            return Const(w, (v & -v).bit_length() - 1 if v else w)
        if op == "popcnt":
            return Const(w, bin(v).count("1"))
    return Op(op, w, (a,))


_CMP_FOLD = {
    "eq": lambda a, b, w: a == b,
    "ne": lambda a, b, w: a != b,
    "lt_u": lambda a, b, w: a < b,
    "gt_u": lambda a, b, w: a > b,
    "le_u": lambda a, b, w: a <= b,
    "ge_u": lambda a, b, w: a >= b,
    "lt_s": lambda a, b, w: _signed(a, w) < _signed(b, w),
    "gt_s": lambda a, b, w: _signed(a, w) > _signed(b, w),
    "le_s": lambda a, b, w: _signed(a, w) <= _signed(b, w),
    "ge_s": lambda a, b, w: _signed(a, w) >= _signed(b, w),
}

_CMP_NEGATION = {
    "eq": "ne", "ne": "eq",
    "lt_u": "ge_u", "ge_u": "lt_u", "gt_u": "le_u", "le_u": "gt_u",
    "lt_s": "ge_s", "ge_s": "lt_s", "gt_s": "le_s", "le_s": "gt_s",
}

_CMP_SWAP = {
    "eq": "eq", "ne": "ne",
    "lt_u": "gt_u", "gt_u": "lt_u", "le_u": "ge_u", "ge_u": "le_u",
    "lt_s": "gt_s", "gt_s": "lt_s", "le_s": "ge_s", "ge_s": "le_s",
}


def compare(op, a, b):
    """Comparison producing a width-1 boolean expression."""
    _check_same_width(a, b, op)
    if isinstance(a, Const) and isinstance(b, Const):
        return TRUE if _CMP_FOLD[op](a.value, b.value, a.width) else FALSE
    if a == b:
        return TRUE if _CMP_FOLD[op](0, 0, 1) else FALSE
    if isinstance(a, Const):
        a, b, op = b, a, _CMP_SWAP[op]
    if op in ("eq", "ne") and isinstance(b, Const) and isinstance(a, Op) and a.op == "zext":
        inner = a.args[0]
        if b.value >> inner.width == 0:
            return compare(op, inner, Const(inner.width, b.value))
        return FALSE if op == "eq" else TRUE
    return Op(op, 1, (a, b))


def bool_not(a):
    if a.width != 1:
        raise WidthMismatch("bool_not needs a width-1 operand")
    if isinstance(a, Const):
        return FALSE if a.value else TRUE
    if isinstance(a, Op):
        if a.op in _CMP_NEGATION:
            return Op(_CMP_NEGATION[a.op], 1, a.args)
        if a.op == "bnot":
            return a.args[0]
    return Op("bnot", 1, (a,))


def bool_and(a, b):
    for e in (a, b):
        if e.width != 1:
            raise WidthMismatch("bool_and needs width-1 operands")
    if isinstance(a, Const):
        return b if a.value else FALSE
    if isinstance(b, Const):
        return a if b.value else FALSE
    if a == b:
        return a
    return Op("band", 1, (a, b))


def bool_or(a, b):
    for e in (a, b):
        if e.width != 1:
            raise WidthMismatch("bool_or needs width-1 operands")
    if isinstance(a, Const):
        return TRUE if a.value else b
    if isinstance(b, Const):
        return TRUE if b.value else a
    if a == b:
        return a
    return Op("bor", 1, (a, b))


def truthy(e):
    """Boolean 'e != 0' over an arbitrary-width expression."""
    return compare("ne", e, Const(e.width, 0))


def zext(e, width):
    if width < e.width:
        raise WidthMismatch(f"zext to narrower width {width} < {e.width}")
    if width == e.width:
        return e
    if isinstance(e, Const):
        return Const(width, e.value)
    return Op("zext", width, (e,))


def sext(e, width):
    if width < e.width:
        raise WidthMismatch(f"sext to narrower width {width} < {e.width}")
    if width == e.width:
        return e
    if isinstance(e, Const):
        return Const(width, _signed(e.value, e.width))
    return Op("sext", width, (e,))


def extract(e, hi, lo):
    """Bits [lo, hi] inclusive, little-endian bit numbering."""
    if not 0 <= lo <= hi < e.width:
        raise WidthMismatch(f"extract [{hi}:{lo}] out of range for width {e.width}")
    width = hi - lo + 1
    if width == e.width:
        return e
    if isinstance(e, Const):
        return Const(width, (e.value >> lo) & _mask(width))
    if isinstance(e, Op):
        if e.op == "extract":
            base_lo = e.params[1]
            return extract(e.args[0], base_lo + hi, base_lo + lo)
        if e.op == "concat":
            return _extract_concat(e, hi, lo)
        if e.op in ("zext", "sext"):
            inner = e.args[0]
            if hi < inner.width:
                return extract(inner, hi, lo)
            if e.op == "zext" and lo >= inner.width:
                return Const(width, 0)
    return Op("extract", width, (e,), (hi, lo))


def _extract_concat(e, hi, lo):
    # concat args are most-significant-first; walk from the low end.
    parts = []
    pos = 0
    for part in reversed(e.args):
        p_lo, p_hi = pos, pos + part.width - 1
        if p_hi >= lo and p_lo <= hi:
            sub_lo = max(lo, p_lo) - p_lo
            sub_hi = min(hi, p_hi) - p_lo
            parts.append(extract(part, sub_hi, sub_lo))
        pos += part.width
    if len(parts) == 1:
        return parts[0]
    return concat(*reversed(parts))


def concat(*parts):
    """Concatenate bitvectors, most-significant part first."""
    if not parts:
        raise WidthMismatch("concat of nothing")
    if len(parts) == 1:
        return parts[0]
    flat = []
    for p in parts:
        if isinstance(p, Op) and p.op == "concat":
            flat.extend(p.args)
        else:
            flat.append(p)
    merged = [flat[0]]
    for p in flat[1:]:
        last = merged[-1]
        if isinstance(last, Const) and isinstance(p, Const):
            merged[-1] = Const(last.width + p.width, (last.value << p.width) | p.value)
        else:
            merged.append(p)
    if len(merged) == 1:
        return merged[0]
    width = sum(p.width for p in merged)
    return Op("concat", width, tuple(merged))


def taint_of(e):
    """Union of leaf origin tags."""
    return e.taint


def evaluate(e, model, default=0, _memo=None):
    """Concrete evaluation under a model mapping variable names to ints.

    Unknown variables take `default` (pass default=None to make them an
    error). Division traps raise EvalTrap.
    """
    if _memo is None:
        _memo = {}
    got = _memo.get(id(e))
    if got is not None:
        return got
    if isinstance(e, Const):
        v = e.value
    elif isinstance(e, Var):
        if e.name in model:
            v = model[e.name] & _mask(e.width)
        elif default is None:
            raise KeyError(e.name)
        else:
            v = default & _mask(e.width)
    else:
        args = [evaluate(a, model, default, _memo) for a in e.args]
        v = _eval_op(e, args)
    _memo[id(e)] = v
    return v


def _eval_op(e, args):
    op, w = e.op, e.width
    if op in _ARITH_FOLD:
        return _ARITH_FOLD[op](args[0], args[1], w) & _mask(w)
    if op in ("div_u", "div_s", "rem_u", "rem_s"):
        return _fold_div(op, args[0], args[1], e.args[0].width) & _mask(w)
    if op in _CMP_FOLD:
        return 1 if _CMP_FOLD[op](args[0], args[1], e.args[0].width) else 0
    if op == "bnot":
        return 0 if args[0] else 1
    if op == "band":
        return 1 if args[0] and args[1] else 0
    if op == "bor":
        return 1 if args[0] or args[1] else 0
    if op == "zext":
        return args[0]
    if op == "sext":
        return _signed(args[0], e.args[0].width) & _mask(w)
    if op == "extract":
        hi, lo = e.params
        return (args[0] >> lo) & _mask(hi - lo + 1)
    if op == "concat":
        v = 0
        for a, val in zip(e.args, args):
            v = (v << a.width) | val
        return v
    if op == "clz":
        return w - args[0].bit_length() if args[0] else w
    if op == "ctz":
        return (args[0] & -args[0]).bit_length() - 1 if args[0] else w
    if op == "popcnt":
        return bin(args[0]).count("1")
    raise AssertionError(f"unknown op {op}")


def substitute(e, model, _memo=None):
    """Replace known variables with constants and re-fold."""
    if _memo is None:
        _memo = {}
    got = _memo.get(id(e))
    if got is not None:
        return got
    if isinstance(e, Const):
        out = e
    elif isinstance(e, Var):
        out = Const(e.width, model[e.name]) if e.name in model else e
    else:
        args = [substitute(a, model, _memo) for a in e.args]
        if all(x is y for x, y in zip(args, e.args)):
            out = e
        else:
            out = _rebuild(e, args)
    _memo[id(e)] = out
    return out


def _rebuild(e, args):
    op = e.op
    if op in _ARITH_FOLD or op in ("div_u", "div_s", "rem_u", "rem_s"):
        try:
            return binop(op, *args)
        except EvalTrap:
            return Op(op, e.width, tuple(args))
    if op in _CMP_FOLD:
        return compare(op, *args)
    if op == "bnot":
        return bool_not(args[0])
    if op == "band":
        return bool_and(*args)
    if op == "bor":
        return bool_or(*args)
    if op == "zext":
        return zext(args[0], e.width)
    if op == "sext":
        return sext(args[0], e.width)
    if op == "extract":
        return extract(args[0], *e.params)
    if op == "concat":
        return concat(*args)
    if op in ("clz", "ctz", "popcnt"):
        return unop(op, args[0])
    raise AssertionError(f"unknown op {op}")


def variables(e, _memo=None):
    """All Var leaves of an expression."""
    if _memo is None:
        _memo = {}
    got = _memo.get(id(e))
    if got is not None:
        return got
    if isinstance(e, Var):
        out = {e}
    elif isinstance(e, Const):
        out = set()
    else:
        out = set()
        for a in e.args:
            out |= variables(a, _memo)
    _memo[id(e)] = out
    return out
