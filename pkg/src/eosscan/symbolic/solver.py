"""Feasibility checking over bitvector path constraints.

No SMT backend is assumed. The decision procedure is a model finder over the
constraint fragment symbolic execution actually produces (conjunctions of
comparison atoms over names, counters and loaded bytes):

  1. constant folding and substitution to a fixpoint,
  2. equality propagation (var = const assignments, var = var classes),
  3. unsigned interval reasoning for single-variable atoms,
  4. candidate search seeded by inverting equality atoms, verified by
     concrete evaluation.

`sat` answers always carry a model that has been checked by evaluating every
atom, `unsat` is only reported from the sound rules in steps 1-3, and
anything the search cannot settle within its time budget comes back
`unknown`.
"""

import itertools
import os
import time
from dataclasses import dataclass, field

from . import expr as E

DEFAULT_BUDGET_ENV = "EOSSCAN_SOLVER_TIMEOUT"
DEFAULT_BUDGET_S = 10.0

_MAX_SEARCH_NODES = 60000
_MAX_CANDIDATES = 48
_RANDOM_TRIES = 256


def default_budget():
    raw = os.environ.get(DEFAULT_BUDGET_ENV)
    if raw:
        try:
            return float(raw)
        except ValueError:
            pass
    return DEFAULT_BUDGET_S


@dataclass(frozen=True)
class Constraint:
    expr: E.SymExpr
    provenance: tuple = ()

    def __post_init__(self):
        if self.expr.width != 1:
            raise ValueError("constraint expression must have boolean sort")


@dataclass
class SolveResult:
    status: str                 # 'sat' | 'unsat' | 'unknown'
    model: dict = field(default_factory=dict)

    @property
    def is_sat(self):
        return self.status == "sat"

    @property
    def is_unsat(self):
        return self.status == "unsat"


class _Timeout(Exception):
    pass


def _exprs_of(constraints):
    out = []
    for c in constraints:
        out.append(c.expr if isinstance(c, Constraint) else c)
    return out


def _flatten(exprs):
    atoms = []
    seen = set()
    stack = list(reversed(exprs))
    while stack:
        e = stack.pop()
        if isinstance(e, E.Op) and e.op == "band":
            stack.extend(reversed(e.args))
            continue
        if e.key() in seen:
            continue
        seen.add(e.key())
        atoms.append(e)
    return atoms


class _Classes:
    """Union-find over variable names, deterministic roots."""

    def __init__(self):
        self.parent = {}

    def find(self, name):
        root = name
        while self.parent.get(root, root) != root:
            root = self.parent[root]
        while self.parent.get(name, name) != name:
            self.parent[name], name = root, self.parent[name]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        lo, hi = sorted((ra, rb))
        self.parent[hi] = lo
        return True


def solve(constraints, timeout=None):
    """Decide the conjunction of constraints; see module docstring."""
    deadline = time.monotonic() + (timeout if timeout is not None else default_budget())
    atoms = _flatten(_exprs_of(constraints))

    assignment = {}          # var name -> int
    classes = _Classes()
    var_widths = {}

    def rename_map():
        out = {}
        for name, w in var_widths.items():
            root = classes.find(name)
            if root != name:
                out[name] = assignment.get(root, E.Var(w, root))
            elif root in assignment:
                out[name] = assignment[root]
        return out

    # -- propagation to fixpoint ------------------------------------------
    for _round in range(64):
        for a in atoms:
            for v in E.variables(a):
                var_widths.setdefault(v.name, v.width)
        subst = rename_map()
        progress = False
        next_atoms = []
        for a in atoms:
            a = E.substitute(a, subst) if subst else a
            if a.is_const(0):
                return SolveResult("unsat")
            if a.is_const(1):
                continue
            if isinstance(a, E.Op) and a.op == "eq":
                x, y = a.args
                if isinstance(x, E.Var) and isinstance(y, E.Const):
                    root = classes.find(x.name)
                    if root in assignment and assignment[root] != y.value:
                        return SolveResult("unsat")
                    if root not in assignment:
                        assignment[root] = y.value
                        progress = True
                    continue
                if isinstance(x, E.Var) and isinstance(y, E.Var):
                    roots = {classes.find(x.name), classes.find(y.name)}
                    vals = {assignment[r] for r in roots if r in assignment}
                    if len(vals) > 1:
                        return SolveResult("unsat")
                    if classes.union(x.name, y.name):
                        progress = True
                    if vals:
                        assignment[classes.find(x.name)] = vals.pop()
                    continue
            next_atoms.append(a)
        atoms = next_atoms
        if not progress:
            break

    if not atoms:
        return SolveResult("sat", _complete_model(assignment, classes, var_widths))

    # -- single-variable interval reasoning --------------------------------
    intervals, pure = _intervals(atoms)
    for name, (lo, hi, excluded) in intervals.items():
        if not pure[name]:
            continue
        if lo > hi:
            return SolveResult("unsat")
        if hi - lo + 1 <= len(excluded) and all(x in excluded for x in range(lo, hi + 1)):
            return SolveResult("unsat")

    # -- candidate search ---------------------------------------------------
    free = []
    seen_names = set()
    for a in atoms:
        for v in sorted(E.variables(a), key=lambda v: v.name):
            if v.name not in seen_names:
                seen_names.add(v.name)
                free.append(v)
    candidates = _candidates(atoms, free, intervals)
    atom_vars = [frozenset(v.name for v in E.variables(a)) for a in atoms]

    try:
        model = _search(atoms, atom_vars, free, candidates, deadline)
    except _Timeout:
        return SolveResult("unknown")
    if model is None:
        model = _random_phase(atoms, free, deadline)
    if model is None:
        return SolveResult("unknown")
    model.update(_complete_model(assignment, classes, var_widths, model))
    return SolveResult("sat", model)


def _complete_model(assignment, classes, var_widths, extra=None):
    model = {} if extra is None else dict(extra)
    for name, w in var_widths.items():
        root = classes.find(name)
        if root in assignment:
            model[name] = assignment[root]
        elif root in model:
            model[name] = model[root]
        else:
            model.setdefault(name, 0)
    return model


def _intervals(atoms):
    """Unsigned bounds and exclusions for vars in single-variable atoms."""
    intervals = {}
    pure = {}
    per_var_atoms = {}
    for a in atoms:
        names = {v.name: v for v in E.variables(a)}
        for name in names:
            per_var_atoms.setdefault(name, []).append(a)
    for name, var_atoms in per_var_atoms.items():
        width = None
        lo, hi = 0, None
        excluded = set()
        is_pure = True
        for a in var_atoms:
            simple = _simple_atom(a, name)
            if simple is None:
                is_pure = False
                continue
            op, w, c = simple
            width = w
            m = (1 << w) - 1
            if hi is None:
                hi = m
            if op == "eq":
                lo, hi = max(lo, c), min(hi, c)
            elif op == "ne":
                excluded.add(c)
            elif op == "lt_u":
                hi = min(hi, c - 1)
            elif op == "le_u":
                hi = min(hi, c)
            elif op == "gt_u":
                lo = max(lo, c + 1)
            elif op == "ge_u":
                lo = max(lo, c)
            else:
                is_pure = False
        if width is None:
            continue
        if hi is None:
            hi = (1 << width) - 1
        intervals[name] = (lo, hi, excluded)
        pure[name] = is_pure
    return intervals, pure


def _simple_atom(a, name):
    """(op, width, const) when `a` is var-vs-const over exactly this var."""
    if not isinstance(a, E.Op) or a.op not in E._CMP_FOLD:
        return None
    x, y = a.args
    if isinstance(x, E.Var) and x.name == name and isinstance(y, E.Const):
        return (a.op, x.width, y.value)
    return None


def _seed_values(term, value, out):
    """Invert eq(term, value) into candidate var assignments where possible."""
    if isinstance(term, E.Var):
        out.setdefault(term.name, []).append(value & ((1 << term.width) - 1))
        return
    if not isinstance(term, E.Op):
        return
    if term.op in ("zext", "sext"):
        _seed_values(term.args[0], value & ((1 << term.args[0].width) - 1), out)
    elif term.op == "concat":
        pos = 0
        for part in reversed(term.args):
            _seed_values(part, (value >> pos) & ((1 << part.width) - 1), out)
            pos += part.width
    elif term.op == "extract":
        hi, lo = term.params
        _seed_values(term.args[0], value << lo, out)
    elif term.op in ("add", "sub", "xor", "or") and isinstance(term.args[1], E.Const):
        c = term.args[1].value
        w = term.width
        if term.op == "add":
            _seed_values(term.args[0], (value - c) % (1 << w), out)
        elif term.op == "sub":
            _seed_values(term.args[0], (value + c) % (1 << w), out)
        else:
            _seed_values(term.args[0], value ^ c if term.op == "xor" else value, out)


def _collect_eq_seeds(a, out):
    if not isinstance(a, E.Op):
        return
    if a.op in ("bor", "band", "bnot"):
        for sub in a.args:
            _collect_eq_seeds(sub, out)
        return
    if a.op not in E._CMP_FOLD:
        return
    x, y = a.args
    if isinstance(y, E.Const):
        base = y.value
        tweaks = (base,) if a.op in ("eq",) else (base, base + 1, base - 1)
        for t in tweaks:
            _seed_values(x, t % (1 << x.width), out)
    elif a.op == "eq":
        # var-term equality: try pushing either side's constants across
        for v in E.variables(x) | E.variables(y):
            out.setdefault(v.name, [])


def _candidates(atoms, free, intervals):
    seeds = {}
    for a in atoms:
        _collect_eq_seeds(a, seeds)
    out = []
    for v in free:
        m = (1 << v.width) - 1
        vals = list(seeds.get(v.name, []))
        if v.name in intervals:
            lo, hi, excluded = intervals[v.name]
            vals.extend((lo, hi))
            for x in sorted(excluded):
                vals.extend((x + 1, x - 1))
        vals.extend((0, 1, 2, m))
        uniq = []
        seen = set()
        for x in vals:
            x &= m
            if x not in seen:
                seen.add(x)
                uniq.append(x)
            if len(uniq) >= _MAX_CANDIDATES:
                break
        out.append(uniq)
    return out


def _search(atoms, atom_vars, free, candidates, deadline):
    n = len(free)
    order = sorted(range(n), key=lambda i: len(candidates[i]))
    assigned = {}
    nodes = 0

    def check_partial(done_names):
        for a, names in zip(atoms, atom_vars):
            if names <= done_names:
                try:
                    if not E.evaluate(a, assigned, default=None):
                        return False
                except (KeyError, E.EvalTrap):
                    return False
        return True

    def dfs(k, done_names):
        nonlocal nodes
        nodes += 1
        if nodes > _MAX_SEARCH_NODES or time.monotonic() > deadline:
            raise _Timeout()
        if k == n:
            return dict(assigned)
        i = order[k]
        v = free[i]
        next_names = done_names | {v.name}
        for value in candidates[i]:
            assigned[v.name] = value
            if check_partial(next_names):
                got = dfs(k + 1, next_names)
                if got is not None:
                    return got
        del assigned[v.name]
        return None

    return dfs(0, frozenset())


def _random_phase(atoms, free, deadline):
    import random

    rng = random.Random(0xE05AFE)
    for _ in range(_RANDOM_TRIES):
        if time.monotonic() > deadline:
            return None
        model = {v.name: rng.getrandbits(v.width) for v in free}
        ok = True
        for a in atoms:
            try:
                if not E.evaluate(a, model, default=None):
                    ok = False
                    break
            except (KeyError, E.EvalTrap):
                ok = False
                break
        if ok:
            return model
    return None


def find_models(constraints, target, k, timeout=None):
    """Up to k distinct concrete values of `target` under the constraints."""
    values = []
    extra = []
    for _ in range(k):
        res = solve(list(constraints) + extra, timeout=timeout)
        if not res.is_sat:
            break
        v = E.evaluate(target, res.model)
        values.append(v)
        extra.append(E.compare("ne", target, E.Const(target.width, v)))
    return values


def forced_value(constraints, target, timeout=None):
    """The single value `target` can take, or None when not forced."""
    res = solve(constraints, timeout=timeout)
    if not res.is_sat:
        return None
    v = E.evaluate(target, res.model)
    alt = solve(
        list(constraints) + [E.compare("ne", target, E.Const(target.width, v))],
        timeout=timeout,
    )
    return v if alt.is_unsat else None
