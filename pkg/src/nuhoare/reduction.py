"""Small-step call-by-value semantics over configurations, a big-step
evaluator, and the bounded contextual-equivalence oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

from .terms import (
    App, Const, EqT, Gensym, If, Lam, Let, Name, PairT, Proj, Term, Var,
    NuError, an, fv, is_value, subst, term_to_str, typecheck_term, BOOL,
    TRUE, FALSE,
)
from .synth import Enumerator, plug, term_size


class EvaluationError(NuError):
    """Stuck non-value: signals an ill-typed input (typechecker bug otherwise)."""


class BudgetExceeded(NuError):
    pass


@dataclass
class NameAllocator:
    """Mints name ids; every allocation avoids the supplied generated set."""
    next_id: int = 0

    def fresh(self, generated: frozenset) -> int:
        n = self.next_id
        while n in generated:
            n += 1
        self.next_id = n + 1
        return n


@dataclass(frozen=True)
class Configuration:
    generated: frozenset
    term: Term

    def __str__(self):
        names = " ".join(f"#{r}" for r in sorted(self.generated))
        return f"({{{names}}}, {term_to_str(self.term)})"


@dataclass(frozen=True)
class Stuck:
    term: Term
    is_value: bool


def check_configuration(cfg: Configuration):
    if not an(cfg.term) <= cfg.generated:
        raise NuError("configuration has names outside its generated set")
    typecheck_term({}, cfg.term)


def step(cfg: Configuration, alloc: NameAllocator):
    """One reduction under the usual CBV evaluation contexts, or Stuck."""
    res = _step_term(cfg.generated, cfg.term, alloc)
    if res is None:
        return Stuck(cfg.term, is_value(cfg.term))
    g, t = res
    return Configuration(g, t)


def _step_term(g, t, alloc):
    match t:
        case App(f, a):
            if not is_value(f):
                res = _step_term(g, f, alloc)
                return None if res is None else (res[0], App(res[1], a))
            if not is_value(a):
                res = _step_term(g, a, alloc)
                return None if res is None else (res[0], App(f, res[1]))
            match f:
                case Lam(x, _, body):
                    return (g, subst(body, x, a))
                case Gensym():
                    if a == Const("unit"):
                        n = alloc.fresh(g)
                        return (g | {n}, Name(n))
                    return None
                case _:
                    return None
        case Let(x, bound, body):
            if not is_value(bound):
                res = _step_term(g, bound, alloc)
                return None if res is None else (res[0], Let(x, res[1], body))
            return (g, subst(body, x, bound))
        case EqT(a, b):
            if not is_value(a):
                res = _step_term(g, a, alloc)
                return None if res is None else (res[0], EqT(res[1], b))
            if not is_value(b):
                res = _step_term(g, b, alloc)
                return None if res is None else (res[0], EqT(a, res[1]))
            match (a, b):
                case (Name(r1), Name(r2)):
                    return (g, TRUE if r1 == r2 else FALSE)
                case (Const(c1), Const(c2)):
                    return (g, TRUE if c1 == c2 else FALSE)
                case _:
                    return None
        case If(c, t1, t2):
            if not is_value(c):
                res = _step_term(g, c, alloc)
                return None if res is None else (res[0], If(res[1], t1, t2))
            if c == TRUE:
                return (g, t1)
            if c == FALSE:
                return (g, t2)
            return None
        case PairT(a, b):
            if not is_value(a):
                res = _step_term(g, a, alloc)
                return None if res is None else (res[0], PairT(res[1], b))
            if not is_value(b):
                res = _step_term(g, b, alloc)
                return None if res is None else (res[0], PairT(a, res[1]))
            return None
        case Proj(i, a):
            if not is_value(a):
                res = _step_term(g, a, alloc)
                return None if res is None else (res[0], Proj(i, res[1]))
            match a:
                case PairT(x, y):
                    return (g, x if i == 1 else y)
                case _:
                    return None
        case _:
            return None


def evaluate(cfg: Configuration, alloc: NameAllocator | None = None,
             max_steps: int | None = None, trace: list | None = None) -> Configuration:
    """Iterate step to a value.  Total on well-typed closed input."""
    if alloc is None:
        alloc = NameAllocator(max(cfg.generated, default=-1) + 1)
    steps = 0
    if trace is not None:
        trace.append(cfg)
    while True:
        res = step(cfg, alloc)
        if isinstance(res, Stuck):
            if res.is_value:
                return cfg
            raise EvaluationError(f"stuck non-value: {term_to_str(res.term)}")
        steps += 1
        if max_steps is not None and steps > max_steps:
            raise BudgetExceeded(f"evaluation exceeded {max_steps} steps")
        cfg = res
        if trace is not None:
            trace.append(cfg)


def eval_term(t: Term, generated: frozenset = frozenset(), alloc=None) -> Configuration:
    return evaluate(Configuration(frozenset(generated) | an(t), t), alloc)


# ---------------------------------------------------------------------------
# Bounded contextual equivalence

@dataclass(frozen=True)
class Distinguished:
    context: Term  # single-hole context of type Bool
    left_result: bool
    right_result: bool


@dataclass(frozen=True)
class NotDistinguishedUpTo:
    bound: int


def _run_bool(ctx: Term, m: Term, generated: frozenset) -> bool:
    plugged = plug(ctx, m)
    alloc = NameAllocator(max(generated, default=-1) + 1)
    out = evaluate(Configuration(generated, plugged), alloc)
    if out.term == TRUE:
        return True
    if out.term == FALSE:
        return False
    raise EvaluationError(f"context did not produce a Boolean: {out.term}")


def check_equiv(m1: Term, m2: Term, ty, generated: frozenset = frozenset(),
                budget: int = 9):
    """Search closed Boolean contexts up to `budget` AST nodes for one that
    tells the two terms apart.  Only a Distinguished verdict is a theorem;
    NotDistinguishedUpTo is a bound report, never an equivalence claim."""
    if budget <= 0:
        raise NuError("context budget must be positive")
    generated = frozenset(generated)
    for t, label in ((m1, "left"), (m2, "right")):
        if fv(t):
            raise NuError(f"{label} term is not closed: free {sorted(fv(t))}")
        if not an(t) <= generated:
            raise NuError(f"{label} term uses names outside the generated set")
    enum = Enumerator({}, goals=(ty, BOOL), names=generated)
    for size in range(1, budget + 1):
        for ctx in enum.ctxs((), BOOL, ty, size):
            b1 = _run_bool(ctx, m1, generated)
            b2 = _run_bool(ctx, m2, generated)
            if b1 != b2:
                return Distinguished(ctx, b1, b2)
    return NotDistinguishedUpTo(budget)


def canonicalize_names(t: Term, fixed: frozenset) -> Term:
    """Rename names outside `fixed` in order of first occurrence (left to
    right), to ids max(fixed)+1, +2, ...  Used to compare evaluation results
    up to the allocator's arbitrary choices."""
    order = []

    def collect(u):
        match u:
            case Name(r):
                if r not in fixed and r not in order:
                    order.append(r)
            case Lam(_, _, b) | Proj(_, b):
                collect(b)
            case App(a, b) | EqT(a, b) | PairT(a, b) | Let(_, a, b):
                collect(a), collect(b)
            case If(c, a, b):
                collect(c), collect(a), collect(b)

    collect(t)
    base = max(fixed, default=-1) + 1
    ren = {r: base + i for i, r in enumerate(order)}

    def apply(u):
        match u:
            case Name(r):
                return Name(ren.get(r, r))
            case Lam(x, ty, b):
                return Lam(x, ty, apply(b))
            case Proj(i, b):
                return Proj(i, apply(b))
            case App(a, b):
                return App(apply(a), apply(b))
            case EqT(a, b):
                return EqT(apply(a), apply(b))
            case PairT(a, b):
                return PairT(apply(a), apply(b))
            case Let(x, a, b):
                return Let(x, apply(a), apply(b))
            case If(c, a, b):
                return If(apply(c), apply(a), apply(b))
            case _:
                return u

    return apply(t)
