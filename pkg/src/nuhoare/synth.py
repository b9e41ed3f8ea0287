"""Size-bounded enumeration of well-typed terms and single-hole contexts.

Backs the bounded equivalence check and the oracle's witness searches.
Terms are enumerated by exact AST size with memoization keyed on the
(ordered) standard type context, goal type and size.  The argument types
tried for applications, lets and projections are restricted to the types
reachable from the context and the goal, so every table stays finite.
"""

from __future__ import annotations

from .terms import (
    App, Arrow, Base, Const, EqT, Gensym, Hole, If, Lam, Let, Name, PairT,
    Prod, Proj, Term, Var, BOOL, NM, UNIT, TRUE, FALSE, UNIT_VAL,
)


def term_size(t: Term) -> int:
    match t:
        case App(a, b) | EqT(a, b) | PairT(a, b) | Let(_, a, b):
            return 1 + term_size(a) + term_size(b)
        case Lam(_, _, b) | Proj(_, b):
            return 1 + term_size(b)
        case If(c, a, b):
            return 1 + term_size(c) + term_size(a) + term_size(b)
        case _:
            return 1


def plug(ctx: Term, m: Term) -> Term:
    """Literal (capturing) replacement of the hole."""
    match ctx:
        case Hole():
            return m
        case App(f, a):
            return App(plug(f, m), plug(a, m))
        case EqT(a, b):
            return EqT(plug(a, m), plug(b, m))
        case PairT(a, b):
            return PairT(plug(a, m), plug(b, m))
        case Let(x, a, b):
            return Let(x, plug(a, m), plug(b, m))
        case Lam(x, ty, b):
            return Lam(x, ty, plug(b, m))
        case Proj(i, a):
            return Proj(i, plug(a, m))
        case If(c, a, b):
            return If(plug(c, m), plug(a, m), plug(b, m))
        case _:
            return ctx


def _subtypes(ty):
    yield ty
    match ty:
        case Arrow(a, r):
            yield from _subtypes(a)
            yield from _subtypes(r)
        case Prod(a, b):
            yield from _subtypes(a)
            yield from _subtypes(b)


def relevant_types(stc: dict, goals) -> frozenset:
    types = {UNIT, BOOL, NM, Arrow(UNIT, NM)}
    for ty in list(stc.values()) + list(goals):
        types.update(_subtypes(ty))
    return frozenset(types)


class Enumerator:
    """Memoized exact-size enumeration over a fixed pool of relevant types."""

    def __init__(self, stc: dict, goals=(), names: frozenset = frozenset()):
        self.base_stc = tuple(sorted(stc.items()))
        self.types = relevant_types(stc, goals)
        self.names = tuple(sorted(names))
        self._terms = {}
        self._ctxs = {}
        self.comparable = [t for t in (NM, BOOL, UNIT) if t in self.types]

    # -- helpers

    def _fresh(self, stc):
        k = sum(1 for (x, _) in stc if x.startswith("w"))
        return f"w{k}"

    def _arrows_to(self, ty):
        return [a for a in self.types if isinstance(a, Arrow) and a.res == ty]

    def _prods_with(self, ty, i):
        if i == 1:
            return [p for p in self.types if isinstance(p, Prod) and p.fst == ty]
        return [p for p in self.types if isinstance(p, Prod) and p.snd == ty]

    # -- hole-free terms

    def terms(self, stc: tuple, ty, size: int) -> tuple:
        key = (stc, ty, size)
        out = self._terms.get(key)
        if out is None:
            out = tuple(self._gen_terms(stc, ty, size))
            self._terms[key] = out
        return out

    def upto(self, stc: dict, ty, budget: int):
        s = tuple(sorted(stc.items()))
        for size in range(1, budget + 1):
            yield from self.terms(s, ty, size)

    def _gen_terms(self, stc, ty, size):
        if size <= 0:
            return
        if size == 1:
            for (x, t) in stc:
                if t == ty:
                    yield Var(x)
            if ty == BOOL:
                yield TRUE
                yield FALSE
            elif ty == UNIT:
                yield UNIT_VAL
            elif ty == NM:
                for r in self.names:
                    yield Name(r)
            if ty == Arrow(UNIT, NM):
                yield Gensym()
            return
        # application
        for fty in self._arrows_to(ty):
            for sf in range(1, size - 1):
                for f in self.terms(stc, fty, sf):
                    for a in self.terms(stc, fty.arg, size - 1 - sf):
                        yield App(f, a)
        # abstraction
        if isinstance(ty, Arrow):
            x = self._fresh(stc)
            inner = tuple(sorted(stc + ((x, ty.arg),)))
            for b in self.terms(inner, ty.res, size - 1):
                yield Lam(x, ty.arg, b)
        # pairing
        if isinstance(ty, Prod):
            for sa in range(1, size - 1):
                for a in self.terms(stc, ty.fst, sa):
                    for b in self.terms(stc, ty.snd, size - 1 - sa):
                        yield PairT(a, b)
        # projections
        for p in self._prods_with(ty, 1):
            for a in self.terms(stc, p, size - 1):
                yield Proj(1, a)
        for p in self._prods_with(ty, 2):
            for a in self.terms(stc, p, size - 1):
                yield Proj(2, a)
        # equality at comparable types
        if ty == BOOL:
            for cty in self.comparable:
                for sa in range(1, size - 1):
                    for a in self.terms(stc, cty, sa):
                        for b in self.terms(stc, cty, size - 1 - sa):
                            yield EqT(a, b)
        # let
        for bty in self.types:
            x = self._fresh(stc)
            inner = tuple(sorted(stc + ((x, bty),)))
            for sb in range(1, size - 1):
                for b in self.terms(stc, bty, sb):
                    for body in self.terms(inner, ty, size - 1 - sb):
                        yield Let(x, b, body)
        # conditional
        for sc in range(1, size - 2):
            for c in self.terms(stc, BOOL, sc):
                for sa in range(1, size - 1 - sc):
                    for a in self.terms(stc, ty, sa):
                        for b in self.terms(stc, ty, size - 1 - sc - sa):
                            yield If(c, a, b)

    # -- single-hole contexts (hole has type self.hole_ty, set per query)

    def ctxs(self, stc: tuple, ty, hole_ty, size: int) -> tuple:
        key = (stc, ty, hole_ty, size)
        out = self._ctxs.get(key)
        if out is None:
            out = tuple(self._gen_ctxs(stc, ty, hole_ty, size))
            self._ctxs[key] = out
        return out

    def _gen_ctxs(self, stc, ty, hole_ty, size):
        if size <= 0:
            return
        if ty == hole_ty and size == 1:
            yield Hole()
        if size == 1:
            return
        # application: hole in function or argument
        for fty in self._arrows_to(ty):
            for sf in range(1, size - 1):
                sa = size - 1 - sf
                for f in self.ctxs(stc, fty, hole_ty, sf):
                    for a in self.terms(stc, fty.arg, sa):
                        yield App(f, a)
                for f in self.terms(stc, fty, sf):
                    for a in self.ctxs(stc, fty.arg, hole_ty, sa):
                        yield App(f, a)
        if isinstance(ty, Arrow):
            x = self._fresh(stc)
            inner = tuple(sorted(stc + ((x, ty.arg),)))
            for b in self.ctxs(inner, ty.res, hole_ty, size - 1):
                yield Lam(x, ty.arg, b)
        if isinstance(ty, Prod):
            for sa in range(1, size - 1):
                sb = size - 1 - sa
                for a in self.ctxs(stc, ty.fst, hole_ty, sa):
                    for b in self.terms(stc, ty.snd, sb):
                        yield PairT(a, b)
                for a in self.terms(stc, ty.fst, sa):
                    for b in self.ctxs(stc, ty.snd, hole_ty, sb):
                        yield PairT(a, b)
        for p in self._prods_with(ty, 1):
            for a in self.ctxs(stc, p, hole_ty, size - 1):
                yield Proj(1, a)
        for p in self._prods_with(ty, 2):
            for a in self.ctxs(stc, p, hole_ty, size - 1):
                yield Proj(2, a)
        if ty == BOOL:
            for cty in self.comparable:
                for sa in range(1, size - 1):
                    sb = size - 1 - sa
                    for a in self.ctxs(stc, cty, hole_ty, sa):
                        for b in self.terms(stc, cty, sb):
                            yield EqT(a, b)
                    for a in self.terms(stc, cty, sa):
                        for b in self.ctxs(stc, cty, hole_ty, sb):
                            yield EqT(a, b)
        for bty in self.types:
            x = self._fresh(stc)
            inner = tuple(sorted(stc + ((x, bty),)))
            for sb in range(1, size - 1):
                sbody = size - 1 - sb
                for b in self.ctxs(stc, bty, hole_ty, sb):
                    for body in self.terms(inner, ty, sbody):
                        yield Let(x, b, body)
                for b in self.terms(stc, bty, sb):
                    for body in self.ctxs(inner, ty, hole_ty, sbody):
                        yield Let(x, b, body)
        for sc in range(1, size - 2):
            for sa in range(1, size - 1 - sc):
                sb = size - 1 - sc - sa
                for c in self.ctxs(stc, BOOL, hole_ty, sc):
                    for a in self.terms(stc, ty, sa):
                        for b in self.terms(stc, ty, sb):
                            yield If(c, a, b)
                for c in self.terms(stc, BOOL, sc):
                    for a in self.ctxs(stc, ty, hole_ty, sa):
                        for b in self.terms(stc, ty, sb):
                            yield If(c, a, b)
                    for a in self.terms(stc, ty, sa):
                        for b in self.ctxs(stc, ty, hole_ty, sb):
                            yield If(c, a, b)
