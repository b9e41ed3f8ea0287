"""The logic's two substitutions: expressions for variables and LTCs for
TCVs.  Both also rewrite the LTCs embedded in quantifiers and freshness
predicates, which is where they differ from classical substitution."""

from __future__ import annotations

from .terms import Arrow, NuError, TypeCheckError, fresh_var
from .logic import (
    LTC, VarBind, TCVBind, Expr, EVar, Formula, Top, Bot, FEq, Not, And, Or,
    Implies, Eval, ForallIn, ExistsIn, ForallTCV, ExistsTCV, Fresh,
    ForallClassic, expr_fv, expr_subst, expr_has_destructor, formula_fv,
    formula_ftcv, typecheck_expression, fresh_expansion, formula_to_str,
)


class SubstitutionError(NuError):
    pass


def _rename_var(a: Formula, old: str, new: str) -> Formula:
    """Rename free occurrences of a program variable, including inside
    embedded LTCs.  `new` must be fresh for a."""
    def ren_ltc(g):
        return LTC(tuple(VarBind(new, e.ty) if isinstance(e, VarBind) and e.name == old else e
                         for e in g.entries))

    def go(a):
        match a:
            case Top() | Bot():
                return a
            case FEq(l, r):
                return FEq(expr_subst(l, old, EVar(new)), expr_subst(r, old, EVar(new)))
            case Not(b):
                return Not(go(b))
            case And(l, r):
                return And(go(l), go(r))
            case Or(l, r):
                return Or(go(l), go(r))
            case Implies(l, r):
                return Implies(go(l), go(r))
            case Eval(f, e, m, b):
                f2 = expr_subst(f, old, EVar(new))
                e2 = expr_subst(e, old, EVar(new))
                return Eval(f2, e2, m, b if m == old else go(b))
            case ForallIn(x, ty, g, b) | ExistsIn(x, ty, g, b):
                cls = ForallIn if isinstance(a, ForallIn) else ExistsIn
                return cls(x, ty, ren_ltc(g), b if x == old else go(b))
            case ForallTCV(d, b):
                return ForallTCV(d, go(b))
            case ExistsTCV(d, b):
                return ExistsTCV(d, go(b))
            case Fresh(s, g):
                return Fresh(expr_subst(s, old, EVar(new)), ren_ltc(g))
            case ForallClassic(x, ty, b):
                return ForallClassic(x, ty, b if x == old else go(b))
        raise AssertionError(a)

    return go(a)


def _rename_tcv(a: Formula, old: str, new: str) -> Formula:
    def ren_ltc(g):
        return LTC(tuple(TCVBind(new) if isinstance(e, TCVBind) and e.name == old else e
                         for e in g.entries))

    def go(a):
        match a:
            case Top() | Bot() | FEq(_, _):
                return a
            case Not(b):
                return Not(go(b))
            case And(l, r):
                return And(go(l), go(r))
            case Or(l, r):
                return Or(go(l), go(r))
            case Implies(l, r):
                return Implies(go(l), go(r))
            case Eval(f, e, m, b):
                return Eval(f, e, m, go(b))
            case ForallIn(x, ty, g, b):
                return ForallIn(x, ty, ren_ltc(g), go(b))
            case ExistsIn(x, ty, g, b):
                return ExistsIn(x, ty, ren_ltc(g), go(b))
            case ForallTCV(d, b):
                return ForallTCV(d, b if d == old else go(b))
            case ExistsTCV(d, b):
                return ExistsTCV(d, b if d == old else go(b))
            case Fresh(s, g):
                return Fresh(s, ren_ltc(g))
            case ForallClassic(x, ty, b):
                return ForallClassic(x, ty, go(b))
        raise AssertionError(a)

    return go(a)


def _embedded_ltcs(a: Formula, bound=frozenset()):
    """Yield (ltc, bound-vars-in-scope) for every LTC embedded in a."""
    match a:
        case ForallIn(x, _, g, b) | ExistsIn(x, _, g, b):
            yield (g, bound)
            yield from _embedded_ltcs(b, bound | {x})
        case Fresh(_, g):
            yield (g, bound)
        case Not(b) | ForallTCV(_, b) | ExistsTCV(_, b) | ForallClassic(_, _, b):
            yield from _embedded_ltcs(b, bound)
        case Eval(_, _, m, b):
            yield from _embedded_ltcs(b, bound | {m})
        case And(l, r) | Or(l, r) | Implies(l, r):
            yield from _embedded_ltcs(l, bound)
            yield from _embedded_ltcs(r, bound)
        case _:
            return


def free_for(e: Expr, x: str, a: Formula) -> bool:
    """e is free for x in a: substituting e for x captures no variable of e,
    and if e contains a destructor (a projection or an equality context),
    every embedded LTC with x free in it must type e at x's type."""
    if not _capture_free(e, x, a):
        return False
    if not expr_has_destructor(e):
        return True
    for (g, bound) in _embedded_ltcs(a, frozenset()):
        if x in bound:
            continue
        ty = g.lookup(x)
        if ty is None:
            continue
        try:
            if typecheck_expression(g, e) != ty:
                return False
        except TypeCheckError:
            return False
    return True


def _capture_free(e: Expr, x: str, a: Formula) -> bool:
    evs = expr_fv(e)

    def go(a, shadowed):
        if x in shadowed:
            return True
        match a:
            case Top() | Bot() | FEq(_, _) | Fresh(_, _):
                return True
            case Not(b) | ForallTCV(_, b) | ExistsTCV(_, b):
                return go(b, shadowed)
            case And(l, r) | Or(l, r) | Implies(l, r):
                return go(l, shadowed) and go(r, shadowed)
            case Eval(_, _, m, b):
                if m in evs and x in formula_fv(b) and m != x:
                    return False
                return go(b, shadowed | {m})
            case ForallIn(y, _, _, b) | ExistsIn(y, _, _, b) | ForallClassic(y, _, b):
                if y in evs and x in formula_fv(b) and y != x:
                    return False
                return go(b, shadowed | {y})
        raise AssertionError(a)

    return go(a, frozenset())


def order_by_ambient(entries, ambient: LTC) -> LTC:
    """Order entries by their position in the ambient LTC; entries absent
    from the ambient keep their original relative order at the end."""
    pos = {name: i for i, name in enumerate(ambient.dom())}
    inside = sorted((e for e in entries if e.name in pos), key=lambda e: pos[e.name])
    outside = [e for e in entries if e.name not in pos]
    return LTC(tuple(inside + outside))


def _ltc_subst_expr(g: LTC, e: Expr, x: str, ambient: LTC) -> LTC:
    if x not in g.dom():
        return g
    entries = {}
    for v in sorted(expr_fv(e)):
        ty = ambient.lookup(v)
        if ty is None:
            raise SubstitutionError(
                f"variable '{v}' of the substituted expression is not typed by the ambient LTC")
        entries[v] = VarBind(v, ty)
    for entry in g.entries:
        if entry.name == x and isinstance(entry, VarBind):
            continue
        entries.setdefault(entry.name, entry)
    return order_by_ambient(list(entries.values()), ambient)


def _fresh_binder(base, avoid):
    return fresh_var(base, avoid)


def subst_expr(a: Formula, e: Expr, x: str, ambient: LTC) -> Formula:
    """Logical substitution a{|e/x|} in the context of the ambient LTC."""
    if not free_for(e, x, a):
        raise SubstitutionError(
            f"'{e}' is not free for '{x}' in '{formula_to_str(a)}'")
    return _subst_expr(a, e, x, ambient)


def _subst_expr(a: Formula, e: Expr, x: str, ambient: LTC) -> Formula:
    evs = expr_fv(e)

    def freshen(binder, body, body_is_formula=True):
        avoid = evs | formula_fv(body) | set(ambient.dom()) | {x}
        return _fresh_binder(binder, avoid)

    match a:
        case Top() | Bot():
            return a
        case FEq(l, r):
            return FEq(expr_subst(l, x, e), expr_subst(r, x, e))
        case Not(b):
            return Not(_subst_expr(b, e, x, ambient))
        case And(l, r):
            return And(_subst_expr(l, e, x, ambient), _subst_expr(r, e, x, ambient))
        case Or(l, r):
            return Or(_subst_expr(l, e, x, ambient), _subst_expr(r, e, x, ambient))
        case Implies(l, r):
            return Implies(_subst_expr(l, e, x, ambient), _subst_expr(r, e, x, ambient))
        case Eval(f, arg, m, b):
            if m == x or m in evs or m in ambient.dom():
                m2 = freshen(m, b)
                b = _rename_var(b, m, m2)
                m = m2
            f2 = expr_subst(f, x, e)
            try:
                fty = typecheck_expression(ambient, f2)
            except TypeCheckError as exc:
                raise SubstitutionError(f"cannot type evaluation head after substitution: {exc}")
            if not isinstance(fty, Arrow):
                raise SubstitutionError("evaluation head is not a function after substitution")
            inner = ambient.add_var(m, fty.res)
            return Eval(f2, expr_subst(arg, x, e), m, _subst_expr(b, e, x, inner))
        case ForallIn(y, ty, g, b) | ExistsIn(y, ty, g, b):
            cls = ForallIn if isinstance(a, ForallIn) else ExistsIn
            g2 = _ltc_subst_expr(g, e, x, ambient)
            if y == x:
                return cls(y, ty, g2, b)  # x shadowed in the body
            if y in evs or y in ambient.dom():
                y2 = freshen(y, b)
                b = _rename_var(b, y, y2)
                y = y2
            inner = ambient.add_var(y, ty)
            return cls(y, ty, g2, _subst_expr(b, e, x, inner))
        case ForallTCV(d, b) | ExistsTCV(d, b):
            cls = ForallTCV if isinstance(a, ForallTCV) else ExistsTCV
            if d in ambient.dom():
                d2 = _fresh_binder(d, formula_ftcv(b) | set(ambient.dom()))
                b = _rename_tcv(b, d, d2)
                d = d2
            return cls(d, _subst_expr(b, e, x, ambient.add_tcv(d)))
        case Fresh(subj, g):
            g2 = _ltc_subst_expr(g, e, x, ambient)
            return Fresh(expr_subst(subj, x, e), g2)
        case ForallClassic(y, ty, b):
            if y == x:
                return a
            if y in evs or y in ambient.dom():
                y2 = freshen(y, b)
                b = _rename_var(b, y, y2)
                y = y2
            return ForallClassic(y, ty, _subst_expr(b, e, x, ambient.add_var(y, ty)))
    raise AssertionError(a)


def _ltc_subst_tcv(g: LTC, g0: LTC, d: str, ambient: LTC) -> LTC:
    if d not in g.dom():
        return g
    entries = {}
    for entry in g0.entries:
        entries[entry.name] = entry
    for entry in g.entries:
        if isinstance(entry, TCVBind) and entry.name == d:
            continue
        if entry.name in entries and entries[entry.name] != entry:
            raise SubstitutionError(
                f"conflicting binding for '{entry.name}' while instantiating '{d}'")
        entries.setdefault(entry.name, entry)
    return order_by_ambient(list(entries.values()), ambient)


def subst_tcv(a: Formula, g0: LTC, d: str, ambient: LTC) -> Formula:
    """Type-context substitution a{|g0/d|}: instantiate the TCV d with g0."""
    dom0 = set(g0.dom())

    def go(a, ambient):
        match a:
            case Top() | Bot() | FEq(_, _):
                return a
            case Not(b):
                return Not(go(b, ambient))
            case And(l, r):
                return And(go(l, ambient), go(r, ambient))
            case Or(l, r):
                return Or(go(l, ambient), go(r, ambient))
            case Implies(l, r):
                return Implies(go(l, ambient), go(r, ambient))
            case Eval(f, e, m, b):
                if m in dom0 or m in ambient.dom():
                    m2 = _fresh_binder(m, dom0 | formula_fv(b) | set(ambient.dom()))
                    b = _rename_var(b, m, m2)
                    m = m2
                try:
                    fty = typecheck_expression(ambient, f)
                    res = fty.res if isinstance(fty, Arrow) else None
                except TypeCheckError:
                    res = None
                if res is None:
                    raise SubstitutionError("cannot type evaluation head during TCV substitution")
                return Eval(f, e, m, go(b, ambient.add_var(m, res)))
            case ForallIn(x, ty, g, b) | ExistsIn(x, ty, g, b):
                cls = ForallIn if isinstance(a, ForallIn) else ExistsIn
                g2 = _ltc_subst_tcv(g, g0, d, ambient)
                if x in dom0 or x in ambient.dom():
                    x2 = _fresh_binder(x, dom0 | formula_fv(b) | set(ambient.dom()))
                    b = _rename_var(b, x, x2)
                    x = x2
                return cls(x, ty, g2, go(b, ambient.add_var(x, ty)))
            case ForallTCV(d2, b) | ExistsTCV(d2, b):
                cls = ForallTCV if isinstance(a, ForallTCV) else ExistsTCV
                if d2 == d:
                    return a
                if d2 in dom0 or d2 in ambient.dom():
                    d3 = _fresh_binder(d2, dom0 | formula_ftcv(b) | set(ambient.dom()))
                    b = _rename_tcv(b, d2, d3)
                    d2 = d3
                return cls(d2, go(b, ambient.add_tcv(d2)))
            case Fresh(subj, g):
                return Fresh(subj, _ltc_subst_tcv(g, g0, d, ambient))
            case ForallClassic(x, ty, b):
                return ForallClassic(x, ty, go(b, ambient.add_var(x, ty)))
        raise AssertionError(a)

    return go(a, ambient)
