"""Syntactic classifiers for the side conditions of the proof rules:
extension-independence (SYN-EXT-IND), thinness of a variable, Nm-freeness,
and the embedding of the STLC logic.

Both classifiers are deliberately incomplete: formulae outside the
syntactic classes are reported false even when the semantic property
holds.  Soundness of the positive verdicts is property-tested against the
bounded oracle."""

from __future__ import annotations

from dataclasses import dataclass

from .terms import (
    Arrow, Base, Const, Gensym, Lam, Let, If, App, EqT, PairT, Proj, Name,
    Term, Type, Var, NuError, TypeCheckError, is_base_type, is_nm_free,
    NM, an,
)
from .logic import (
    LTC, VarBind, TCVBind, EMPTY_LTC, Expr, EVar, EConst, EPair, EProj, EEq,
    Formula, Top, Bot, FEq, Not, And, Or, Implies, Eval, ForallIn, ExistsIn,
    ForallTCV, ExistsTCV, Fresh, ForallClassic, Triple, expr_fv, formula_fv,
    formula_ftcv, subsumes, typecheck_formula, typecheck_expression,
    formula_to_str,
)

__all__ = [
    "ClassifierReport", "is_syn_ext_ind", "is_thin", "is_nm_free",
    "translate_stlc_formula", "translate_stlc_triple", "StlcFragmentError",
]


@dataclass(frozen=True)
class ClassifierReport:
    verdict: bool
    matched_clause: str | None = None
    failing: Formula | None = None

    def __bool__(self):
        return self.verdict

    def __str__(self):
        if self.verdict:
            return f"yes ({self.matched_clause})"
        extra = f": {formula_to_str(self.failing)}" if self.failing is not None else ""
        return f"no{extra}"


# ---------------------------------------------------------------------------
# SYN-EXT-IND

def _ends_with_tcv(g: LTC, d: str) -> bool:
    return len(g) > 0 and g.entries[-1] == TCVBind(d)


def _gensym_shape_unit(a: Formula, d: str) -> bool:
    # [f () => b] b # (..., d)
    match a:
        case Eval(_, EConst("unit"), b, Fresh(EVar(s), g)):
            return s == b and _ends_with_tcv(g, d)
    return False


def _gensym_shape_arg(a: Formula, d: str) -> bool:
    # all x in (..., d). [f x => b] b # (..., d, x)
    match a:
        case ForallIn(x, _, g1, Eval(_, EVar(ax), b, Fresh(EVar(s), g2))):
            if ax != x or s != b:
                return False
            if not _ends_with_tcv(g1, d):
                return False
            return (len(g2) >= 2 and isinstance(g2.entries[-1], VarBind)
                    and g2.entries[-1].name == x and g2.entries[-2] == TCVBind(d))
    return False


def is_syn_ext_ind(a: Formula) -> ClassifierReport:
    """Clause precedence is 4 > 3 > 2 > 1 so reports cite the most
    specific match at the root."""
    match a:
        case ForallTCV(d, body):
            # clause 4: the two gensym-shaped specific cases
            if _gensym_shape_unit(body, d):
                return ClassifierReport(True, "ext-ind-4a")
            if _gensym_shape_arg(body, d):
                return ClassifierReport(True, "ext-ind-4b")
            # clause 3: allctx d. C  and  allctx d. all x in (...,d). C
            if d not in formula_ftcv(body):
                sub = is_syn_ext_ind(body)
                if sub:
                    return ClassifierReport(True, "ext-ind-3")
                return ClassifierReport(False, None, sub.failing or body)
            match body:
                case ForallIn(_, _, g, c) if _ends_with_tcv(g, d) and d not in formula_ftcv(c):
                    sub = is_syn_ext_ind(c)
                    if sub:
                        return ClassifierReport(True, "ext-ind-3")
                    return ClassifierReport(False, None, sub.failing or c)
            return ClassifierReport(False, None, a)
        case Top() | Bot() | FEq(_, _) | Fresh(_, _):
            return ClassifierReport(True, "ext-ind-1")
        case Not(b):
            sub = is_syn_ext_ind(b)
            return ClassifierReport(True, "ext-ind-2") if sub else \
                ClassifierReport(False, None, sub.failing or b)
        case And(l, r) | Or(l, r) | Implies(l, r):
            for part in (l, r):
                sub = is_syn_ext_ind(part)
                if not sub:
                    return ClassifierReport(False, None, sub.failing or part)
            return ClassifierReport(True, "ext-ind-2")
        case Eval(_, _, _, b):
            sub = is_syn_ext_ind(b)
            return ClassifierReport(True, "ext-ind-2") if sub else \
                ClassifierReport(False, None, sub.failing or b)
        case ForallIn(_, _, g, b) | ExistsIn(_, _, g, b):
            if g.ftcv():
                # quantification over an LTC with a free TCV is not covered
                return ClassifierReport(False, None, a)
            sub = is_syn_ext_ind(b)
            return ClassifierReport(True, "ext-ind-2") if sub else \
                ClassifierReport(False, None, sub.failing or b)
        case _:
            return ClassifierReport(False, None, a)


# ---------------------------------------------------------------------------
# Syntactic thinness

def _typechecks_without(a: Formula, x: str, ambient: LTC) -> bool:
    try:
        typecheck_formula(ambient.remove_var(x), a)
        return True
    except (TypeCheckError, NuError):
        return False


def is_thin(a: Formula, x: str, ambient: LTC) -> ClassifierReport:
    """Syntactic thinness of a w.r.t. x: removing x from any model cannot
    change a's truth.  `ambient` is the LTC typing a with x bound."""
    if ambient.lookup(x) is None:
        raise NuError(f"'{x}' is not a program variable of the ambient LTC")
    if not _typechecks_without(a, x, ambient):
        return ClassifierReport(False, None, a)
    # item 1: variables of base type can always be removed
    if is_base_type(ambient.lookup(x)):
        return ClassifierReport(True, "thin-1")
    return _thin(a, x, ambient)


def _thin(a: Formula, x: str, ambient: LTC) -> ClassifierReport:
    no_x = x not in formula_fv(a)
    match a:
        case Top() | Bot() | FEq(_, _) | Not(FEq(_, _)):
            if no_x:
                return ClassifierReport(True, "thin-2")
            return ClassifierReport(False, None, a)
        case Fresh(_, g0):
            if not no_x:
                return ClassifierReport(False, None, a)
            prefix = ambient.prefix_before(x)
            if subsumes(prefix, g0):
                return ClassifierReport(True, "thin-3")
            if not g0.ftcv():
                # item 2 covers freshness over a TCV-free LTC
                return ClassifierReport(True, "thin-2")
            # item 4: ... # (G0 + b) with b:Nm introduced after x, x:Nm
            if (len(g0) >= 1 and isinstance(g0.entries[-1], VarBind)
                    and g0.entries[-1].ty == NM and ambient.lookup(x) == NM):
                b = g0.entries[-1].name
                init = LTC(g0.entries[:-1])
                after = False
                seen_x = False
                for e in ambient.entries:
                    if e.name == x:
                        seen_x = True
                    elif seen_x and isinstance(e, VarBind) and e.name == b and e.ty == NM:
                        after = True
                if after and subsumes(prefix, init):
                    return ClassifierReport(True, "thin-4")
            return ClassifierReport(False, None, a)
        case And(l, r) | Or(l, r):
            for part in (l, r):
                sub = _thin(part, x, ambient)
                if not sub:
                    return ClassifierReport(False, None, sub.failing or part)
            return ClassifierReport(True, "thin-5")
        case Eval(f, e, m, b):
            if x in expr_fv(f) | expr_fv(e):
                return ClassifierReport(False, None, a)
            try:
                fty = typecheck_expression(ambient, f)
            except TypeCheckError:
                return ClassifierReport(False, None, a)
            sub = _thin(b, x, ambient.add_var(m, fty.res))
            return ClassifierReport(True, "thin-5") if sub else \
                ClassifierReport(False, None, sub.failing or b)
        case ForallIn(y, ty, g, b):
            if x in g.fv():
                return ClassifierReport(False, None, a)
            sub = _thin(b, x, ambient.add_var(y, ty))
            return ClassifierReport(True, "thin-5") if sub else \
                ClassifierReport(False, None, sub.failing or b)
        case ExistsIn(y, ty, g, b):
            if x in g.fv():
                return ClassifierReport(False, None, a)
            if not (is_base_type(ty) or not g.ftcv()):
                return ClassifierReport(False, None, a)
            sub = _thin(b, x, ambient.add_var(y, ty))
            return ClassifierReport(True, "thin-5") if sub else \
                ClassifierReport(False, None, sub.failing or b)
        case ForallTCV(d, ForallIn(y, ty, g, b)) if _ends_with_tcv(g, d) and x not in g.fv():
            inner_amb = ambient.add_tcv(d).add_var(y, ty)
            sub = _thin(b, x, inner_amb)
            if sub and d not in formula_ftcv(b):
                return ClassifierReport(True, "thin-7")
            return ClassifierReport(False, None, (sub.failing if not sub else None) or a)
        case ForallTCV(d, b):
            sub = _thin(b, x, ambient.add_tcv(d))
            if sub and d not in formula_ftcv(b):
                return ClassifierReport(True, "thin-6")
            return ClassifierReport(False, None, (sub.failing if not sub else None) or a)
        case _:
            return ClassifierReport(False, None, a)


# ---------------------------------------------------------------------------
# The STLC fragment and its embedding

class StlcFragmentError(NuError):
    pass


def _check_stlc_type(ty: Type):
    if not is_nm_free(ty):
        raise StlcFragmentError(f"type contains Nm: not in the STLC fragment")


def _check_stlc_term(t: Term):
    match t:
        case Name(_) | Gensym():
            raise StlcFragmentError("names and gensym are not STLC programs")
        case Lam(_, ty, b):
            _check_stlc_type(ty)
            _check_stlc_term(b)
        case App(a, b) | EqT(a, b) | PairT(a, b) | Let(_, a, b):
            _check_stlc_term(a)
            _check_stlc_term(b)
        case If(c, a, b):
            _check_stlc_term(c)
            _check_stlc_term(a)
            _check_stlc_term(b)
        case Proj(_, a):
            _check_stlc_term(a)
        case _:
            return


def translate_stlc_formula(a: Formula) -> Formula:
    """Embed an STLC-logic assertion: classical 'all x:T.' becomes the
    restricted quantifier over the empty LTC; everything else is
    structural.  Rejects input outside the STLC grammar."""
    match a:
        case Top() | Bot() | FEq(_, _):
            return a
        case Not(b):
            return Not(translate_stlc_formula(b))
        case And(l, r):
            return And(translate_stlc_formula(l), translate_stlc_formula(r))
        case Or(l, r):
            return Or(translate_stlc_formula(l), translate_stlc_formula(r))
        case Implies(l, r):
            return Implies(translate_stlc_formula(l), translate_stlc_formula(r))
        case Eval(f, e, m, b):
            return Eval(f, e, m, translate_stlc_formula(b))
        case ForallClassic(x, ty, b):
            _check_stlc_type(ty)
            return ForallIn(x, ty, EMPTY_LTC, translate_stlc_formula(b))
        case _:
            raise StlcFragmentError(
                f"'{formula_to_str(a)}' is not an STLC-logic formula")


def translate_stlc_triple(t: Triple) -> Triple:
    _check_stlc_term(t.program)
    return Triple(translate_stlc_formula(t.pre), t.program, t.anchor,
                  translate_stlc_formula(t.post))
