"""The proof kernel: checks derivation scripts line by line against the
logic's rules and axiom schemas, discharging side conditions with the
syntactic classifiers.  The kernel verifies explicitly supplied witnesses;
it never searches for them."""

from __future__ import annotations

from dataclasses import dataclass, field

from .terms import (
    App, Arrow, Const, EqT, Gensym, If, Lam, Let, Name, PairT, Prod, Proj,
    Term, Type, Var, NuError, ParseError, TypeCheckError, TokenStream,
    alpha_eq, an, fresh_var, parse_term_stream, parse_type_stream,
    term_to_str, tokenize, typecheck_term, type_to_str, is_nm_free,
    is_base_type, BOOL, NM, UNIT, TRUE, FALSE, UNIT_VAL,
)
from .logic import (
    LTC, VarBind, TCVBind, EMPTY_LTC, Expr, EVar, EConst, EPair, EProj, EEq,
    Formula, Top, Bot, FEq, Not, And, Or, Implies, Eval, ForallIn, ExistsIn,
    ForallTCV, ExistsTCV, Fresh, ForallClassic, Triple, TOP, BOT, ETRUE,
    EFALSE, EUNIT, alpha_eq_formula, expr_fv, expr_subst, formula_fv,
    formula_ftcv, formula_to_str, formulas_equal, ltc_to_str, normalize,
    parse_formula_stream, parse_ltc_stream, subsumes, typecheck_expression,
    typecheck_formula, typecheck_triple,
)
from .substitution import SubstitutionError, subst_expr, subst_tcv
from .classify import is_syn_ext_ind, is_thin, translate_stlc_formula, StlcFragmentError


class KernelError(NuError):
    pass


class Mismatch(KernelError):
    pass


# ---------------------------------------------------------------------------
# Judgements, lines, reports

@dataclass(frozen=True)
class Entail:
    left: Formula
    right: Formula

    def __str__(self):
        return f"{formula_to_str(self.left)} ==> {formula_to_str(self.right)}"


@dataclass(frozen=True)
class ChainStep:
    name: str
    path: tuple = ()
    rtl: bool = False
    wit: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ByRule:
    rule: str
    premises: tuple = ()
    wit: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ByAxiom:
    axiom: str
    wit: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ByChain:
    steps: tuple = ()


@dataclass(frozen=True)
class ByAdmit:
    note: str = ""


@dataclass(frozen=True)
class ByOracle:
    pass


@dataclass(frozen=True)
class ProofLine:
    label: str
    ltc: LTC
    judgement: object  # Triple | Entail
    just: object


@dataclass(frozen=True)
class LineResult:
    label: str
    status: str  # 'ok' | 'failed' | 'admitted'
    detail: str = ""


@dataclass(frozen=True)
class CheckReport:
    lines: tuple
    accepted: bool
    mode: str

    def __str__(self):
        out = []
        for r in self.lines:
            mark = {"ok": "ok", "failed": "FAILED", "admitted": "admitted"}[r.status]
            detail = f" -- {r.detail}" if r.detail and r.status != "ok" else ""
            out.append(f"{r.label}: {mark}{detail}")
        out.append("accepted" if self.accepted else "rejected")
        return "\n".join(out)


AXIOM_IDS = {
    "eq1", "eq2", "eq3", "eq4",
    "u1", "u2", "u3", "u4", "u5",
    "ex1", "ex2", "ex3",
    "f1", "f2", "f3", "f4",
    "utc1", "utc2", "utc3", "utc4",
    "e1", "e2", "e3", "ext",
}

RULE_IDS = {
    "Var", "Const", "Eq", "Gensym", "Lam", "App", "Pair", "Proj1", "Proj2",
    "If", "Let", "LetFresh", "Conseq", "Invar", "AndPost", "AndImplies",
}

#: derived laws usable in entailment chains; each is FOL glue or a named
#: consequence of the axioms (u2_reduce of (u2), ex_and_pull of (u3)+(u4))
CHAIN_LAWS = {
    "and_dup", "and_comm", "and_assoc", "and_elim_l", "and_elim_r",
    "top_and", "top_intro", "imp_top", "mp", "efq", "ex_and_pull",
    "subst_eq", "proj_pair", "beq_true", "beq_false", "u2_reduce",
}

# 'iff' schemas rewrite in both directions at any polarity; 'imp' schemas
# rewrite left-to-right at positive positions only (right-to-left at
# negative ones).
SCHEMA_KIND = {
    "eq1": "iff", "eq2": "iff", "eq3": "iff", "eq4": "imp",
    "u1": "imp", "u2": "imp", "u3": "iff", "u4": "iff", "u5": "iff",
    "ex1": "imp", "ex2": "imp", "ex3": "imp",
    "f1": "imp", "f2": "iff", "f3": "imp", "f4": "imp",
    "utc1": "imp", "utc2": "iff", "utc3": "iff", "utc4": "iff",
    "e1": "iff", "e2": "iff", "e3": "iff", "ext": "iff",
    "and_dup": "iff", "and_comm": "iff", "and_assoc": "iff",
    "and_elim_l": "imp", "and_elim_r": "imp", "top_and": "iff",
    "top_intro": "imp", "imp_top": "iff", "mp": "imp", "efq": "imp",
    "ex_and_pull": "iff", "subst_eq": "iff", "proj_pair": "iff",
    "beq_true": "imp", "beq_false": "imp", "u2_reduce": "imp",
}


# ---------------------------------------------------------------------------
# Paths into formulas (and expressions), with ambient LTC and polarity

def _children(node):
    match node:
        case Not(b):
            return {1: b}
        case And(l, r) | Or(l, r) | Implies(l, r):
            return {1: l, 2: r}
        case Eval(f, e, _, b):
            return {1: f, 2: e, 3: b}
        case ForallIn(_, _, _, b) | ExistsIn(_, _, _, b) | ForallTCV(_, b) | ExistsTCV(_, b):
            return {1: b}
        case ForallClassic(_, _, b):
            return {1: b}
        case FEq(l, r):
            return {1: l, 2: r}
        case Fresh(s, _):
            return {1: s}
        case EPair(a, b) | EEq(a, b):
            return {1: a, 2: b}
        case EProj(_, a):
            return {1: a}
        case _:
            return {}


def _rebuild(node, idx, new):
    match node:
        case Not(_):
            return Not(new)
        case And(l, r):
            return And(new, r) if idx == 1 else And(l, new)
        case Or(l, r):
            return Or(new, r) if idx == 1 else Or(l, new)
        case Implies(l, r):
            return Implies(new, r) if idx == 1 else Implies(l, new)
        case Eval(f, e, m, b):
            parts = [f, e, b]
            parts[idx - 1] = new
            return Eval(parts[0], parts[1], m, parts[2])
        case ForallIn(x, ty, g, _):
            return ForallIn(x, ty, g, new)
        case ExistsIn(x, ty, g, _):
            return ExistsIn(x, ty, g, new)
        case ForallTCV(d, _):
            return ForallTCV(d, new)
        case ExistsTCV(d, _):
            return ExistsTCV(d, new)
        case ForallClassic(x, ty, _):
            return ForallClassic(x, ty, new)
        case FEq(l, r):
            return FEq(new, r) if idx == 1 else FEq(l, new)
        case Fresh(_, g):
            return Fresh(new, g)
        case EPair(a, b):
            return EPair(new, b) if idx == 1 else EPair(a, new)
        case EEq(a, b):
            return EEq(new, b) if idx == 1 else EEq(a, new)
        case EProj(i, _):
            return EProj(i, new)
    raise Mismatch(f"node has no child {idx}")


def resolve_path(root: Formula, path: tuple, ambient: LTC):
    """Follow a path; returns (node, ambient at node, polarity).
    Polarity is +1/-1 for formula positions, 0 for expression positions."""
    node = root
    pol = 1
    for idx in path:
        kids = _children(node)
        if idx not in kids:
            raise Mismatch(f"path step {idx} does not exist in '{node}'")
        match node:
            case Not(_):
                pol = -pol
            case Implies(_, _) if idx == 1:
                pol = -pol
            case Eval(f, _, m, _) if idx == 3:
                try:
                    fty = typecheck_expression(ambient, f)
                except TypeCheckError as e:
                    raise Mismatch(f"cannot type evaluation head on path: {e}")
                ambient = ambient.add_var(m, fty.res)
            case Eval(_, _, _, _):
                pol = 0
            case ForallIn(x, ty, _, _) | ExistsIn(x, ty, _, _):
                ambient = ambient.add_var(x, ty)
            case ForallClassic(x, ty, _):
                ambient = ambient.add_var(x, ty)
            case ForallTCV(d, _) | ExistsTCV(d, _):
                ambient = ambient.add_tcv(d)
            case FEq(_, _) | Fresh(_, _):
                pol = 0
            case _:
                pass
        if isinstance(node, (ExistsIn, ExistsTCV)):
            pass  # derived existentials keep polarity for their bodies
        node = kids[idx]
        if isinstance(node, Expr):
            pol = 0
    return node, ambient, pol


def replace_path(root, path: tuple, new):
    if not path:
        return new
    kids = _children(root)
    idx = path[0]
    if idx not in kids:
        raise Mismatch(f"path step {idx} does not exist")
    return _rebuild(root, idx, replace_path(kids[idx], path[1:], new))


# ---------------------------------------------------------------------------
# Witness access helpers

def _want(wit, key, kind=None):
    if key not in wit:
        raise Mismatch(f"missing witness '{key}'")
    return wit[key]


def _feq(a, b):
    return formulas_equal(a, b)


def _require(cond, msg):
    if not cond:
        raise Mismatch(msg)


def _require_sei(a, what):
    rep = is_syn_ext_ind(a)
    _require(rep.verdict, f"{what} is not SYN-EXT-IND: {formula_to_str(a)}")


def _split_ltc(g: LTC, k: int):
    _require(0 <= k <= len(g), f"split point {k} out of range for {g}")
    return LTC(g.entries[:k]), LTC(g.entries[k:])


def _ltc_eq(a: LTC, b: LTC):
    return a.entries == b.entries


# ---------------------------------------------------------------------------
# Axiom schemas.  Each applier rewrites `node` (already resolved at a path)
# and returns the replacement; `amb` is the ambient LTC at that position.

def _ax_eq1(node, amb, wit, rtl):
    if not rtl:
        match node:
            case And(a, FEq(EVar(x), e)):
                try:
                    return subst_expr(a, e, x, amb)
                except (SubstitutionError, NuError) as exc:
                    raise Mismatch(f"(eq1): {exc}")
        raise Mismatch("(eq1) expects A /\\ x = e")
    a = _want(wit, "A")
    x = _want(wit, "x")
    e = _want(wit, "e")
    try:
        expected = subst_expr(a, e, x, amb)
    except (SubstitutionError, NuError) as exc:
        raise Mismatch(f"(eq1): {exc}")
    _require(_feq(node, expected), "(eq1) reverse: formula is not A{|e/x|}")
    return And(a, FEq(EVar(x), e))


def _ax_eq2(node, amb, wit, rtl):
    if not rtl:
        match node:
            case FEq(l, r) if l == r:
                return TOP
        raise Mismatch("(eq2) expects e = e")
    _require(isinstance(node, Top), "(eq2) reverse expects T")
    e = _want(wit, "e")
    typecheck_expression(amb, e)
    return FEq(e, e)


def _ax_eq3(node, amb, wit, rtl):
    match node:
        case FEq(l, r):
            return FEq(r, l)
    raise Mismatch("(eq3) expects an equation")


def _ax_eq4(node, amb, wit, rtl):
    match node:
        case And(FEq(a, b1), FEq(b2, c)) if b1 == b2:
            return FEq(a, c)
    raise Mismatch("(eq4) expects x = y /\\ y = z")


def _ax_u1(node, amb, wit, rtl):
    match node:
        case ForallIn(x, ty, g0, a):
            e = _want(wit, "e")
            try:
                ety = typecheck_expression(g0, e)
            except TypeCheckError as exc:
                raise Mismatch(f"(u1) needs G0 |- e : {type_to_str(ty)}: {exc}")
            _require(ety == ty, f"(u1): e has type {type_to_str(ety)}, not {type_to_str(ty)}")
            try:
                return subst_expr(a, e, x, amb)
            except (SubstitutionError, NuError) as exc:
                raise Mismatch(f"(u1): {exc}")
    raise Mismatch("(u1) expects a restricted forall")


def _ax_u2(node, amb, wit, rtl):
    match node:
        case ForallIn(x, ty, g, a):
            k = _want(wit, "split")
            g0, g1 = _split_ltc(g, k)
            return And(ForallIn(x, ty, g0, a), ForallIn(x, ty, g1, a))
    raise Mismatch("(u2) expects a restricted forall")


def _law_u2_reduce(node, amb, wit, rtl):
    match node:
        case ForallIn(x, ty, g, a):
            to = _want(wit, "to")
            _require(subsumes(g, to), f"(u2) reduction: {to} is not an ordered subset of {g}")
            return ForallIn(x, ty, to, a)
    raise Mismatch("u2_reduce expects a restricted forall")


def _ax_u3(node, amb, wit, rtl):
    if not rtl:
        match node:
            case ForallIn(x, ty, g0, a) if x not in formula_fv(a):
                _require_sei(a, "(u3) body")
                return a
        raise Mismatch("(u3) expects all x in (G0). A with x not free in A")
    a = node
    x = _want(wit, "x")
    ty = _want(wit, "ty") if "ty" in wit else NM
    g0 = _want(wit, "G0")
    _require(x not in formula_fv(a), f"(u3) reverse: '{x}' is free in the formula")
    _require_sei(a, "(u3) body")
    _require(subsumes(amb, g0), "(u3) reverse: G0 not subsumed by the ambient LTC")
    return ForallIn(x, ty, g0, a)


def _ax_u4(node, amb, wit, rtl):
    if not rtl:
        match node:
            case ForallIn(x, ty, g, And(a, b)):
                return And(ForallIn(x, ty, g, a), ForallIn(x, ty, g, b))
        raise Mismatch("(u4) expects all x in (G). (A /\\ B)")
    match node:
        case And(ForallIn(x1, t1, g1, a), ForallIn(x2, t2, g2, b)):
            _require(t1 == t2 and _ltc_eq(g1, g2), "(u4) reverse: quantifiers disagree")
            if x1 != x2:
                from .substitution import _rename_var
                b = _rename_var(b, x2, x1)
            return ForallIn(x1, t1, g1, And(a, b))
    raise Mismatch("(u4) reverse expects a conjunction of foralls")


def _ax_u5(node, amb, wit, rtl):
    if not rtl:
        match node:
            case ForallIn(x, ty, _, a):
                _require(is_nm_free(ty), f"(u5): {type_to_str(ty)} is not Nm-free")
                return ForallIn(x, ty, EMPTY_LTC, a)
        raise Mismatch("(u5) expects a restricted forall")
    match node:
        case ForallIn(x, ty, g, a):
            _require(len(g) == 0, "(u5) reverse expects a forall over ()")
            _require(is_nm_free(ty), f"(u5): {type_to_str(ty)} is not Nm-free")
            g0 = _want(wit, "G0")
            _require(subsumes(amb, g0), "(u5) reverse: G0 not subsumed by ambient")
            return ForallIn(x, ty, g0, a)
    raise Mismatch("(u5) reverse expects a restricted forall")


def _ax_ex1(node, amb, wit, rtl):
    a = _want(wit, "A")
    x = _want(wit, "x")
    e = _want(wit, "e")
    g0 = _want(wit, "G0")
    _require(subsumes(amb, g0), "(ex1): G0 not subsumed by the ambient LTC")
    try:
        ty = typecheck_expression(g0, e)
    except TypeCheckError as exc:
        raise Mismatch(f"(ex1) needs G0 |- e : a: {exc}")
    try:
        expected = subst_expr(a, e, x, amb)
    except (SubstitutionError, NuError) as exc:
        raise Mismatch(f"(ex1): {exc}")
    _require(_feq(node, expected), "(ex1): formula is not A{|e/x|}")
    return ExistsIn(x, ty, g0, a)


def _ax_ex2(node, amb, wit, rtl):
    match node:
        case Eval(EVar(a), EVar(b), c, FEq(EVar(c2), EVar(x))) if c2 == c:
            g0 = _want(wit, "G0")
            xp = wit.get("x", x + "0")
            # ambient must decompose as (... x ...suffix) with G0 inside the suffix
            dom = [e.name for e in amb.entries]
            _require(x in dom, f"(ex2): '{x}' not in the ambient LTC")
            suffix = LTC(amb.entries[dom.index(x) + 1:])
            _require(subsumes(suffix, g0),
                     f"(ex2): {ltc_to_str(g0)} must sit after '{x}' in the ambient LTC")
            _require(a in g0.dom() and b in g0.dom(),
                     "(ex2): the evaluation's head and argument must be in G0")
            ty = amb.lookup(x)
            return ExistsIn(xp, ty, g0, FEq(EVar(x), EVar(xp)))
    raise Mismatch("(ex2) expects [a b => c] c = x with variables")


def _ax_ex3(node, amb, wit, rtl):
    match node:
        case ForallIn(y, ty_y, g_empty, ExistsIn(z, ty_z, g, FEq(EVar(x), EVar(z2)))) \
                if z2 == z and len(g_empty) == 0 and ty_z == NM:
            _require(len(g) >= 1 and g.entries[-1] == VarBind(y, ty_y),
                     "(ex3): the inner LTC must end with the outer variable")
            g0 = LTC(g.entries[:-1])
            _require(x != y and x != z, "(ex3): subject clashes with binders")
            return ExistsIn(z, NM, g0, FEq(EVar(x), EVar(z)))
    raise Mismatch("(ex3) expects all y in (). ex z:Nm in (G0, y). x = z")


def _ax_f1(node, amb, wit, rtl):
    match node:
        case Fresh(EVar(x), g):
            f = _want(wit, "f")
            fty = amb.lookup(f)
            _require(fty is not None, f"(f1): '{f}' not in the ambient LTC")
            _require(isinstance(fty, Arrow) and is_base_type(fty.res),
                     "(f1): the extending variable must have type a -> base")
            dom = [e.name for e in amb.entries]
            _require(x in dom and dom.index(x) < dom.index(f),
                     "(f1): the subject must come before the extending variable")
            _require(f not in g.dom(), "(f1): variable already in the LTC")
            return Fresh(EVar(x), LTC(g.entries + (VarBind(f, fty),)))
    raise Mismatch("(f1) expects x # (G) with a variable subject")


def _ax_f2(node, amb, wit, rtl):
    if not rtl:
        match node:
            case And(Fresh(subj, g0), ForallIn(y, ty, g1, a)) if _ltc_eq(g0, g1):
                g2 = LTC(g0.entries + (VarBind(y, ty),))
                return ForallIn(y, ty, g0, And(Fresh(subj, g2), a))
        raise Mismatch("(f2) expects x # (G0) /\\ all y in (G0). A")
    match node:
        case ForallIn(y, ty, g0, And(Fresh(subj, g2), a)):
            _require(g2.entries == g0.entries + (VarBind(y, ty),),
                     "(f2) reverse: freshness LTC must be G0 + y")
            _require(y not in expr_fv(subj), "(f2) reverse: subject mentions the binder")
            return And(Fresh(subj, g0), ForallIn(y, ty, g0, a))
    raise Mismatch("(f2) reverse expects all y in (G0). (x # (G0, y) /\\ A)")


def _ax_f3(node, amb, wit, rtl):
    match node:
        case Fresh(subj, g0):
            e = _want(wit, "e")
            try:
                ety = typecheck_expression(g0, e)
            except TypeCheckError as exc:
                raise Mismatch(f"(f3) needs G0 |- e : Nm: {exc}")
            _require(ety == NM, "(f3): e must have type Nm")
            return Not(FEq(subj, e))
    raise Mismatch("(f3) expects a freshness predicate")


def _ax_f4(node, amb, wit, rtl):
    match node:
        case Fresh(subj, g):
            k = _want(wit, "split")
            g0, g1 = _split_ltc(g, k)
            return And(Fresh(subj, g0), Fresh(subj, g1))
    raise Mismatch("(f4) expects a freshness predicate")


def _ax_utc1(node, amb, wit, rtl):
    match node:
        case ForallTCV(d, a):
            try:
                return subst_tcv(a, amb, d, amb)
            except (SubstitutionError, NuError) as exc:
                raise Mismatch(f"(utc1): {exc}")
    raise Mismatch("(utc1) expects allctx d. A")


def _ax_utc2(node, amb, wit, rtl):
    if not rtl:
        match node:
            case ForallIn(x, ty, g, a) if ty == NM and _ltc_eq(g, amb):
                d = wit.get("d", "d")
                _require(d not in formula_ftcv(a), "(utc2): the TCV is free in the body")
                _require(d not in amb.dom(), f"(utc2): '{d}' already in the ambient LTC")
                _require_sei(a, "(utc2) body")
                return ForallTCV(d, ForallIn(x, NM, LTC(g.entries + (TCVBind(d),)), a))
        raise Mismatch("(utc2) expects all x:Nm in (ambient LTC). A")
    match node:
        case ForallTCV(d, ForallIn(x, ty, g, a)) if ty == NM:
            _require(g.entries == amb.entries + (TCVBind(d),),
                     "(utc2) reverse: inner LTC must be the ambient plus the TCV")
            _require(d not in formula_ftcv(a), "(utc2): the TCV is free in the body")
            _require_sei(a, "(utc2) body")
            return ForallIn(x, NM, amb, a)
    raise Mismatch("(utc2) reverse expects allctx d. all x:Nm in (G, d). A")


def _ax_utc3(node, amb, wit, rtl):
    if not rtl:
        match node:
            case ForallTCV(d, a) if d not in formula_ftcv(a):
                _require_sei(a, "(utc3) body")
                return a
        raise Mismatch("(utc3) expects a vacuous allctx")
    d = wit.get("d", "d")
    _require(d not in formula_ftcv(node), f"(utc3) reverse: '{d}' free in the formula")
    _require_sei(node, "(utc3) body")
    return ForallTCV(d, node)


def _ax_utc4(node, amb, wit, rtl):
    if not rtl:
        match node:
            case ForallTCV(d, And(a, b)):
                return And(ForallTCV(d, a), ForallTCV(d, b))
        raise Mismatch("(utc4) expects allctx d. (A /\\ B)")
    match node:
        case And(ForallTCV(d1, a), ForallTCV(d2, b)):
            if d1 != d2:
                from .substitution import _rename_tcv
                b = _rename_tcv(b, d2, d1)
            return ForallTCV(d1, And(a, b))
    raise Mismatch("(utc4) reverse expects a conjunction of allctx")


def _ax_e1(node, amb, wit, rtl):
    if not rtl:
        match node:
            case Eval(f, e, m, And(a, b)):
                _require(m not in formula_fv(a), "(e1): the anchor is free in A")
                _require_sei(a, "(e1) invariant part")
                return And(a, Eval(f, e, m, b))
        raise Mismatch("(e1) expects [f e => m] (A /\\ B)")
    match node:
        case And(a, Eval(f, e, m, b)):
            _require(m not in formula_fv(a), "(e1): the anchor is free in A")
            _require_sei(a, "(e1) invariant part")
            return Eval(f, e, m, And(a, b))
    raise Mismatch("(e1) reverse expects A /\\ [f e => m] B")


def _ax_e2(node, amb, wit, rtl):
    if not rtl:
        match node:
            case Eval(f, e, m, ForallIn(x, ty, g, a)):
                _require(x not in expr_fv(f) | expr_fv(e), "(e2): binder occurs in the evaluation")
                _require(m != x and m not in g.fv(), "(e2): anchor clashes with the quantifier")
                return ForallIn(x, ty, g, Eval(f, e, m, a))
        raise Mismatch("(e2) expects [f e => m] all x in (G). A")
    match node:
        case ForallIn(x, ty, g, Eval(f, e, m, a)):
            _require(x not in expr_fv(f) | expr_fv(e), "(e2): binder occurs in the evaluation")
            _require(m != x and m not in g.fv(), "(e2): anchor clashes with the quantifier")
            return Eval(f, e, m, ForallIn(x, ty, g, a))
    raise Mismatch("(e2) reverse expects all x in (G). [f e => m] A")


def _ax_e3(node, amb, wit, rtl):
    if not rtl:
        match node:
            case Eval(f, e, m, ForallTCV(d, a)):
                try:
                    fty = typecheck_expression(amb, f)
                except TypeCheckError as exc:
                    raise Mismatch(f"(e3): {exc}")
                _require(is_base_type(fty.res), "(e3): the anchor type must be a base type")
                _require_sei(a, "(e3) body")
                return ForallTCV(d, Eval(f, e, m, a))
        raise Mismatch("(e3) expects [f e => m] allctx d. A")
    match node:
        case ForallTCV(d, Eval(f, e, m, a)):
            try:
                fty = typecheck_expression(amb, f)
            except TypeCheckError as exc:
                raise Mismatch(f"(e3): {exc}")
            _require(is_base_type(fty.res), "(e3): the anchor type must be a base type")
            _require_sei(a, "(e3) body")
            return Eval(f, e, m, ForallTCV(d, a))
    raise Mismatch("(e3) reverse expects allctx d. [f e => m] A")


def _ax_ext(node, amb, wit, rtl):
    if not rtl:
        match node:
            case ForallIn(x, ty, g, Eval(e1, EVar(x1), m1,
                                         Eval(e2, EVar(x2), m2, FEq(EVar(a1), EVar(a2))))) \
                    if len(g) == 0 and x1 == x and x2 == x and a1 == m1 and a2 == m2:
                try:
                    t1 = typecheck_expression(amb, e1)
                except TypeCheckError as exc:
                    raise Mismatch(f"(ext): {exc}")
                _require(is_nm_free(t1), "(ext): the function type must be Nm-free")
                return FEq(e1, e2)
        raise Mismatch("(ext) expects all x in (). [e1 x => m1] [e2 x => m2] m1 = m2")
    match node:
        case FEq(e1, e2):
            try:
                t1 = typecheck_expression(amb, e1)
            except TypeCheckError as exc:
                raise Mismatch(f"(ext): {exc}")
            _require(isinstance(t1, Arrow), "(ext) reverse: operands must be functions")
            _require(is_nm_free(t1), "(ext): the function type must be Nm-free")
            x = wit.get("x", "xe")
            m1 = wit.get("m", "m1")
            m2 = wit.get("n", "m2")
            return ForallIn(x, t1.arg, EMPTY_LTC,
                            Eval(e1, EVar(x), m1, Eval(e2, EVar(x), m2,
                                                       FEq(EVar(m1), EVar(m2)))))
    raise Mismatch("(ext) reverse expects an equation between functions")

# ---------------------------------------------------------------------------
# Chain laws (FOL glue and named derived laws)

def _absurd(a: Formula) -> bool:
    match a:
        case Bot():
            return True
        case FEq(EConst(c1), EConst(c2)):
            return c1 != c2
        case Not(FEq(l, r)) if l == r:
            return True
    return False


def _law_and_dup(node, amb, wit, rtl):
    if not rtl:
        return And(node, node)
    match node:
        case And(a, b) if _feq(a, b):
            return a
    raise Mismatch("and_dup reverse expects A /\\ A")


def _law_and_comm(node, amb, wit, rtl):
    match node:
        case And(a, b):
            return And(b, a)
    raise Mismatch("and_comm expects a conjunction")


def _law_and_assoc(node, amb, wit, rtl):
    if not rtl:
        match node:
            case And(And(a, b), c):
                return And(a, And(b, c))
        raise Mismatch("and_assoc expects (A /\\ B) /\\ C")
    match node:
        case And(a, And(b, c)):
            return And(And(a, b), c)
    raise Mismatch("and_assoc reverse expects A /\\ (B /\\ C)")


def _law_and_elim_l(node, amb, wit, rtl):
    match node:
        case And(a, _):
            return a
    raise Mismatch("and_elim_l expects a conjunction")


def _law_and_elim_r(node, amb, wit, rtl):
    match node:
        case And(_, b):
            return b
    raise Mismatch("and_elim_r expects a conjunction")


def _law_top_and(node, amb, wit, rtl):
    if not rtl:
        match node:
            case And(a, Top()):
                return a
            case And(Top(), b):
                return b
        raise Mismatch("top_and expects A /\\ T")
    return And(node, TOP)


def _law_top_intro(node, amb, wit, rtl):
    return TOP


def _law_imp_top(node, amb, wit, rtl):
    if not rtl:
        match node:
            case Implies(Top(), a):
                return a
        raise Mismatch("imp_top expects T -> A")
    return Implies(TOP, node)


def _law_mp(node, amb, wit, rtl):
    match node:
        case And(a, Implies(a2, b)) if _feq(a, a2):
            return b
        case And(Implies(a2, b), a) if _feq(a, a2):
            return b
    raise Mismatch("mp expects A /\\ (A -> B)")


def _law_efq(node, amb, wit, rtl):
    _require(_absurd(node), "efq expects an absurd formula")
    return _want(wit, "A")


def _law_ex_and_pull(node, amb, wit, rtl):
    # A /\ ex x in (G). B  <=>  ex x in (G). (A /\ B), for A Ext-Ind, x not in A
    if not rtl:
        match node:
            case And(a, ExistsIn(x, ty, g, b)):
                _require(x not in formula_fv(a), "ex_and_pull: binder free in the invariant")
                _require_sei(a, "ex_and_pull invariant")
                return ExistsIn(x, ty, g, And(a, b))
        raise Mismatch("ex_and_pull expects A /\\ ex x in (G). B")
    match node:
        case ExistsIn(x, ty, g, And(a, b)):
            _require(x not in formula_fv(a), "ex_and_pull: binder free in the invariant")
            _require_sei(a, "ex_and_pull invariant")
            return And(a, ExistsIn(x, ty, g, b))
    raise Mismatch("ex_and_pull reverse expects ex x in (G). (A /\\ B)")


def _expr_replace_once(e: Expr, old: Expr, new: Expr) -> Expr:
    """Single-pass replacement: matches are not re-examined."""
    if e == old:
        return new
    match e:
        case EPair(a, b):
            return EPair(_expr_replace_once(a, old, new), _expr_replace_once(b, old, new))
        case EEq(a, b):
            return EEq(_expr_replace_once(a, old, new), _expr_replace_once(b, old, new))
        case EProj(i, a):
            return EProj(i, _expr_replace_once(a, old, new))
        case _:
            return e


def _formula_replace_expr(a: Formula, old: Expr, new: Expr) -> Formula:
    match a:
        case FEq(l, r):
            return FEq(_expr_replace_once(l, old, new), _expr_replace_once(r, old, new))
        case Fresh(s, g):
            return Fresh(_expr_replace_once(s, old, new), g)
        case Not(b):
            return Not(_formula_replace_expr(b, old, new))
        case And(l, r):
            return And(_formula_replace_expr(l, old, new), _formula_replace_expr(r, old, new))
        case Or(l, r):
            return Or(_formula_replace_expr(l, old, new), _formula_replace_expr(r, old, new))
        case Implies(l, r):
            return Implies(_formula_replace_expr(l, old, new), _formula_replace_expr(r, old, new))
        case Eval(f, e, m, b):
            return Eval(_expr_replace_once(f, old, new), _expr_replace_once(e, old, new),
                        m, _formula_replace_expr(b, old, new))
        case ForallIn(x, ty, g, b):
            return ForallIn(x, ty, g, _formula_replace_expr(b, old, new))
        case ExistsIn(x, ty, g, b):
            return ExistsIn(x, ty, g, _formula_replace_expr(b, old, new))
        case ForallTCV(d, b):
            return ForallTCV(d, _formula_replace_expr(b, old, new))
        case ExistsTCV(d, b):
            return ExistsTCV(d, _formula_replace_expr(b, old, new))
        case _:
            return a


def _law_subst_eq(node, amb, wit, rtl):
    # rewrite with an equation conjunct: (e1 = e2) /\ A  or  A /\ (e1 = e2)
    eq_side = wit.get("eq", 1)
    match node:
        case And(l, r):
            eq, other = (l, r) if eq_side == 1 else (r, l)
            match eq:
                case FEq(e1, e2):
                    old, new = (e2, e1) if rtl else (e1, e2)
                    at = wit.get("at", ())
                    target, _, _ = resolve_path(other, at, amb)
                    if isinstance(target, Expr):
                        rewritten = replace_path(other, at, _expr_replace_once(target, old, new))
                    else:
                        rewritten = replace_path(other, at, _formula_replace_expr(target, old, new))
                    return And(rewritten, eq) if eq_side == 2 else And(eq, rewritten)
            raise Mismatch("subst_eq: the designated conjunct is not an equation")
    raise Mismatch("subst_eq expects a conjunction with an equation")


def _law_proj_pair(node, amb, wit, rtl):
    if isinstance(node, Expr):
        if not rtl:
            match node:
                case EProj(i, EPair(a, b)):
                    return a if i == 1 else b
            raise Mismatch("proj_pair expects pi_i <a, b>")
        i = _want(wit, "i")
        other = _want(wit, "other")
        pair = EPair(node, other) if i == 1 else EPair(other, node)
        return EProj(i, pair)
    if not rtl:
        def fix_expr(e):
            match e:
                case EProj(i, EPair(a, b)):
                    return fix_expr(a if i == 1 else b)
                case EPair(a, b):
                    return EPair(fix_expr(a), fix_expr(b))
                case EEq(a, b):
                    return EEq(fix_expr(a), fix_expr(b))
                case EProj(i, a):
                    a2 = fix_expr(a)
                    match a2:
                        case EPair(x, y):
                            return x if i == 1 else y
                    return EProj(i, a2)
                case _:
                    return e

        def fix(a):
            match a:
                case FEq(l, r):
                    return FEq(fix_expr(l), fix_expr(r))
                case Fresh(s, g):
                    return Fresh(fix_expr(s), g)
                case Not(b):
                    return Not(fix(b))
                case And(l, r):
                    return And(fix(l), fix(r))
                case Or(l, r):
                    return Or(fix(l), fix(r))
                case Implies(l, r):
                    return Implies(fix(l), fix(r))
                case Eval(f, e, m, b):
                    return Eval(fix_expr(f), fix_expr(e), m, fix(b))
                case ForallIn(x, ty, g, b):
                    return ForallIn(x, ty, g, fix(b))
                case ExistsIn(x, ty, g, b):
                    return ExistsIn(x, ty, g, fix(b))
                case ForallTCV(d, b):
                    return ForallTCV(d, fix(b))
                case ExistsTCV(d, b):
                    return ExistsTCV(d, fix(b))
                case _:
                    return a
        return fix(node)
    raise Mismatch("proj_pair reverse needs an expression position")


def _law_beq_true(node, amb, wit, rtl):
    match node:
        case And(FEq(a1, b1), FEq(e3, EEq(a2, b2))) if a1 == a2 and b1 == b2:
            return FEq(e3, ETRUE)
    raise Mismatch("beq_true expects (a = b) /\\ (e = (a = b))")


def _law_beq_false(node, amb, wit, rtl):
    match node:
        case And(Not(FEq(a1, b1)), FEq(e3, EEq(a2, b2))) if a1 == a2 and b1 == b2:
            return FEq(e3, EFALSE)
    raise Mismatch("beq_false expects ~(a = b) /\\ (e = (a = b))")


_APPLIERS = {
    "eq1": _ax_eq1, "eq2": _ax_eq2, "eq3": _ax_eq3, "eq4": _ax_eq4,
    "u1": _ax_u1, "u2": _ax_u2, "u3": _ax_u3, "u4": _ax_u4, "u5": _ax_u5,
    "ex1": _ax_ex1, "ex2": _ax_ex2, "ex3": _ax_ex3,
    "f1": _ax_f1, "f2": _ax_f2, "f3": _ax_f3, "f4": _ax_f4,
    "utc1": _ax_utc1, "utc2": _ax_utc2, "utc3": _ax_utc3, "utc4": _ax_utc4,
    "e1": _ax_e1, "e2": _ax_e2, "e3": _ax_e3, "ext": _ax_ext,
    "and_dup": _law_and_dup, "and_comm": _law_and_comm,
    "and_assoc": _law_and_assoc, "and_elim_l": _law_and_elim_l,
    "and_elim_r": _law_and_elim_r, "top_and": _law_top_and,
    "top_intro": _law_top_intro, "imp_top": _law_imp_top, "mp": _law_mp,
    "efq": _law_efq, "ex_and_pull": _law_ex_and_pull,
    "subst_eq": _law_subst_eq, "proj_pair": _law_proj_pair,
    "beq_true": _law_beq_true, "beq_false": _law_beq_false,
    "u2_reduce": _law_u2_reduce,
}


def apply_step(current: Formula, step: ChainStep, ltc: LTC) -> Formula:
    if step.name not in _APPLIERS:
        raise Mismatch(f"unknown axiom or law '{step.name}'")
    node, amb, pol = resolve_path(current, step.path, ltc)
    kind = SCHEMA_KIND[step.name]
    if kind == "imp":
        if pol == 0:
            raise Mismatch(f"'{step.name}' is an implication; it cannot rewrite "
                           f"inside an expression position")
        if (pol > 0) == step.rtl:
            raise Mismatch(f"'{step.name}' applied against its direction at this polarity")
    new = _APPLIERS[step.name](node, amb, step.wit, step.rtl)
    return replace_path(current, step.path, new)


def check_chain(ltc: LTC, left: Formula, right: Formula, steps) -> None:
    current = left
    for i, step in enumerate(steps, 1):
        try:
            current = apply_step(current, step, ltc)
        except Mismatch as e:
            raise Mismatch(f"chain step {i} ({step.name}): {e}")
        except (NuError, TypeCheckError) as e:
            raise Mismatch(f"chain step {i} ({step.name}): {e}")
    if not _feq(current, right):
        raise Mismatch(f"chain ends at '{formula_to_str(current)}', "
                       f"not the stated '{formula_to_str(right)}'")
    typecheck_formula(ltc, right)


def check_axiom_instance(axiom: str, ltc: LTC, left: Formula, right: Formula,
                         wit: dict | None = None) -> None:
    """Check that left ==> right (or <=>) instantiates the schema."""
    if axiom not in AXIOM_IDS:
        raise Mismatch(f"unknown axiom id '{axiom}'")
    wit = wit or {}
    try:
        out = _APPLIERS[axiom](left, ltc, wit, rtl=False)
        if _feq(out, right):
            return
        err = f"axiom ({axiom}) instance produces '{formula_to_str(out)}'"
    except Mismatch as e:
        err = str(e)
    if SCHEMA_KIND[axiom] == "iff":
        try:
            out = _APPLIERS[axiom](left, ltc, wit, rtl=True)
            if _feq(out, right):
                return
        except Mismatch:
            pass
    raise Mismatch(err)

# ---------------------------------------------------------------------------
# Rule checks

def _pre_matches(stated: Formula, a: Formula, b: Formula) -> bool:
    """stated == A /\\ B, with the usual elision of T conjuncts."""
    if _feq(stated, And(a, b)):
        return True
    if _feq(a, TOP) and _feq(stated, b):
        return True
    if _feq(b, TOP) and _feq(stated, a):
        return True
    return False


def _split_invariant(stated: Formula, a: Formula, wit: dict):
    """Recover B from stated == A /\\ B (T elided)."""
    if "B" in wit:
        b = wit["B"]
        _require(_pre_matches(stated, a, b), "premise precondition is not A /\\ B")
        return b
    if _feq(stated, a):
        return TOP
    match stated:
        case And(l, r) if _feq(l, a):
            return r
    raise Mismatch("cannot split the premise precondition into A /\\ B "
                   "(give an explicit B witness)")


def _program_type(ltc: LTC, t: Term) -> Type:
    return typecheck_term(ltc.to_stc(), t)


def _expect_triple(line: ProofLine) -> Triple:
    _require(isinstance(line.judgement, Triple), f"line {line.label} is not a triple")
    return line.judgement


def _expect_entail(line: ProofLine) -> Entail:
    _require(isinstance(line.judgement, Entail), f"line {line.label} is not an entailment")
    return line.judgement


def _check_thin(c: Formula, var: str, amb: LTC, what: str):
    rep = is_thin(c, var, amb)
    _require(rep.verdict, f"{what}: postcondition is not thin w.r.t. '{var}'")


def _rule_var_const(line, premises, wit):
    t = _expect_triple(line)
    match t.program:
        case Var(x):
            e = EVar(x)
        case Const(c):
            e = EConst(c)
        case _:
            raise Mismatch("[Var]/[Const] applies to a variable or constant program")
    try:
        expected = subst_expr(t.post, e, t.anchor, line.ltc)
    except (SubstitutionError, NuError) as exc:
        raise Mismatch(f"computing A{{|{e}/{t.anchor}|}}: {exc}")
    _require(_feq(t.pre, expected),
             f"precondition must be A{{|{e}/{t.anchor}|}} = '{formula_to_str(expected)}'")


def _rule_gensym(line, premises, wit):
    t = _expect_triple(line)
    _require(isinstance(t.program, Gensym), "[Gensym] applies to the gensym constant")
    _require(_feq(t.pre, TOP), "[Gensym] has precondition T")
    u = t.anchor
    expected = ForallTCV("d", Eval(EVar(u), EUNIT, "m",
                                   Fresh(EVar("m"), LTC((TCVBind("d"),)))))
    _require(_feq(t.post, expected),
             "[Gensym] postcondition must be allctx d. [u () => m] m # (d)")


def _rule_lam(line, premises, wit):
    t = _expect_triple(line)
    (p,) = premises
    pt = _expect_triple(p)
    match t.program:
        case Lam(x, ty, m_body):
            pass
        case _:
            raise Mismatch("[Lam] applies to a lambda abstraction")
    _require(len(p.ltc) >= 2, "[Lam] premise LTC must end with a TCV and the binder")
    *prefix, d_entry, x_entry = p.ltc.entries
    _require(tuple(prefix) == line.ltc.entries,
             "[Lam] premise LTC must extend the conclusion LTC")
    _require(isinstance(d_entry, TCVBind), "[Lam] premise LTC must add a TCV")
    _require(isinstance(x_entry, VarBind) and x_entry.ty == ty,
             "[Lam] premise LTC must add the binder at the annotation type")
    d, xv = d_entry.name, x_entry.name
    from .terms import subst as term_subst
    _require(alpha_eq(pt.program, term_subst(m_body, x, Var(xv))),
             "[Lam] premise program must be the lambda body")
    a = t.pre
    b = _split_invariant(pt.pre, a, wit)
    _require(xv not in formula_fv(a), "[Lam]: the binder is free in the invariant A")
    _require_sei(a, "[Lam] invariant A")
    inner = Eval(EVar(t.anchor), EVar(xv), pt.anchor, pt.post)
    body = inner if _feq(b, TOP) and not isinstance(t.post, ForallTCV) else inner
    delta_ltc = LTC((TCVBind(d),))
    candidates = [ForallTCV(d, ForallIn(xv, ty, delta_ltc, Implies(b, inner)))]
    if _feq(b, TOP):
        candidates.append(ForallTCV(d, ForallIn(xv, ty, delta_ltc, inner)))
    _require(any(_feq(t.post, c) for c in candidates),
             "[Lam] conclusion postcondition must be "
             "allctx d. all x in (d). (B -> [u x => m] C)")


def _rule_app(line, premises, wit):
    t = _expect_triple(line)
    p1, p2 = premises
    t1, t2 = _expect_triple(p1), _expect_triple(p2)
    match t.program:
        case App(mf, ma):
            pass
        case _:
            raise Mismatch("[App] applies to an application")
    _require(alpha_eq(t1.program, mf) and alpha_eq(t2.program, ma),
             "[App] premise programs must be the function and the argument")
    _require(p1.ltc.entries == line.ltc.entries, "[App] first premise at the conclusion LTC")
    ty_m = _program_type(p1.ltc, t1.program)
    _require(p2.ltc.entries == line.ltc.entries + (VarBind(t1.anchor, ty_m),),
             "[App] second premise LTC must be the conclusion LTC plus the first anchor")
    _require(_feq(t1.pre, t.pre), "[App] first premise precondition must be A")
    _require(_feq(t2.pre, t1.post), "[App] premises must chain: B")
    expected = Eval(EVar(t1.anchor), EVar(t2.anchor), t.anchor, t.post)
    _require(_feq(t2.post, expected),
             "[App] second postcondition must be [m n => u] C")
    ty_n = _program_type(p2.ltc, t2.program)
    _require(isinstance(ty_m, Arrow), "[App]: function premise is not of arrow type")
    amb = p2.ltc.add_var(t2.anchor, ty_n).add_var(t.anchor, ty_m.res)
    _check_thin(t.post, t1.anchor, amb, "[App]")
    _check_thin(t.post, t2.anchor, amb, "[App]")


def _rule_eq_pair(line, premises, wit, make_expr, make_term, rulename):
    t = _expect_triple(line)
    p1, p2 = premises
    t1, t2 = _expect_triple(p1), _expect_triple(p2)
    parts = make_term(t.program)
    if parts is None:
        raise Mismatch(f"[{rulename}] applies to the wrong program shape")
    mterm, nterm = parts
    _require(alpha_eq(t1.program, mterm) and alpha_eq(t2.program, nterm),
             f"[{rulename}] premise programs must be the two operands")
    _require(p1.ltc.entries == line.ltc.entries, f"[{rulename}] first premise at the conclusion LTC")
    ty_m = _program_type(p1.ltc, t1.program)
    _require(p2.ltc.entries == line.ltc.entries + (VarBind(t1.anchor, ty_m),),
             f"[{rulename}] second premise LTC must add the first anchor")
    _require(_feq(t1.pre, t.pre), f"[{rulename}] first premise precondition must be A")
    _require(_feq(t2.pre, t1.post), f"[{rulename}] premises must chain: B")
    ty_n = _program_type(p2.ltc, t2.program)
    amb = p2.ltc.add_var(t2.anchor, ty_n)
    try:
        expected = subst_expr(t.post, make_expr(t1.anchor, t2.anchor), t.anchor, amb)
    except (SubstitutionError, NuError) as exc:
        raise Mismatch(f"[{rulename}] postcondition wiring: {exc}")
    _require(_feq(t2.post, expected),
             f"[{rulename}] second postcondition must be C{{|../{t.anchor}|}} "
             f"= '{formula_to_str(expected)}'")
    ty_u = _program_type(line.ltc, t.program)
    amb_u = amb.add_var(t.anchor, ty_u)
    _check_thin(t.post, t1.anchor, amb_u, f"[{rulename}]")
    _check_thin(t.post, t2.anchor, amb_u, f"[{rulename}]")


def _rule_eq(line, premises, wit):
    def parts(prog):
        match prog:
            case EqT(a, b):
                return (a, b)
        return None
    _rule_eq_pair(line, premises, wit,
                  lambda m, n: EEq(EVar(m), EVar(n)), parts, "Eq")


def _rule_pair(line, premises, wit):
    def parts(prog):
        match prog:
            case PairT(a, b):
                return (a, b)
        return None
    _rule_eq_pair(line, premises, wit,
                  lambda m, n: EPair(EVar(m), EVar(n)), parts, "Pair")


def _rule_proj(line, premises, wit, index):
    t = _expect_triple(line)
    (p,) = premises
    t1 = _expect_triple(p)
    match t.program:
        case Proj(i, m) if i == index:
            pass
        case _:
            raise Mismatch(f"[Proj{index}] applies to pi{index}")
    _require(alpha_eq(t1.program, t.program.arg), "[Proj] premise program must be the operand")
    _require(p.ltc.entries == line.ltc.entries, "[Proj] premise at the conclusion LTC")
    _require(_feq(t1.pre, t.pre), "[Proj] premise precondition must be A")
    ty_m = _program_type(p.ltc, t1.program)
    amb = p.ltc.add_var(t1.anchor, ty_m)
    try:
        expected = subst_expr(t.post, EProj(index, EVar(t1.anchor)), t.anchor, amb)
    except (SubstitutionError, NuError) as exc:
        raise Mismatch(f"[Proj] postcondition wiring: {exc}")
    _require(_feq(t1.post, expected),
             f"[Proj] premise postcondition must be C{{|pi{index}(m)/u|}} "
             f"= '{formula_to_str(expected)}'")
    ty_u = _program_type(line.ltc, t.program)
    _check_thin(t.post, t1.anchor, amb.add_var(t.anchor, ty_u), "[Proj]")


def _rule_if(line, premises, wit):
    t = _expect_triple(line)
    p1, p2, p3 = premises
    t1, t2, t3 = (_expect_triple(p) for p in (p1, p2, p3))
    match t.program:
        case If(c, n1, n2):
            pass
        case _:
            raise Mismatch("[If] applies to a conditional")
    _require(alpha_eq(t1.program, c), "[If] first premise must run the condition")
    _require(alpha_eq(t2.program, n1) and alpha_eq(t3.program, n2),
             "[If] branch premises must run the branches")
    for p in (p1, p2, p3):
        _require(p.ltc.entries == line.ltc.entries, "[If] premises at the conclusion LTC")
    _require(_feq(t1.pre, t.pre), "[If] first premise precondition must be A")
    for bi, tb in ((ETRUE, t2), (EFALSE, t3)):
        try:
            expected = subst_expr(t1.post, bi, t1.anchor, line.ltc)
        except (SubstitutionError, NuError) as exc:
            raise Mismatch(f"[If] branch precondition wiring: {exc}")
        _require(_feq(tb.pre, expected),
                 f"[If] branch precondition must be B{{|{bi}/{t1.anchor}|}} "
                 f"= '{formula_to_str(expected)}'")
        _require(tb.anchor == t.anchor, "[If] branch anchors must be the conclusion anchor")
        _require(_feq(tb.post, t.post), "[If] branch postconditions must be C")


def _rule_let(line, premises, wit):
    t = _expect_triple(line)
    p1, p2 = premises
    t1, t2 = _expect_triple(p1), _expect_triple(p2)
    match t.program:
        case Let(x, m, n):
            pass
        case _:
            raise Mismatch("[Let] applies to a let binding")
    _require(t1.anchor == x, "[Let] first premise anchor must be the bound variable")
    _require(alpha_eq(t1.program, m) and alpha_eq(t2.program, n),
             "[Let] premise programs must be the binding and the body")
    _require(p1.ltc.entries == line.ltc.entries, "[Let] first premise at the conclusion LTC")
    ty_x = _program_type(p1.ltc, t1.program)
    _require(p2.ltc.entries == line.ltc.entries + (VarBind(x, ty_x),),
             "[Let] second premise LTC must add the bound variable")
    _require(_feq(t1.pre, t.pre), "[Let] first premise precondition must be A")
    _require(_feq(t2.pre, t1.post), "[Let] premises must chain: B")
    _require(t2.anchor == t.anchor, "[Let] anchors must agree")
    _require(_feq(t2.post, t.post), "[Let] postcondition must be C")
    ty_u = _program_type(p2.ltc, t2.program)
    _check_thin(t.post, x, p2.ltc.add_var(t.anchor, ty_u), "[Let]")


def _rule_letfresh(line, premises, wit):
    t = _expect_triple(line)
    (p,) = premises
    t1 = _expect_triple(p)
    match t.program:
        case Let(x, App(Gensym(), Const("unit")), m):
            pass
        case _:
            raise Mismatch("[LetFresh] applies to let x = gensym () in M")
    _require(p.ltc.entries == line.ltc.entries + (VarBind(x, NM),),
             "[LetFresh] premise LTC must add the fresh name variable at Nm")
    _require(alpha_eq(t1.program, m), "[LetFresh] premise program must be the body")
    a = t.pre
    fresh_part = Fresh(EVar(x), line.ltc)
    _require(_pre_matches(t1.pre, a, fresh_part),
             "[LetFresh] premise precondition must be A /\\ x # (conclusion LTC)")
    _require_sei(a, "[LetFresh] invariant A")
    _require(t1.anchor == t.anchor, "[LetFresh] anchors must agree")
    _require(_feq(t1.post, t.post), "[LetFresh] postcondition must be C")
    ty_u = _program_type(p.ltc, t1.program)
    _check_thin(t.post, x, p.ltc.add_var(t.anchor, ty_u), "[LetFresh]")


def _rule_conseq(line, premises, wit):
    t = _expect_triple(line)
    pe, pt, po = premises
    e1, t1, e2 = _expect_entail(pe), _expect_triple(pt), _expect_entail(po)
    _require(pt.ltc.entries == line.ltc.entries, "[Conseq] triple premise at the same LTC")
    _require(pe.ltc.entries == line.ltc.entries,
             "[Conseq] precondition entailment at the conclusion LTC")
    ty = _program_type(line.ltc, t.program)
    _require(po.ltc.entries == line.ltc.entries + (VarBind(t.anchor, ty),),
             "[Conseq] postcondition entailment at the LTC extended by the anchor")
    _require(alpha_eq(t1.program, t.program), "[Conseq] programs must agree")
    _require(t1.anchor == t.anchor, "[Conseq] anchors must agree")
    _require(_feq(e1.left, t.pre) and _feq(e1.right, t1.pre),
             "[Conseq] needs A ==> A' for the preconditions")
    _require(_feq(e2.left, t1.post) and _feq(e2.right, t.post),
             "[Conseq] needs B' ==> B for the postconditions")


def _rule_invar(line, premises, wit):
    t = _expect_triple(line)
    (p,) = premises
    t1 = _expect_triple(p)
    _require(p.ltc.entries == line.ltc.entries, "[Invar] premise at the same LTC")
    _require(alpha_eq(t1.program, t.program) and t1.anchor == t.anchor,
             "[Invar] program and anchor must agree")
    c = wit.get("C")
    if c is None:
        match t.pre:
            case And(_, r):
                c = r
            case _:
                raise Mismatch("[Invar] needs the invariant C (give a C witness)")
    _require(_feq(t.pre, And(t1.pre, c)), "[Invar] precondition must be A /\\ C")
    _require(_feq(t.post, And(t1.post, c)), "[Invar] postcondition must be B /\\ C")
    _require_sei(c, "[Invar] invariant C")


def _rule_andpost(line, premises, wit):
    t = _expect_triple(line)
    p1, p2 = premises
    t1, t2 = _expect_triple(p1), _expect_triple(p2)
    for p in (p1, p2):
        _require(p.ltc.entries == line.ltc.entries, "[AndPost] premises at the same LTC")
    _require(alpha_eq(t1.program, t.program) and alpha_eq(t2.program, t.program),
             "[AndPost] programs must agree")
    _require(t1.anchor == t.anchor and t2.anchor == t.anchor, "[AndPost] anchors must agree")
    _require(_feq(t1.pre, t.pre) and _feq(t2.pre, t.pre),
             "[AndPost] preconditions must agree")
    _require(_feq(t.post, And(t1.post, t2.post)),
             "[AndPost] postcondition must be B1 /\\ B2")


def _rule_andimplies(line, premises, wit):
    t = _expect_triple(line)
    (p,) = premises
    t1 = _expect_triple(p)
    _require(p.ltc.entries == line.ltc.entries, "[AndImplies] premise at the same LTC")
    _require(alpha_eq(t1.program, t.program) and t1.anchor == t.anchor,
             "[AndImplies] program and anchor must agree")
    match t.post:
        case Implies(b, c):
            pass
        case _:
            raise Mismatch("[AndImplies] conclusion postcondition must be B -> C")
    _require(_feq(t1.post, c), "[AndImplies] premise postcondition must be C")
    _require(_pre_matches(t1.pre, t.pre, b),
             "[AndImplies] premise precondition must be A /\\ B")


_RULES = {
    "Var": (_rule_var_const, 0),
    "Const": (_rule_var_const, 0),
    "Gensym": (_rule_gensym, 0),
    "Lam": (_rule_lam, 1),
    "App": (_rule_app, 2),
    "Eq": (_rule_eq, 2),
    "Pair": (_rule_pair, 2),
    "Proj1": (lambda l, p, w: _rule_proj(l, p, w, 1), 1),
    "Proj2": (lambda l, p, w: _rule_proj(l, p, w, 2), 1),
    "If": (_rule_if, 3),
    "Let": (_rule_let, 2),
    "LetFresh": (_rule_letfresh, 1),
    "Conseq": (_rule_conseq, 3),
    "Invar": (_rule_invar, 1),
    "AndPost": (_rule_andpost, 2),
    "AndImplies": (_rule_andimplies, 1),
}


def check_rule(line: ProofLine, premises) -> None:
    just = line.just
    if just.rule not in _RULES:
        raise Mismatch(f"unknown rule '{just.rule}'")
    fn, arity = _RULES[just.rule]
    _require(len(premises) == arity,
             f"[{just.rule}] takes {arity} premise(s), got {len(premises)}")
    if isinstance(line.judgement, Triple):
        typecheck_triple(line.ltc, line.judgement)
    fn(line, premises, just.wit)

# ---------------------------------------------------------------------------
# Entailment checking and whole scripts

def check_entailment(ltc: LTC, left: Formula, right: Formula, just,
                     budget=None) -> str:
    """Returns 'ok' or 'admitted'; raises Mismatch on failure."""
    typecheck_formula(ltc, left)
    typecheck_formula(ltc, right)
    match just:
        case ByChain(steps):
            check_chain(ltc, left, right, steps)
            return "ok"
        case ByAxiom(name, wit):
            check_axiom_instance(name, ltc, left, right, wit)
            return "ok"
        case ByAdmit(_):
            return "admitted"
        case ByOracle():
            from .models import (DEFAULT_BUDGET, models_for_ltc, satisfies)
            b = budget or DEFAULT_BUDGET
            models = models_for_ltc(ltc, b)
            if not models:
                raise Mismatch("oracle: no well-constructed model found for the LTC")
            goal = Implies(left, right)
            for xi in models:
                v = satisfies(xi, goal, b)
                if v.kind == "fails":
                    raise Mismatch(f"oracle: countermodel {xi}")
                if v.kind == "unknown":
                    raise Mismatch(f"oracle: undecided on {xi} ({v.reason})")
            return "ok"
    raise Mismatch("entailments take CHAIN, AXIOM, ADMIT or ORACLE justifications")


def check_line(line: ProofLine, resolved: dict, mode: str, budget=None) -> LineResult:
    try:
        if isinstance(line.judgement, Entail):
            if isinstance(line.just, ByRule):
                raise Mismatch("rules do not derive entailments")
            status = check_entailment(line.ltc, line.judgement.left,
                                      line.judgement.right, line.just, budget)
            return LineResult(line.label, status)
        # triple lines
        match line.just:
            case ByRule(_, premise_labels, _):
                premises = []
                for lab in premise_labels:
                    if lab not in resolved:
                        raise Mismatch(f"premise '{lab}' does not refer to an earlier line")
                    premises.append(resolved[lab])
                check_rule(line, premises)
                return LineResult(line.label, "ok")
            case ByAdmit(_):
                typecheck_triple(line.ltc, line.judgement)
                return LineResult(line.label, "admitted")
            case _:
                raise Mismatch("triples are justified by rules (or ADMIT)")
    except (Mismatch, NuError, TypeCheckError) as e:
        return LineResult(line.label, "failed", str(e))


def check_script(lines, mode: str = "strict", budget=None) -> CheckReport:
    results = []
    resolved = {}
    ok = True
    for line in lines:
        if line.label in resolved:
            results.append(LineResult(line.label, "failed", "duplicate label"))
            ok = False
            continue
        res = check_line(line, resolved, mode, budget)
        results.append(res)
        if res.status == "failed":
            ok = False
        elif res.status == "admitted" and mode == "strict":
            ok = False
        if res.status != "failed":
            resolved[line.label] = line
    return CheckReport(tuple(results), ok, mode)


# ---------------------------------------------------------------------------
# Script parsing

FORMULA_KEYS = {"A", "B", "C", "P", "Q"}
EXPR_KEYS = {"e", "e1", "e2", "other", "subject"}
LTC_KEYS = {"G", "G0", "G1", "G2", "to"}
INT_KEYS = {"split", "i", "eq"}
PATH_KEYS = {"at"}
IDENT_KEYS = {"x", "y", "z", "m", "n", "u", "d", "f", "var", "ty"}


def _parse_witness_value(ts: TokenStream, key: str):
    if key in FORMULA_KEYS:
        return parse_formula_stream(ts)
    if key in EXPR_KEYS:
        from .logic import parse_expr_stream
        return parse_expr_stream(ts)
    if key in LTC_KEYS:
        return parse_ltc_stream(ts)
    if key in INT_KEYS:
        tok = ts.peek()
        if tok.kind != "num":
            raise ParseError(f"witness '{key}' expects a number", tok.line, tok.col)
        ts.next()
        return int(tok.text)
    if key in PATH_KEYS:
        return _parse_path(ts)
    if key == "ty":
        return parse_type_stream(ts)
    tok = ts.peek()
    if tok.kind in ("ident", "kw"):
        ts.next()
        return tok.text
    raise ParseError(f"witness '{key}' expects an identifier", tok.line, tok.col)


def _parse_witnesses(ts: TokenStream) -> dict:
    wit = {}
    while True:
        tok = ts.peek()
        if tok.kind != "ident":
            raise ParseError("expected a witness key", tok.line, tok.col)
        key = tok.text
        ts.next()
        ts.expect("=")
        wit[key] = _parse_witness_value(ts, key)
        if not ts.eat(","):
            return wit


def _parse_path(ts: TokenStream) -> tuple:
    out = []
    tok = ts.peek()
    if tok.kind != "num":
        raise ParseError("expected a path", tok.line, tok.col)
    out.append(int(ts.next().text))
    while ts.at("."):
        nxt = ts.peek(1)
        if nxt.kind != "num":
            break
        ts.next()
        out.append(int(ts.next().text))
    return tuple(out)


def _parse_chain_step(ts: TokenStream) -> ChainStep:
    tok = ts.peek()
    if tok.kind not in ("ident", "kw"):
        raise ParseError("expected an axiom or law name", tok.line, tok.col)
    name = tok.text
    ts.next()
    path = ()
    rtl = False
    wit = {}
    if ts.eat("@"):
        path = _parse_path(ts)
    if ts.peek().kind == "ident" and ts.peek().text == "rtl":
        ts.next()
        rtl = True
    if ts.peek().kind == "ident" and ts.peek().text == "WITH":
        ts.next()
        wit = _parse_witnesses(ts)
    return ChainStep(name, path, rtl, wit)


def _parse_justification(ts: TokenStream):
    tok = ts.peek()
    word = tok.text
    if word == "CHAIN":
        ts.next()
        ts.expect("(")
        steps = []
        if not ts.eat(")"):
            steps.append(_parse_chain_step(ts))
            while ts.eat(";"):
                steps.append(_parse_chain_step(ts))
            ts.expect(")")
        return ByChain(tuple(steps))
    if word == "AXIOM":
        ts.next()
        name = ts.peek().text
        ts.next()
        wit = {}
        if ts.peek().kind == "ident" and ts.peek().text == "WITH":
            ts.next()
            wit = _parse_witnesses(ts)
        return ByAxiom(name, wit)
    if word == "ADMIT":
        ts.next()
        note = ""
        if ts.peek().kind == "str":
            note = ts.next().text
        return ByAdmit(note)
    if word == "ORACLE":
        ts.next()
        return ByOracle()
    # otherwise a rule name
    if tok.kind not in ("ident", "kw"):
        raise ParseError("expected a rule name after BY", tok.line, tok.col)
    ts.next()
    premises = []
    wit = {}
    if ts.peek().kind == "ident" and ts.peek().text == "FROM":
        ts.next()
        premises.append(ts.ident())
        while ts.eat(","):
            premises.append(ts.ident())
    if ts.peek().kind == "ident" and ts.peek().text == "WITH":
        ts.next()
        wit = _parse_witnesses(ts)
    return ByRule(word, tuple(premises), wit)


def parse_script_line(text: str) -> ProofLine:
    ts = TokenStream(tokenize(text))
    label = ts.ident()
    ts.expect(":")
    ltc = parse_ltc_stream(ts)
    ts.expect("|-")
    if ts.at("{"):
        ts.expect("{")
        pre = parse_formula_stream(ts)
        ts.expect("}")
        prog = parse_term_stream(ts)
        ts.expect(":")
        anchor = ts.ident()
        ts.expect("{")
        post = parse_formula_stream(ts)
        ts.expect("}")
        judgement = Triple(pre, prog, anchor, post)
    else:
        left = parse_formula_stream(ts)
        ts.expect("==>")
        right = parse_formula_stream(ts)
        judgement = Entail(left, right)
    tok = ts.peek()
    if not (tok.kind == "ident" and tok.text == "BY"):
        raise ParseError("expected BY", tok.line, tok.col)
    ts.next()
    just = _parse_justification(ts)
    if not ts.done():
        tok = ts.peek()
        raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.col)
    return ProofLine(label, ltc, judgement, just)


def parse_script(text: str):
    # physical lines joined on trailing backslash; '--' comments stripped
    logical = []
    pending = ""
    for raw in text.splitlines():
        line = raw.rstrip()
        if line.endswith("\\"):
            pending += line[:-1] + " "
            continue
        pending += line
        stripped = pending.strip()
        pending = ""
        if stripped and not stripped.startswith("--"):
            logical.append(stripped)
    if pending.strip():
        logical.append(pending.strip())
    return [parse_script_line(l) for l in logical]


def check_script_text(text: str, mode: str = "strict", budget=None) -> CheckReport:
    return check_script(parse_script(text), mode, budget)


# ---------------------------------------------------------------------------
# STLC script translation

def translate_stlc_script(lines):
    """Translate a script of STLC-logic judgements into nu-logic ones."""
    out = []
    for line in lines:
        if line.ltc.ftcv():
            raise StlcFragmentError(f"line {line.label}: STLC scripts have no TCVs")
        for entry in line.ltc.entries:
            if isinstance(entry, VarBind) and not is_nm_free(entry.ty):
                raise StlcFragmentError(
                    f"line {line.label}: type of '{entry.name}' contains Nm")
        match line.judgement:
            case Triple(pre, prog, anchor, post):
                from .classify import translate_stlc_triple
                judgement = translate_stlc_triple(Triple(pre, prog, anchor, post))
            case Entail(left, right):
                judgement = Entail(translate_stlc_formula(left),
                                   translate_stlc_formula(right))
            case _:
                raise AssertionError(line.judgement)
        just = line.just
        if isinstance(just, ByRule):
            wit = {k: (translate_stlc_formula(v) if isinstance(v, Formula) else v)
                   for k, v in just.wit.items()}
            just = ByRule(just.rule, just.premises, wit)
        elif isinstance(just, ByChain):
            steps = tuple(
                ChainStep(s.name, s.path, s.rtl,
                          {k: (translate_stlc_formula(v) if isinstance(v, Formula) else v)
                           for k, v in s.wit.items()})
                for s in just.steps)
            just = ByChain(steps)
        out.append(ProofLine(line.label, line.ltc, judgement, just))
    return out


def script_to_text(lines) -> str:
    out = []
    for line in lines:
        if isinstance(line.judgement, Triple):
            t = line.judgement
            j = (f"{{{formula_to_str(t.pre)}}} {term_to_str(t.program)} "
                 f":{t.anchor} {{{formula_to_str(t.post)}}}")
        else:
            j = str(line.judgement)
        out.append(f"{line.label}: {ltc_to_str(line.ltc)} |- {j} BY {_just_to_str(line.just)}")
    return "\n".join(out) + "\n"


def _wit_to_str(wit):
    parts = []
    for k, v in wit.items():
        if isinstance(v, Formula):
            parts.append(f"{k} = {formula_to_str(v)}")
        elif isinstance(v, LTC):
            parts.append(f"{k} = {ltc_to_str(v)}")
        elif isinstance(v, Expr):
            from .logic import expr_to_str
            parts.append(f"{k} = {expr_to_str(v)}")
        elif isinstance(v, tuple):
            parts.append(f"{k} = " + ".".join(str(i) for i in v))
        else:
            parts.append(f"{k} = {v}")
    return ", ".join(parts)


def _just_to_str(just) -> str:
    match just:
        case ByRule(rule, premises, wit):
            s = rule
            if premises:
                s += " FROM " + ", ".join(premises)
            if wit:
                s += " WITH " + _wit_to_str(wit)
            return s
        case ByAxiom(name, wit):
            s = f"AXIOM {name}"
            if wit:
                s += " WITH " + _wit_to_str(wit)
            return s
        case ByChain(steps):
            parts = []
            for st in steps:
                p = st.name
                if st.path:
                    p += " @ " + ".".join(str(i) for i in st.path)
                if st.rtl:
                    p += " rtl"
                if st.wit:
                    p += " WITH " + _wit_to_str(st.wit)
                parts.append(p)
            return "CHAIN (" + "; ".join(parts) + ")"
        case ByAdmit(note):
            return f'ADMIT "{note}"'
        case ByOracle():
            return "ORACLE"
    raise AssertionError(just)
