"""Logical expressions, formulae, logical type contexts and triples.

LTCs generalise standard type contexts: they are ordered and may contain
type-context variables (TCVs) alongside program variables.  Formulae add
a quantifier restricted to values derivable from an LTC, a quantifier
over future LTCs, an evaluation formula internalising triples, and the
freshness predicate.
"""

from __future__ import annotations

from dataclasses import dataclass

from .terms import (
    Arrow, Base, Prod, Term, Type, TypeCheckError, ParseError, NuError,
    Token, TokenStream, tokenize, parse_type_stream, parse_term_stream,
    type_to_str, term_to_str, typecheck_term, an, fresh_var,
    BOOL, NM, UNIT, COMPARABLE,
)


# ---------------------------------------------------------------------------
# Logical type contexts

@dataclass(frozen=True)
class VarBind:
    name: str
    ty: Type


@dataclass(frozen=True)
class TCVBind:
    name: str


@dataclass(frozen=True)
class LTC:
    entries: tuple = ()

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __str__(self):
        return ltc_to_str(self)

    def dom(self):
        return tuple(e.name for e in self.entries)

    def lookup(self, x):
        """Type of program variable x, or None."""
        for e in self.entries:
            if isinstance(e, VarBind) and e.name == x:
                return e.ty
        return None

    def has_tcv(self, d):
        return any(isinstance(e, TCVBind) and e.name == d for e in self.entries)

    def fv(self):
        return tuple(e.name for e in self.entries if isinstance(e, VarBind))

    def ftcv(self):
        return tuple(e.name for e in self.entries if isinstance(e, TCVBind))

    def add_var(self, x, ty):
        if x in self.dom():
            raise NuError(f"duplicate binding '{x}' in LTC")
        return LTC(self.entries + (VarBind(x, ty),))

    def add_tcv(self, d):
        if d in self.dom():
            raise NuError(f"duplicate binding '{d}' in LTC")
        return LTC(self.entries + (TCVBind(d),))

    def concat(self, other: "LTC"):
        overlap = set(self.dom()) & set(other.dom())
        if overlap:
            raise NuError(f"LTC concatenation with overlapping domain {sorted(overlap)}")
        return LTC(self.entries + other.entries)

    def remove_var(self, x):
        return LTC(tuple(e for e in self.entries
                         if not (isinstance(e, VarBind) and e.name == x)))

    def remove_tcvs(self):
        return LTC(tuple(e for e in self.entries if isinstance(e, VarBind)))

    def to_stc(self) -> dict:
        return {e.name: e.ty for e in self.entries if isinstance(e, VarBind)}

    def prefix_before(self, x):
        """Entries strictly before the binding of x."""
        out = []
        for e in self.entries:
            if e.name == x:
                return LTC(tuple(out))
            out.append(e)
        raise NuError(f"'{x}' not bound in LTC {self}")


EMPTY_LTC = LTC()


def subsumes(big: LTC, small: LTC) -> bool:
    """The LTC typing judgement: `small` is an ordered subset of `big`."""
    i = 0
    entries = big.entries
    for want in small.entries:
        while i < len(entries) and entries[i] != want:
            i += 1
        if i >= len(entries):
            return False
        i += 1
    return True


# ---------------------------------------------------------------------------
# Expressions.  No names and no gensym; equality between expressions of a
# comparable type is itself a Boolean expression (written "(e = e')"), as
# used pervasively in postconditions such as m = (x=y).

class Expr:
    __slots__ = ()

    def __str__(self):
        return expr_to_str(self)


@dataclass(frozen=True)
class EVar(Expr):
    name: str


@dataclass(frozen=True)
class EConst(Expr):
    value: str  # 'true' | 'false' | 'unit'


@dataclass(frozen=True)
class EPair(Expr):
    fst: Expr
    snd: Expr


@dataclass(frozen=True)
class EProj(Expr):
    index: int
    arg: Expr


@dataclass(frozen=True)
class EEq(Expr):
    left: Expr
    right: Expr


ETRUE = EConst("true")
EFALSE = EConst("false")
EUNIT = EConst("unit")


def expr_fv(e: Expr) -> frozenset:
    match e:
        case EVar(x):
            return frozenset((x,))
        case EPair(a, b) | EEq(a, b):
            return expr_fv(a) | expr_fv(b)
        case EProj(_, a):
            return expr_fv(a)
        case _:
            return frozenset()


def expr_has_destructor(e: Expr) -> bool:
    """Projections and equality contexts count as destructors."""
    match e:
        case EProj(_, _) | EEq(_, _):
            return True
        case EPair(a, b):
            return expr_has_destructor(a) or expr_has_destructor(b)
        case _:
            return False


def expr_subst(e: Expr, x: str, by: Expr) -> Expr:
    match e:
        case EVar(y):
            return by if y == x else e
        case EPair(a, b):
            return EPair(expr_subst(a, x, by), expr_subst(b, x, by))
        case EEq(a, b):
            return EEq(expr_subst(a, x, by), expr_subst(b, x, by))
        case EProj(i, a):
            return EProj(i, expr_subst(a, x, by))
        case _:
            return e


# ---------------------------------------------------------------------------
# Formulae

class Formula:
    __slots__ = ()

    def __str__(self):
        return formula_to_str(self)


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bot(Formula):
    pass


@dataclass(frozen=True)
class FEq(Formula):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Eval(Formula):
    """[e e' => m] A : running e on e' binds the result to anchor m in A."""
    fun: Expr
    arg: Expr
    anchor: str
    body: Formula


@dataclass(frozen=True)
class ForallIn(Formula):
    """all x:T in (G). A — x ranges over values derivable from G."""
    var: str
    ty: Type
    ltc: LTC
    body: Formula


@dataclass(frozen=True)
class ExistsIn(Formula):
    var: str
    ty: Type
    ltc: LTC
    body: Formula


@dataclass(frozen=True)
class ForallTCV(Formula):
    """allctx d. A — d ranges over snapshots of all future LTCs."""
    tcv: str
    body: Formula


@dataclass(frozen=True)
class ExistsTCV(Formula):
    tcv: str
    body: Formula


@dataclass(frozen=True)
class Fresh(Formula):
    """subject # (G): the name denoted by subject is not derivable from G.

    The subject is any Nm-typed expression; shorthand for
    all z:Nm in (G). ~(subject = z).
    """
    subject: Expr
    ltc: LTC


@dataclass(frozen=True)
class ForallClassic(Formula):
    """Classical 'all x:T. A' of the STLC logic; only valid as translation
    input, never in nu-logic judgements."""
    var: str
    ty: Type
    body: Formula


@dataclass(frozen=True)
class Triple:
    pre: Formula
    program: Term
    anchor: str
    post: Formula

    def __str__(self):
        return (f"{{{formula_to_str(self.pre)}}} {term_to_str(self.program)} "
                f":{self.anchor} {{{formula_to_str(self.post)}}}")


TOP = Top()
BOT = Bot()


def fresh_expansion(f: Fresh) -> ForallIn:
    """The definitional expansion of the freshness shorthand."""
    z = fresh_var("z", expr_fv(f.subject) | set(f.ltc.dom()))
    return ForallIn(z, NM, f.ltc, Not(FEq(f.subject, EVar(z))))


# -- free variables / free TCVs

def formula_fv(a: Formula) -> frozenset:
    match a:
        case Top() | Bot():
            return frozenset()
        case FEq(l, r):
            return expr_fv(l) | expr_fv(r)
        case Not(b):
            return formula_fv(b)
        case And(l, r) | Or(l, r) | Implies(l, r):
            return formula_fv(l) | formula_fv(r)
        case Eval(f, e, m, b):
            return expr_fv(f) | expr_fv(e) | (formula_fv(b) - {m})
        case ForallIn(x, _, g, b) | ExistsIn(x, _, g, b):
            return (formula_fv(b) - {x}) | frozenset(g.fv())
        case ForallTCV(_, b) | ExistsTCV(_, b):
            return formula_fv(b)
        case Fresh(subj, g):
            return frozenset(g.fv()) | expr_fv(subj)
        case ForallClassic(x, _, b):
            return formula_fv(b) - {x}
    raise AssertionError(a)


def formula_ftcv(a: Formula) -> frozenset:
    match a:
        case Top() | Bot() | FEq(_, _):
            return frozenset()
        case Not(b):
            return formula_ftcv(b)
        case And(l, r) | Or(l, r) | Implies(l, r):
            return formula_ftcv(l) | formula_ftcv(r)
        case Eval(_, _, _, b):
            return formula_ftcv(b)
        case ForallIn(_, _, g, b) | ExistsIn(_, _, g, b):
            return frozenset(g.ftcv()) | formula_ftcv(b)
        case ForallTCV(d, b) | ExistsTCV(d, b):
            return formula_ftcv(b) - {d}
        case Fresh(_, g):
            return frozenset(g.ftcv())
        case ForallClassic(_, _, b):
            return formula_ftcv(b)
    raise AssertionError(a)


# ---------------------------------------------------------------------------
# Typing

def typecheck_expression(ltc: LTC, e: Expr) -> Type:
    match e:
        case EVar(x):
            ty = ltc.lookup(x)
            if ty is None:
                raise TypeCheckError(f"unbound variable '{x}' in expression")
            return ty
        case EConst(v):
            return BOOL if v in ("true", "false") else UNIT
        case EPair(a, b):
            return Prod(typecheck_expression(ltc, a), typecheck_expression(ltc, b))
        case EProj(i, a):
            ta = typecheck_expression(ltc, a)
            if not isinstance(ta, Prod):
                raise TypeCheckError(f"projection of non-product expression '{e}'")
            return ta.fst if i == 1 else ta.snd
        case EEq(a, b):
            ta = typecheck_expression(ltc, a)
            tb = typecheck_expression(ltc, b)
            if ta != tb:
                raise TypeCheckError(f"equality expression operand mismatch in '{e}'")
            if ta not in COMPARABLE:
                raise TypeCheckError(
                    f"equality expression only at Nm, Bool or Unit, not {type_to_str(ta)}")
            return BOOL
    raise AssertionError(e)


def typecheck_formula(ltc: LTC, a: Formula) -> None:
    match a:
        case Top() | Bot():
            return
        case FEq(l, r):
            tl = typecheck_expression(ltc, l)
            tr = typecheck_expression(ltc, r)
            if tl != tr:
                raise TypeCheckError(
                    f"'=' operands have different types in '{a}': "
                    f"{type_to_str(tl)} vs {type_to_str(tr)}")
            return
        case Not(b):
            return typecheck_formula(ltc, b)
        case And(l, r) | Or(l, r) | Implies(l, r):
            typecheck_formula(ltc, l)
            typecheck_formula(ltc, r)
            return
        case Eval(f, e, m, b):
            tf = typecheck_expression(ltc, f)
            if not isinstance(tf, Arrow):
                raise TypeCheckError(f"evaluation formula head is not a function in '{a}'")
            te = typecheck_expression(ltc, e)
            if te != tf.arg:
                raise TypeCheckError(f"evaluation formula argument type mismatch in '{a}'")
            return typecheck_formula(ltc.add_var(m, tf.res), b)
        case ForallIn(x, ty, g, b) | ExistsIn(x, ty, g, b):
            if not subsumes(ltc, g):
                raise TypeCheckError(f"LTC {g} is not an ordered subset of the ambient in '{a}'")
            return typecheck_formula(ltc.add_var(x, ty), b)
        case ForallTCV(d, b) | ExistsTCV(d, b):
            return typecheck_formula(ltc.add_tcv(d), b)
        case Fresh(subj, g):
            ts = typecheck_expression(ltc, subj)
            if ts != NM:
                raise TypeCheckError(f"freshness subject must have type Nm in '{a}'")
            if not subsumes(ltc, g):
                raise TypeCheckError(f"LTC {g} is not an ordered subset of the ambient in '{a}'")
            return
        case ForallClassic(_, _, _):
            raise TypeCheckError(
                "classical quantifier is STLC-logic input; translate it first")
    raise AssertionError(a)


def typecheck_triple(ltc: LTC, t: Triple) -> Type:
    if an(t.program):
        raise TypeCheckError("triple program must be compile-time syntax (no names)")
    typecheck_formula(ltc, t.pre)
    ty = typecheck_term(ltc.to_stc(), t.program)
    typecheck_formula(ltc.add_var(t.anchor, ty), t.post)
    return ty


# ---------------------------------------------------------------------------
# Normalisation to the primitive core (~ /\ forall) and alpha-equality

def _canon_eq(l: Expr, r: Expr):
    # identify e.g. (x=y) = false with ~(x = y), as the derivations do
    match (l, r):
        case (EEq(a, b), EConst("true")) | (EConst("true"), EEq(a, b)):
            return FEq(a, b)
        case (EEq(a, b), EConst("false")) | (EConst("false"), EEq(a, b)):
            return Not(FEq(a, b))
    return FEq(l, r)


def normalize(a: Formula) -> Formula:
    """Expand derived connectives into the ~ /\\ forall core."""
    match a:
        case Top() | Bot():
            return a
        case FEq(l, r):
            out = _canon_eq(l, r)
            if isinstance(out, Not):
                return Not(normalize(out.body))
            return out
        case Not(b):
            return Not(normalize(b))
        case And(l, r):
            return And(normalize(l), normalize(r))
        case Or(l, r):
            return Not(And(Not(normalize(l)), Not(normalize(r))))
        case Implies(l, r):
            return Not(And(normalize(l), Not(normalize(r))))
        case Eval(f, e, m, b):
            return Eval(f, e, m, normalize(b))
        case ForallIn(x, ty, g, b):
            return ForallIn(x, ty, g, normalize(b))
        case ExistsIn(x, ty, g, b):
            return Not(ForallIn(x, ty, g, Not(normalize(b))))
        case ForallTCV(d, b):
            return ForallTCV(d, normalize(b))
        case ExistsTCV(d, b):
            return Not(ForallTCV(d, Not(normalize(b))))
        case Fresh(_, _):
            return a
        case ForallClassic(_, _, _):
            raise NuError("classical quantifier has no nu-logic normal form; translate first")
    raise AssertionError(a)


def _env_lookup(env, x, side):
    for pair in reversed(env):
        if pair[side] == x:
            return pair
    return None


def _expr_alpha(e1, e2, env):
    match (e1, e2):
        case (EVar(x), EVar(y)):
            lx, ly = _env_lookup(env, x, 0), _env_lookup(env, y, 1)
            if lx is None and ly is None:
                return x == y
            return lx is not None and lx == ly
        case (EPair(a1, b1), EPair(a2, b2)) | (EEq(a1, b1), EEq(a2, b2)):
            return type(e1) is type(e2) and _expr_alpha(a1, a2, env) and _expr_alpha(b1, b2, env)
        case (EProj(i, a), EProj(j, b)):
            return i == j and _expr_alpha(a, b, env)
        case _:
            return e1 == e2


def _ltc_alpha(g1: LTC, g2: LTC, env):
    if len(g1) != len(g2):
        return False
    for e1, e2 in zip(g1.entries, g2.entries):
        if isinstance(e1, VarBind) and isinstance(e2, VarBind):
            if e1.ty != e2.ty or not _expr_alpha(EVar(e1.name), EVar(e2.name), env):
                return False
        elif isinstance(e1, TCVBind) and isinstance(e2, TCVBind):
            l1, l2 = _env_lookup(env, e1.name, 0), _env_lookup(env, e2.name, 1)
            if l1 is None and l2 is None:
                if e1.name != e2.name:
                    return False
            elif l1 is None or l1 != l2:
                return False
        else:
            return False
    return True


def _formula_alpha(a, b, env):
    match (a, b):
        case (Top(), Top()) | (Bot(), Bot()):
            return True
        case (FEq(l1, r1), FEq(l2, r2)):
            return _expr_alpha(l1, l2, env) and _expr_alpha(r1, r2, env)
        case (Not(x), Not(y)):
            return _formula_alpha(x, y, env)
        case (And(l1, r1), And(l2, r2)) | (Or(l1, r1), Or(l2, r2)) | (Implies(l1, r1), Implies(l2, r2)):
            return type(a) is type(b) and _formula_alpha(l1, l2, env) and _formula_alpha(r1, r2, env)
        case (Eval(f1, e1, m1, b1), Eval(f2, e2, m2, b2)):
            return (_expr_alpha(f1, f2, env) and _expr_alpha(e1, e2, env)
                    and _formula_alpha(b1, b2, env + ((m1, m2),)))
        case (ForallIn(x1, t1, g1, b1), ForallIn(x2, t2, g2, b2)) | \
             (ExistsIn(x1, t1, g1, b1), ExistsIn(x2, t2, g2, b2)):
            return (type(a) is type(b) and t1 == t2 and _ltc_alpha(g1, g2, env)
                    and _formula_alpha(b1, b2, env + ((x1, x2),)))
        case (ForallTCV(d1, b1), ForallTCV(d2, b2)) | (ExistsTCV(d1, b1), ExistsTCV(d2, b2)):
            return type(a) is type(b) and _formula_alpha(b1, b2, env + ((d1, d2),))
        case (Fresh(s1, g1), Fresh(s2, g2)):
            return _expr_alpha(s1, s2, env) and _ltc_alpha(g1, g2, env)
        case (ForallClassic(x1, t1, b1), ForallClassic(x2, t2, b2)):
            return t1 == t2 and _formula_alpha(b1, b2, env + ((x1, x2),))
        case _:
            return False


def alpha_eq_formula(a: Formula, b: Formula) -> bool:
    return _formula_alpha(a, b, ())


def formulas_equal(a: Formula, b: Formula) -> bool:
    """Equality up to derived-form expansion and bound-variable renaming."""
    return alpha_eq_formula(normalize(a), normalize(b))


# ---------------------------------------------------------------------------
# Parsing

def parse_ltc_stream(ts: TokenStream) -> LTC:
    ts.expect("(")
    if ts.eat(")"):
        return EMPTY_LTC
    g = EMPTY_LTC
    while True:
        x = ts.ident()
        if ts.eat(":"):
            g = g.add_var(x, parse_type_stream(ts))
        else:
            g = g.add_tcv(x)
        if ts.eat(")"):
            return g
        ts.expect(",")


def _parse_expr_atom(ts: TokenStream) -> Expr:
    t = ts.peek()
    if ts.eat("true"):
        return ETRUE
    if ts.eat("false"):
        return EFALSE
    if ts.eat("pi1"):
        return EProj(1, _parse_expr_atom(ts))
    if ts.eat("pi2"):
        return EProj(2, _parse_expr_atom(ts))
    if t.kind == "ident":
        ts.next()
        return EVar(t.text)
    if ts.eat("<"):
        a = _parse_expr_inner(ts)
        ts.expect(",")
        b = _parse_expr_inner(ts)
        ts.expect(">")
        return EPair(a, b)
    if ts.eat("("):
        if ts.eat(")"):
            return EUNIT
        e = _parse_expr_inner(ts)
        ts.expect(")")
        return e
    raise ParseError(f"expected an expression, found {t.text!r}", t.line, t.col)


def _parse_expr_inner(ts: TokenStream) -> Expr:
    left = _parse_expr_atom(ts)
    if ts.eat("="):
        return EEq(left, _parse_expr_atom(ts))
    return left


def parse_expr_stream(ts: TokenStream) -> Expr:
    return _parse_expr_atom(ts)


def parse_formula_stream(ts: TokenStream) -> Formula:
    return _parse_implies(ts)


def _parse_implies(ts: TokenStream) -> Formula:
    left = _parse_or(ts)
    if ts.eat("->"):
        return Implies(left, _parse_implies(ts))
    return left


def _parse_or(ts: TokenStream) -> Formula:
    left = _parse_and(ts)
    if ts.eat("\\/"):
        return Or(left, _parse_or(ts))
    return left


def _parse_and(ts: TokenStream) -> Formula:
    left = _parse_not(ts)
    if ts.eat("/\\"):
        return And(left, _parse_and(ts))
    return left


def _parse_not(ts: TokenStream) -> Formula:
    if ts.eat("~"):
        return Not(_parse_not(ts))
    return _parse_formula_atom(ts)


def _parse_quantifier(ts: TokenStream, word: str) -> Formula:
    x = ts.ident()
    ts.expect(":")
    ty = parse_type_stream(ts)
    if ts.eat("in"):
        g = parse_ltc_stream(ts)
        ts.expect(".")
        body = parse_formula_stream(ts)
        return (ForallIn if word == "all" else ExistsIn)(x, ty, g, body)
    # classical quantifier: STLC-logic input
    ts.expect(".")
    body = parse_formula_stream(ts)
    if word == "ex":
        raise ParseError("classical 'ex' is not supported; use 'ex x:T in (G).'")
    return ForallClassic(x, ty, body)


def _parse_formula_atom(ts: TokenStream) -> Formula:
    t = ts.peek()
    if ts.eat("T"):
        return TOP
    if ts.eat("F"):
        return BOT
    if ts.eat("all"):
        return _parse_quantifier(ts, "all")
    if ts.eat("ex"):
        return _parse_quantifier(ts, "ex")
    if ts.eat("allctx"):
        d = ts.ident()
        ts.expect(".")
        return ForallTCV(d, parse_formula_stream(ts))
    if ts.eat("exctx"):
        d = ts.ident()
        ts.expect(".")
        return ExistsTCV(d, parse_formula_stream(ts))
    if ts.eat("["):
        f = parse_expr_stream(ts)
        e = parse_expr_stream(ts)
        ts.expect("=>")
        m = ts.ident()
        ts.expect("]")
        return Eval(f, e, m, parse_formula_stream(ts))
    # expression-led atom: e = e, e # (G), or a parenthesised formula
    save = ts.pos
    try:
        e = parse_expr_stream(ts)
        if ts.eat("="):
            return FEq(e, parse_expr_stream(ts))
        if ts.eat("#"):
            return Fresh(e, parse_ltc_stream(ts))
        if isinstance(e, EEq):
            return FEq(e.left, e.right)
        raise ParseError("expected '=' or '#' after expression", t.line, t.col)
    except ParseError:
        ts.pos = save
    ts.expect("(")
    a = parse_formula_stream(ts)
    ts.expect(")")
    return a


def parse_formula(text: str) -> Formula:
    ts = TokenStream(tokenize(text))
    a = parse_formula_stream(ts)
    if not ts.done():
        t = ts.peek()
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    return a


def parse_ltc(text: str) -> LTC:
    ts = TokenStream(tokenize(text))
    g = parse_ltc_stream(ts)
    if not ts.done():
        t = ts.peek()
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    return g


# ---------------------------------------------------------------------------
# Printing

def ltc_to_str(g: LTC) -> str:
    parts = []
    for e in g.entries:
        if isinstance(e, VarBind):
            parts.append(f"{e.name}:{type_to_str(e.ty)}")
        else:
            parts.append(e.name)
    return "(" + ", ".join(parts) + ")"


def expr_to_str(e: Expr) -> str:
    match e:
        case EVar(x):
            return x
        case EConst(v):
            return {"true": "true", "false": "false", "unit": "()"}[v]
        case EPair(a, b):
            return f"<{expr_to_str(a)}, {expr_to_str(b)}>"
        case EProj(i, a):
            s = expr_to_str(a)
            if not isinstance(a, (EVar, EConst, EPair)):
                s = f"({s})"
            return f"pi{i} {s}"
        case EEq(a, b):
            return f"({expr_to_str(a)} = {expr_to_str(b)})"
    raise AssertionError(e)


def formula_to_str(a: Formula, prec: int = 0) -> str:
    # precedence: 0 body, 1 ->, 2 \/, 3 /\, 4 ~, 5 atom
    match a:
        case Top():
            return "T"
        case Bot():
            return "F"
        case FEq(l, r):
            s = f"{expr_to_str(l)} = {expr_to_str(r)}"
            return f"({s})" if prec >= 5 else s
        case Fresh(subj, g):
            s = f"{expr_to_str(subj)} # {ltc_to_str(g)}"
            return f"({s})" if prec >= 5 else s
        case Not(b):
            return f"~{formula_to_str(b, 5)}"
        case And(l, r):
            s = f"{formula_to_str(l, 4)} /\\ {formula_to_str(r, 3)}"
            return f"({s})" if prec > 3 else s
        case Or(l, r):
            s = f"{formula_to_str(l, 3)} \\/ {formula_to_str(r, 2)}"
            return f"({s})" if prec > 2 else s
        case Implies(l, r):
            s = f"{formula_to_str(l, 2)} -> {formula_to_str(r, 1)}"
            return f"({s})" if prec > 1 else s
        case Eval(f, e, m, b):
            s = f"[{expr_to_str(f)} {expr_to_str(e)} => {m}] {formula_to_str(b, 0)}"
            return f"({s})" if prec > 0 else s
        case ForallIn(x, ty, g, b):
            s = f"all {x}:{type_to_str(ty)} in {ltc_to_str(g)}. {formula_to_str(b, 0)}"
            return f"({s})" if prec > 0 else s
        case ExistsIn(x, ty, g, b):
            s = f"ex {x}:{type_to_str(ty)} in {ltc_to_str(g)}. {formula_to_str(b, 0)}"
            return f"({s})" if prec > 0 else s
        case ForallTCV(d, b):
            s = f"allctx {d}. {formula_to_str(b, 0)}"
            return f"({s})" if prec > 0 else s
        case ExistsTCV(d, b):
            s = f"exctx {d}. {formula_to_str(b, 0)}"
            return f"({s})" if prec > 0 else s
        case ForallClassic(x, ty, b):
            s = f"all {x}:{type_to_str(ty)}. {formula_to_str(b, 0)}"
            return f"({s})" if prec > 0 else s
    raise AssertionError(a)
