"""Syntax, types, typing and parsing for nu-calculus terms.

The calculus is a simply typed call-by-value lambda calculus with a name
type Nm, a generator constant gensym : Unit -> Nm, name equality, pairs,
let and conditionals.  Names have no binder; they are opaque integer ids
written #0, #1, ... in the surface syntax.
"""

from __future__ import annotations

from dataclasses import dataclass
import itertools


class NuError(Exception):
    """Base class for all user-facing errors of the toolkit."""


class ParseError(NuError):
    def __init__(self, msg, line=None, col=None):
        if line is not None:
            msg = f"{line}:{col}: {msg}"
        super().__init__(msg)


class TypeCheckError(NuError):
    pass


# ---------------------------------------------------------------------------
# Types

class Type:
    __slots__ = ()


@dataclass(frozen=True)
class Base(Type):
    name: str  # 'Unit' | 'Bool' | 'Nm'

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Arrow(Type):
    arg: Type
    res: Type

    def __repr__(self):
        return f"({self.arg!r} -> {self.res!r})"


@dataclass(frozen=True)
class Prod(Type):
    fst: Type
    snd: Type

    def __repr__(self):
        return f"({self.fst!r} * {self.snd!r})"


UNIT = Base("Unit")
BOOL = Base("Bool")
NM = Base("Nm")

#: types at which term-level equality is defined (value comparison is literal)
COMPARABLE = (NM, BOOL, UNIT)


def is_nm_free(ty: Type) -> bool:
    """No Nm in any position of the type."""
    match ty:
        case Base(name):
            return name != "Nm"
        case Arrow(a, r):
            return is_nm_free(a) and is_nm_free(r)
        case Prod(a, b):
            return is_nm_free(a) and is_nm_free(b)
    raise AssertionError(ty)


def is_base_type(ty: Type) -> bool:
    """Unit, Bool and products thereof: the function-free Nm-free types."""
    match ty:
        case Base(name):
            return name != "Nm"
        case Prod(a, b):
            return is_base_type(a) and is_base_type(b)
        case _:
            return False


def type_to_str(ty: Type, prec: int = 0) -> str:
    # prec 0: arrow allowed, 1: product allowed, 2: atom
    match ty:
        case Base(name):
            return name
        case Arrow(a, r):
            s = f"{type_to_str(a, 1)} -> {type_to_str(r, 0)}"
            return f"({s})" if prec > 0 else s
        case Prod(a, b):
            s = f"{type_to_str(a, 2)} * {type_to_str(b, 1)}"
            return f"({s})" if prec > 1 else s
    raise AssertionError(ty)


# ---------------------------------------------------------------------------
# Terms

class Term:
    __slots__ = ()

    def __str__(self):
        return term_to_str(self)


@dataclass(frozen=True)
class Name(Term):
    ident: int


@dataclass(frozen=True)
class Gensym(Term):
    pass


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class Const(Term):
    value: str  # 'true' | 'false' | 'unit'


@dataclass(frozen=True)
class Lam(Term):
    var: str
    ty: Type
    body: Term


@dataclass(frozen=True)
class App(Term):
    fun: Term
    arg: Term


@dataclass(frozen=True)
class Let(Term):
    var: str
    bound: Term
    body: Term


@dataclass(frozen=True)
class EqT(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class If(Term):
    cond: Term
    then: Term
    els: Term


@dataclass(frozen=True)
class PairT(Term):
    fst: Term
    snd: Term


@dataclass(frozen=True)
class Proj(Term):
    index: int  # 1 | 2
    arg: Term


@dataclass(frozen=True)
class Hole(Term):
    """The hole of a single-holed context; printed as [.]"""


TRUE = Const("true")
FALSE = Const("false")
UNIT_VAL = Const("unit")


def fv(t: Term) -> frozenset:
    match t:
        case Var(x):
            return frozenset((x,))
        case Lam(x, _, body):
            return fv(body) - {x}
        case Let(x, bound, body):
            return fv(bound) | (fv(body) - {x})
        case App(f, a) | EqT(f, a) | PairT(f, a):
            return fv(f) | fv(a)
        case If(c, t1, t2):
            return fv(c) | fv(t1) | fv(t2)
        case Proj(_, a):
            return fv(a)
        case _:
            return frozenset()


def an(t: Term) -> frozenset:
    """All names occurring in the term; empty iff compile-time syntax."""
    match t:
        case Name(r):
            return frozenset((r,))
        case Lam(_, _, body) | Proj(_, body):
            return an(body)
        case Let(_, a, b) | App(a, b) | EqT(a, b) | PairT(a, b):
            return an(a) | an(b)
        case If(c, a, b):
            return an(c) | an(a) | an(b)
        case _:
            return frozenset()


def is_value(t: Term) -> bool:
    match t:
        case Name() | Gensym() | Var() | Const() | Lam():
            return True
        case PairT(a, b):
            return is_value(a) and is_value(b)
        case _:
            return False


_fresh_counter = itertools.count()


def fresh_var(base: str, avoid) -> str:
    if base not in avoid:
        return base
    root = base.rstrip("0123456789")
    for i in itertools.count(1):
        cand = f"{root}{i}"
        if cand not in avoid:
            return cand
    raise AssertionError


def subst(t: Term, x: str, v: Term) -> Term:
    """Capture-avoiding substitution t[v/x]."""
    match t:
        case Var(y):
            return v if y == x else t
        case Lam(y, ty, body):
            if y == x:
                return t
            if y in fv(v):
                y2 = fresh_var(y, fv(v) | fv(body))
                body = subst(body, y, Var(y2))
                y = y2
            return Lam(y, ty, subst(body, x, v))
        case Let(y, bound, body):
            bound = subst(bound, x, v)
            if y == x:
                return Let(y, bound, body)
            if y in fv(v):
                y2 = fresh_var(y, fv(v) | fv(body))
                body = subst(body, y, Var(y2))
                y = y2
            return Let(y, bound, subst(body, x, v))
        case App(f, a):
            return App(subst(f, x, v), subst(a, x, v))
        case EqT(a, b):
            return EqT(subst(a, x, v), subst(b, x, v))
        case PairT(a, b):
            return PairT(subst(a, x, v), subst(b, x, v))
        case If(c, a, b):
            return If(subst(c, x, v), subst(a, x, v), subst(b, x, v))
        case Proj(i, a):
            return Proj(i, subst(a, x, v))
        case _:
            return t


def alpha_eq(s: Term, t: Term, env: tuple = ()) -> bool:
    """Equality up to renaming of bound variables."""
    def look(e, x, side):
        for (a, b) in reversed(e):
            bound = a if side == 0 else b
            if bound == x:
                return (a, b)
        return None

    match (s, t):
        case (Var(x), Var(y)):
            lx, ly = look(env, x, 0), look(env, y, 1)
            if lx is None and ly is None:
                return x == y
            return lx is not None and lx == ly
        case (Lam(x, tx, bs), Lam(y, ty2, bt)):
            return tx == ty2 and alpha_eq(bs, bt, env + ((x, y),))
        case (Let(x, ms, bs), Let(y, mt, bt)):
            return alpha_eq(ms, mt, env) and alpha_eq(bs, bt, env + ((x, y),))
        case (App(f1, a1), App(f2, a2)) | (EqT(f1, a1), EqT(f2, a2)) | (PairT(f1, a1), PairT(f2, a2)):
            return type(s) is type(t) and alpha_eq(f1, f2, env) and alpha_eq(a1, a2, env)
        case (If(c1, t1, e1), If(c2, t2, e2)):
            return alpha_eq(c1, c2, env) and alpha_eq(t1, t2, env) and alpha_eq(e1, e2, env)
        case (Proj(i, a), Proj(j, b)):
            return i == j and alpha_eq(a, b, env)
        case _:
            return s == t


# ---------------------------------------------------------------------------
# Typing.  An STC is an unordered mapping from variables to types.

def typecheck_term(ctx: dict, t: Term) -> Type:
    match t:
        case Name(_):
            return NM
        case Gensym():
            return Arrow(UNIT, NM)
        case Var(x):
            if x not in ctx:
                raise TypeCheckError(f"unbound variable '{x}'")
            return ctx[x]
        case Const(v):
            return BOOL if v in ("true", "false") else UNIT
        case Lam(x, ty, body):
            res = typecheck_term({**ctx, x: ty}, body)
            return Arrow(ty, res)
        case App(f, a):
            tf = typecheck_term(ctx, f)
            ta = typecheck_term(ctx, a)
            if not isinstance(tf, Arrow):
                raise TypeCheckError(f"cannot apply non-function of type {type_to_str(tf)} in '{t}'")
            if tf.arg != ta:
                raise TypeCheckError(
                    f"argument type mismatch in '{t}': expected {type_to_str(tf.arg)}, found {type_to_str(ta)}")
            return tf.res
        case Let(x, bound, body):
            tb = typecheck_term(ctx, bound)
            return typecheck_term({**ctx, x: tb}, body)
        case EqT(a, b):
            ta = typecheck_term(ctx, a)
            tb = typecheck_term(ctx, b)
            if ta != tb:
                raise TypeCheckError(
                    f"equality operand mismatch in '{t}': {type_to_str(ta)} vs {type_to_str(tb)}")
            if ta not in COMPARABLE:
                raise TypeCheckError(f"equality not available at type {type_to_str(ta)}")
            return BOOL
        case If(c, t1, t2):
            tc = typecheck_term(ctx, c)
            if tc != BOOL:
                raise TypeCheckError(f"condition of 'if' has type {type_to_str(tc)}, expected Bool")
            ty1 = typecheck_term(ctx, t1)
            ty2 = typecheck_term(ctx, t2)
            if ty1 != ty2:
                raise TypeCheckError(
                    f"branches of 'if' disagree: {type_to_str(ty1)} vs {type_to_str(ty2)}")
            return ty1
        case PairT(a, b):
            return Prod(typecheck_term(ctx, a), typecheck_term(ctx, b))
        case Proj(i, a):
            ta = typecheck_term(ctx, a)
            if not isinstance(ta, Prod):
                raise TypeCheckError(f"projection of non-product type {type_to_str(ta)}")
            return ta.fst if i == 1 else ta.snd
    raise AssertionError(t)


# ---------------------------------------------------------------------------
# Tokenizer, shared with the logic parser.

SYMBOLS = [
    "==>", "->", "/\\", "\\/", "=>", ":=", "|-", "(", ")", "<", ">", ",",
    ".", ":", ";", "#", "\\", "*", "=", "~", "[", "]", "@", "{", "}",
]

KEYWORDS = {
    "let", "in", "if", "then", "else", "gensym", "true", "false",
    "pi1", "pi2", "all", "ex", "allctx", "exctx", "T", "F",
    "Unit", "Bool", "Nm",
}


@dataclass
class Token:
    kind: str  # 'sym' | 'ident' | 'num' | 'kw' | 'str' | 'eof'
    text: str
    line: int
    col: int


def tokenize(src: str):
    toks = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "-" and src.startswith("--", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c == '"':
            j = i + 1
            while j < n and src[j] != '"':
                j += 1
            if j >= n:
                raise ParseError("unterminated string literal", line, col)
            toks.append(Token("str", src[i + 1:j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        for sym in SYMBOLS:
            if src.startswith(sym, i):
                # '->' must not eat the '-' of a negative... no negatives here.
                toks.append(Token("sym", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            if c.isdigit():
                j = i
                while j < n and src[j].isdigit():
                    j += 1
                toks.append(Token("num", src[i:j], line, col))
                col += j - i
                i = j
            elif c.isalpha() or c == "_":
                j = i
                while j < n and (src[j].isalnum() or src[j] in "_'"):
                    j += 1
                word = src[i:j]
                toks.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
                col += j - i
                i = j
            else:
                raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


class TokenStream:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self, ahead=0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, text) -> bool:
        t = self.peek()
        return t.text == text and t.kind in ("sym", "kw")

    def eat(self, text) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text) -> Token:
        t = self.peek()
        if not self.at(text):
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return self.next()

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "ident":
            raise ParseError(f"expected identifier, found {t.text!r}", t.line, t.col)
        self.next()
        return t.text

    def done(self) -> bool:
        return self.peek().kind == "eof"


# ---------------------------------------------------------------------------
# Type and term parsers

def parse_type_stream(ts: TokenStream) -> Type:
    left = _parse_prod_type(ts)
    if ts.eat("->"):
        return Arrow(left, parse_type_stream(ts))
    return left


def _parse_prod_type(ts: TokenStream) -> Type:
    left = _parse_atom_type(ts)
    if ts.eat("*"):
        return Prod(left, _parse_prod_type(ts))
    return left


def _parse_atom_type(ts: TokenStream) -> Type:
    t = ts.peek()
    if ts.eat("Unit"):
        return UNIT
    if ts.eat("Bool"):
        return BOOL
    if ts.eat("Nm"):
        return NM
    if ts.eat("("):
        ty = parse_type_stream(ts)
        ts.expect(")")
        return ty
    raise ParseError(f"expected a type, found {t.text!r}", t.line, t.col)


def parse_type(text: str) -> Type:
    ts = TokenStream(tokenize(text))
    ty = parse_type_stream(ts)
    if not ts.done():
        t = ts.peek()
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    return ty


def parse_term_stream(ts: TokenStream) -> Term:
    t = ts.peek()
    if ts.eat("\\"):
        x = ts.ident()
        ts.expect(":")
        ty = parse_type_stream(ts)
        ts.expect(".")
        return Lam(x, ty, parse_term_stream(ts))
    if ts.eat("let"):
        x = ts.ident()
        ts.expect("=")
        bound = parse_term_stream(ts)
        ts.expect("in")
        return Let(x, bound, parse_term_stream(ts))
    if ts.eat("if"):
        c = parse_term_stream(ts)
        ts.expect("then")
        a = parse_term_stream(ts)
        ts.expect("else")
        return If(c, a, parse_term_stream(ts))
    left = _parse_app(ts)
    if ts.eat("="):
        return EqT(left, _parse_app(ts))
    return left


_ATOM_START = {"(", "<", "#", "true", "false", "gensym"}


def _parse_app(ts: TokenStream) -> Term:
    t = _parse_item(ts)
    while True:
        nxt = ts.peek()
        if nxt.text in _ATOM_START and nxt.kind in ("sym", "kw") or nxt.kind == "ident" \
                or (nxt.kind == "kw" and nxt.text in ("pi1", "pi2")):
            t = App(t, _parse_item(ts))
        else:
            return t


def _parse_item(ts: TokenStream) -> Term:
    if ts.eat("pi1"):
        return Proj(1, _parse_term_atom(ts))
    if ts.eat("pi2"):
        return Proj(2, _parse_term_atom(ts))
    return _parse_term_atom(ts)


def _parse_term_atom(ts: TokenStream) -> Term:
    t = ts.peek()
    if ts.eat("true"):
        return TRUE
    if ts.eat("false"):
        return FALSE
    if ts.eat("gensym"):
        return Gensym()
    if ts.eat("#"):
        num = ts.peek()
        if num.kind != "num":
            raise ParseError("expected a number after '#'", num.line, num.col)
        ts.next()
        return Name(int(num.text))
    if t.kind == "ident":
        ts.next()
        return Var(t.text)
    if ts.eat("<"):
        a = parse_term_stream(ts)
        ts.expect(",")
        b = parse_term_stream(ts)
        ts.expect(">")
        return PairT(a, b)
    if ts.eat("("):
        if ts.eat(")"):
            return UNIT_VAL
        inner = parse_term_stream(ts)
        ts.expect(")")
        return inner
    raise ParseError(f"expected a term, found {t.text!r}", t.line, t.col)


def parse_term(text: str) -> Term:
    ts = TokenStream(tokenize(text))
    t = parse_term_stream(ts)
    if not ts.done():
        tok = ts.peek()
        raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.col)
    return t


# ---------------------------------------------------------------------------
# Printing.  parse_term(term_to_str(t)) is alpha-equal to t.

def term_to_str(t: Term, prec: int = 0) -> str:
    # prec 0: everything, 1: application operands+, 2: atoms only
    match t:
        case Name(r):
            return f"#{r}"
        case Hole():
            return "[.]"
        case Gensym():
            return "gensym"
        case Var(x):
            return x
        case Const(v):
            return {"true": "true", "false": "false", "unit": "()"}[v]
        case Lam(x, ty, body):
            s = f"\\{x}:{type_to_str(ty)}. {term_to_str(body)}"
        case Let(x, bound, body):
            s = f"let {x} = {term_to_str(bound)} in {term_to_str(body)}"
        case If(c, a, b):
            s = f"if {term_to_str(c)} then {term_to_str(a)} else {term_to_str(b)}"
        case EqT(a, b):
            s = f"{term_to_str(a, 1)} = {term_to_str(b, 1)}"
        case App(f, a):
            s = f"{term_to_str(f, 1)} {term_to_str(a, 2)}"
            return f"({s})" if prec > 1 else s
        case Proj(i, a):
            s = f"pi{i} {term_to_str(a, 2)}"
            return f"({s})" if prec > 1 else s
        case PairT(a, b):
            return f"<{term_to_str(a)}, {term_to_str(b)}>"
        case _:
            raise AssertionError(t)
    return f"({s})" if prec > 0 else s
