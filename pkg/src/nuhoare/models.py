"""Models, well-constructedness, derived values, model extensions, and the
bounded three-valued satisfaction oracle.

A model maps variables to closed values and TCVs to TCV-free LTCs, in
order.  Satisfaction is checked by bounded search: every quantifier is
explored up to explicit budgets, and a verdict of Holds or Fails is only
produced when the exploration was exhaustive for that connective; other
outcomes are Unknown with the bound that was hit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .terms import (
    App, Arrow, Base, Const, Lam, Let, If, EqT, PairT, Prod, Proj, Gensym,
    Name, Term, Type, Var, NuError, TypeCheckError, an, alpha_eq, fv,
    is_value, subst, term_to_str, typecheck_term, type_to_str, BOOL, NM,
    UNIT, TRUE, FALSE, UNIT_VAL, COMPARABLE,
)
from .logic import (
    LTC, VarBind, TCVBind, EMPTY_LTC, Expr, EVar, EConst, EPair, EProj, EEq,
    Formula, Top, Bot, FEq, Not, And, Eval, ForallIn, ForallTCV, Fresh,
    Triple, normalize, typecheck_formula, typecheck_triple, formula_to_str,
    subsumes,
)
from .reduction import (
    Configuration, NameAllocator, Distinguished, NotDistinguishedUpTo,
    canonicalize_names, check_equiv, evaluate,
)
from .synth import Enumerator


@dataclass(frozen=True)
class ValEntry:
    name: str
    value: Term  # closed value, names permitted


@dataclass(frozen=True)
class TCVEntry:
    name: str
    ltc: LTC  # TCV-free


@dataclass(frozen=True)
class DeriveBudget:
    max_term_size: int = 5
    max_extension_depth: int = 2
    equiv_context_budget: int = 9
    extension_witness_size: int = 3

    def __post_init__(self):
        if self.max_term_size < 1 or self.max_extension_depth < 1:
            raise NuError("budgets must be at least 1")


DEFAULT_BUDGET = DeriveBudget()


@dataclass(frozen=True)
class SatVerdict:
    kind: str  # 'holds' | 'fails' | 'unknown'
    reason: str = ""

    def __bool__(self):
        return self.kind == "holds"

    def __str__(self):
        if self.kind == "unknown" and self.reason:
            return f"unknown ({self.reason})"
        return self.kind


HOLDS = SatVerdict("holds")
FAILS = SatVerdict("fails")


def unknown(reason: str) -> SatVerdict:
    return SatVerdict("unknown", reason)


def _neg(v: SatVerdict) -> SatVerdict:
    if v.kind == "holds":
        return FAILS
    if v.kind == "fails":
        return HOLDS
    return v


def _conj(a: SatVerdict, b: SatVerdict) -> SatVerdict:
    if a.kind == "fails" or b.kind == "fails":
        return FAILS
    if a.kind == "holds" and b.kind == "holds":
        return HOLDS
    return a if a.kind == "unknown" else b


@dataclass(frozen=True)
class Model:
    entries: tuple = ()

    def __str__(self):
        parts = []
        for e in self.entries:
            if isinstance(e, ValEntry):
                parts.append(f"{e.name} := {term_to_str(e.value)}")
            else:
                parts.append(f"{e.name} := {e.ltc}")
        return "{" + "; ".join(parts) + "}"

    def dom(self):
        return tuple(e.name for e in self.entries)

    def lookup(self, x):
        for e in self.entries:
            if isinstance(e, ValEntry) and e.name == x:
                return e.value
        return None

    def lookup_tcv(self, d):
        for e in self.entries:
            if isinstance(e, TCVEntry) and e.name == d:
                return e.ltc
        return None

    def an(self) -> frozenset:
        out = frozenset()
        for e in self.entries:
            if isinstance(e, ValEntry):
                out |= an(e.value)
        return out

    def ltc(self) -> LTC:
        """The typing LTC: value entries typed in the empty STC."""
        g = EMPTY_LTC
        for e in self.entries:
            if isinstance(e, ValEntry):
                g = g.add_var(e.name, typecheck_term({}, e.value))
            else:
                g = g.add_tcv(e.name)
        return g

    def add_val(self, x, value: Term) -> "Model":
        if x in self.dom():
            raise NuError(f"duplicate model entry '{x}'")
        if fv(value) or not is_value(value):
            raise NuError(f"model entry '{x}' must be a closed value")
        return Model(self.entries + (ValEntry(x, value),))

    def add_tcv(self, d, ltc: LTC) -> "Model":
        if d in self.dom():
            raise NuError(f"duplicate model entry '{d}'")
        if ltc.ftcv():
            raise NuError("TCV entries must map to TCV-free LTCs")
        return Model(self.entries + (TCVEntry(d, ltc),))

    def remove_var(self, x) -> "Model":
        out = []
        for e in self.entries:
            if isinstance(e, ValEntry) and e.name == x:
                continue
            if isinstance(e, TCVEntry):
                out.append(TCVEntry(e.name, e.ltc.remove_var(x)))
            else:
                out.append(e)
        return Model(tuple(out))

    def closure(self, t: Term) -> Term:
        """M xi : substitute every model value for its variable."""
        for e in self.entries:
            if isinstance(e, ValEntry):
                t = subst(t, e.name, e.value)
        return t


EMPTY_MODEL = Model()


def interp_ltc(g: LTC, xi: Model) -> dict:
    """Interpretation of an LTC in a model: a standard type context."""
    stc = {}
    for e in g.entries:
        if isinstance(e, VarBind):
            stc[e.name] = e.ty
        else:
            mapped = xi.lookup_tcv(e.name)
            if mapped is None:
                raise NuError(f"TCV '{e.name}' is not bound in the model")
            stc.update(interp_ltc(mapped, xi))
    return stc


def interp_expr(e: Expr, xi: Model) -> Term:
    match e:
        case EVar(x):
            v = xi.lookup(x)
            if v is None:
                raise NuError(f"variable '{x}' is not bound in the model")
            return v
        case EConst(c):
            return Const(c)
        case EPair(a, b):
            return PairT(interp_expr(a, xi), interp_expr(b, xi))
        case EProj(i, a):
            v = interp_expr(a, xi)
            if not isinstance(v, PairT):
                raise NuError("projection of a non-pair value")
            return v.fst if i == 1 else v.snd
        case EEq(a, b):
            va, vb = interp_expr(a, xi), interp_expr(b, xi)
            return TRUE if va == vb else FALSE
    raise AssertionError(e)


# ---------------------------------------------------------------------------
# Value matching up to the allocator's freedom to pick any fresh ids

def _match_values(got: Term, want: Term, fixed: frozenset, ren: dict, env=()) -> bool:
    match (got, want):
        case (Name(r1), Name(r2)):
            if r1 in fixed or r2 in fixed:
                return r1 == r2
            if r1 in ren:
                return ren[r1] == r2
            if r2 in ren.values():
                return False
            ren[r1] = r2
            return True
        case (Var(x), Var(y)):
            for (a, b) in reversed(env):
                if a == x or b == y:
                    return a == x and b == y
            return x == y
        case (Lam(x, t1, b1), Lam(y, t2, b2)):
            return t1 == t2 and _match_values(b1, b2, fixed, ren, env + ((x, y),))
        case (Let(x, m1, b1), Let(y, m2, b2)):
            return (_match_values(m1, m2, fixed, ren, env)
                    and _match_values(b1, b2, fixed, ren, env + ((x, y),)))
        case (PairT(a1, b1), PairT(a2, b2)) | (App(a1, b1), App(a2, b2)) | (EqT(a1, b1), EqT(a2, b2)):
            return (type(got) is type(want)
                    and _match_values(a1, a2, fixed, ren, env)
                    and _match_values(b1, b2, fixed, ren, env))
        case (If(c1, a1, b1), If(c2, a2, b2)):
            return (_match_values(c1, c2, fixed, ren, env)
                    and _match_values(a1, a2, fixed, ren, env)
                    and _match_values(b1, b2, fixed, ren, env))
        case (Proj(i, a), Proj(j, b)):
            return i == j and _match_values(a, b, fixed, ren, env)
        case _:
            return got == want


def values_match(got: Term, want: Term, fixed: frozenset) -> bool:
    """Alpha equality, with names outside `fixed` matched by a bijection
    (fresh names are interchangeable)."""
    return _match_values(got, want, fixed, {})


_CANON_CACHE = {}


def canon_value(v: Term, fixed: frozenset) -> Term:
    """Canonical representative for dedup: fresh names renamed in order of
    occurrence, binders renamed positionally."""
    key = (v, fixed)
    out = _CANON_CACHE.get(key)
    if out is not None:
        return out
    v2 = canonicalize_names(v, fixed)
    counter = [0]

    def go(t, ren):
        match t:
            case Var(x):
                return Var(ren.get(x, x))
            case Lam(x, ty, b):
                nx = f"b{counter[0]}"
                counter[0] += 1
                return Lam(nx, ty, go(b, {**ren, x: nx}))
            case Let(x, m, b):
                m2 = go(m, ren)
                nx = f"b{counter[0]}"
                counter[0] += 1
                return Let(nx, m2, go(b, {**ren, x: nx}))
            case App(a, b):
                return App(go(a, ren), go(b, ren))
            case EqT(a, b):
                return EqT(go(a, ren), go(b, ren))
            case PairT(a, b):
                return PairT(go(a, ren), go(b, ren))
            case If(c, a, b):
                return If(go(c, ren), go(a, ren), go(b, ren))
            case Proj(i, a):
                return Proj(i, go(a, ren))
            case _:
                return t

    out = go(v2, {})
    _CANON_CACHE[key] = out
    return out


# ---------------------------------------------------------------------------
# Derivation of values:  M, G0, xi  |>  V

_ENUM_CACHE = {}


def _enumerator(stc: dict, goals=()) -> Enumerator:
    key = (tuple(sorted(stc.items())), tuple(goals))
    e = _ENUM_CACHE.get(key)
    if e is None:
        e = Enumerator(stc, goals=goals)  # names=(): derivation terms are name-free
        _ENUM_CACHE[key] = e
    return e


def _eval_closed(xi: Model, m: Term):
    fixed = xi.an()
    closed = xi.closure(m)
    alloc = NameAllocator(max(fixed | an(closed), default=-1) + 1)
    cfg = evaluate(Configuration(fixed | an(closed), closed), alloc)
    return cfg.term


def derived_values(g0: LTC, xi: Model, ty: Type, budget: DeriveBudget):
    """Enumerate (witness, value) pairs for compile-time terms typed by g0
    under xi, deduplicated by value up to fresh-name interchange."""
    stc = interp_ltc(g0, xi)
    enum = _enumerator(stc, goals=(ty,))
    fixed = xi.an()
    seen = set()
    for size in range(1, budget.max_term_size + 1):
        for m in enum.terms(tuple(sorted(stc.items())), ty, size):
            v = _eval_closed(xi, m)
            key = canon_value(v, fixed)
            if key in seen:
                continue
            seen.add(key)
            yield (m, v)


def derive_value(g0: LTC, xi: Model, target: Term, budget: DeriveBudget = DEFAULT_BUDGET):
    """Search for a compile-time witness deriving `target` from g0 under xi.
    Returns the smallest witness term, or None if the bounded search fails."""
    ty = typecheck_term({}, target)
    fixed = xi.an()
    for (m, v) in derived_values(g0, xi, ty, budget):
        if values_match(v, target, fixed):
            return m
    return None


# ---------------------------------------------------------------------------
# Model extension and construction

@dataclass(frozen=True)
class AddVal:
    name: str
    witness: Term


@dataclass(frozen=True)
class AddTCV:
    name: str


def extend(xi: Model, step, budget: DeriveBudget = DEFAULT_BUDGET) -> Model:
    """Single-step model extension xi ≼ xi'."""
    match step:
        case AddVal(name, witness):
            if an(witness):
                raise NuError("extension witnesses must be compile-time syntax")
            stc = interp_ltc(xi.ltc(), xi)
            typecheck_term(stc, witness)  # raises if not derivable from the LTC
            v = _eval_closed(xi, witness)
            return xi.add_val(name, v)
        case AddTCV(name):
            return xi.add_tcv(name, xi.ltc().remove_tcvs())
    raise AssertionError(step)


def well_constructed(xi: Model, budget: DeriveBudget = DEFAULT_BUDGET):
    """Replay the construction rules.  Returns (ltc, None) when every entry
    has a derivation witness, else (None, reason)."""
    prefix = EMPTY_MODEL
    g = EMPTY_LTC
    for e in xi.entries:
        if isinstance(e, ValEntry):
            witness = derive_value(g, prefix, e.value, budget)
            if witness is None:
                return None, f"no derivation witness found for '{e.name}' within budget"
            g = g.add_var(e.name, typecheck_term({}, e.value))
            prefix = prefix.add_val(e.name, e.value)
        else:
            if e.ltc != g.remove_tcvs():
                return None, (f"TCV '{e.name}' does not record the TCV-erased LTC "
                              f"of its prefix")
            g = g.add_tcv(e.name)
            prefix = prefix.add_tcv(e.name, e.ltc)
    return g, None


def extension_steps(xi: Model, budget: DeriveBudget, tcv_counter: list):
    """Deterministic candidate single-step extensions of xi (all derivable)."""
    g = xi.ltc()
    stc = interp_ltc(g, xi)
    fixed = xi.an()
    steps = []
    idx = len(xi.entries)
    # value extensions at Nm: one witness per distinct existing name + fresh
    tys = [NM, BOOL]
    for e in xi.entries:
        if isinstance(e, ValEntry):
            ty = typecheck_term({}, e.value)
            if ty not in tys:
                tys.append(ty)
    small = replace(budget, max_term_size=budget.extension_witness_size)
    for ty in tys:
        count = 0
        for (m, v) in derived_values(g, xi, ty, small):
            steps.append(AddVal(f"w{idx}_{len(steps)}", m))
            count += 1
            if count >= 4:
                break
    tcv_counter[0] += 1
    steps.append(AddTCV(f"d{tcv_counter[0]}"))
    return steps


def extensions_upto(xi: Model, budget: DeriveBudget):
    """All models reachable by at most max_extension_depth extension steps."""
    out = [xi]
    frontier = [xi]
    tcv_counter = [100]
    for _ in range(budget.max_extension_depth):
        nxt = []
        for m in frontier:
            for step in extension_steps(m, budget, tcv_counter):
                try:
                    nxt.append(extend(m, step, budget))
                except NuError:
                    continue
        out.extend(nxt)
        frontier = nxt
    return out


# ---------------------------------------------------------------------------
# The satisfaction oracle

def _value_space(ty: Type, g0: LTC, xi: Model, budget: DeriveBudget):
    """(values, complete): a superset of the values derivable from g0 at a
    first-order type, with `complete` true when it provably covers them all
    (up to interchange of fresh names).  Function types are never complete."""
    stc = interp_ltc(g0, xi)
    reachable = frozenset()
    for x in stc:
        v = xi.lookup(x)
        if v is not None:
            reachable |= an(v)

    fresh_base = max(xi.an() | reachable, default=-1) + 1

    def build(ty, fresh_ids):
        match ty:
            case Base("Unit"):
                return [UNIT_VAL], True
            case Base("Bool"):
                return [TRUE, FALSE], True
            case Base("Nm"):
                vals = [Name(r) for r in sorted(reachable)]
                vals += [Name(i) for i in fresh_ids]
                return vals, True
            case Prod(a, b):
                va, ca = build(a, fresh_ids)
                vb, cb = build(b, fresh_ids)
                return [PairT(x, y) for x in va for y in vb], ca and cb
            case _:
                return [], False

    def count_nm(ty):
        match ty:
            case Base("Nm"):
                return 1
            case Prod(a, b):
                return count_nm(a) + count_nm(b)
            case _:
                return 0

    k = count_nm(ty)
    fresh_ids = [fresh_base + i for i in range(k)]
    return build(ty, fresh_ids)


def satisfies(xi: Model, a: Formula, budget: DeriveBudget = DEFAULT_BUDGET,
              assume_wellformed: bool = True) -> SatVerdict:
    """Three-valued bounded satisfaction: xi |= a."""
    typecheck_formula(xi.ltc(), a)
    return _sat(xi, normalize(a), budget)


def _sat(xi: Model, a: Formula, budget: DeriveBudget) -> SatVerdict:
    match a:
        case Top():
            return HOLDS
        case Bot():
            return FAILS
        case FEq(l, r):
            return _sat_eq(xi, l, r, budget)
        case Not(b):
            return _neg(_sat(xi, b, budget))
        case And(l, r):
            return _conj(_sat(xi, l, budget), _sat(xi, r, budget))
        case Eval(f, e, m, b):
            vf = interp_expr(f, xi)
            ve = interp_expr(e, xi)
            fixed = xi.an()
            alloc = NameAllocator(max(fixed, default=-1) + 1)
            cfg = evaluate(Configuration(fixed, App(vf, ve)), alloc)
            return _sat(xi.add_val(m, cfg.term), b, budget)
        case ForallIn(x, ty, g0, b):
            return _sat_forall_in(xi, x, ty, g0, b, budget)
        case ForallTCV(d, b):
            return _sat_forall_tcv(xi, d, b, budget)
        case Fresh(subj, g0):
            return _sat_fresh(xi, subj, g0, budget)
    raise AssertionError(a)


def _sat_eq(xi: Model, l: Expr, r: Expr, budget: DeriveBudget) -> SatVerdict:
    vl = interp_expr(l, xi)
    vr = interp_expr(r, xi)
    if alpha_eq(vl, vr):
        return HOLDS
    ty = typecheck_term({}, vl)
    if not _has_function(ty):
        return FAILS  # first-order values are equal iff literally equal
    generated = xi.an() | an(vl) | an(vr)
    verdict = check_equiv(vl, vr, ty, generated, budget.equiv_context_budget)
    if isinstance(verdict, Distinguished):
        return FAILS
    return unknown(f"equality at {type_to_str(ty)} not distinguished up to "
                   f"context budget {budget.equiv_context_budget}")


def _has_function(ty: Type) -> bool:
    match ty:
        case Arrow(_, _):
            return True
        case Prod(a, b):
            return _has_function(a) or _has_function(b)
        case _:
            return False


def _sat_forall_in(xi, x, ty, g0, body, budget) -> SatVerdict:
    fixed = xi.an()
    definite = {}
    for (m, v) in derived_values(g0, xi, ty, budget):
        definite[canon_value(v, fixed)] = v
    space, complete = _value_space(ty, g0, xi, budget)
    over = dict(definite)
    if complete:
        for v in space:
            over.setdefault(canon_value(v, fixed), v)

    saw_unknown = None
    for key, v in over.items():
        inner = _sat(xi.add_val(x, v), body, budget)
        if inner.kind == "fails":
            if key in definite:
                return FAILS
            saw_unknown = unknown("counterexample value not known to be derivable")
        elif inner.kind == "unknown":
            saw_unknown = inner
    if complete and saw_unknown is None:
        return HOLDS
    if saw_unknown is not None:
        return saw_unknown
    return unknown(f"restricted forall at {type_to_str(ty)}: witness space "
                   f"not exhaustible within term-size {budget.max_term_size}")


def _sat_forall_tcv(xi, d, body, budget) -> SatVerdict:
    for ext in extensions_upto(xi, budget):
        snap = ext.ltc().remove_tcvs()
        inner = _sat(ext.add_tcv(d, snap), body, budget)
        if inner.kind == "fails":
            return FAILS
    return unknown(f"all explored branches hold up to extension depth "
                   f"{budget.max_extension_depth}")


def _sat_fresh(xi, subj, g0, budget) -> SatVerdict:
    v = interp_expr(subj, xi)
    if not isinstance(v, Name):
        raise NuError("freshness subject did not denote a name")
    stc = interp_ltc(g0, xi)
    reachable = frozenset()
    for x in stc:
        val = xi.lookup(x)
        if val is not None:
            reachable |= an(val)
    if v.ident not in reachable:
        # names cannot be forged: no term over g0 can produce it
        return HOLDS
    witness = derive_value(g0, xi, v, budget)
    if witness is not None:
        return FAILS
    return unknown(f"name occurs in the closure of the LTC but no witness "
                   f"found within term-size {budget.max_term_size}")


# ---------------------------------------------------------------------------
# Triple semantics (section-level check used by the oracle-vs-logic sweeps)

def check_triple(xi: Model, triple: Triple, budget: DeriveBudget = DEFAULT_BUDGET) -> SatVerdict:
    """xi |= {A} M :m {B}: if A holds then M's derived value satisfies B."""
    g = xi.ltc()
    typecheck_triple(g, triple)
    pre = _sat(xi, normalize(triple.pre), budget)
    if pre.kind == "fails":
        return HOLDS
    fixed = xi.an()
    closed = xi.closure(triple.program)
    alloc = NameAllocator(max(fixed, default=-1) + 1)
    cfg = evaluate(Configuration(fixed, closed), alloc)
    post = _sat(xi.add_val(triple.anchor, cfg.term), normalize(triple.post), budget)
    if pre.kind == "holds":
        return post
    # precondition unknown: a definite failure of the post cannot be blamed
    if post.kind == "fails":
        return unknown("precondition undecided")
    return post if post.kind == "unknown" else unknown("precondition undecided")


# ---------------------------------------------------------------------------
# Model parsing (surface syntax: `x := <value>; d := (ltc);` in order)

def parse_model(text: str) -> Model:
    """Model files: entries `x := <value-term>;` (evaluated in order) and
    TCV entries `d := ctx (x:Nm, ...);`.  A bare LTC literal with at least
    one typed entry is also accepted for TCV lines."""
    from .terms import tokenize, TokenStream, parse_term_stream
    from .logic import parse_ltc_stream

    ts = TokenStream(tokenize(text))
    xi = EMPTY_MODEL
    while not ts.done():
        name = ts.ident()
        ts.expect(":=")
        is_ltc = False
        if ts.peek().kind == "ident" and ts.peek().text == "ctx":
            ts.next()
            is_ltc = True
        elif ts.at("(") and ts.peek(1).kind == "ident" and ts.peek(2).text in (",", ":"):
            is_ltc = True
        if is_ltc:
            xi = xi.add_tcv(name, parse_ltc_stream(ts))
        else:
            t = parse_term_stream(ts)
            closed = xi.closure(t)
            v = closed if is_value(closed) else _eval_closed(xi, t)
            xi = xi.add_val(name, v)
        ts.expect(";")
    return xi


# ---------------------------------------------------------------------------
# Deterministic well-constructed model corpus for the sweeps

SEED_WITNESSES = [
    "gensym ()",
    "gensym ()",
    "true",
    "()",
    "\\y:Nm. false",
    "let x = gensym () in \\y:Nm. x = y",
    "<gensym (), gensym ()>",
    "\\y:Nm. y",
    "let x = gensym () in <x, \\y:Nm. x = y>",
    "\\u:Unit. gensym ()",
]


def enumerate_models(count: int = 50, budget: DeriveBudget = DEFAULT_BUDGET):
    """At least `count` distinct well-constructed models, built by applying
    seed witnesses and TCV snapshots breadth-first from the empty model."""
    from .terms import parse_term

    seeds = [parse_term(w) for w in SEED_WITNESSES]
    out = [EMPTY_MODEL]
    frontier = [EMPTY_MODEL]
    tcv = 0
    while len(out) < count and frontier:
        nxt = []
        for m in frontier:
            idx = len(m.entries)
            for k, w in enumerate(seeds):
                try:
                    typecheck_term(interp_ltc(m.ltc(), m), w)
                except TypeCheckError:
                    continue
                try:
                    nxt.append(extend(m, AddVal(f"v{idx}_{k}", w), budget))
                except NuError:
                    continue
                if len(out) + len(nxt) >= count * 2:
                    break
            tcv += 1
            try:
                nxt.append(extend(m, AddTCV(f"dd{tcv}"), budget))
            except NuError:
                pass
        out.extend(nxt)
        frontier = nxt
    return out[:count] if len(out) >= count else out


def models_for_ltc(g: LTC, budget: DeriveBudget = DEFAULT_BUDGET, limit: int = 6):
    """Well-constructed models typed by g, assigning each entry a derivable
    value in order (first few choices per entry, deterministic)."""
    results = []

    def go(prefix: Model, entries):
        if len(results) >= limit:
            return
        if not entries:
            results.append(prefix)
            return
        e, rest = entries[0], entries[1:]
        if isinstance(e, TCVBind):
            go(prefix.add_tcv(e.name, prefix.ltc().remove_tcvs()), rest)
            return
        count = 0
        for (_, v) in derived_values(prefix.ltc(), prefix, e.ty, budget):
            go(prefix.add_val(e.name, v), rest)
            count += 1
            if count >= 3 or len(results) >= limit:
                return
        # no derivable value at this type within budget: give up this branch

    go(EMPTY_MODEL, list(g.entries))
    return results
