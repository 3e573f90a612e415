"""Quantifier-free formulas over Q_p: parser, printer, and normalizer.

Atoms are the three Macintyre-style conditions (vanishing, norm
comparison, n-th power coset membership) plus a congruence-subgroup
sugar atom that normalization eliminates.  The normalizer removes
negations, lifts every coset atom to a single common power, and
flattens to a union of intersections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .errors import ArityError, DomainError, FormulaSyntaxError
from .padic import (
    PadicConfig,
    PadicNumber,
    as_padic,
    coset_reps,
    in_congruence_subgroup,
    is_nth_power,
)
from .terms import FactoredTerm, Polynomial, Term

# -- conditions ---------------------------------------------------------------


@dataclass(frozen=True)
class Zero:
    """f = 0."""

    f: Term


@dataclass(frozen=True)
class NormLe:
    """|g| <= |f| , i.e. v(g) >= v(f)."""

    g: Term
    f: Term


@dataclass(frozen=True)
class PowerCoset:
    """f lies in the coset rep * P_N^* (rep indexes coset_reps(N)).

    include_zero adds the point 0; the parser convention is that the
    identity coset includes 0 (P_N contains 0) and every other coset
    excludes it.  An explicit flag is needed because the complement of
    f = 0 is exactly the identity coset at power 1 with zero removed.
    """

    f: Term
    power: int
    rep: int
    include_zero: bool

    @staticmethod
    def make(f: Term, power: int, rep: int, include_zero: Optional[bool] = None):
        if include_zero is None:
            include_zero = rep == 0
        return PowerCoset(f, power, rep, include_zero)


@dataclass(frozen=True)
class InCongruence:
    """Sugar: f in Q_(N,M) = {0} plus all p^{kN}(1 + p^M R)."""

    f: Term
    power: int
    level: int


BasicCondition = Union[Zero, NormLe, PowerCoset]
Condition = Union[Zero, NormLe, PowerCoset, InCongruence]


# -- formula tree --------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    cond: Condition


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


Formula = Union[Atom, Not, And, Or]

TRUE = And(())
FALSE = Or(())


@dataclass(frozen=True)
class NormalForm:
    """Union of intersections of basic conditions, all coset atoms at one power."""

    power: int
    conjunctions: tuple  # tuple of tuples of BasicCondition


# -- evaluation ----------------------------------------------------------------


def eval_term(term: Term, t, cfg: PadicConfig) -> PadicNumber:
    if isinstance(term, Polynomial):
        return as_padic(term(t), cfg)
    if term.root_index != 1:
        raise DomainError("formal roots cannot appear in formula conditions")
    return as_padic(term.power_value(t), cfg)


def eval_condition(cond: Condition, t, cfg: PadicConfig) -> bool:
    if isinstance(cond, Zero):
        return eval_term(cond.f, t, cfg).is_zero
    if isinstance(cond, NormLe):
        gv = eval_term(cond.g, t, cfg)
        fv = eval_term(cond.f, t, cfg)
        gval = math.inf if gv.is_zero else gv.v
        fval = math.inf if fv.is_zero else fv.v
        return gval >= fval
    if isinstance(cond, PowerCoset):
        value = eval_term(cond.f, t, cfg)
        if value.is_zero:
            return cond.include_zero
        reps = coset_reps(cond.power, cfg)
        if not 0 <= cond.rep < len(reps):
            raise DomainError(
                f"coset index {cond.rep} out of range for power {cond.power} at p = {cfg.p}"
            )
        return is_nth_power(value / as_padic(reps[cond.rep], cfg), cond.power)
    if isinstance(cond, InCongruence):
        return in_congruence_subgroup(eval_term(cond.f, t, cfg), cond.power, cond.level)
    raise TypeError(f"not a condition: {cond!r}")


def eval_formula(formula: Formula, t, cfg: PadicConfig) -> bool:
    if isinstance(formula, Atom):
        return eval_condition(formula.cond, t, cfg)
    if isinstance(formula, Not):
        return not eval_formula(formula.child, t, cfg)
    if isinstance(formula, And):
        return all(eval_formula(c, t, cfg) for c in formula.children)
    if isinstance(formula, Or):
        return any(eval_formula(c, t, cfg) for c in formula.children)
    raise TypeError(f"not a formula: {formula!r}")


def eval_normal_form(nf: NormalForm, t, cfg: PadicConfig) -> bool:
    return any(
        all(eval_condition(c, t, cfg) for c in conj) for conj in nf.conjunctions
    )


# -- complement ---------------------------------------------------------------


def complement_basic(cond: BasicCondition, cfg: PadicConfig) -> Formula:
    """A negation-free formula equivalent to the complement of cond.

    Complements stay within the basic alphabet: nonvanishing is the
    identity coset at power 1 with zero removed, coset complements
    enumerate the remaining cosets, and strict norm flips shift by one
    step of the discrete value group (v(g) < v(f) iff v(g) + 1 <= v(f)).
    """
    if isinstance(cond, Zero):
        return Atom(PowerCoset(cond.f, 1, 0, include_zero=False))
    if isinstance(cond, NormLe):
        pi_g = _scale_term(cond.g, Fraction(cfg.p))
        return Atom(NormLe(cond.f, pi_g))
    if isinstance(cond, PowerCoset):
        reps = coset_reps(cond.power, cfg)
        if not 0 <= cond.rep < len(reps):
            raise DomainError(
                f"coset index {cond.rep} out of range for power {cond.power} at p = {cfg.p}"
            )
        others = [
            Atom(PowerCoset(cond.f, cond.power, r, include_zero=False))
            for r in range(len(reps))
            if r != cond.rep
        ]
        if cond.rep == 0 and cond.include_zero:
            return _or(others)
        if cond.rep == 0:
            return _or([Atom(Zero(cond.f))] + others)
        # complement of a nonidentity coset: zero rejoins the identity coset
        identity = Atom(PowerCoset(cond.f, cond.power, 0, include_zero=True))
        rest = [
            Atom(PowerCoset(cond.f, cond.power, r, include_zero=False))
            for r in range(1, len(reps))
            if r != cond.rep
        ]
        return _or([identity] + rest)
    raise TypeError(f"cannot complement {cond!r}")


def _scale_term(term: Term, c: Fraction) -> Term:
    if isinstance(term, Polynomial):
        return Polynomial(tuple(c * a for a in term.coeffs), term.var)
    return FactoredTerm(
        _scale_coeff(term.coeff, c), term.factors, term.root_index, term.var
    )


def _scale_coeff(coeff, c: Fraction):
    if isinstance(coeff, Fraction):
        return coeff * c
    from .terms import RationalFunction

    return RationalFunction.make(coeff.num * Polynomial.constant(c, coeff.num.var), coeff.den)


def _or(children) -> Formula:
    children = tuple(children)
    if len(children) == 1:
        return children[0]
    return Or(children)


# -- normalization --------------------------------------------------------------


def _unit_group_exponent(p: int, level: int) -> int:
    """Exponent of (Z/p^level)^*."""
    if p == 2:
        return 1 if level == 1 else 2 if level == 2 else 2 ** (level - 2)
    return (p - 1) * p ** (level - 1)


def desugar_congruence(cond: InCongruence, cfg: PadicConfig) -> Formula:
    """Rewrite membership in Q_(N,M) as a union of power cosets.

    P_N' with N' = N * exponent((Z/p^M)^*) sits inside Q_(N,M)^*, so the
    subgroup is the union of the finitely many N'-power cosets meeting it.
    """
    big = cond.power * _unit_group_exponent(cfg.p, cond.level)
    reps = coset_reps(big, cfg)
    picks = []
    for idx, rep in enumerate(reps):
        if in_congruence_subgroup(as_padic(rep, cfg), cond.power, cond.level):
            picks.append(
                Atom(PowerCoset(cond.f, big, idx, include_zero=(idx == 0)))
            )
    return _or(picks)


def formula_powers(formula: Formula) -> list:
    out = []

    def walk(node):
        if isinstance(node, Atom):
            if isinstance(node.cond, PowerCoset):
                out.append(node.cond.power)
        elif isinstance(node, Not):
            walk(node.child)
        elif isinstance(node, (And, Or)):
            for c in node.children:
                walk(c)

    walk(formula)
    return out


def _desugar(formula: Formula, cfg: PadicConfig) -> Formula:
    if isinstance(formula, Atom):
        if isinstance(formula.cond, InCongruence):
            return desugar_congruence(formula.cond, cfg)
        return formula
    if isinstance(formula, Not):
        return Not(_desugar(formula.child, cfg))
    if isinstance(formula, And):
        return And(tuple(_desugar(c, cfg) for c in formula.children))
    return Or(tuple(_desugar(c, cfg) for c in formula.children))


def _push_not(formula: Formula, cfg: PadicConfig, negate: bool) -> Formula:
    if isinstance(formula, Not):
        return _push_not(formula.child, cfg, not negate)
    if isinstance(formula, And):
        kids = tuple(_push_not(c, cfg, negate) for c in formula.children)
        return Or(kids) if negate else And(kids)
    if isinstance(formula, Or):
        kids = tuple(_push_not(c, cfg, negate) for c in formula.children)
        return And(kids) if negate else Or(kids)
    return complement_basic(formula.cond, cfg) if negate else formula


def _lift_coset(cond: PowerCoset, big: int, cfg: PadicConfig) -> list:
    """Atoms at power big whose union is cond (cond.power divides big)."""
    small_reps = coset_reps(cond.power, cfg)
    if not 0 <= cond.rep < len(small_reps):
        raise DomainError(
            f"coset index {cond.rep} out of range for power {cond.power} at p = {cfg.p}"
        )
    base = as_padic(small_reps[cond.rep], cfg)
    out = []
    for idx, rep in enumerate(coset_reps(big, cfg)):
        if is_nth_power(as_padic(rep, cfg) / base, cond.power):
            out.append(
                PowerCoset(
                    cond.f, big, idx, include_zero=cond.include_zero and idx == 0
                )
            )
    return out


def _conjunction_consistent(conj: frozenset) -> bool:
    """Drop conjunctions with two different cosets demanded of one term."""
    seen = {}
    for c in conj:
        if not isinstance(c, PowerCoset):
            continue
        key = (c.f, c.power)
        if key in seen and seen[key].rep != c.rep:
            a, b = seen[key], c
            # distinct cosets only intersect in 0, so both must allow it
            if not (a.include_zero and b.include_zero):
                return False
        seen.setdefault(key, c)
    return True


def normalize(formula: Formula, cfg: PadicConfig) -> NormalForm:
    """Negation-free union of intersections with one common coset power.

    The common power is the lcm of every power present; each coset atom
    at a divisor power becomes the union of the finer cosets inside it.
    """
    formula = _desugar(formula, cfg)
    formula = _push_not(formula, cfg, False)
    powers = formula_powers(formula)
    big = math.lcm(*powers) if powers else 1

    def to_dnf(node) -> list:
        if isinstance(node, Atom):
            cond = node.cond
            if isinstance(cond, PowerCoset):
                if cond.power != big:
                    return [frozenset([c]) for c in _lift_coset(cond, big, cfg)]
                return [frozenset([cond])]
            return [frozenset([cond])]
        if isinstance(node, Or):
            out = []
            seen = set()
            for child in node.children:
                for conj in to_dnf(child):
                    if conj not in seen:
                        seen.add(conj)
                        out.append(conj)
            return out
        if isinstance(node, And):
            acc = [frozenset()]
            for child in node.children:
                nxt = []
                seen = set()
                for left in acc:
                    for right in to_dnf(child):
                        merged = left | right
                        if merged not in seen and _conjunction_consistent(merged):
                            seen.add(merged)
                            nxt.append(merged)
                acc = nxt
                if not acc:
                    break
            return acc
        raise TypeError(f"unexpected node in negation-free formula: {node!r}")

    conjunctions = to_dnf(formula)
    ordered = tuple(
        tuple(sorted(conj, key=_condition_sort_key)) for conj in conjunctions
    )
    return NormalForm(big, ordered)


def _condition_sort_key(cond: BasicCondition):
    if isinstance(cond, Zero):
        return (0, _term_key(cond.f), 0, 0, 0)
    if isinstance(cond, NormLe):
        return (1, _term_key(cond.g), 0, 0, 0) + (_term_key(cond.f),)
    return (2, _term_key(cond.f), cond.power, cond.rep, int(cond.include_zero))


def _term_key(term: Term) -> str:
    return str(term)


# -- parser --------------------------------------------------------------------


def _tokenize(text: str) -> list:
    out = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        two = text[i : i + 2]
        if two in ("&&", "||", "<="):
            out.append((two, i))
            i += 2
            continue
        if ch in "()|!+-*^/=,":
            out.append((ch, i))
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            out.append(("num", i, int(text[i:j])))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            out.append(("name", i, text[i:j]))
            i = j
            continue
        raise FormulaSyntaxError(f"unexpected character {ch!r}", i)
    out.append(("end", n))
    return out


class _Parser:
    """Recursive descent over the documented grammar:

        formula  := conj ('||' conj)*
        conj     := unary ('&&' unary)*
        unary    := '!' unary | atom
        atom     := '(' formula ')'
                  | term '=' '0'
                  | '|' term '|' '<=' '|' term '|'
                  | term 'in' group
        group    := 'P_' INT | 'coset' '(' INT ',' 'P_' INT ')' | 'Q' '(' INT ',' INT ')'
        term     := sum of products of powers over variables and rational literals
    """

    def __init__(self, tokens, variables):
        self.toks = tokens
        self.pos = 0
        self.variables = variables

    def peek(self):
        return self.toks[self.pos]

    def take(self, kind=None):
        tok = self.toks[self.pos]
        if kind is not None and tok[0] != kind:
            raise FormulaSyntaxError(f"expected {kind!r}, found {tok[0]!r}", tok[1])
        self.pos += 1
        return tok

    # formula levels

    def formula(self) -> Formula:
        parts = [self.conj()]
        while self.peek()[0] == "||":
            self.take()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self) -> Formula:
        parts = [self.unary()]
        while self.peek()[0] == "&&":
            self.take()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self) -> Formula:
        if self.peek()[0] == "!":
            self.take()
            return Not(self.unary())
        return self.atom()

    def atom(self) -> Formula:
        tok = self.peek()
        if tok[0] == "name" and tok[2] == "true":
            self.take()
            return TRUE
        if tok[0] == "name" and tok[2] == "false":
            self.take()
            return FALSE
        if tok[0] == "|":
            self.take("|")
            g = self.term()
            self.take("|")
            self.take("<=")
            self.take("|")
            f = self.term()
            self.take("|")
            return Atom(NormLe(g, f))
        if tok[0] == "(":
            # could be a parenthesized formula or a parenthesized term
            save = self.pos
            try:
                self.take("(")
                inner = self.formula()
                self.take(")")
                if self.peek()[0] in ("name", "=") and self._starts_predicate():
                    raise FormulaSyntaxError("term context", tok[1])
                return inner
            except FormulaSyntaxError:
                self.pos = save
        term = self.term()
        nxt = self.peek()
        if nxt[0] == "=":
            self.take("=")
            zero = self.take("num")
            if zero[2] != 0:
                raise FormulaSyntaxError("only comparisons with 0 are allowed", zero[1])
            return Atom(Zero(term))
        if nxt[0] == "name" and nxt[2] == "in":
            self.take()
            return Atom(self.group(term))
        raise FormulaSyntaxError("expected '= 0', 'in', or a connective", nxt[1])

    def _starts_predicate(self) -> bool:
        tok = self.peek()
        return tok[0] == "=" or (tok[0] == "name" and tok[2] == "in")

    def group(self, term) -> Condition:
        tok = self.take("name")
        name = tok[2]
        if name.startswith("P_"):
            n = self._power_suffix(name, tok[1])
            return PowerCoset(term, n, 0, include_zero=True)
        if name == "coset":
            # explicit coset notation always means r * P_N^*, excluding 0
            self.take("(")
            rep = self.take("num")[2]
            self.take(",")
            ptok = self.take("name")
            if not ptok[2].startswith("P_"):
                raise FormulaSyntaxError("coset(...) expects P_N", ptok[1])
            n = self._power_suffix(ptok[2], ptok[1])
            self.take(")")
            return PowerCoset(term, n, rep, include_zero=False)
        if name == "Q":
            self.take("(")
            n = self.take("num")[2]
            self.take(",")
            m = self.take("num")[2]
            self.take(")")
            if n < 1 or m < 1:
                raise FormulaSyntaxError("Q(N,M) needs N, M >= 1", tok[1])
            return InCongruence(term, n, m)
        raise FormulaSyntaxError(f"unknown set {name!r}", tok[1])

    def _power_suffix(self, name: str, pos: int) -> int:
        body = name[2:]
        if not body.isdigit():
            raise FormulaSyntaxError("P_ needs an integer power", pos)
        n = int(body)
        if n < 1:
            raise FormulaSyntaxError("power must be >= 1", pos)
        return n

    # terms

    def term(self) -> Polynomial:
        node = self.product()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.product()
            node = node + rhs if op == "+" else node - rhs
        return node

    def product(self) -> Polynomial:
        node = self.power()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            rhs = self.power()
            if op == "*":
                node = node * rhs
            else:
                if rhs.degree != 0:
                    raise FormulaSyntaxError(
                        "division only by nonzero constants", self.peek()[1]
                    )
                if rhs.is_zero or rhs.coeffs[0] == 0:
                    raise FormulaSyntaxError("division by zero", self.peek()[1])
                node = node * Polynomial.constant(1 / rhs.coeffs[0], node.var)
        return node

    def power(self) -> Polynomial:
        base = self.unary_term()
        if self.peek()[0] == "^":
            self.take()
            neg = False
            if self.peek()[0] == "-":
                self.take()
                neg = True
            e = self.take("num")[2]
            if neg:
                raise FormulaSyntaxError(
                    "negative exponents are only allowed in factored inputs",
                    self.peek()[1],
                )
            return base**e
        return base

    def unary_term(self) -> Polynomial:
        tok = self.peek()
        if tok[0] == "-":
            self.take()
            return -self.unary_term()
        if tok[0] == "+":
            self.take()
            return self.unary_term()
        if tok[0] == "(":
            self.take("(")
            node = self.term()
            self.take(")")
            return node
        if tok[0] == "num":
            self.take()
            return Polynomial.constant(tok[2], self.variables[-1])
        if tok[0] == "name":
            self.take()
            if tok[2] not in self.variables:
                raise ArityError(f"unknown variable {tok[2]!r}")
            return Polynomial.variable(tok[2])
        raise FormulaSyntaxError("expected a term", tok[1])


def parse(text: str, variables=("t",)) -> Formula:
    """Parse a formula; raises FormulaSyntaxError / ArityError."""
    parser = _Parser(_tokenize(text), tuple(variables))
    out = parser.formula()
    parser.take("end")
    return out


def parse_term(text: str, variables=("t",)) -> Polynomial:
    parser = _Parser(_tokenize(text), tuple(variables))
    out = parser.term()
    parser.take("end")
    return out


def parse_factored(text: str, cfg: PadicConfig, root_index: int = 1, variables=("t",)) -> FactoredTerm:
    """Parse a product-of-powers term into factored form.

    Accepts products of constants and polynomial factors with integer
    (possibly negative) exponents; nonlinear factors are split into
    linear ones over Q_p.
    """
    from .terms import padic_roots

    parser = _Parser(_tokenize(text), tuple(variables))
    factors = []
    coeff = Fraction(1)

    def handle(base: Polynomial, exp: int):
        nonlocal coeff
        if base.degree <= 0:
            c = base.coeffs[0] if base.coeffs else Fraction(0)
            if c == 0:
                raise FormulaSyntaxError("zero factor", 0)
            coeff *= c**exp
            return
        coeff *= base.lead**exp
        for root in padic_roots(base.monic(), cfg):
            factors.append((root.value, exp * root.multiplicity))

    def next_exponent() -> int:
        if parser.peek()[0] != "^":
            return 1
        parser.take()
        neg = False
        if parser.peek()[0] == "-":
            parser.take()
            neg = True
        e = parser.take("num")[2]
        return -e if neg else e

    sign = 1
    while parser.peek()[0] in ("+", "-"):
        if parser.take()[0] == "-":
            sign = -sign
    while True:
        base = parser.unary_term()
        handle(base, next_exponent())
        nxt = parser.peek()
        if nxt[0] == "*":
            parser.take()
            continue
        if nxt[0] == "/":
            parser.take()
            base = parser.unary_term()
            handle(base, -next_exponent())
            continue
        break
    if sign == -1:
        coeff = -coeff
    parser.take("end")
    return FactoredTerm.make(coeff, factors, root_index, variables[-1])


# -- printer -------------------------------------------------------------------


def format_condition(cond: Condition) -> str:
    if isinstance(cond, Zero):
        return f"{cond.f} = 0"
    if isinstance(cond, NormLe):
        return f"|{cond.g}| <= |{cond.f}|"
    if isinstance(cond, PowerCoset):
        if cond.rep == 0 and cond.include_zero:
            return f"({cond.f}) in P_{cond.power}"
        if not cond.include_zero:
            return f"({cond.f}) in coset({cond.rep}, P_{cond.power})"
        return f"({cond.f}) = 0 || ({cond.f}) in coset({cond.rep}, P_{cond.power})"
    return f"({cond.f}) in Q({cond.power},{cond.level})"


def format_formula(formula: Formula) -> str:
    if formula == TRUE:
        return "true"
    if formula == FALSE:
        return "false"
    if isinstance(formula, Atom):
        return format_condition(formula.cond)
    if isinstance(formula, Not):
        return f"!({format_formula(formula.child)})"
    if isinstance(formula, And):
        return " && ".join(f"({format_formula(c)})" for c in formula.children)
    if isinstance(formula, Or):
        return " || ".join(f"({format_formula(c)})" for c in formula.children)
    raise TypeError(f"not a formula: {formula!r}")


# -- JSON AST ------------------------------------------------------------------


def term_to_json(term: Term) -> dict:
    if isinstance(term, Polynomial):
        return {
            "node": "poly",
            "var": term.var,
            "coeffs": [str(c) for c in term.coeffs],
        }
    return {
        "node": "factored",
        "var": term.var,
        "coeff": str(term.coeff),
        "factors": [[str(c), e] for c, e in term.factors],
        "root_index": term.root_index,
    }


def term_from_json(obj: dict) -> Term:
    if obj["node"] == "poly":
        return Polynomial.make([Fraction(c) for c in obj["coeffs"]], obj["var"])
    return FactoredTerm.make(
        Fraction(obj["coeff"]),
        [(Fraction(c), e) for c, e in obj["factors"]],
        obj.get("root_index", 1),
        obj["var"],
    )


def formula_to_json(formula: Formula) -> dict:
    if isinstance(formula, Atom):
        cond = formula.cond
        if isinstance(cond, Zero):
            return {"node": "zero", "f": term_to_json(cond.f)}
        if isinstance(cond, NormLe):
            return {"node": "norm_le", "g": term_to_json(cond.g), "f": term_to_json(cond.f)}
        if isinstance(cond, PowerCoset):
            return {
                "node": "power_coset",
                "f": term_to_json(cond.f),
                "N": cond.power,
                "rep": cond.rep,
                "include_zero": cond.include_zero,
            }
        return {
            "node": "congruence",
            "f": term_to_json(cond.f),
            "N": cond.power,
            "M": cond.level,
        }
    if isinstance(formula, Not):
        return {"node": "not", "child": formula_to_json(formula.child)}
    tag = "and" if isinstance(formula, And) else "or"
    return {"node": tag, "children": [formula_to_json(c) for c in formula.children]}


def normal_form_to_json(nf: NormalForm) -> dict:
    return {
        "power": nf.power,
        "conjunctions": [
            [formula_to_json(Atom(c)) for c in conj] for conj in nf.conjunctions
        ],
    }
