"""Exact univariate polynomials, rational functions, and factored terms.

Coefficients are rationals.  Root isolation over Q_p extracts rational
roots exactly and lifts the remaining residue roots digit by digit;
an input whose roots cannot all be found in Q_p raises
UnsupportedSplitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

from .errors import PoleError, UnsupportedSplitting
from .padic import (
    PadicConfig,
    PadicNumber,
    Scalar,
    as_padic,
    int_valuation,
)

_MAX_SINGULAR_DEPTH = 48


@dataclass(frozen=True)
class Polynomial:
    """Dense univariate polynomial with Fraction coefficients (low to high)."""

    coeffs: tuple
    var: str = "t"

    @staticmethod
    def make(coeffs: Sequence, var: str = "t") -> "Polynomial":
        cs = [Fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        return Polynomial(tuple(cs), var)

    @staticmethod
    def constant(c, var: str = "t") -> "Polynomial":
        return Polynomial.make([c], var)

    @staticmethod
    def variable(var: str = "t") -> "Polynomial":
        return Polynomial.make([0, 1], var)

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1 if self.coeffs else -1

    @property
    def lead(self) -> Fraction:
        if self.is_zero:
            raise ValueError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        out = [Fraction(0)] * n
        for i, c in enumerate(self.coeffs):
            out[i] += c
        for i, c in enumerate(other.coeffs):
            out[i] += c
        return Polynomial.make(out, self.var)

    def __neg__(self) -> "Polynomial":
        return Polynomial(tuple(-c for c in self.coeffs), self.var)

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._coerce(other))

    def __mul__(self, other) -> "Polynomial":
        other = self._coerce(other)
        if self.is_zero or other.is_zero:
            return Polynomial((), self.var)
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial.make(out, self.var)

    def __pow__(self, n: int) -> "Polynomial":
        if n < 0:
            raise ValueError("negative polynomial power")
        out = Polynomial.constant(1, self.var)
        for _ in range(n):
            out = out * self
        return out

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        return Polynomial.constant(other, self.var)

    def __call__(self, x):
        """Horner evaluation; exact on Fractions, tracked on PadicNumbers."""
        if self.is_zero:
            return Fraction(0) if not isinstance(x, PadicNumber) else PadicNumber.zero(x.cfg)
        acc = self.coeffs[-1]
        if isinstance(x, PadicNumber):
            acc = as_padic(acc, x.cfg)
        for c in reversed(self.coeffs[:-1]):
            acc = acc * x + c
        return acc

    def derivative(self) -> "Polynomial":
        return Polynomial.make(
            [i * c for i, c in enumerate(self.coeffs)][1:], self.var
        )

    def monic(self) -> "Polynomial":
        if self.is_zero:
            return self
        lead = self.coeffs[-1]
        return Polynomial(tuple(c / lead for c in self.coeffs), self.var)

    def integer_cleared(self) -> tuple:
        """(primitive integer coefficient list, rational scale) with
        self = scale * primitive."""
        if self.is_zero:
            return (), Fraction(1)
        den = math.lcm(*(c.denominator for c in self.coeffs))
        ints = [int(c * den) for c in self.coeffs]
        g = math.gcd(*(abs(i) for i in ints))
        ints = [i // g for i in ints]
        return tuple(ints), Fraction(g, den)

    def shift_compose(self, a: int, scale: int) -> "Polynomial":
        """self(a + scale * t) expanded."""
        x = Polynomial.make([a, scale], self.var)
        out = Polynomial.constant(0, self.var)
        for c in reversed(self.coeffs):
            out = out * x + c
        return out

    def reversed_coeffs(self) -> "Polynomial":
        """t^deg * self(1/t)."""
        return Polynomial.make(tuple(reversed(self.coeffs)), self.var)

    def __str__(self):
        if self.is_zero:
            return "0"
        parts = []
        for i in range(self.degree, -1, -1):
            c = self.coeffs[i]
            if c == 0:
                continue
            if i == 0:
                body = str(abs(c))
            else:
                mag = abs(c)
                head = "" if mag == 1 else f"{mag}*"
                body = f"{head}{self.var}" + (f"^{i}" if i > 1 else "")
            if not parts:
                parts.append(body if c > 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if c > 0 else f"- {body}")
        return " ".join(parts)


def poly_gcd(a: Polynomial, b: Polynomial) -> Polynomial:
    """Monic gcd by the Euclidean algorithm."""
    while not b.is_zero:
        a, b = b, _poly_mod(a, b)
    return a.monic() if not a.is_zero else a


def _poly_mod(a: Polynomial, b: Polynomial) -> Polynomial:
    if b.is_zero:
        raise ZeroDivisionError("polynomial modulo zero")
    r = a
    while not r.is_zero and r.degree >= b.degree:
        shift = r.degree - b.degree
        factor = r.lead / b.lead
        sub = Polynomial.make(
            [0] * shift + [factor * c for c in b.coeffs], a.var
        )
        r = r - sub
    return r


def poly_divmod(a: Polynomial, b: Polynomial) -> tuple:
    if b.is_zero:
        raise ZeroDivisionError("polynomial division by zero")
    q = Polynomial.constant(0, a.var)
    r = a
    while not r.is_zero and r.degree >= b.degree:
        shift = r.degree - b.degree
        factor = r.lead / b.lead
        term = Polynomial.make([0] * shift + [factor], a.var)
        q = q + term
        r = r - term * b
    return q, r


def squarefree_decomposition(f: Polynomial) -> list:
    """Yun's algorithm: [(g_i, i)] with f = lead * prod g_i^i, g_i squarefree monic."""
    if f.is_zero or f.degree == 0:
        return []
    f = f.monic()
    df = f.derivative()
    a = poly_gcd(f, df)
    b, _ = poly_divmod(f, a)
    c, _ = poly_divmod(df, a)
    d = c - b.derivative()
    out = []
    i = 1
    while b.degree > 0:
        g = poly_gcd(b, d)
        if g.degree > 0:
            out.append((g, i))
        b, _ = poly_divmod(b, g)
        c, _ = poly_divmod(d, g)
        d = c - b.derivative()
        i += 1
    return out


# -- rational functions -------------------------------------------------------


@dataclass(frozen=True)
class RationalFunction:
    """Quotient of polynomials, reduced and denominator-monic."""

    num: Polynomial
    den: Polynomial

    @staticmethod
    def make(num: Polynomial, den: Optional[Polynomial] = None) -> "RationalFunction":
        den = den if den is not None else Polynomial.constant(1, num.var)
        if den.is_zero:
            raise ZeroDivisionError("zero denominator")
        g = poly_gcd(num, den)
        if g.degree > 0:
            num, _ = poly_divmod(num, g)
            den, _ = poly_divmod(den, g)
        lead = den.lead
        num = Polynomial(tuple(c / lead for c in num.coeffs), num.var)
        den = den.monic()
        return RationalFunction(num, den)

    def __call__(self, x):
        d = self.den(x)
        if isinstance(d, PadicNumber):
            if d.is_zero:
                raise PoleError("evaluation at a pole")
            return self.num(x) / d
        if d == 0:
            raise PoleError("evaluation at a pole")
        return self.num(x) / d

    def __str__(self):
        if self.den.degree == 0 and self.den.coeffs[0] == 1:
            return str(self.num)
        return f"({self.num}) / ({self.den})"


TermValue = Union[Fraction, "PadicNumber"]
CoefLike = Union[Fraction, RationalFunction]


# -- factored terms ------------------------------------------------------------


@dataclass(frozen=True)
class FactoredTerm:
    """coeff * prod (t - center_j)^(e_j), optionally a formal root of index e.

    The wrapper with root_index e denotes a function whose e-th power is the
    displayed product; centers and the coefficient are scalars over a point
    base or rational functions over a one-variable base.
    """

    coeff: object
    factors: tuple
    root_index: int = 1
    var: str = "t"

    @staticmethod
    def make(coeff, factors, root_index: int = 1, var: str = "t") -> "FactoredTerm":
        norm = []
        for center, exp in factors:
            if exp == 0:
                continue
            if isinstance(center, (int, str)):
                center = Fraction(center)
            norm.append((center, int(exp)))
        if isinstance(coeff, (int, str)):
            coeff = Fraction(coeff)
        return FactoredTerm(coeff, tuple(norm), root_index, var)

    @property
    def total_degree(self) -> int:
        return sum(e for _, e in self.factors)

    def power_value(self, t, x=None):
        """Value of coeff * prod (t - c_j)^(e_j) (the root_index-th power of
        the denoted function).  Raises PoleError at poles."""
        acc = self.coeff(x) if isinstance(self.coeff, RationalFunction) else self.coeff
        for center, exp in self.factors:
            c = center(x) if isinstance(center, RationalFunction) else center
            base = t - c
            vanishes = base.is_zero if isinstance(base, PadicNumber) else base == 0
            if vanishes:
                if exp < 0:
                    raise PoleError("negative power of zero")
                if isinstance(base, PadicNumber):
                    return PadicNumber.zero(base.cfg)
                return PadicNumber.zero(acc.cfg) if isinstance(acc, PadicNumber) else Fraction(0)
            acc = acc * base**exp
        return acc

    def __call__(self, t, x=None):
        if self.root_index != 1:
            raise ValueError("formal roots have no direct evaluation; use power_value")
        return self.power_value(t, x)

    def as_polynomial(self) -> Polynomial:
        """Expansion, defined only for nonnegative exponents, constant
        coefficient, and root index 1."""
        if self.root_index != 1:
            raise ValueError("cannot expand a formal root")
        if isinstance(self.coeff, RationalFunction) or any(
            isinstance(c, (RationalFunction, PadicNumber)) or e < 0
            for c, e in self.factors
        ):
            raise ValueError("expansion needs rational centers and positive exponents")
        out = Polynomial.constant(self.coeff, self.var)
        for center, exp in self.factors:
            out = out * Polynomial.make([-center, 1], self.var) ** exp
        return out

    def __str__(self):
        parts = [] if self.coeff == 1 and self.factors else [str(self.coeff)]
        for center, exp in self.factors:
            if isinstance(center, PadicNumber) or (
                not isinstance(center, RationalFunction) and center != 0
            ):
                base = f"({self.var} - {center})" if _is_nonneg(center) else f"({self.var} + {_neg_str(center)})"
            elif isinstance(center, RationalFunction):
                base = f"({self.var} - ({center}))"
            else:
                base = self.var
            parts.append(base if exp == 1 else f"{base}^{exp}")
        body = " * ".join(parts) or "1"
        if self.root_index != 1:
            return f"({body})^(1/{self.root_index})"
        return body


def _is_nonneg(c) -> bool:
    return isinstance(c, PadicNumber) or c >= 0


def _neg_str(c) -> str:
    return str(-c)


Term = Union[Polynomial, FactoredTerm]


# -- p-adic root isolation -----------------------------------------------------


@dataclass(frozen=True)
class PadicRoot:
    """A root of a polynomial in Q_p with its multiplicity."""

    value: Scalar
    multiplicity: int


def _int_poly_eval(coeffs: Sequence[int], x: int, mod: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % mod
    return acc


def _lift_simple_root(coeffs: Sequence[int], a: int, p: int, target: int) -> int:
    """Newton lifting of a simple residue root to target digits."""
    prec = 1
    root = a % p
    dcoeffs = [i * c for i, c in enumerate(coeffs)][1:]
    while prec < target:
        prec = min(2 * prec, target)
        mod = p**prec
        fx = _int_poly_eval(coeffs, root, mod)
        dfx = _int_poly_eval(dcoeffs, root, mod)
        inv = pow(dfx, -1, mod)
        root = (root - fx * inv) % mod
    return root


def _zp_roots_digits(coeffs: Sequence[int], p: int, target: int, depth: int = 0) -> list:
    """All Z_p-roots of a squarefree integer polynomial, as digit integers
    mod p^target.  Recursion peels one digit at singular residues."""
    if depth > _MAX_SINGULAR_DEPTH:
        raise UnsupportedSplitting("root isolation exceeded singular-depth cap")
    roots = []
    dcoeffs = [i * c for i, c in enumerate(coeffs)][1:]
    for a in range(p):
        if _int_poly_eval(coeffs, a, p) != 0:
            continue
        if _int_poly_eval(dcoeffs, a, p) != 0:
            roots.append(_lift_simple_root(coeffs, a, p, target))
            continue
        shifted = Polynomial.make(coeffs).shift_compose(a, p)
        ints, _scale = shifted.integer_cleared()
        if not ints:
            continue
        for sub in _zp_roots_digits(ints, p, target, depth + 1):
            roots.append((a + p * sub) % p**target)
    return roots


def _root_scalar(digits: int, target: int, cfg: PadicConfig) -> Scalar:
    """Tracked root from its digit expansion mod p^target."""
    u = digits % cfg.p**target
    if u == 0:
        raise UnsupportedSplitting("root digits vanish at working precision")
    w = int_valuation(u, cfg.p)
    prec = min(cfg.k_work, target - w)
    if prec < 1:
        raise UnsupportedSplitting("root digits vanish at working precision")
    return PadicNumber(cfg, w, (u // cfg.p**w) % cfg.p**prec, prec)


def _rational_roots(f: Polynomial) -> list:
    """Rational roots with multiplicity, deflating as found."""
    out = []
    if f.is_zero or f.degree < 1:
        return out, f
    ints, _ = f.integer_cleared()
    # root 0 first
    k = 0
    while k < len(ints) and ints[k] == 0:
        k += 1
    if k:
        out.append(PadicRoot(Fraction(0), k))
        f = Polynomial.make(f.coeffs[k:], f.var)
        ints = ints[k:]
    if f.degree < 1:
        return out, f
    lead, const = ints[-1], ints[0]
    cands = set()
    for r in _divisors(abs(const)):
        for s in _divisors(abs(lead)):
            cands.add(Fraction(r, s))
            cands.add(Fraction(-r, s))
    for cand in sorted(cands):
        mult = 0
        while f.degree >= 1 and f(cand) == 0:
            f, _ = poly_divmod(f, Polynomial.make([-cand, 1], f.var))
            mult += 1
        if mult:
            out.append(PadicRoot(cand, mult))
        if f.degree < 1:
            break
    return out, f


def _divisors(n: int) -> list:
    if n == 0:
        return []
    out = []
    d = 1
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            if d != n // d:
                out.append(n // d)
        d += 1
    return sorted(out)


def padic_roots(f: Polynomial, cfg: PadicConfig) -> list:
    """All roots of f in Q_p with multiplicities.

    Squarefree decomposition, then rational extraction, then digitwise
    lifting for integral roots and for reciprocal roots (negative
    valuation).  Raises UnsupportedSplitting unless the roots found
    account for the full degree.
    """
    if f.is_zero:
        raise UnsupportedSplitting("zero polynomial does not split")
    if f.degree < 1:
        return []
    found: list[PadicRoot] = []
    for g, mult in squarefree_decomposition(f):
        rational, rest = _rational_roots(g)
        for r in rational:
            found.append(PadicRoot(r.value, r.multiplicity * mult))
        if rest.degree >= 1:
            for val in _padic_roots_squarefree(rest, cfg):
                found.append(PadicRoot(val, mult))
    total = sum(r.multiplicity for r in found)
    if total != f.degree:
        raise UnsupportedSplitting(
            f"found {total} roots for degree {f.degree}; "
            "polynomial does not split over Q_p"
        )
    return _merge_roots(found, cfg)


def _padic_roots_squarefree(g: Polynomial, cfg: PadicConfig) -> list:
    """Irrational Q_p-roots of a squarefree polynomial with no rational roots."""
    p = cfg.p
    target = cfg.k_work + 4
    out = []
    ints, _ = g.integer_cleared()
    for digits in _zp_roots_digits(ints, p, target):
        out.append(_root_scalar(digits, target, cfg))
    # roots of negative valuation: substitute s = p*u into the reciprocal
    rev = g.reversed_coeffs()
    shifted = rev.shift_compose(0, p)
    sints, _ = shifted.integer_cleared()
    if sints:
        for digits in _zp_roots_digits(sints, p, target):
            s = _root_scalar(digits * p, target + 1, cfg)
            one = PadicNumber.from_rational(1, cfg)
            out.append(one / s)
    return out


def _merge_roots(roots: list, cfg: PadicConfig) -> list:
    """Deduplicate roots that agree on all tracked digits (prefer exact)."""
    merged: list[PadicRoot] = []
    for r in roots:
        hit = None
        for i, m in enumerate(merged):
            if scalars_same(r.value, m.value, cfg):
                hit = i
                break
        if hit is None:
            merged.append(r)
        else:
            keep = merged[hit]
            value = keep.value if isinstance(keep.value, Fraction) else (
                r.value if isinstance(r.value, Fraction) else keep.value
            )
            merged[hit] = PadicRoot(value, keep.multiplicity + r.multiplicity)
    return merged


def scalars_same(a: Scalar, b: Scalar, cfg: PadicConfig) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return as_padic(a, cfg).same(as_padic(b, cfg))


@dataclass(frozen=True)
class SplitPoly:
    """A polynomial together with its full Q_p factorization."""

    poly: Polynomial
    lead: Fraction
    roots: tuple  # of PadicRoot

    def value_at(self, t, cfg: PadicConfig) -> PadicNumber:
        """Exact factored evaluation (avoids catastrophic cancellation)."""
        tp = as_padic(t, cfg)
        acc = as_padic(self.lead, cfg)
        for r in self.roots:
            base = tp - as_padic(r.value, cfg)
            if base.is_zero:
                return PadicNumber.zero(cfg)
            acc = acc * base**r.multiplicity
        return acc


def split_poly(f: Polynomial, cfg: PadicConfig) -> SplitPoly:
    if f.is_zero:
        return SplitPoly(f, Fraction(0), ())
    if f.degree < 1:
        return SplitPoly(f, f.coeffs[0], ())
    return SplitPoly(f, f.lead, tuple(padic_roots(f, cfg)))
