"""Exact p-adic arithmetic over Q_p with tracked unit precision.

Numbers are stored as p^v * u with the unit u kept modulo p^k for a
tracked precision k.  Values constructed from rationals additionally
remember the exact fraction, so digits can be recomputed at any depth;
values produced by lifting (roots of polynomials, n-th roots) carry
digits only.  Arithmetic is conservative: it never reports more digits
than it can justify, and predicates raise InsufficientPrecision instead
of guessing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional, Union

from .errors import (
    DomainError,
    InsufficientPrecision,
    UnsupportedTorsion,
)

INFINITY = math.inf

_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid far beyond any usable prime here."""
    if n < 2:
        return False
    for q in _MR_WITNESSES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def int_valuation(n: int, p: int) -> int:
    """v_p of a nonzero integer."""
    if n == 0:
        raise ValueError("valuation of integer 0 is undefined")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


@dataclass(frozen=True)
class PadicConfig:
    """Prime and working unit precision (digits base p)."""

    p: int
    k_work: int = 16

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"p = {self.p} is not prime")
        if self.k_work < 1:
            raise ValueError("k_work must be >= 1")


Scalar = Union[Fraction, "PadicNumber"]


@dataclass(frozen=True)
class PadicNumber:
    """p^v * u with u a unit stored mod p^prec; exact is set when the
    value is a known rational (digits then recomputable at any depth)."""

    cfg: PadicConfig
    v: int
    unit: int
    prec: int
    exact: Optional[Fraction] = None

    # -- constructors ----------------------------------------------------

    @staticmethod
    def zero(cfg: PadicConfig) -> "PadicNumber":
        return PadicNumber(cfg, 0, 0, cfg.k_work, Fraction(0))

    @staticmethod
    def from_rational(q, cfg: PadicConfig) -> "PadicNumber":
        q = Fraction(q)
        if q == 0:
            return PadicNumber.zero(cfg)
        p = cfg.p
        vn = int_valuation(q.numerator, p)
        vd = int_valuation(q.denominator, p)
        v = vn - vd
        k = cfg.k_work
        mod = p**k
        num = q.numerator // p**vn
        den = q.denominator // p**vd
        u = num * pow(den, -1, mod) % mod
        return PadicNumber(cfg, v, u, k, q)

    @staticmethod
    def from_unit(v: int, unit: int, prec: int, cfg: PadicConfig) -> "PadicNumber":
        """Tracked-digit value p^v * unit with unit known mod p^prec."""
        if prec < 1:
            raise InsufficientPrecision("no stored digits")
        unit %= cfg.p**prec
        if unit % cfg.p == 0:
            raise ValueError("unit part must be prime to p")
        return PadicNumber(cfg, v, unit, prec)

    # -- queries ----------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.exact is not None and self.exact == 0

    def digits(self, m: int) -> int:
        """Unit part modulo p^m, recomputing from the exact value if the
        tracked window is too short."""
        if self.is_zero:
            raise DomainError("zero has no unit part")
        if m <= self.prec:
            return self.unit % self.cfg.p**m
        if self.exact is not None:
            p = self.cfg.p
            mod = p**m
            num = self.exact.numerator // p ** int_valuation(self.exact.numerator, p)
            den = self.exact.denominator // p ** int_valuation(self.exact.denominator, p)
            return num * pow(den, -1, mod) % mod
        raise InsufficientPrecision(
            f"need {m} digits, tracking only {self.prec}"
        )

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other) -> "PadicNumber":
        if isinstance(other, PadicNumber):
            if other.cfg.p != self.cfg.p:
                raise DomainError("mixed primes")
            return other
        return PadicNumber.from_rational(other, self.cfg)

    def __add__(self, other) -> "PadicNumber":
        other = self._coerce(other)
        if self.exact is not None and other.exact is not None:
            return PadicNumber.from_rational(self.exact + other.exact, self.cfg)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        p = self.cfg.p
        a, b = self, other
        if a.v > b.v:
            a, b = b, a
        # absolute precision of the sum
        abs_prec = min(a.v + a.prec, b.v + b.prec)
        k = abs_prec - a.v
        if k < 1:
            raise InsufficientPrecision("operand entirely below partner's window")
        mod = p**k
        s = (a.unit + b.unit * p ** (b.v - a.v)) % mod
        if s == 0:
            raise InsufficientPrecision("cancellation consumed all tracked digits")
        w = int_valuation(s, p)
        if k - w < 1:
            raise InsufficientPrecision("cancellation consumed all tracked digits")
        return PadicNumber(self.cfg, a.v + w, (s // p**w) % p ** (k - w), k - w)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self) -> "PadicNumber":
        if self.exact is not None:
            return PadicNumber.from_rational(-self.exact, self.cfg)
        mod = self.cfg.p**self.prec
        return PadicNumber(self.cfg, self.v, (-self.unit) % mod, self.prec)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other) -> "PadicNumber":
        other = self._coerce(other)
        if self.exact is not None and other.exact is not None:
            return PadicNumber.from_rational(self.exact * other.exact, self.cfg)
        if self.is_zero or other.is_zero:
            return PadicNumber.zero(self.cfg)
        k = min(self.prec, other.prec)
        mod = self.cfg.p**k
        return PadicNumber(
            self.cfg, self.v + other.v, self.unit * other.unit % mod, k
        )

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other) -> "PadicNumber":
        other = self._coerce(other)
        if other.is_zero:
            raise ZeroDivisionError("division by p-adic zero")
        if self.exact is not None and other.exact is not None:
            return PadicNumber.from_rational(self.exact / other.exact, self.cfg)
        if self.is_zero:
            return PadicNumber.zero(self.cfg)
        k = min(self.prec, other.prec)
        mod = self.cfg.p**k
        inv = pow(other.unit % mod, -1, mod)
        return PadicNumber(self.cfg, self.v - other.v, self.unit * inv % mod, k)

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    def __pow__(self, n: int) -> "PadicNumber":
        if not isinstance(n, int):
            return NotImplemented
        if n == 0:
            return PadicNumber.from_rational(1, self.cfg)
        base = self if n > 0 else PadicNumber.from_rational(1, self.cfg) / self
        out = base
        for _ in range(abs(n) - 1):
            out = out * base
        return out

    # -- comparisons -------------------------------------------------------

    def same(self, other) -> bool:
        """Equality of all stored digits and valuations (tracked equality)."""
        other = self._coerce(other)
        if self.is_zero or other.is_zero:
            return self.is_zero and other.is_zero
        if self.exact is not None and other.exact is not None:
            return self.exact == other.exact
        if self.v != other.v:
            return False
        k = min(self.prec, other.prec)
        mod = self.cfg.p**k
        return self.unit % mod == other.unit % mod

    def __repr__(self):
        if self.is_zero:
            return "0"
        if self.exact is not None:
            return f"{self.exact}"
        return f"{self.cfg.p}^{self.v}*({self.unit} mod {self.cfg.p}^{self.prec})"


def as_padic(x, cfg: PadicConfig) -> PadicNumber:
    if isinstance(x, PadicNumber):
        return x
    return PadicNumber.from_rational(x, cfg)


def valuation(x: PadicNumber) -> Union[int, float]:
    """p-adic valuation; +infinity for zero (|0| = 0)."""
    return INFINITY if x.is_zero else x.v


def val(x, cfg: PadicConfig) -> Union[int, float]:
    """Valuation of a scalar (Fraction or PadicNumber)."""
    return valuation(as_padic(x, cfg))


# -- subgroup decision procedures ------------------------------------------


@lru_cache(maxsize=None)
def _nth_power_units(p: int, n: int) -> frozenset:
    """Unit residues mod p^(2 v_p(n) + 1) that are n-th powers of units."""
    mod = p ** power_residue_level(p, n)
    return frozenset(pow(w, n, mod) for w in range(1, mod) if w % p != 0)


def power_residue_level(p: int, n: int) -> int:
    """Digits needed to decide n-th power membership: 2 v_p(n) + 1."""
    gamma = int_valuation(n, p) if n % p == 0 else 0
    return 2 * gamma + 1


def is_nth_power(x: PadicNumber, n: int) -> bool:
    """Membership in P_n = {y^n} including 0.

    Decides via: n | v(x) and the unit is an n-th power residue at level
    2 v_p(n) + 1, which Hensel lifting makes sufficient.
    """
    if n < 1:
        raise DomainError("power must be >= 1")
    if x.is_zero:
        return True
    if x.v % n != 0:
        return False
    j = power_residue_level(x.cfg.p, n)
    return x.digits(j) in _nth_power_units(x.cfg.p, n)


def in_congruence_subgroup(x: PadicNumber, n: int, level: int) -> bool:
    """Membership in {0} together with all p^{kn} (1 + p^level R)."""
    if n < 1 or level < 1:
        raise DomainError("power and level must be >= 1")
    if x.is_zero:
        return True
    if x.v % n != 0:
        return False
    return x.digits(level) % x.cfg.p**level == 1


def nth_root(x: PadicNumber, n: int) -> PadicNumber:
    """The unique n-th root lying in Q_{1, v_p(n)+1}.

    Requires x in Q_{n, 2 v_p(n)+1}; digit-by-digit Hensel lifting on the
    unit part.  The output carries v_p(n) fewer digits than the input.
    """
    if n < 1:
        raise DomainError("power must be >= 1")
    if x.is_zero:
        return PadicNumber.zero(x.cfg)
    p = x.cfg.p
    gamma = int_valuation(n, p) if n % p == 0 else 0
    if not in_congruence_subgroup(x, n, 2 * gamma + 1):
        raise DomainError(f"operand not in Q_({n},{2*gamma+1})")
    k = x.prec if x.exact is None else x.cfg.k_work
    if k - gamma < 1:
        raise InsufficientPrecision("root would carry no digits")
    u = x.digits(k)
    n_unit = n // p**gamma
    w = 1
    s = 2 * gamma + 1
    # invariant: w^n = u mod p^s and w = 1 mod p^(gamma+1)
    while s < k:
        r = (u - pow(w, n, p ** (s + 1))) // p**s % p
        delta = r * pow(n_unit * pow(w, n - 1, p), -1, p) % p
        w = (w + delta * p ** (s - gamma)) % p**k
        s += 1
    return PadicNumber(x.cfg, x.v // n, w % p ** (k - gamma), k - gamma)


@lru_cache(maxsize=None)
def _coset_reps_cached(p: int, n: int, k_work: int):
    cfg = PadicConfig(p, k_work)
    j = power_residue_level(p, n)
    reps: list[Fraction] = []
    for i in range(n):
        for u in range(1, p**j):
            if u % p == 0:
                continue
            cand = Fraction(u * p**i)
            cand_p = PadicNumber.from_rational(cand, cfg)
            if not any(
                is_nth_power(cand_p / PadicNumber.from_rational(r, cfg), n)
                for r in reps
            ):
                reps.append(cand)
    return tuple(reps)


def coset_reps(n: int, cfg: PadicConfig) -> tuple:
    """Exact representatives of K*/P_n^*, identity (1) first."""
    if n < 1:
        raise DomainError("power must be >= 1")
    return _coset_reps_cached(cfg.p, n, max(cfg.k_work, power_residue_level(cfg.p, n) + 1))


@lru_cache(maxsize=None)
def _torsion_units_cached(p: int, e: int, k: int):
    mod = p**k
    if p == 2:
        return (1,) if e % 2 else (1, mod - 1)
    d = math.gcd(e, p - 1)
    lifts = []
    for a in range(1, p):
        if pow(a, d, p) != 1:
            continue
        z = a
        for _ in range(k):
            z = pow(z, p, mod)
        lifts.append(z)
    return tuple(sorted(lifts))


def roots_of_unity(e: int, cfg: PadicConfig, digits: Optional[int] = None) -> tuple:
    """Unit digits (mod p^digits) of the e-th roots of unity in Q_p.

    Teichmueller lifts of the gcd(e, p-1)-torsion of the residue field;
    for p = 2 the only torsion is {1, -1}.
    """
    if e < 1:
        raise DomainError("torsion order must be >= 1")
    p = cfg.p
    if p != 2 and e % p == 0:
        raise UnsupportedTorsion(f"p = {p} divides e = {e}")
    return _torsion_units_cached(p, e, digits or cfg.k_work)


def in_unit_torsion_class(x: PadicNumber, e: int, level: int) -> bool:
    """Membership in (1 + p^level R) * U_e; members are units."""
    if level < 1:
        raise DomainError("level must be >= 1")
    if x.is_zero or x.v != 0:
        return False
    mod = x.cfg.p**level
    u = x.digits(level)
    return any(
        u * pow(z % mod, -1, mod) % mod == 1
        for z in roots_of_unity(e, x.cfg, level)
    )


# -- subgroup specifications -------------------------------------------------

GROUP_FULL = "FULL"
GROUP_PN = "PN"
GROUP_QNM = "QNM"
GROUP_UE = "UNIT_BALL_UE"


@dataclass(frozen=True)
class SubgroupSpec:
    """A finite-index semi-algebraic subgroup of K^* used as a cell modulus."""

    kind: str
    power: int = 1
    level: int = 0
    torsion: int = 1

    def __post_init__(self):
        if self.kind not in (GROUP_FULL, GROUP_PN, GROUP_QNM, GROUP_UE):
            raise ValueError(f"unknown subgroup kind {self.kind!r}")
        if self.power < 1:
            raise ValueError("power must be >= 1")

    def member(self, x: PadicNumber) -> bool:
        """Membership of a nonzero x; subgroups never contain 0."""
        if x.is_zero:
            return False
        if self.kind == GROUP_FULL:
            return True
        if self.kind == GROUP_PN:
            return is_nth_power(x, self.power)
        if self.kind == GROUP_QNM:
            return in_congruence_subgroup(x, self.power, self.level)
        return in_unit_torsion_class(x, self.torsion, self.level)

    @property
    def value_modulus(self) -> int:
        """Modulus of v(G) inside Z (v(G) = modulus * Z)."""
        if self.kind in (GROUP_PN, GROUP_QNM):
            return self.power
        return 1

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind in (GROUP_PN, GROUP_QNM):
            out["N"] = self.power
        if self.kind == GROUP_QNM:
            out["M"] = self.level
        if self.kind == GROUP_UE:
            out["e"] = self.torsion
            out["n"] = self.level
        return out

    @staticmethod
    def from_json(obj: dict) -> "SubgroupSpec":
        kind = obj["kind"]
        if kind == GROUP_FULL:
            return FULL_GROUP
        if kind == GROUP_PN:
            return SubgroupSpec(GROUP_PN, power=obj["N"])
        if kind == GROUP_QNM:
            return SubgroupSpec(GROUP_QNM, power=obj["N"], level=obj["M"])
        return SubgroupSpec(GROUP_UE, torsion=obj["e"], level=obj["n"])


FULL_GROUP = SubgroupSpec(GROUP_FULL)


def nth_power_group(n: int) -> SubgroupSpec:
    return SubgroupSpec(GROUP_PN, power=n)


def congruence_group(n: int, level: int) -> SubgroupSpec:
    if level < 1:
        raise ValueError("level must be >= 1")
    return SubgroupSpec(GROUP_QNM, power=n, level=level)


# -- literals ---------------------------------------------------------------


def scalar_to_json(x: Scalar, cfg: PadicConfig) -> dict:
    x = as_padic(x, cfg)
    if x.is_zero:
        return {"v": "inf", "unit": "0", "prec": x.prec, "rational": "0"}
    out = {"v": x.v, "unit": str(x.unit), "prec": x.prec}
    if x.exact is not None:
        out["rational"] = str(x.exact)
    return out


def scalar_from_json(obj, cfg: PadicConfig) -> Scalar:
    if isinstance(obj, str):
        return parse_scalar_literal(obj, cfg)
    if "rational" in obj:
        return Fraction(obj["rational"])
    if obj["v"] == "inf":
        return Fraction(0)
    return PadicNumber.from_unit(int(obj["v"]), int(obj["unit"]), int(obj["prec"]), cfg)


def parse_scalar_literal(text: str, cfg: PadicConfig) -> Scalar:
    """Accepts rational strings "a/b" and digit strings "p^v * (d0 + d1*p + ...)"."""
    text = text.strip()
    if "(" not in text:
        return Fraction(text)
    head, _, body = text.partition("*")
    head = head.strip()
    base, _, exp = head.partition("^")
    p = int(base)
    if p != cfg.p:
        raise DomainError(f"literal base {p} does not match configured prime {cfg.p}")
    v = int(exp) if exp else 1
    body = body.strip()
    if not (body.startswith("(") and body.endswith(")")):
        raise DomainError("digit literal must parenthesize its digit sum")
    unit = 0
    for term in body[1:-1].split("+"):
        parts = [t.strip() for t in term.strip().split("*")]
        digit = int(parts[0])
        power = 0
        if len(parts) == 2:
            b, _, e = parts[1].partition("^")
            if int(b) != p:
                raise DomainError("digit literal mixes bases")
            power = int(e) if e else 1
        unit += digit * p**power
    return Fraction(unit * p**v) if v >= 0 else Fraction(unit, p**-v)


def format_scalar(x: Scalar, cfg: PadicConfig) -> str:
    x = as_padic(x, cfg)
    if x.is_zero:
        return "0"
    if x.exact is not None:
        return str(x.exact)
    p = cfg.p
    digits = []
    u = x.unit
    for i in range(min(x.prec, 8)):
        d = u % p
        u //= p
        if d:
            digits.append(f"{d}" if i == 0 else f"{d}*{p}^{i}" if i > 1 else f"{d}*{p}")
    return f"{p}^{x.v} * ({' + '.join(digits) or '0'})"


def sample_units(cfg: PadicConfig, digits: int) -> Iterator[int]:
    """Units mod p^digits in increasing order."""
    p = cfg.p
    for u in range(1, p**digits):
        if u % p != 0:
            yield u
