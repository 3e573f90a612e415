"""Value-group layer: integer cells with congruences, their translation
into ring conditions on K, valuation images of cells, discrete extrema,
and an exhaustive minimum-of-norm scan.

The value group is concretely Z here (the engine computes in Q_p, not
in an abstract model of its theory).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .cells import INF_BOUND, PresentedCell, ZERO_BOUND, cell_contains
from .errors import (
    DomainError,
    EmptySetError,
    InsufficientPrecision,
    TypeZeroCellError,
    UnboundedDomainError,
    UnboundedError,
    VanishingFunctionError,
)
from .padic import PadicConfig, PadicNumber, as_padic, scalar_to_json
from .terms import FactoredTerm, Polynomial, RationalFunction


@dataclass(frozen=True)
class PresburgerBound:
    """Affine bound zeta_slot + sum coeffs[j] * (X_j - c_j)/n_j over j < i."""

    coeffs: tuple = ()


@dataclass(frozen=True)
class PresburgerRow:
    lower: Optional[PresburgerBound]
    upper: Optional[PresburgerBound]
    cong: tuple  # (c, n) with 0 <= c < n

    def __post_init__(self):
        c, n = self.cong
        if n < 1 or not 0 <= c < n:
            raise DomainError("congruence must satisfy 0 <= c < n")


@dataclass(frozen=True)
class PresburgerCell:
    """Subset of Z^d cut out by per-coordinate bounds with divided terms
    and congruences; bound constants come from a parameter vector of
    length 2d (lower slots first, then upper slots)."""

    rows: tuple

    @property
    def dimension(self) -> int:
        return len(self.rows)

    def to_json(self) -> dict:
        rows = []
        for row in self.rows:
            rows.append(
                {
                    "lower": {"coeffs": list(row.lower.coeffs)} if row.lower else None,
                    "upper": {"coeffs": list(row.upper.coeffs)} if row.upper else None,
                    "cong": list(row.cong),
                }
            )
        return {"d": self.dimension, "rows": rows}

    @staticmethod
    def from_json(obj: dict) -> "PresburgerCell":
        rows = []
        for row in obj["rows"]:
            rows.append(
                PresburgerRow(
                    PresburgerBound(tuple(row["lower"]["coeffs"])) if row["lower"] else None,
                    PresburgerBound(tuple(row["upper"]["coeffs"])) if row["upper"] else None,
                    tuple(row["cong"]),
                )
            )
        return PresburgerCell(tuple(rows))


def _bound_value(bound: PresburgerBound, zeta_slot: int, zeta, x, rows) -> int:
    total = zeta[zeta_slot]
    for j, a in enumerate(bound.coeffs):
        if a == 0:
            continue
        c_j, n_j = rows[j].cong
        total += a * ((x[j] - c_j) // n_j)
    return total


def pres_member(cell: PresburgerCell, zeta, x) -> bool:
    """Direct evaluation; congruences first so divided terms are integral."""
    d = cell.dimension
    if len(x) != d or len(zeta) != 2 * d:
        raise DomainError("arity mismatch")
    for i, row in enumerate(cell.rows):
        c, n = row.cong
        if (x[i] - c) % n != 0:
            return False
    for i, row in enumerate(cell.rows):
        if row.lower is not None:
            if _bound_value(row.lower, i, zeta, x, cell.rows) > x[i]:
                return False
        if row.upper is not None:
            if x[i] > _bound_value(row.upper, d + i, zeta, x, cell.rows):
                return False
    return True


# -- translation to ring conditions ----------------------------------------------


@dataclass(frozen=True)
class Monomial:
    """pi^pi_exp * prod t_i^t_exps[i] * prod z_j^z_exps[j]."""

    pi_exp: int
    t_exps: tuple
    z_exps: tuple

    def valuation(self, t_vals, z_vals) -> int:
        total = self.pi_exp
        for e, x in zip(self.t_exps, t_vals):
            total += e * x.v
        for e, z in zip(self.z_exps, z_vals):
            total += e * z.v
        return total

    def to_json(self) -> dict:
        return {
            "pi": self.pi_exp,
            "t": list(self.t_exps),
            "z": list(self.z_exps),
        }


@dataclass(frozen=True)
class RingNormLe:
    """|left| <= |right| between monomials."""

    left: Monomial
    right: Monomial

    def holds(self, t_vals, z_vals) -> bool:
        return self.left.valuation(t_vals, z_vals) >= self.right.valuation(t_vals, z_vals)

    def to_json(self) -> dict:
        return {"kind": "norm_le", "left": self.left.to_json(), "right": self.right.to_json()}


@dataclass(frozen=True)
class RingCong:
    """v(mono) = residue mod modulus."""

    mono: Monomial
    residue: int
    modulus: int

    def holds(self, t_vals, z_vals) -> bool:
        return (self.mono.valuation(t_vals, z_vals) - self.residue) % self.modulus == 0

    def to_json(self) -> dict:
        return {
            "kind": "cong",
            "mono": self.mono.to_json(),
            "residue": self.residue,
            "modulus": self.modulus,
        }


RingCondition = Union[RingNormLe, RingCong]


def _unit(d: int, i: int) -> tuple:
    out = [0] * d
    out[i] = 1
    return tuple(out)


def translate(cell: PresburgerCell) -> list:
    """Ring conditions on (t, z) in (K^*)^d x (K^*)^(2d) equivalent to
    membership of (v(t), v(z)) in the cell.

    Divided terms are cleared by the lcm of the participating moduli;
    bounds become norm comparisons between monomials, congruences stay
    a primitive condition.
    """
    d = cell.dimension
    out: list = []
    for i, row in enumerate(cell.rows):
        c, n = row.cong
        out.append(RingCong(Monomial(-c, _unit(d, i), (0,) * (2 * d)), 0, n))
    for i, row in enumerate(cell.rows):
        if row.lower is not None:
            out.append(_bound_condition(cell, i, row.lower, i, lower=True))
        if row.upper is not None:
            out.append(_bound_condition(cell, i, row.upper, d + i, lower=False))
    return out


def _bound_condition(cell: PresburgerCell, i: int, bound: PresburgerBound, slot: int, lower: bool) -> RingNormLe:
    d = cell.dimension
    moduli = [cell.rows[j].cong[1] for j, a in enumerate(bound.coeffs) if a != 0]
    scale = math.lcm(*moduli) if moduli else 1
    t_exps = [0] * d
    z_exps = [0] * 2 * d
    pi = 0
    z_exps[slot] = scale
    for j, a in enumerate(bound.coeffs):
        if a == 0:
            continue
        c_j, n_j = cell.rows[j].cong
        cleared = scale * a // n_j
        t_exps[j] += cleared
        pi -= cleared * c_j
    bound_mono = Monomial(pi, tuple(t_exps), tuple(z_exps))
    target = Monomial(0, tuple(scale * e for e in _unit(d, i)), (0,) * (2 * d))
    if lower:
        # bound <= X_i  <=>  v(t_i^scale) >= v(bound monomial)
        return RingNormLe(target, bound_mono)
    return RingNormLe(bound_mono, target)


def eval_ring_conditions(conds, t_vals, z_vals, cfg: PadicConfig) -> bool:
    ts = [as_padic(t, cfg) for t in t_vals]
    zs = [as_padic(z, cfg) for z in z_vals]
    if any(v.is_zero for v in ts + zs):
        raise DomainError("ring conditions are evaluated on nonzero tuples")
    return all(c.holds(ts, zs) for c in conds)


# -- valuation images of cells ------------------------------------------------------


@dataclass(frozen=True)
class ValuationImage:
    """d=1 Presburger cell describing v(t - center) over a cell, with its
    frozen parameter vector."""

    cell: PresburgerCell
    zeta: tuple

    def member(self, w: int) -> bool:
        return pres_member(self.cell, self.zeta, (w,))


def image_valuation(cell: PresentedCell, cfg: PadicConfig) -> ValuationImage:
    """The set {v(t - center) : t in the cell} as a one-variable cell.

    Norm bounds reverse: the outer radius gives the lower valuation
    bound.  The congruence is v(scale) modulo the subgroup's value
    modulus.
    """
    if cell.type == 0:
        raise TypeZeroCellError("a singleton cell has no valuation image")
    if cell.base is not None:
        raise DomainError("valuation images are taken over point bases")
    scale = as_padic(cell.scale, cfg)
    n = cell.group.value_modulus
    lower = None
    upper = None
    zeta = [0, 0]
    if cell.outer is not INF_BOUND:
        lower = PresburgerBound(())
        zeta[0] = as_padic(cell.outer, cfg).v
    if cell.inner is not ZERO_BOUND:
        upper = PresburgerBound(())
        zeta[1] = as_padic(cell.inner, cfg).v
    row = PresburgerRow(lower, upper, (scale.v % n, n))
    return ValuationImage(PresburgerCell((row,)), tuple(zeta))


# -- discrete extrema ----------------------------------------------------------------


def zmin(cell: PresburgerCell, zeta) -> int:
    """Least member of a one-variable cell; requires a lower bound."""
    if cell.dimension != 1:
        raise DomainError("zmin takes one-variable cells")
    row = cell.rows[0]
    if row.lower is None:
        raise UnboundedError("no lower bound")
    lo = _bound_value(row.lower, 0, zeta, (0,), cell.rows)
    c, n = row.cong
    least = lo + ((c - lo) % n)
    if row.upper is not None:
        hi = _bound_value(row.upper, 1, zeta, (0,), cell.rows)
        if least > hi:
            raise EmptySetError("bounds exclude the congruence class")
    return least


def zmax(cell: PresburgerCell, zeta) -> int:
    """Greatest member of a one-variable cell; requires an upper bound."""
    if cell.dimension != 1:
        raise DomainError("zmax takes one-variable cells")
    row = cell.rows[0]
    if row.upper is None:
        raise UnboundedError("no upper bound")
    hi = _bound_value(row.upper, 1, zeta, (0,), cell.rows)
    c, n = row.cong
    greatest = hi - ((hi - c) % n)
    if row.lower is not None:
        lo = _bound_value(row.lower, 0, zeta, (0,), cell.rows)
        if greatest < lo:
            raise EmptySetError("bounds exclude the congruence class")
    return greatest


def succ_norm(w: int) -> int:
    """Valuation of the norm immediately greater than |pi^w|."""
    return w - 1


# -- extreme value scan ----------------------------------------------------------------


@dataclass(frozen=True)
class EvpResult:
    """Minimum of |f| over the domain: the maximal valuation attained,
    a point attaining it, and the scan size."""

    valuation: int
    argmin: object
    points_checked: int

    def to_json(self, cfg: PadicConfig) -> dict:
        return {
            "min_norm_valuation": self.valuation,
            "attained_at": scalar_to_json(self.argmin, cfg),
            "points_checked": self.points_checked,
        }


def evp_min(f, domain: PresentedCell, sample, cfg: PadicConfig) -> EvpResult:
    """Minimum of |f(t)| over the domain by exhaustive class scan.

    The sample's digit precision must exceed the attained valuation by a
    margin, so the minimum over residue classes equals the minimum over
    the domain; otherwise InsufficientPrecision is raised.
    """
    if domain.outer is INF_BOUND:
        raise UnboundedDomainError("domain must be bounded")
    if domain.base is not None:
        raise DomainError("scan domains are over a point base")
    best: Optional[int] = None
    arg = None
    checked = 0
    for t in sample:
        if not cell_contains(domain, (t,), cfg):
            continue
        checked += 1
        value = _term_value(f, t, cfg)
        if value.is_zero:
            raise VanishingFunctionError(f"f vanishes at {t}")
        if best is None or value.v > best:
            best, arg = value.v, t
    if best is None:
        raise DomainError("no sample point lies in the domain")
    margin = as_padic(arg, cfg).v + sample.digits - best
    if margin < 2:
        raise InsufficientPrecision(
            "scan digits do not certify the minimum; increase the sample precision"
        )
    return EvpResult(best, arg, checked)


def _term_value(f, t, cfg: PadicConfig) -> PadicNumber:
    if isinstance(f, Polynomial):
        return as_padic(f(t), cfg)
    if isinstance(f, FactoredTerm):
        if f.root_index != 1:
            raise DomainError("scan functions must have root index 1")
        return as_padic(f.power_value(t), cfg)
    if isinstance(f, RationalFunction):
        return as_padic(f(t), cfg)
    raise DomainError(f"cannot evaluate {type(f).__name__}")
