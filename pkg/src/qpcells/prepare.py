"""Unit-times-monomial factorization of functions on cells.

prepare_poly writes a splitting polynomial as U * h * (t - c)^a on each
piece of a partition of the line, with U a unit in 1 + p^n R.
prepare_param does the same for a declared formal e-th root, emitting
cells modulo a congruence subgroup so the fractional power
[scale^-1 (t - c)]^(a/e) is well defined, and extracting h as an exact
e-th root.  Verifiers sample points inside each cell and test the
residual against (1 + p^n R) * U_e and the valuation identity.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .cells import (
    BallPiece,
    INF_BOUND,
    NEG_INF,
    POS_INF,
    PointPiece,
    PresentedCell,
    SegPiece,
    ZERO_BOUND,
    _offset,
    _radius,
    _vdist,
    cell_contains,
    split_line,
)
from .errors import (
    DomainError,
    InsufficientPrecision,
    PoleError,
    RootExtractionError,
    UnsupportedTorsion,
)
from .padic import (
    FULL_GROUP,
    PadicConfig,
    PadicNumber,
    as_padic,
    congruence_group,
    coset_reps,
    in_unit_torsion_class,
    int_valuation,
    is_nth_power,
    nth_power_group,
    nth_root,
    power_residue_level,
    sample_units,
    scalar_to_json,
)
from .terms import FactoredTerm, Polynomial, padic_roots, scalars_same


@dataclass(frozen=True)
class PreparedPiece:
    """One cell with the factorization data: on the cell the prepared
    function equals U * coeff * [scale^-1 (t - c)]^(exponent/root_index)
    with U in (1 + p^unit_level R) * U_root_index."""

    cell: PresentedCell
    coeff: object
    exponent: int
    root_index: int = 1
    unit_level: int = 1

    def to_json(self, cfg: PadicConfig) -> dict:
        out = self.cell.to_json(cfg)
        out.update(
            {
                "h": scalar_to_json(self.coeff, cfg),
                "alpha": self.exponent,
                "e": self.root_index,
                "n": self.unit_level,
            }
        )
        return out


@dataclass(frozen=True)
class NormWitness:
    """Declared |f|^e = |num/den| identity on a region."""

    e: int
    num: Polynomial
    den: Polynomial
    region: object  # PresentedCell or NormalForm


def _as_factored(f: Union[Polynomial, FactoredTerm], cfg: PadicConfig) -> FactoredTerm:
    if isinstance(f, FactoredTerm):
        return f
    sp_roots = padic_roots(f, cfg) if f.degree >= 1 else []
    coeff = Fraction(0) if f.is_zero else f.lead if f.degree >= 1 else f.coeffs[0]
    return FactoredTerm(
        coeff, tuple((r.value, r.multiplicity) for r in sp_roots), 1, f.var
    )


def _factored_value(ft: FactoredTerm, t, cfg: PadicConfig) -> PadicNumber:
    """Value of the displayed product, with exact-zero detection at centers."""
    acc = as_padic(ft.coeff, cfg)
    tp = as_padic(t, cfg)
    for center, exp in ft.factors:
        if scalars_same(t, center, cfg):
            if exp < 0:
                raise PoleError("evaluation at a pole")
            return PadicNumber.zero(cfg)
        base = tp - as_padic(center, cfg)
        acc = acc * base**exp
    return acc


def _centers_of(ft: FactoredTerm, cfg: PadicConfig) -> list:
    centers: list = []
    for center, _ in ft.factors:
        if not any(scalars_same(center, c, cfg) for c in centers):
            centers.append(center)
    if not centers:
        centers.append(Fraction(0))
    return centers


def _exponent_profile(ft: FactoredTerm, centers: list, cfg: PadicConfig) -> list:
    out = [0] * len(centers)
    for center, exp in ft.factors:
        for i, c in enumerate(centers):
            if scalars_same(center, c, cfg):
                out[i] += exp
                break
    return out


def _seg_split(ft, centers, profile, piece: SegPiece, cfg) -> tuple:
    """(h, alpha) of the displayed product on an annulus segment."""
    i = piece.center_idx
    alpha = profile[i]
    h = as_padic(ft.coeff, cfg)
    for j, exp in enumerate(profile):
        if j == i or exp == 0:
            continue
        d = _vdist(centers[i], centers[j], cfg)
        if piece.hi is not POS_INF and d > piece.hi:
            alpha += exp
        else:
            h = h * (as_padic(centers[i], cfg) - as_padic(centers[j], cfg)) ** exp
    return h, alpha


def prepare_poly(
    f: Union[Polynomial, FactoredTerm],
    unit_level: int,
    cfg: PadicConfig,
    power: Optional[int] = None,
) -> list:
    """Pieces with f = U * h * (t - c)^a, U in 1 + p^unit_level R.

    Cells are emitted modulo K^* (one per annulus segment), or modulo
    P_power^* when a refinement power is given; transition balls come
    out modulo a congruence subgroup either way.  Point pieces at poles
    of a factored input are skipped (the function is undefined there).
    """
    if unit_level < 1:
        raise DomainError("unit level must be >= 1")
    ft = _as_factored(f, cfg)
    if ft.root_index != 1:
        raise DomainError("prepare_poly expects root index 1; use prepare_param")
    centers = _centers_of(ft, cfg)
    level = unit_level
    mod_power = 1
    if power is not None:
        level = max(level, power_residue_level(cfg.p, power))
        mod_power = power
    pieces = split_line(centers, cfg, level)
    profile = _exponent_profile(ft, centers, cfg)
    out = []
    for piece in pieces:
        out.extend(
            _emit_prepared(
                piece, ft, centers, profile, cfg, unit_level, mod_power, power, level
            )
        )
    return out


def _emit_prepared(piece, ft, centers, profile, cfg, unit_level, mod_power, power, level):
    p = cfg.p
    if isinstance(piece, PointPiece):
        c = centers[piece.center_idx]
        if profile[piece.center_idx] < 0:
            return []  # pole: not in the function's domain
        h = _factored_value(ft, c, cfg)
        cell = PresentedCell(c, ZERO_BOUND, INF_BOUND, Fraction(0), _seg_group(power))
        return [PreparedPiece(cell, h, 0, 1, unit_level)]
    if isinstance(piece, BallPiece):
        c = centers[piece.center_idx]
        scale = _offset(piece.u0, piece.radius, p)
        bound = _radius(piece.radius, p)
        cell = PresentedCell(
            c, bound, bound, scale, congruence_group(mod_power, piece.level - piece.radius)
        )
        witness = as_padic(c, cfg) + scale
        h = _factored_value(ft, witness, cfg)
        return [PreparedPiece(cell, h, 0, 1, unit_level)]
    h, alpha = _seg_split(ft, centers, profile, piece, cfg)
    c = centers[piece.center_idx]
    inner = ZERO_BOUND if piece.hi is POS_INF else _radius(piece.hi, p)
    outer = INF_BOUND if piece.lo is NEG_INF else _radius(piece.lo, p)
    if power is None:
        cell = PresentedCell(c, inner, outer, Fraction(1), FULL_GROUP)
        return [PreparedPiece(cell, h, alpha, 1, unit_level)]
    out = []
    for rep in coset_reps(power, cfg):
        rv = as_padic(rep, cfg).v
        lo, hi = piece.lo, piece.hi
        a = lo if lo is NEG_INF else lo + ((rv - lo) % power)
        b = hi if hi is POS_INF else hi - ((hi - rv) % power)
        if a is not NEG_INF and b is not POS_INF and a > b:
            continue
        cell = PresentedCell(
            c,
            ZERO_BOUND if b is POS_INF else _radius(b, p),
            INF_BOUND if a is NEG_INF else _radius(a, p),
            rep,
            nth_power_group(power),
        )
        out.append(PreparedPiece(cell, h, alpha, 1, unit_level))
    return out


def _seg_group(power):
    return FULL_GROUP if power is None else nth_power_group(power)


# -- parametrized (fractional-power) preparation -----------------------------------


def eth_root_any(x: PadicNumber, e: int) -> PadicNumber:
    """Some y with y^e = x, for x in P_e^*."""
    if x.is_zero:
        return x
    p = x.cfg.p
    if x.v % e != 0:
        raise RootExtractionError(f"valuation {x.v} not divisible by {e}")
    gamma = int_valuation(e, p) if e % p == 0 else 0
    mod = p ** (2 * gamma + 1)
    u = x.digits(2 * gamma + 1)
    w = next(
        (w for w in range(1, mod) if w % p != 0 and pow(w, e, mod) == u % mod), None
    )
    if w is None:
        raise RootExtractionError("unit part is not an e-th power")
    w_p = as_padic(Fraction(w), x.cfg)
    residue = x / (w_p**e * as_padic(Fraction(p) ** x.v, x.cfg))
    return w_p * nth_root(residue, e) * as_padic(Fraction(p) ** (x.v // e), x.cfg)


def prepare_param(
    theta: FactoredTerm, unit_level: int, cfg: PadicConfig, power: Optional[int] = None
) -> list:
    """Pieces for a declared formal root: theta^e is the displayed
    product, and on each emitted cell theta = U * h * [scale^-1 (t-c)]^(a/e)
    with U in (1 + p^n R) * U_e.

    Cells come out modulo Q_(N, M)^* with e | N and M > 2 v_p(e), so the
    fractional power is evaluated through the congruence-subgroup root.
    """
    e = theta.root_index
    n = unit_level
    if e < 1 or n < 1:
        raise DomainError("root index and unit level must be >= 1")
    p = cfg.p
    ve = int_valuation(e, p) if e % p == 0 else 0
    if ve and p != 2:
        raise UnsupportedTorsion(f"p = {p} divides e = {e}")
    if ve and n <= ve:
        raise DomainError(f"unit level must exceed v_p(e) = {ve}")
    group_power = e if power is None else math.lcm(e, power)
    v_big = int_valuation(group_power, p) if group_power % p == 0 else 0
    # congruence level: the larger of the two Hensel budgets used by the
    # fractional-root bookkeeping, never at or below 2 v_p(e)
    m_level = max(n + 2 * ve + v_big, n + ve + 2 * v_big, 2 * ve + 1)
    level = max(m_level, n + ve, power_residue_level(p, group_power))
    centers = _centers_of(theta, cfg)
    profile = _exponent_profile(theta, centers, cfg)
    pieces = split_line(centers, cfg, level)
    out = []
    for piece in pieces:
        out.extend(
            _emit_param(piece, theta, centers, profile, cfg, n, e, group_power, m_level)
        )
    if not out:
        raise RootExtractionError(
            "the declared root exists nowhere; invalid input declaration"
        )
    return out


def _emit_param(piece, theta, centers, profile, cfg, n, e, group_power, m_level):
    """Pieces on which the declared root exists; the root's domain is the
    union of the cells where the displayed product takes e-th power
    values (its P_e coset is constant per piece), so the other cells are
    simply not part of the prepared function's domain."""
    p = cfg.p
    if isinstance(piece, PointPiece):
        c = centers[piece.center_idx]
        if profile[piece.center_idx] < 0:
            return []
        g_val = _factored_value(theta, c, cfg)
        if g_val.is_zero:
            h = PadicNumber.zero(cfg)
        elif is_nth_power(g_val, e):
            h = eth_root_any(g_val, e)
        else:
            return []
        cell = PresentedCell(
            c, ZERO_BOUND, INF_BOUND, Fraction(0), congruence_group(group_power, m_level)
        )
        return [PreparedPiece(cell, h, 0, e, n)]
    if isinstance(piece, BallPiece):
        c = centers[piece.center_idx]
        scale = _offset(piece.u0, piece.radius, p)
        witness = as_padic(c, cfg) + scale
        g_val = _factored_value(theta, witness, cfg)
        if not is_nth_power(g_val, e):
            return []
        h = eth_root_any(g_val, e)
        bound = _radius(piece.radius, p)
        cell = PresentedCell(
            c, bound, bound, scale, congruence_group(group_power, piece.level - piece.radius)
        )
        return [PreparedPiece(cell, h, 0, e, n)]
    base_h, alpha = _seg_split(theta, centers, profile, piece, cfg)
    c = centers[piece.center_idx]
    out = []
    for rep in _congruence_reps(group_power, m_level, cfg):
        rv = as_padic(rep, cfg).v
        lo, hi = piece.lo, piece.hi
        a = lo if lo is NEG_INF else lo + ((rv - lo) % group_power)
        b = hi if hi is POS_INF else hi - ((hi - rv) % group_power)
        if a is not NEG_INF and b is not POS_INF and a > b:
            continue
        z = base_h * as_padic(rep, cfg) ** alpha
        if not is_nth_power(z, e):
            continue
        h = eth_root_any(z, e)
        cell = PresentedCell(
            c,
            ZERO_BOUND if b is POS_INF else _radius(b, p),
            INF_BOUND if a is NEG_INF else _radius(a, p),
            rep,
            congruence_group(group_power, m_level),
        )
        out.append(PreparedPiece(cell, h, alpha, e, n))
    return out


def _congruence_reps(power: int, level: int, cfg: PadicConfig) -> list:
    """Exact representatives of K^*/Q_(power,level)^*."""
    p = cfg.p
    out = []
    for i in range(power):
        for u in sample_units(cfg, level):
            out.append(Fraction(u * p**i))
    return out


# -- verification -------------------------------------------------------------------


@dataclass
class ResidualReport:
    failures: list
    errors: list
    points_checked: int = 0

    @property
    def ok(self) -> bool:
        return not (self.failures or self.errors)

    def to_json(self, cfg: PadicConfig) -> dict:
        return {
            "points_checked": self.points_checked,
            "failures": [
                {"point": scalar_to_json(pt, cfg), "reason": why}
                for pt, why in self.failures[:32]
            ],
            "errors": [
                {"point": scalar_to_json(pt, cfg), "error": msg}
                for pt, msg in self.errors[:32]
            ],
            "pass": self.ok,
        }


def cell_sample_points(
    cell: PresentedCell, cfg: PadicConfig, count: int, seed: int = 0, window: int = 8
) -> list:
    """Deterministic points inside a cell over a point base.

    Points are center + scale * g with g drawn from the cell's subgroup,
    radii cycling over the admissible range clipped to the window."""
    if cell.type == 0:
        return [cell.center]
    rng = random.Random(seed)
    p = cfg.p
    scale = as_padic(cell.scale, cfg)
    group = cell.group
    lo = None if cell.outer is INF_BOUND else as_padic(cell.outer, cfg).v
    hi = None if cell.inner is ZERO_BOUND else as_padic(cell.inner, cfg).v
    step = group.value_modulus
    base = scale.v
    k_min = -window if lo is None else math.ceil(Fraction(lo - base, step))
    k_max = window if hi is None else math.floor(Fraction(hi - base, step))
    if lo is None and hi is not None:
        k_min = k_max - 2 * window
    if hi is None and lo is not None:
        k_max = k_min + 2 * window
    if k_max < k_min:
        return []
    ks = list(range(k_min, k_max + 1))
    out = []
    guard = 0
    while len(out) < count and guard < 16 * count + 64:
        k = ks[guard % len(ks)]
        guard += 1
        if group.kind == "PN":
            y_u = rng.randrange(1, p ** min(4, cfg.k_work))
            y_u += y_u % p == 0
            g = Fraction(y_u) ** group.power * Fraction(p) ** (k * step)
        elif group.kind == "QNM":
            span = p ** max(1, min(4, cfg.k_work - group.level))
            g = (1 + rng.randrange(span) * Fraction(p) ** group.level) * Fraction(p) ** (
                k * step
            )
        else:
            u = rng.randrange(1, p**4)
            u += u % p == 0
            g = Fraction(u) * Fraction(p) ** k
        t_p = as_padic(cell.center, cfg) + scale * as_padic(g, cfg)
        t = t_p.exact if t_p.exact is not None else t_p
        if cell_contains(cell, (t,), cfg):
            out.append(t)
    return out


def verify_unit_residual(piece: PreparedPiece, theta: FactoredTerm, points, cfg: PadicConfig) -> ResidualReport:
    """Check the residual of every given in-cell point against
    (1 + p^n R) * U_e, plus the exact valuation identity."""
    e = piece.root_index
    n = piece.unit_level
    report = ResidualReport([], [])
    cell = piece.cell
    h = as_padic(piece.coeff, cfg)
    for t in points:
        report.points_checked += 1
        try:
            if not cell_contains(cell, (t,), cfg):
                report.errors.append((t, "sample point is not in the cell"))
                continue
            g_val = _factored_value(theta, t, cfg)
            if cell.type == 0:
                if h.is_zero:
                    if not g_val.is_zero:
                        report.failures.append((t, "zero coefficient but nonzero value"))
                    continue
                s = as_padic(Fraction(1), cfg)
            else:
                w = as_padic(t, cfg) - as_padic(cell.center, cfg)
                q = w / as_padic(cell.scale, cfg)
                if e == 1:
                    s = q**piece.exponent
                else:
                    s = nth_root(q, e) ** piece.exponent
            if e == 1:
                theta_val = g_val
            else:
                if g_val.is_zero:
                    theta_val = g_val
                elif not is_nth_power(g_val, e):
                    report.failures.append((t, "value is not an e-th power"))
                    continue
                else:
                    theta_val = eth_root_any(g_val, e)
            if h.is_zero or theta_val.is_zero:
                if not (h.is_zero == theta_val.is_zero):
                    report.failures.append((t, "zero mismatch"))
                continue
            residual = theta_val / (h * s)
            if not in_unit_torsion_class(residual, e, n):
                report.failures.append((t, "residual outside (1+p^nR)U_e"))
            if cell.type != 0:
                lhs = g_val.v
                rhs = e * h.v + piece.exponent * (w.v - as_padic(cell.scale, cfg).v)
                if lhs != rhs:
                    report.failures.append((t, f"valuation identity {lhs} != {rhs}"))
        except InsufficientPrecision as exc:
            report.errors.append((t, str(exc)))
    return report


def verify_norm_factor(f: FactoredTerm, witness: NormWitness, sample, cfg: PadicConfig) -> ResidualReport:
    """Check e*v(f) = v(num) - v(den) and den != 0 over in-region samples."""
    from .oracle import _membership

    report = ResidualReport([], [])
    for t in sample:
        try:
            if not _membership(witness.region, t, cfg):
                continue
            report.points_checked += 1
            den_val = as_padic(witness.den(t), cfg)
            if den_val.is_zero:
                report.failures.append((t, "denominator vanishes in the region"))
                continue
            num_val = as_padic(witness.num(t), cfg)
            g_val = _factored_value(f, t, cfg)
            if g_val.is_zero:
                if not num_val.is_zero:
                    report.failures.append((t, "zero value but nonzero numerator"))
                continue
            if witness.e % f.root_index != 0:
                report.failures.append((t, "incompatible root indices"))
                continue
            lhs = (witness.e // f.root_index) * g_val.v
            if num_val.is_zero:
                report.failures.append((t, "nonzero value but zero numerator"))
                continue
            if lhs != num_val.v - den_val.v:
                report.failures.append(
                    (t, f"valuation identity {lhs} != {num_val.v - den_val.v}")
                )
        except (InsufficientPrecision, PoleError) as exc:
            report.errors.append((t, str(exc)))
    return report
