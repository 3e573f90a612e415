"""Constructive sections of cells: a definable choice of one fiber point.

The witness is center + inner/a (or outer/a on the other side), where a
is a constant in the same coset as inner/scale normalized to valuation
in [0, N); on bases of arity one the base is first cut into pieces on
which that coset is constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .cells import (
    INF_BOUND,
    PresentedCell,
    ZERO_BOUND,
    cell_contains,
    decompose1,
)
from .errors import DomainError, EmptyCellError, InsufficientPrecision
from .lang import And, Atom, NormLe, PowerCoset, normalize
from .padic import (
    GROUP_FULL,
    GROUP_PN,
    GROUP_QNM,
    PadicConfig,
    PadicNumber,
    as_padic,
    coset_reps,
    is_nth_power,
    scalar_to_json,
)
from .terms import Polynomial, RationalFunction

KIND_CENTER = "center"
KIND_CENTER_PLUS_SCALE = "center_plus_scale"
KIND_INNER_OVER_A = "inner_over_a"
KIND_OUTER_OVER_A = "outer_over_a"


@dataclass(frozen=True)
class SectionPiece:
    """One base piece with its witness recipe; region None means the
    whole (point) base."""

    region: Optional[PresentedCell]
    kind: str
    a: Optional[object] = None


@dataclass(frozen=True)
class SectionDescriptor:
    cell: PresentedCell
    pieces: tuple

    def to_json(self, cfg: PadicConfig) -> dict:
        out = []
        for piece in self.pieces:
            rec = {"kind": piece.kind}
            if piece.a is not None:
                rec["a"] = scalar_to_json(piece.a, cfg)
            if piece.region is not None:
                rec["region"] = piece.region.to_json(cfg)
            out.append(rec)
        return {"cell": self.cell.to_json(cfg), "pieces": out}


def _normalized_coset_constant(q: PadicNumber, modulus: int) -> PadicNumber:
    """a in the coset of q (mod any subgroup with value group modulus*Z
    and unit part containing only 1) with 0 <= v(a) < modulus."""
    shift = modulus * (q.v // modulus)
    p = q.cfg.p
    a = q / as_padic(Fraction(p) ** shift, q.cfg)
    assert 0 <= a.v < modulus
    return a


def section(cell: PresentedCell, cfg: PadicConfig) -> SectionDescriptor:
    """A witness map landing in the cell over every base point.

    Over a point base there is a single piece; over a one-variable base
    the base is decomposed so the relevant boundary-over-scale coset is
    constant per piece.
    """
    if cell.type == 0:
        return SectionDescriptor(cell, (SectionPiece(None, KIND_CENTER),))
    if cell.inner is ZERO_BOUND and cell.outer is INF_BOUND:
        return SectionDescriptor(cell, (SectionPiece(None, KIND_CENTER_PLUS_SCALE),))
    side = KIND_INNER_OVER_A if cell.inner is not ZERO_BOUND else KIND_OUTER_OVER_A
    bound = cell.inner if side == KIND_INNER_OVER_A else cell.outer
    if not isinstance(bound, RationalFunction):
        q = as_padic(bound, cfg) / as_padic(cell.scale, cfg)
        a = _normalized_coset_constant(q, cell.group.value_modulus)
        desc = SectionDescriptor(cell, (SectionPiece(None, side, a),))
        if cell.base is None and not cell_contains(cell, (section_value(desc, cfg),), cfg):
            raise EmptyCellError("cell admits no witness point")
        return desc
    return _section_over_base(cell, side, bound, cfg)


def _section_over_base(cell: PresentedCell, side: str, bound: RationalFunction, cfg: PadicConfig) -> SectionDescriptor:
    """Partition the base by the coset of bound(x)/scale and fix a per piece."""
    if cell.base is None:
        raise DomainError("rational-function boundary over a point base")
    group = cell.group
    if group.kind not in (GROUP_PN, GROUP_FULL):
        raise DomainError(
            "sections over one-variable bases support P_N and full moduli only"
        )
    power = group.power if group.kind == GROUP_PN else 1
    reps = coset_reps(power, cfg)
    base_formula = _cell_formula(cell.base, cfg)
    scale = as_padic(cell.scale, cfg)
    pieces = []
    for idx, rep in enumerate(reps):
        # bound(x)/scale in rep*P_power^*  <=>  num*den^(power-1)*(scale*rep)^(power-1) in P_power^*
        shift = (as_padic(rep, cfg) * scale).exact
        if shift is None:
            raise DomainError("tracked scales are not supported over bases")
        poly = bound.num * bound.den ** (power - 1) * Polynomial.constant(
            shift ** (power - 1) if power > 1 else Fraction(1), bound.num.var
        )
        cond = Atom(PowerCoset(poly, power, 0, include_zero=False))
        nf = normalize(And((base_formula, cond)), cfg)
        sub = decompose1(nf, cfg)
        a = _normalized_coset_constant(as_padic(rep, cfg), power)
        for base_piece in sub.cells:
            pieces.append(SectionPiece(base_piece, side, a))
    if not pieces:
        raise EmptyCellError("no base piece admits a section")
    return SectionDescriptor(cell, tuple(pieces))


def _cell_formula(cell: PresentedCell, cfg: PadicConfig):
    """Formula in one variable whose extension is the cell (scalar data only)."""
    if cell.base is not None:
        raise DomainError("only point-based cells convert to formulas")
    var = "x"
    x_minus_c = Polynomial.make([-Fraction(cell.center), Fraction(1)], var)
    conds = []
    if cell.type == 0:
        conds.append(Atom(NormLe(x_minus_c, Polynomial.constant(0, var))))
        return And(tuple(conds))
    if cell.inner is not ZERO_BOUND:
        conds.append(
            Atom(NormLe(Polynomial.constant(Fraction(cell.inner), var), x_minus_c))
        )
    if cell.outer is not INF_BOUND:
        conds.append(
            Atom(NormLe(x_minus_c, Polynomial.constant(Fraction(cell.outer), var)))
        )
    group = cell.group
    if group.kind == GROUP_PN:
        reps = coset_reps(group.power, cfg)
        scale = as_padic(cell.scale, cfg)
        rep_idx = next(
            i
            for i, r in enumerate(reps)
            if is_nth_power(scale / as_padic(r, cfg), group.power)
        )
        conds.append(Atom(PowerCoset(x_minus_c, group.power, rep_idx, include_zero=False)))
    elif group.kind == GROUP_FULL:
        conds.append(Atom(PowerCoset(x_minus_c, 1, 0, include_zero=False)))
    else:
        raise DomainError("congruence-subgroup bases are not convertible")
    return And(tuple(conds))


def section_value(desc: SectionDescriptor, cfg: PadicConfig, x=None):
    """The witness point of the fiber over x (x omitted for point bases)."""
    cell = desc.cell
    piece = None
    if x is None:
        piece = desc.pieces[0]
    else:
        for cand in desc.pieces:
            if cand.region is None or cell_contains(cand.region, (x,), cfg):
                piece = cand
                break
        if piece is None:
            raise DomainError("base point lies in no section piece")
    center = cell.center
    if isinstance(center, RationalFunction):
        center = center(x)
    if piece.kind == KIND_CENTER:
        return center
    if piece.kind == KIND_CENTER_PLUS_SCALE:
        out = as_padic(center, cfg) + as_padic(cell.scale, cfg)
        return out.exact if out.exact is not None else out
    bound = cell.inner if piece.kind == KIND_INNER_OVER_A else cell.outer
    if isinstance(bound, RationalFunction):
        bound = bound(x)
    out = as_padic(center, cfg) + as_padic(bound, cfg) / as_padic(piece.a, cfg)
    return out.exact if out.exact is not None else out


@dataclass
class SectionReport:
    failures: list
    errors: list
    points_checked: int = 0

    @property
    def ok(self) -> bool:
        return not (self.failures or self.errors)

    def to_json(self, cfg: PadicConfig) -> dict:
        return {
            "points_checked": self.points_checked,
            "failures": [scalar_to_json(pt, cfg) for pt, _ in self.failures[:32]],
            "pass": self.ok,
        }


def verify_section(cell: PresentedCell, desc: SectionDescriptor, sample, cfg: PadicConfig) -> SectionReport:
    """Check that the section lands in the cell over every base sample.

    For point bases the single witness is checked; for one-variable
    bases every sample point of the base is tried.
    """
    report = SectionReport([], [])
    if cell.base is None:
        report.points_checked = 1
        try:
            tau = section_value(desc, cfg)
            if not cell_contains(cell, (tau,), cfg):
                report.failures.append((tau, "witness outside the cell"))
            else:
                _check_valuation_chain(cell, desc.pieces[0], tau, report, cfg)
        except InsufficientPrecision as exc:
            report.errors.append((None, str(exc)))
        return report
    for x in sample:
        try:
            if not cell_contains(cell.base, (x,), cfg):
                continue
            report.points_checked += 1
            tau = section_value(desc, cfg, x)
            if not cell_contains(cell, (x, tau), cfg):
                report.failures.append(((x, tau), "witness outside the cell"))
        except InsufficientPrecision as exc:
            report.errors.append((x, str(exc)))
    return report


def _check_valuation_chain(cell, piece, tau, report, cfg):
    if piece.kind != KIND_INNER_OVER_A or isinstance(cell.inner, RationalFunction):
        return
    failures = valuation_chain_failures(cell, piece.a, [tau], cfg)
    report.failures.extend(failures)


def valuation_chain_failures(cell: PresentedCell, a, points, cfg: PadicConfig) -> list:
    """Check v(inner) - v(a) >= v(t - center) at the given in-cell points."""
    out = []
    lhs = as_padic(cell.inner, cfg).v - as_padic(a, cfg).v
    for t in points:
        w = as_padic(t, cfg) - as_padic(cell.center, cfg)
        if lhs < w.v:
            out.append((t, f"valuation chain {lhs} < {w.v}"))
    return out
