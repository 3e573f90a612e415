"""Presented cells, univariate cell decomposition, and untwisting.

A presented cell is (center, inner bound, outer bound, scale, subgroup);
its points t satisfy |inner| <= |t - center| <= |outer| and
(t - center) in scale * G.  decompose1 refines a normal form into
disjoint cells: around each root it cuts the line into annulus segments
whose radii keep every other root either far inside or far outside (so
each occurring polynomial is a unit times h*(t-c)^a on the piece), and
splits the transition radii into residue balls, which are cells modulo
a congruence subgroup.  Truth of the normal form is then constant per
piece and decided at one witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Union

from .errors import (
    DomainError,
    EmptyCellError,
    InsufficientPrecision,
    UnsupportedSplitting,
)
from .lang import (
    NormalForm,
    NormLe,
    PowerCoset,
    Zero,
    eval_condition,
)
from .padic import (
    FULL_GROUP,
    GROUP_FULL,
    GROUP_PN,
    GROUP_QNM,
    PadicConfig,
    PadicNumber,
    Scalar,
    SubgroupSpec,
    as_padic,
    congruence_group,
    coset_reps,
    is_nth_power,
    nth_power_group,
    power_residue_level,
    scalar_from_json,
    scalar_to_json,
)
from .terms import (
    FactoredTerm,
    Polynomial,
    RationalFunction,
    SplitPoly,
    scalars_same,
    split_poly,
)

NEG_INF = -math.inf
POS_INF = math.inf


class _Bound:
    """Sentinel boundary values (zero / infinity)."""

    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name

    def __deepcopy__(self, memo):
        return self


ZERO_BOUND = _Bound("ZERO")
INF_BOUND = _Bound("INFINITY")

BoundLike = Union[_Bound, Fraction, PadicNumber, RationalFunction]


@dataclass(frozen=True)
class PresentedCell:
    """Cell over a point base (base None) or over a cell in one variable."""

    center: object
    inner: BoundLike = ZERO_BOUND
    outer: BoundLike = INF_BOUND
    scale: object = Fraction(1)
    group: SubgroupSpec = FULL_GROUP
    base: Optional["PresentedCell"] = None

    @property
    def type(self) -> int:
        scale = self.scale
        if isinstance(scale, PadicNumber):
            return 0 if scale.is_zero else 1
        if isinstance(scale, Fraction):
            return 0 if scale == 0 else 1
        return 1

    @property
    def arity(self) -> int:
        return 1 if self.base is None else 1 + self.base.arity

    def to_json(self, cfg: PadicConfig) -> dict:
        out = {
            "center": _value_to_json(self.center, cfg),
            "nu": "0" if self.inner is ZERO_BOUND else _value_to_json(self.inner, cfg),
            "mu": "inf" if self.outer is INF_BOUND else _value_to_json(self.outer, cfg),
            "lambda": scalar_to_json(self.scale, cfg),
            "group": self.group.to_json(),
            "type": self.type,
        }
        if self.base is not None:
            out["base"] = self.base.to_json(cfg)
        return out

    @staticmethod
    def from_json(obj: dict, cfg: PadicConfig) -> "PresentedCell":
        return PresentedCell(
            center=_value_from_json(obj["center"], cfg),
            inner=ZERO_BOUND if obj["nu"] == "0" else _value_from_json(obj["nu"], cfg),
            outer=INF_BOUND if obj["mu"] == "inf" else _value_from_json(obj["mu"], cfg),
            scale=scalar_from_json(obj["lambda"], cfg),
            group=SubgroupSpec.from_json(obj["group"]),
            base=PresentedCell.from_json(obj["base"], cfg) if "base" in obj else None,
        )


def _value_to_json(value, cfg: PadicConfig):
    if isinstance(value, RationalFunction):
        return {"rational_function": str(value)}
    return scalar_to_json(value, cfg)


def _value_from_json(obj, cfg: PadicConfig):
    if isinstance(obj, dict) and "rational_function" in obj:
        raise DomainError("rational-function boundaries are not parsed back from JSON")
    return scalar_from_json(obj, cfg)


@dataclass(frozen=True)
class CellList:
    """Disjoint cells refining a normal form; conjunct[i] is the index of
    the conjunction of the normal form containing cell i."""

    cells: tuple
    conjunct: tuple
    normal_form: NormalForm


def cell_contains(cell: PresentedCell, point, cfg: PadicConfig) -> bool:
    """Exact membership of a point tuple (base coordinates first)."""
    if not isinstance(point, tuple):
        point = (point,)
    if len(point) != cell.arity:
        raise DomainError(f"point arity {len(point)} != cell arity {cell.arity}")
    if cell.base is not None:
        if not cell_contains(cell.base, point[:-1], cfg):
            return False
        x = point[-2]
        center = _eval_at(cell.center, x)
        inner = cell.inner if isinstance(cell.inner, _Bound) else _eval_at(cell.inner, x)
        outer = cell.outer if isinstance(cell.outer, _Bound) else _eval_at(cell.outer, x)
    else:
        center, inner, outer = cell.center, cell.inner, cell.outer
    t = point[-1]
    if cell.type == 0:
        return as_padic(t, cfg).same(as_padic(center, cfg))
    w = as_padic(t, cfg) - as_padic(center, cfg)
    if w.is_zero:
        return False
    if not isinstance(inner, _Bound):
        iv = as_padic(inner, cfg)
        bound = POS_INF if iv.is_zero else iv.v
        if not w.v <= bound:
            return False
    if not isinstance(outer, _Bound):
        ov = as_padic(outer, cfg)
        if ov.is_zero or not w.v >= ov.v:
            return False
    return cell.group.member(w / as_padic(cell.scale, cfg))


def _eval_at(value, x):
    if isinstance(value, RationalFunction):
        return value(x)
    return value


# -- untwisting ----------------------------------------------------------------


@dataclass(frozen=True)
class CellTranslation:
    """(y, s) -> (y, center(y) + s); the bijection onto the original cell."""

    center: object

    def apply(self, point, cfg: PadicConfig):
        if not isinstance(point, tuple):
            point = (point,)
        head, s = point[:-1], point[-1]
        c = _eval_at(self.center, head[-1]) if head else self.center
        shifted = as_padic(s, cfg) + as_padic(c, cfg)
        if shifted.exact is not None:
            return head + (shifted.exact,)
        return head + (shifted,)

    def unapply(self, point, cfg: PadicConfig):
        if not isinstance(point, tuple):
            point = (point,)
        head, t = point[:-1], point[-1]
        c = _eval_at(self.center, head[-1]) if head else self.center
        shifted = as_padic(t, cfg) - as_padic(c, cfg)
        if shifted.exact is not None:
            return head + (shifted.exact,)
        return head + (shifted,)

    @property
    def is_identity(self) -> bool:
        c = self.center
        if isinstance(c, RationalFunction):
            return c.num.is_zero
        return as_is_zero(c)


def as_is_zero(c) -> bool:
    if isinstance(c, PadicNumber):
        return c.is_zero
    return c == 0


def untwist(cell: PresentedCell):
    """Centered copy of the cell plus the translation identifying the two."""
    zero = Fraction(0)
    if isinstance(cell.center, RationalFunction):
        zero = RationalFunction.make(Polynomial.constant(0, cell.center.num.var))
    standard = replace(cell, center=zero)
    return standard, CellTranslation(cell.center)


# -- line splitting engine -------------------------------------------------------


@dataclass(frozen=True)
class PointPiece:
    center_idx: int


@dataclass(frozen=True)
class SegPiece:
    """Annulus range lo <= v(t - c) <= hi with every other root at least
    the constancy level away from the whole range."""

    center_idx: int
    lo: object  # int or -inf
    hi: object  # int or +inf


@dataclass(frozen=True)
class BallPiece:
    """Residue ball v(t - c) = radius, (t - c)/p^radius = u0 mod p^(level-radius),
    containing no root; unit classes of all root factors are constant on it."""

    center_idx: int
    radius: int
    u0: int
    level: int


def split_line(centers: list, cfg: PadicConfig, level: int) -> list:
    """Partition Q_p into point/segment/ball pieces relative to the centers.

    level is the required relative precision: on every emitted piece and
    for every center c, the factor (t - c) is a fixed value times a unit
    in 1 + p^level R.
    """
    if level < 1:
        raise DomainError("constancy level must be >= 1")
    if not centers:
        raise DomainError("need at least one center")
    p = cfg.p
    dist = _distance_table(centers, cfg)
    pieces: list = []
    # region stack: (rep scalar or None for the whole line, floor level, inside indices)
    stack = [(None, NEG_INF, tuple(range(len(centers))))]
    while stack:
        rep, floor, inside = stack.pop()
        if not inside:
            _process_centerless(rep, floor, centers, dist, cfg, level, pieces, stack)
            continue
        i_star = inside[0]
        c_star = centers[i_star]
        dists = sorted({dist[i_star][j] for j in range(len(centers)) if j != i_star})
        band = set()
        for d in dists:
            for r in range(d - level + 1, d + level):
                if r >= floor:
                    band.add(r)
        top = max(dists) + level if dists else None
        if top is None:
            ceiling = floor if floor != NEG_INF else NEG_INF
        else:
            ceiling = max(top, floor) if floor != NEG_INF else top
        pieces.append(PointPiece(i_star))
        if ceiling == NEG_INF:
            pieces.append(SegPiece(i_star, NEG_INF, POS_INF))
        else:
            pieces.append(SegPiece(i_star, ceiling, POS_INF))
            for lo, hi in _gaps(sorted(band), floor, ceiling - 1):
                pieces.append(SegPiece(i_star, lo, hi))
            for r in sorted(band):
                for u in range(1, p):
                    ball_rep = as_padic(c_star, cfg) + _offset(u, r, p)
                    sub = tuple(
                        j
                        for j in range(len(centers))
                        if j != i_star
                        and _vdist_or_inf(ball_rep, centers[j], cfg) >= r + 1
                    )
                    stack.append((ball_rep, r + 1, sub))
    return pieces


def _offset(u: int, r: int, p: int) -> Fraction:
    return Fraction(u * p**r) if r >= 0 else Fraction(u, p**-r)


def _process_centerless(rep, floor, centers, dist, cfg, level, pieces, stack):
    p = cfg.p
    gaps = [_vdist_or_inf(rep, c, cfg) for c in centers]
    if POS_INF in gaps:
        raise DomainError("centerless region representative coincides with a center")
    required = max(gaps) + level
    if floor >= required:
        anchor = max(range(len(centers)), key=lambda j: (gaps[j], -j))
        m = gaps[anchor]
        offset = as_padic(rep, cfg) - as_padic(centers[anchor], cfg)
        u0 = offset.digits(floor - m)
        pieces.append(BallPiece(anchor, m, u0, floor))
        return
    for u in range(p):
        stack.append((as_padic(rep, cfg) + _offset(u, floor, p), floor + 1, ()))


def _gaps(band: list, lo, hi) -> list:
    """Maximal integer intervals of [lo, hi] avoiding the sorted band;
    lo may be -inf, hi is finite."""
    out = []
    cur = lo
    for r in band:
        if r > hi:
            break
        if cur is NEG_INF or cur <= r - 1:
            out.append((cur, r - 1))
        cur = r + 1
    if cur is NEG_INF or cur <= hi:
        out.append((cur, hi))
    return out


def _distance_table(centers: list, cfg: PadicConfig):
    n = len(centers)
    table = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d = _vdist(centers[i], centers[j], cfg)
            table[i][j] = table[j][i] = d
    return table


def _vdist(a, b, cfg: PadicConfig) -> int:
    diff = as_padic(a, cfg) - as_padic(b, cfg)
    if diff.is_zero:
        raise DomainError("coincident centers")
    return diff.v


def _vdist_or_inf(a, b, cfg: PadicConfig):
    """Distance in valuation; +inf when the points agree on every digit
    either side can certify (deep enough for any radius in play)."""
    try:
        diff = as_padic(a, cfg) - as_padic(b, cfg)
    except InsufficientPrecision:
        return POS_INF
    return POS_INF if diff.is_zero else diff.v


# -- decomposition ----------------------------------------------------------------


def decompose1(nf: NormalForm, cfg: PadicConfig, unit_level: int = 1) -> CellList:
    """Disjoint cells refining a one-variable normal form.

    Cells on annulus segments are emitted modulo P_N^*; transition balls
    are emitted modulo Q_(N, M)^* for the level M that makes every
    occurring factor constant, which keeps each conjunction constant per
    cell.  Pieces where the normal form fails are dropped.
    """
    power = nf.power
    table = _factor_table(nf, cfg)
    level = max(unit_level, power_residue_level(cfg.p, power))
    centers = _gather_centers(table, cfg)
    pieces = split_line(centers, cfg, level)
    norm_pairs = sorted(
        {
            (cond.g, cond.f)
            for conj in nf.conjunctions
            for cond in conj
            if isinstance(cond, NormLe)
        },
        key=lambda pair: (str(pair[0]), str(pair[1])),
    )
    cells = []
    conjunct = []
    reps = coset_reps(power, cfg)
    for piece in pieces:
        for cell, witness in _piece_cells(
            piece, centers, power, reps, table, norm_pairs, cfg
        ):
            idx = _first_true_conjunct(nf, witness, table, cfg)
            if idx is not None:
                cells.append(cell)
                conjunct.append(idx)
    return CellList(tuple(cells), tuple(conjunct), nf)


def _factor_table(nf: NormalForm, cfg: PadicConfig) -> dict:
    """Map each occurring term to its full Q_p factorization."""
    table: dict = {}
    for conj in nf.conjunctions:
        for cond in conj:
            for term in _condition_terms(cond):
                if term in table:
                    continue
                poly = term
                if isinstance(poly, FactoredTerm):
                    poly = poly.as_polynomial()
                table[term] = split_poly(poly, cfg)
    return table


def _condition_terms(cond) -> list:
    if isinstance(cond, Zero):
        return [cond.f]
    if isinstance(cond, NormLe):
        return [cond.g, cond.f]
    if isinstance(cond, PowerCoset):
        return [cond.f]
    raise DomainError(f"normal form contains a non-basic condition: {cond!r}")


def _gather_centers(table: dict, cfg: PadicConfig) -> list:
    centers: list = []
    for sp in table.values():
        for root in sp.roots:
            if not any(scalars_same(root.value, c, cfg) for c in centers):
                centers.append(root.value)
    if not centers:
        centers.append(Fraction(0))
    centers.sort(key=lambda c: _center_sort_key(c, cfg))
    return centers


def _center_sort_key(c, cfg: PadicConfig):
    cp = as_padic(c, cfg)
    if cp.is_zero:
        return (0, 0, 0)
    return (1, cp.v, cp.digits(min(cp.prec, cfg.k_work)))


def _root_profile(sp: SplitPoly, centers: list, cfg: PadicConfig) -> list:
    """Multiplicity of each center as a root of the polynomial."""
    out = [0] * len(centers)
    for root in sp.roots:
        for idx, c in enumerate(centers):
            if scalars_same(root.value, c, cfg):
                out[idx] += root.multiplicity
                break
    return out


def _piece_cells(piece, centers, power, reps, table, norm_pairs, cfg):
    """Cells covering one raw piece, each with a witness point."""
    p = cfg.p
    if isinstance(piece, PointPiece):
        c = centers[piece.center_idx]
        cell = PresentedCell(
            center=c,
            inner=ZERO_BOUND,
            outer=INF_BOUND,
            scale=Fraction(0),
            group=nth_power_group(power),
        )
        yield cell, c
        return
    if isinstance(piece, BallPiece):
        c = centers[piece.center_idx]
        r, m = piece.radius, piece.level - piece.radius
        scale = Fraction(piece.u0 * p**r) if r >= 0 else Fraction(piece.u0, p**-r)
        radius_bound = Fraction(p**r) if r >= 0 else Fraction(1, p**-r)
        cell = PresentedCell(
            center=c,
            inner=radius_bound,
            outer=radius_bound,
            scale=scale,
            group=congruence_group(power, m),
        )
        witness = as_padic(c, cfg) + scale
        yield cell, witness
        return
    # segment: split at norm-comparison breakpoints, then by coset
    c = centers[piece.center_idx]
    lines = _valuation_lines(piece, centers, table, cfg)
    for lo, hi in _norm_breakpoint_intervals(piece, lines, norm_pairs):
        for rep_idx, rep in enumerate(reps):
            rv = as_padic(rep, cfg).v
            a = lo if lo is NEG_INF else lo + ((rv - lo) % power)
            b = hi if hi is POS_INF else hi - ((hi - rv) % power)
            if a is not NEG_INF and b is not POS_INF and a > b:
                continue
            r0 = a if a is not NEG_INF else (b if b is not POS_INF else rv)
            offset = as_padic(rep, cfg) * (
                Fraction(p ** (r0 - rv)) if r0 >= rv else Fraction(1, p ** (rv - r0))
            )
            witness = as_padic(c, cfg) + offset
            cell = PresentedCell(
                center=c,
                inner=ZERO_BOUND if b is POS_INF else _radius(b, p),
                outer=INF_BOUND if a is NEG_INF else _radius(a, p),
                scale=rep,
                group=nth_power_group(power),
            )
            yield cell, witness


def _radius(v: int, p: int) -> Fraction:
    return Fraction(p**v) if v >= 0 else Fraction(1, p**-v)


def _valuation_lines(piece: SegPiece, centers, table, cfg) -> dict:
    """v(f(t)) = slope * r + const on the segment, per occurring term."""
    lines = {}
    for term, sp in table.items():
        if sp.poly.is_zero:
            lines[term] = None  # identically zero
            continue
        profile = _root_profile(sp, centers, cfg)
        slope = profile[piece.center_idx]
        const = _frac_valuation(sp.lead, cfg)
        for j, mult in enumerate(profile):
            if j == piece.center_idx or mult == 0:
                continue
            d = _vdist(centers[piece.center_idx], centers[j], cfg)
            if piece.hi is not POS_INF and d > piece.hi:
                slope += mult
            elif piece.lo is not NEG_INF and d < piece.lo:
                const += mult * d
            elif piece.hi is POS_INF:
                const += mult * d
            else:
                raise DomainError("segment straddles a critical radius")
        lines[term] = (slope, const)
    return lines


def _frac_valuation(x: Fraction, cfg: PadicConfig) -> int:
    return as_padic(x, cfg).v


def _norm_breakpoint_intervals(piece: SegPiece, lines, norm_pairs):
    """Subintervals of the segment on which every norm comparison has a
    constant verdict."""
    cuts = set()
    for g, f in norm_pairs:
        lg, lf = lines[g], lines[f]
        if lg is None or lf is None:
            continue
        ds = lg[0] - lf[0]
        dc = lg[1] - lf[1]
        if ds == 0:
            continue
        # truth of ds*r + dc >= 0 changes at the integer threshold
        threshold = Fraction(-dc, ds)
        cuts.add(math.ceil(threshold))
        cuts.add(math.floor(threshold) + 1)
    lo, hi = piece.lo, piece.hi
    points = sorted(
        c for c in cuts if (lo is NEG_INF or c > lo) and (hi is POS_INF or c <= hi)
    )
    out = []
    cur = lo
    for cpt in points:
        out.append((cur, cpt - 1))
        cur = cpt
    out.append((cur, hi))
    return out


def _first_true_conjunct(nf: NormalForm, witness, table, cfg) -> Optional[int]:
    for idx, conj in enumerate(nf.conjunctions):
        if all(_condition_at(cond, witness, table, cfg) for cond in conj):
            return idx
    return None


def _condition_at(cond, witness, table, cfg) -> bool:
    value = table[_condition_terms(cond)[-1]].value_at(witness, cfg)
    if isinstance(cond, Zero):
        return value.is_zero
    if isinstance(cond, NormLe):
        gval = table[cond.g].value_at(witness, cfg)
        gv = POS_INF if gval.is_zero else gval.v
        fv = POS_INF if value.is_zero else value.v
        return gv >= fv
    if isinstance(cond, PowerCoset):
        if value.is_zero:
            return cond.include_zero
        rep = as_padic(coset_reps(cond.power, cfg)[cond.rep], cfg)
        return is_nth_power(value / rep, cond.power)
    raise DomainError(f"unexpected condition {cond!r}")


# -- partition checking -----------------------------------------------------------


@dataclass
class PartitionReport:
    """check_partition output; empty lists mean the cell list is a partition."""

    overlaps: list
    missing: list
    extra: list
    errors: list
    points_checked: int = 0

    @property
    def ok(self) -> bool:
        return not (self.overlaps or self.missing or self.extra or self.errors)

    def to_json(self, cfg: PadicConfig) -> dict:
        def fmt(pt):
            return scalar_to_json(pt, cfg)

        return {
            "points_checked": self.points_checked,
            "overlaps": [
                {"point": fmt(pt), "cells": idxs} for pt, idxs in self.overlaps[:32]
            ],
            "missing": [fmt(pt) for pt in self.missing[:32]],
            "extra": [{"point": fmt(pt), "cell": i} for pt, i in self.extra[:32]],
            "errors": [{"point": fmt(pt), "error": msg} for pt, msg in self.errors[:32]],
            "pass": self.ok,
        }


def check_partition(cl: CellList, nf: NormalForm, sample) -> PartitionReport:
    """Compare cell membership against the normal form over a sample.

    Reports points in two or more cells, points satisfying the form but
    in no cell, and points in a cell but failing the form.  Precision
    failures are recorded per point, never raised.
    """
    from . import oracle

    cfg = sample.cfg
    if len(sample) > 4096:
        try:
            return oracle.check_partition_fast(cl, nf, sample)
        except NotImplementedError:
            pass
    report = PartitionReport([], [], [], [])
    for pt in sample:
        report.points_checked += 1
        try:
            hits = [
                i for i, cell in enumerate(cl.cells) if cell_contains(cell, (pt,), cfg)
            ]
            truth = any(
                all(eval_condition(c, pt, cfg) for c in conj)
                for conj in nf.conjunctions
            )
        except InsufficientPrecision as exc:
            report.errors.append((pt, str(exc)))
            continue
        if len(hits) > 1:
            report.overlaps.append((pt, hits))
        if truth and not hits:
            report.missing.append(pt)
        if hits and not truth:
            report.extra.append((pt, hits[0]))
    return report
