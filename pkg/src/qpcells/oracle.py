"""Truncated brute-force universe over Q_p and exhaustive equivalence checks.

The sample enumerates 0 and every p^v * u for v in [-B, B] and unit
u < p^k, each standing for its full residue class.  decide() is the
exact scalar reference; window sweeps use a vectorized evaluator that
works modulo p^CAP in int64 and falls back to the exact path at any
point where the modular image cannot certify the verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Optional, Union

import numpy as np

from .errors import DomainError, InsufficientPrecision, SizeCapError
from .lang import (
    Atom,
    And,
    InCongruence,
    NormLe,
    Not,
    NormalForm,
    Or,
    PowerCoset,
    Zero,
    eval_formula,
    eval_normal_form,
)
from .padic import (
    GROUP_FULL,
    GROUP_PN,
    GROUP_QNM,
    PadicConfig,
    PadicNumber,
    _nth_power_units,
    as_padic,
    coset_reps,
    int_valuation,
    power_residue_level,
)
from .terms import FactoredTerm, Polynomial
from . import cells as cells_mod

DEFAULT_SIZE_CAP = 8_000_000


@dataclass(frozen=True)
class TruncatedSample:
    """0 plus all p^v * u, v in [-window, window], u a unit below p^digits.

    Deterministic ordering: the zero point first, then valuation
    ascending and unit ascending.  Each point denotes the residue class
    p^v (u + p^digits Z_p).
    """

    cfg: PadicConfig
    window: int
    digits: int

    @cached_property
    def units(self) -> np.ndarray:
        p = self.cfg.p
        arr = np.arange(1, p**self.digits, dtype=np.int64)
        return arr[arr % p != 0]

    @property
    def unit_count(self) -> int:
        p = self.cfg.p
        return p**self.digits - p ** (self.digits - 1)

    def __len__(self) -> int:
        return (2 * self.window + 1) * self.unit_count + 1

    def point(self, i: int) -> Fraction:
        if i == 0:
            return Fraction(0)
        v = -self.window + (i - 1) // self.unit_count
        u = int(self.units[(i - 1) % self.unit_count])
        return Fraction(u * self.cfg.p**v) if v >= 0 else Fraction(u, self.cfg.p**-v)

    def __iter__(self) -> Iterator[Fraction]:
        for i in range(len(self)):
            yield self.point(i)

    def valuations(self):
        return range(-self.window, self.window + 1)

    def index_of(self, v: int, unit_pos: int) -> int:
        return 1 + (v + self.window) * self.unit_count + unit_pos

    def to_json_lines(self):
        for pt in self:
            yield {"rational": str(pt)}


def enum(cfg: PadicConfig, window: int, digits: int, cap: int = DEFAULT_SIZE_CAP) -> TruncatedSample:
    """Enumerate the truncated universe; refuses sizes above the cap."""
    if digits < 1 or window < 0:
        raise DomainError("window must be >= 0 and digits >= 1")
    if digits > cfg.k_work:
        raise DomainError("sample digits exceed working precision")
    size = (2 * window + 1) * (cfg.p**digits - cfg.p ** (digits - 1)) + 1
    if size > cap:
        raise SizeCapError(f"universe of size {size} exceeds cap {cap}")
    return TruncatedSample(cfg, window, digits)


# -- scalar decision ------------------------------------------------------------


def decide(desc, point, cfg: Optional[PadicConfig] = None) -> bool:
    """Exact membership of one point in a formula, normal form, cell
    list, or single cell."""
    if cfg is None:
        raise DomainError("decide needs a PadicConfig")
    return _membership(desc, point, cfg)


def _membership(desc, point, cfg: PadicConfig) -> bool:
    if isinstance(desc, NormalForm):
        return eval_normal_form(desc, point, cfg)
    if isinstance(desc, (Atom, Not, And, Or)):
        return eval_formula(desc, point, cfg)
    if isinstance(desc, cells_mod.CellList):
        return any(
            cells_mod.cell_contains(c, (point,), cfg) for c in desc.cells
        )
    if isinstance(desc, cells_mod.PresentedCell):
        return cells_mod.cell_contains(desc, (point,), cfg)
    raise DomainError(f"cannot decide membership for {type(desc).__name__}")


def equiv(desc_a, desc_b, sample: TruncatedSample) -> list:
    """Points of the sample where the two descriptions disagree."""
    cfg = sample.cfg
    try:
        va = decide_all(desc_a, sample)
        vb = decide_all(desc_b, sample)
        idx = np.nonzero(va != vb)[0]
        return [sample.point(int(i)) for i in idx]
    except _VectorUnsupported:
        out = []
        for pt in sample:
            if _membership(desc_a, pt, cfg) != _membership(desc_b, pt, cfg):
                out.append(pt)
        return out


# -- vectorized evaluation -------------------------------------------------------


class _VectorUnsupported(Exception):
    """Internal: the description has no vector path; use the scalar one."""


def _cap_digits(p: int) -> int:
    cap = 1
    while p ** (cap + 1) < 3_000_000_000:
        cap += 1
    return cap


class _VectorEvaluator:
    """Evaluates terms and conditions over one whole sample, valuation
    group by valuation group, modulo p^cap."""

    def __init__(self, sample: TruncatedSample):
        self.sample = sample
        self.cfg = sample.cfg
        self.p = sample.cfg.p
        self.cap = _cap_digits(self.p)
        self.modulus = self.p**self.cap
        self.units = sample.units
        self.units_mod = self.units % self.modulus
        self.term_cache: dict = {}
        self.table_cache: dict = {}

    # ---- term evaluation

    def term_values(self, poly: Polynomial, v: int):
        """(valuation array, unit array, unknown mask) of poly at p^v * units."""
        key = (poly, v)
        hit = self.term_cache.get(key)
        if hit is not None:
            return hit
        p, P = self.p, self.modulus
        if poly.is_zero:
            n = len(self.units)
            out = (
                np.zeros(n, np.int64),
                np.zeros(n, np.int64),
                np.ones(n, bool),
            )
            self.term_cache[key] = out
            return out
        den = math.lcm(*(c.denominator for c in poly.coeffs))
        ints = [int(c * den) for c in poly.coeffs]
        vden = int_valuation(den, p)
        den_unit = den // p**vden
        inv_den = pow(den_unit, -1, P)
        base = min(
            v * i + int_valuation(a, p) for i, a in enumerate(ints) if a != 0
        )
        s = np.zeros(len(self.units), np.int64)
        u_pow = np.ones(len(self.units), np.int64)
        for i, a in enumerate(ints):
            if a != 0:
                shift = v * i + int_valuation(a, p) - base
                coef = (a // p ** int_valuation(a, p)) * pow(p, shift, P) % P
                s = (s + coef * u_pow) % P
            u_pow = u_pow * self.units_mod % P
        unknown = s == 0
        val, unit = self._split_valuation(s)
        val = val + (base - vden)
        unit = unit * inv_den % P
        out = (val, unit, unknown)
        self.term_cache[key] = out
        return out

    def _split_valuation(self, s: np.ndarray):
        p = self.p
        val = np.zeros(len(s), np.int64)
        work = s.copy()
        for _ in range(self.cap):
            mask = (work != 0) & (work % p == 0)
            if not mask.any():
                break
            val[mask] += 1
            work[mask] //= p
        return val, work

    def _term_poly(self, term) -> Polynomial:
        if isinstance(term, Polynomial):
            return term
        if isinstance(term, FactoredTerm):
            try:
                return term.as_polynomial()
            except ValueError as exc:
                raise _VectorUnsupported(str(exc))
        raise _VectorUnsupported(f"term {term!r}")

    # ---- condition masks

    def condition_mask(self, cond, v: int):
        """(verdict array, unknown mask) for one sample valuation group."""
        if isinstance(cond, Zero):
            _, _, unknown = self.term_values(self._term_poly(cond.f), v)
            return np.zeros(len(self.units), bool), unknown.copy()
        if isinstance(cond, NormLe):
            gv, _, gunk = self.term_values(self._term_poly(cond.g), v)
            fv, _, funk = self.term_values(self._term_poly(cond.f), v)
            return gv >= fv, gunk | funk
        if isinstance(cond, PowerCoset):
            val, unit, unknown = self.term_values(self._term_poly(cond.f), v)
            level = power_residue_level(self.p, cond.power)
            table = self._coset_table(cond.power, cond.rep)
            rep_val = as_padic(coset_reps(cond.power, self.cfg)[cond.rep], self.cfg).v
            mask = ((val - rep_val) % cond.power == 0) & np.take(
                table, unit % self.p**level
            )
            return mask, unknown.copy()
        if isinstance(cond, InCongruence):
            val, unit, unknown = self.term_values(self._term_poly(cond.f), v)
            if cond.level > self.cap:
                raise _VectorUnsupported("congruence level beyond modular window")
            mask = (val % cond.power == 0) & (unit % self.p**cond.level == 1)
            return mask, unknown.copy()
        raise _VectorUnsupported(f"condition {cond!r}")

    def _coset_table(self, power: int, rep: int) -> np.ndarray:
        key = ("coset", power, rep)
        hit = self.table_cache.get(key)
        if hit is not None:
            return hit
        p = self.p
        level = power_residue_level(p, power)
        mod = p**level
        reps = coset_reps(power, self.cfg)
        if not 0 <= rep < len(reps):
            raise DomainError(f"coset index {rep} out of range at p = {p}")
        rep_unit = as_padic(reps[rep], self.cfg).digits(level)
        inv = pow(rep_unit, -1, mod)
        residues = _nth_power_units(p, power)
        table = np.zeros(mod, bool)
        for w in range(1, mod):
            if w % p != 0:
                table[w] = (w * inv) % mod in residues
        self.table_cache[key] = table
        return table

    # ---- formula masks

    def formula_mask(self, formula, v: int):
        if isinstance(formula, Atom):
            return self.condition_mask(formula.cond, v)
        if isinstance(formula, Not):
            mask, unknown = self.formula_mask(formula.child, v)
            return ~mask, unknown
        if isinstance(formula, (And, Or)):
            n = len(self.units)
            is_and = isinstance(formula, And)
            mask = np.full(n, is_and)
            unknown = np.zeros(n, bool)
            for child in formula.children:
                m, u = self.formula_mask(child, v)
                mask = mask & m if is_and else mask | m
                unknown |= u
            return mask, unknown
        if isinstance(formula, NormalForm):
            n = len(self.units)
            mask = np.zeros(n, bool)
            unknown = np.zeros(n, bool)
            for conj in formula.conjunctions:
                cm = np.ones(n, bool)
                for cond in conj:
                    m, u = self.condition_mask(cond, v)
                    cm &= m
                    unknown |= u
                mask |= cm
            return mask, unknown
        raise _VectorUnsupported(f"formula node {type(formula).__name__}")

    # ---- cell membership masks

    def difference_values(self, center, v: int):
        """(valuation, unit, unknown) arrays of p^v * u - center."""
        key = ("diff", _scalar_key(center, self.cfg), v)
        hit = self.term_cache.get(key)
        if hit is not None:
            return hit
        p, P = self.p, self.modulus
        c = as_padic(center, self.cfg)
        if c.is_zero:
            val = np.full(len(self.units), v, np.int64)
            unit = self.units_mod.copy()
            unknown = np.zeros(len(self.units), bool)
        else:
            beta = min(v, c.v)
            avail = self.cap if c.exact is not None else min(c.prec, self.cap)
            c_digits = c.digits(avail)
            shift_t = pow(p, v - beta, P)
            shift_c = pow(p, c.v - beta, P)
            s = (self.units_mod * shift_t - c_digits * shift_c % P) % P
            raw_val, unit = self._split_valuation(s)
            # digits of the difference are certified only below the
            # operands' shared absolute precision
            limit = c.v - beta + avail
            unknown = (s == 0) | (raw_val >= limit)
            val = raw_val + beta
        out = (val, unit, unknown)
        self.term_cache[key] = out
        return out

    def cell_mask(self, cell, v: int):
        if cell.base is not None:
            raise _VectorUnsupported("vector membership is univariate")
        p = self.p
        val, unit, unknown = self.difference_values(cell.center, v)
        if cell.type == 0:
            return np.zeros(len(self.units), bool), unknown.copy()
        mask = np.ones(len(self.units), bool)
        if not isinstance(cell.inner, cells_mod._Bound):
            bound = as_padic(cell.inner, self.cfg)
            if not bound.is_zero:
                mask &= val <= bound.v
        if not isinstance(cell.outer, cells_mod._Bound):
            bound = as_padic(cell.outer, self.cfg)
            if bound.is_zero:
                mask &= False
            else:
                mask &= val >= bound.v
        scale = as_padic(cell.scale, self.cfg)
        group = cell.group
        if group.kind == GROUP_FULL:
            pass
        elif group.kind == GROUP_PN:
            level = power_residue_level(p, group.power)
            table = self._group_table(scale, group.power, level)
            mask &= (val - scale.v) % group.power == 0
            mask &= np.take(table, unit % p**level)
        elif group.kind == GROUP_QNM:
            if group.level > self.cap:
                raise _VectorUnsupported("congruence level beyond modular window")
            mod = p**group.level
            inv = pow(scale.digits(group.level), -1, mod)
            mask &= (val - scale.v) % group.power == 0
            mask &= (unit % mod) * inv % mod == 1
        else:
            raise _VectorUnsupported(f"group {group.kind}")
        return mask, unknown.copy()

    def _group_table(self, scale: PadicNumber, power: int, level: int) -> np.ndarray:
        key = ("group", scale.v, scale.digits(level), power, level)
        hit = self.table_cache.get(key)
        if hit is not None:
            return hit
        p = self.p
        mod = p**level
        inv = pow(scale.digits(level), -1, mod)
        residues = _nth_power_units(p, power)
        table = np.zeros(mod, bool)
        for w in range(1, mod):
            if w % p != 0:
                table[w] = (w * inv) % mod in residues
        self.table_cache[key] = table
        return table


def _scalar_key(x, cfg: PadicConfig):
    xp = as_padic(x, cfg)
    if xp.is_zero:
        return ("zero",)
    return (xp.v, xp.unit, xp.prec, str(xp.exact))


def decide_all(desc, sample: TruncatedSample) -> np.ndarray:
    """Verdict array over the full sample (vector path with exact fallback)."""
    cfg = sample.cfg
    out = np.zeros(len(sample), bool)
    out[0] = _membership(desc, Fraction(0), cfg)
    ev = _VectorEvaluator(sample)
    fallback: list = []
    for v in sample.valuations():
        if isinstance(desc, cells_mod.CellList):
            n = len(sample.units)
            mask = np.zeros(n, bool)
            unknown = np.zeros(n, bool)
            for cell in desc.cells:
                m, u = ev.cell_mask(cell, v)
                mask |= m
                unknown |= u
        elif isinstance(desc, cells_mod.PresentedCell):
            mask, unknown = ev.cell_mask(desc, v)
        else:
            mask, unknown = ev.formula_mask(desc, v)
        base = sample.index_of(v, 0)
        out[base : base + len(sample.units)] = mask
        for pos in np.nonzero(unknown)[0]:
            fallback.append(base + int(pos))
    for i in fallback:
        out[i] = _membership(desc, sample.point(i), cfg)
    return out


def check_partition_fast(cl, nf: NormalForm, sample: TruncatedSample):
    """Vectorized partition check; same report as cells.check_partition."""
    cfg = sample.cfg
    ev = _VectorEvaluator(sample)
    n_units = len(sample.units)
    report = cells_mod.PartitionReport([], [], [], [], points_checked=len(sample))

    def record(index: int):
        pt = sample.point(index)
        try:
            hits = [
                i
                for i, cell in enumerate(cl.cells)
                if cells_mod.cell_contains(cell, (pt,), cfg)
            ]
            truth = eval_normal_form(nf, pt, cfg)
        except InsufficientPrecision as exc:
            report.errors.append((pt, str(exc)))
            return
        if len(hits) > 1:
            report.overlaps.append((pt, hits))
        if truth and not hits:
            report.missing.append(pt)
        if hits and not truth:
            report.extra.append((pt, hits[0]))

    record(0)
    for v in sample.valuations():
        counts = np.zeros(n_units, np.int16)
        unknown = np.zeros(n_units, bool)
        for cell in cl.cells:
            m, u = ev.cell_mask(cell, v)
            counts += m.astype(np.int16)
            unknown |= u
        truth, t_unknown = ev.formula_mask(nf, v)
        unknown |= t_unknown
        base = sample.index_of(v, 0)
        bad = unknown | (counts > 1) | (truth & (counts == 0)) | (~truth & (counts > 0))
        for pos in np.nonzero(bad)[0]:
            record(base + int(pos))
    return report
