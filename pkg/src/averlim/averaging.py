"""Averaged functions via the Bell-polynomial form of the integral recursion.

With the unperturbed normal-form term zero, the order-i integral function is

    y_1 = int_0^theta F_1,
    y_i = i! int_0^theta [ F_i + sum_{l=1}^{i-1} sum_{m=1}^{l} (1/l!)
               d^m F_{i-l} / dr^m  *  B_{l,m}(y_1, ..., y_{l-m+1}) ],

and the i-th averaged function is f_i(r) = y_i(2*pi, r) / i!.

Two independent routes to the same integrand are provided: the production
path expands the partial Bell polynomials B_{l,m}; the cross-check path
:func:`compute_y_tuple_sum` enumerates the tuple set {b : b_1 + 2 b_2 + ... +
l b_l = l} directly, with weight 1 / prod_j (b_j! * (j!)^b_j).  They must
agree, and the test suite asserts that they do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from . import analysis, trigcalc
from .analysis import AveragedFunction, SubstitutionMap
from .normalform import NormalForm, SystemSpec, normalize
from .symcore import FactoredDen, FracSeries, TrigSeries


def _bell_tuples(total: int, parts: int, length: int):
    """Non-negative (b_1..b_length) with sum b_j = parts, sum j*b_j = total."""
    def rec(j: int, rem_total: int, rem_parts: int, prefix: tuple):
        if j > length:
            if rem_total == 0 and rem_parts == 0:
                yield prefix
            return
        max_b = min(rem_parts, rem_total // j)
        for b in range(max_b + 1):
            yield from rec(j + 1, rem_total - j * b, rem_parts - b, prefix + (b,))
    yield from rec(1, total, parts, ())


def bell(l: int, m: int, args: Sequence) -> object:
    """Partial Bell polynomial B_{l,m}(x_1, ..., x_{l-m+1}) over any ring.

    ``args`` must support ``*``, ``**`` with non-negative integer exponents,
    ``+`` between ring elements, and left-multiplication by Fraction.
    """
    if not (1 <= m <= l):
        raise ValueError("need 1 <= m <= l")
    if len(args) != l - m + 1:
        raise ValueError(f"B_{{{l},{m}}} takes {l - m + 1} arguments, got {len(args)}")
    total = None
    for tup in _bell_tuples(l, m, l - m + 1):
        weight = Fraction(math.factorial(l))
        prod = None
        for j, b in enumerate(tup, start=1):
            weight /= math.factorial(b) * math.factorial(j) ** b
            if b:
                factor = args[j - 1] ** b
                prod = factor if prod is None else prod * factor
        piece = weight * prod
        total = piece if total is None else total + piece
    if total is None:
        raise ValueError(f"empty tuple set for B_{{{l},{m}}}")
    return total


# ---------------------------------------------------------------------------
# Abstract integrand formulae (formula mode)
# ---------------------------------------------------------------------------

# one integrand term: coefficient * d^m F_j / dr^m * prod y_i^p
# key: ((j, m), ((i1, p1), (i2, p2), ...)) with the y-powers sorted by index
TermKey = Tuple[Tuple[int, int], Tuple[Tuple[int, int], ...]]


def _integrand_terms(order: int) -> List[Tuple[Fraction, TermKey]]:
    """The expanded integrand of y_order as (coefficient, term-key) pairs.

    The leading term is order! * F_order; each Bell tuple b in S(l, m)
    contributes order! / prod_j (b_j! * (j!)^b_j) * d^m F_{order-l} * prod
    y_j^{b_j}.
    """
    fact = Fraction(math.factorial(order))
    terms: Dict[TermKey, Fraction] = {((order, 0), ()): fact}
    for l in range(1, order):
        for m in range(1, l + 1):
            for tup in _bell_tuples(l, m, l - m + 1):
                weight = fact
                ypowers = []
                for j, b in enumerate(tup, start=1):
                    weight /= math.factorial(b) * math.factorial(j) ** b
                    if b:
                        ypowers.append((j, b))
                key = ((order - l, m), tuple(ypowers))
                terms[key] = terms.get(key, Fraction(0)) + weight
    ordered = sorted(terms.items(), key=lambda kv: (-kv[0][0][0], kv[0][0][1], kv[0][1]))
    return [(coef, key) for key, coef in ordered if coef]


@dataclass(frozen=True)
class IntegrandFormula:
    """The abstract integrand of y_k over symbols F_j, y_j and d/dr."""

    order: int
    terms: Tuple[Tuple[Fraction, TermKey], ...]

    def coefficients(self) -> List[Fraction]:
        return [c for c, _ in self.terms]

    def as_text(self) -> str:
        parts = []
        for coef, ((j, m), ypows) in self.terms:
            factors = []
            if m == 0:
                factors.append(f"F{j}")
            elif m == 1:
                factors.append(f"dF{j}/dr")
            else:
                factors.append(f"d^{m}F{j}/dr^{m}")
            for i, p in ypows:
                factors.append(f"y{i}" if p == 1 else f"y{i}^{p}")
            body = "*".join(factors)
            if coef == 1:
                parts.append(body)
            else:
                parts.append(f"{coef}*{body}")
        return " + ".join(parts)

    def as_latex(self) -> str:
        parts = []
        for coef, ((j, m), ypows) in self.terms:
            factors = []
            if m == 0:
                factors.append(f"F_{{{j}}}")
            elif m == 1:
                factors.append(f"\\frac{{\\partial F_{{{j}}}}}{{\\partial r}}")
            else:
                factors.append(
                    f"\\frac{{\\partial^{{{m}}} F_{{{j}}}}}{{\\partial r^{{{m}}}}}")
            for i, p in ypows:
                factors.append(f"y_{{{i}}}" if p == 1 else f"y_{{{i}}}^{{{p}}}")
            body = " ".join(factors)
            if coef == 1:
                parts.append(body)
            elif coef.denominator == 1:
                parts.append(f"{coef} {body}")
            else:
                parts.append(f"\\frac{{{coef.numerator}}}{{{coef.denominator}}} {body}")
        return " + ".join(parts)

    def __str__(self) -> str:
        return self.as_text()


def integrand_formula(order: int) -> IntegrandFormula:
    """Algorithmic STEP 2(i): the closed formula for the y_order integrand."""
    if order < 1:
        raise ValueError("order must be >= 1")
    return IntegrandFormula(order, tuple(_integrand_terms(order)))


# ---------------------------------------------------------------------------
# Concrete computation
# ---------------------------------------------------------------------------


class _SeriesCache:
    """Per-run caches: r-derivatives of the F_i and powers/products of y_j.

    Invalidated wholesale whenever a substitution rewrites the series.
    ``f_getter`` maps an order j to the current F_j.
    """

    def __init__(self, f_getter, ys: List[FracSeries]):
        self.f_getter = f_getter
        self.ys = ys
        self.dF: Dict[Tuple[int, int], FracSeries] = {}
        self.ypow: Dict[Tuple[Tuple[int, int], ...], FracSeries] = {}

    def diff_F(self, j: int, m: int) -> FracSeries:
        key = (j, m)
        out = self.dF.get(key)
        if out is None:
            out = self.f_getter(j).diff_r(m) if m else self.f_getter(j)
            self.dF[key] = out
        return out

    def y_product(self, ypows: Tuple[Tuple[int, int], ...]) -> Optional[FracSeries]:
        if not ypows:
            return None
        out = self.ypow.get(ypows)
        if out is None:
            head = ypows[:-1]
            i, p = ypows[-1]
            tail = self.ys[i - 1] ** p
            prev = self.y_product(head)
            out = tail if prev is None else prev * tail
            self.ypow[ypows] = out
        return out


def compute_y(order: int, nf: Union[NormalForm, "AveragingEngine"],
              prev: Sequence[FracSeries],
              cache: Optional[_SeriesCache] = None) -> FracSeries:
    """The integral function y_order from F_1..F_order and y_1..y_{order-1}."""
    if len(prev) < order - 1:
        raise ValueError(f"y_{order} needs y_1..y_{order - 1}")
    getter = nf.current_F if isinstance(nf, AveragingEngine) else nf.f_at
    if cache is None:
        cache = _SeriesCache(getter, list(prev))
    pieces = []
    den = FactoredDen()
    for coef, ((j, m), ypows) in _integrand_terms(order):
        piece = cache.diff_F(j, m)
        if piece.is_zero:
            continue
        yprod = cache.y_product(ypows)
        if yprod is not None:
            piece = piece * yprod
        piece = piece * coef
        if piece.is_zero:
            continue
        pieces.append(piece)
        den = den.lcm(piece.den)
    nums = [p.num.scale(p.den.cofactor(den)) if p.den != den else p.num
            for p in pieces]
    integrand = FracSeries(TrigSeries.sum_of(nums), den)
    return trigcalc.integrate(integrand)


def compute_y_tuple_sum(order: int, nf: NormalForm,
                        prev: Sequence[FracSeries]) -> FracSeries:
    """Independent route to y_order: direct tuple-set enumeration.

    Enumerates l-tuples with b_1 + 2 b_2 + ... + l b_l = l and applies the
    derivative order L = b_1 + ... + b_l, without Bell polynomials.  Used as
    an oracle against :func:`compute_y`.
    """
    if len(prev) < order - 1:
        raise ValueError(f"y_{order} needs y_1..y_{order - 1}")
    fact = Fraction(math.factorial(order))
    integrand = nf.f_at(order) * fact
    for l in range(1, order):
        for tup in _all_tuples(l):
            L = sum(tup)
            weight = fact
            for j, b in enumerate(tup, start=1):
                weight /= math.factorial(b) * math.factorial(j) ** b
            piece = nf.f_at(order - l).diff_r(L) * weight
            for j, b in enumerate(tup, start=1):
                if b:
                    piece = piece * prev[j - 1] ** b
            integrand = integrand + piece
    return trigcalc.integrate(integrand)


def _all_tuples(l: int):
    """All l-tuples of non-negative integers with b_1 + 2 b_2 + ... = l."""
    def rec(j: int, rem: int, prefix: tuple):
        if j > l:
            if rem == 0:
                yield prefix
            return
        for b in range(rem // j + 1):
            yield from rec(j + 1, rem - j * b, prefix + (b,))
    yield from rec(1, l, ())


def averaged_function(order: int, y: FracSeries,
                      degree_bound: int) -> AveragedFunction:
    """f_order = y_order evaluated at theta = 2*pi, divided by order!."""
    poly, den = trigcalc.eval_at_2pi(y)
    poly = poly.scale(Fraction(1, math.factorial(order)))
    return analysis.normalize_f(poly, order, degree_bound, den)


@dataclass
class OrderResult:
    """Everything the engine knows about one averaging order."""

    order: int
    F: FracSeries
    y: FracSeries
    favg: AveragedFunction
    substitutions: Optional[SubstitutionMap] = None


@dataclass
class AveragingRun:
    """Record of a staged run: per-order F_i, y_i and averaged functions."""

    system: Optional[SystemSpec]
    results: List[OrderResult]

    @property
    def order(self) -> int:
        return len(self.results)

    def favg(self, i: int) -> AveragedFunction:
        return self.results[i - 1].favg

    def y(self, i: int) -> FracSeries:
        return self.results[i - 1].y


class AveragingEngine:
    """Order-by-order driver with staged substitutions.

    Substitutions applied between orders rewrite both the normal form and the
    already-computed integral functions (parameter substitution commutes with
    integration and differentiation), reproducing the published workflow of
    simplifying under f_1 = ... = f_{h-1} = 0 before computing f_h.

    Substitution of the F_i is lazy per order: stage maps are queued and a
    composed map is applied to F_j the first time it is needed afterwards,
    so early-stage maps never rewrite the large high-order series eagerly.
    """

    def __init__(self, nf: NormalForm, system: Optional[SystemSpec] = None):
        self.order = nf.order
        self.degree_bound = nf.degree_bound
        self.system = system
        self.ys: List[FracSeries] = []
        self.results: List[OrderResult] = []
        self._F: List[FracSeries] = list(nf.F)
        self._maps: List[SubstitutionMap] = []
        self._upto: List[int] = [0] * nf.order
        self._cache = _SeriesCache(self.current_F, self.ys)
        self._pending_subs: Optional[SubstitutionMap] = None

    @classmethod
    def for_system(cls, sys: SystemSpec, order: Optional[int] = None) -> "AveragingEngine":
        return cls(normalize(sys, order), sys)

    @property
    def next_order(self) -> int:
        return len(self.ys) + 1

    def current_F(self, j: int) -> FracSeries:
        """F_j with every queued substitution applied (lazily, composed)."""
        idx = j - 1
        pending = self._maps[self._upto[idx]:]
        if pending:
            combined = pending[0]
            for extra in pending[1:]:
                combined = combined.chain(extra)
            self._F[idx] = self._F[idx].subs_frac(combined.as_mapping())
            self._upto[idx] = len(self._maps)
        return self._F[idx]

    def apply_substitutions(self, subs: SubstitutionMap) -> None:
        """Rewrite the engine state under ``subs`` before the next order."""
        if not subs.assignments:
            return
        mapping = subs.as_mapping()
        self._maps.append(subs)
        self.ys = [y.subs_frac(mapping) for y in self.ys]
        self._cache = _SeriesCache(self.current_F, self.ys)
        if self._pending_subs is None:
            self._pending_subs = subs
        else:
            self._pending_subs = self._pending_subs.chain(subs)

    def advance(self) -> OrderResult:
        """Compute the next order's y and averaged function."""
        h = self.next_order
        if h > self.order:
            raise IndexError(f"normal form only carries orders up to {self.order}")
        y = compute_y(h, self, self.ys, self._cache)
        favg = averaged_function(h, y, self.degree_bound)
        result = OrderResult(h, self.current_F(h), y, favg, self._pending_subs)
        self._pending_subs = None
        self.ys.append(y)
        self.results.append(result)
        return result


def run(sys: SystemSpec, subs_by_stage: Optional[Mapping[int, SubstitutionMap]] = None,
        order: Optional[int] = None) -> AveragingRun:
    """Algorithm STEP 1 + STEP 2 over all orders, with staged substitutions.

    ``subs_by_stage[h]`` is applied to the engine state before computing
    order h (so stage 1 substitutions rewrite the normal form itself).
    """
    engine = AveragingEngine.for_system(sys, order)
    k = order or sys.order
    subs_by_stage = subs_by_stage or {}
    for h in range(1, k + 1):
        stage = subs_by_stage.get(h)
        if stage is not None:
            engine.apply_substitutions(stage)
        engine.advance()
    return AveragingRun(sys, engine.results)
