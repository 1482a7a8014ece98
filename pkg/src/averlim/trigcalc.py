"""Closed-form definite integration of trigonometric series.

The primitive is M(i, j, k) = integral from 0 to theta of s^i sin^j(s)
cos^k(s) ds, computed by two integration-by-parts recursions:

  k >= 1:  (j+1) M(i,j,k) = theta^i sin^(j+1) cos^(k-1)
                            - i M(i-1,j+1,k-1) + (k-1) M(i,j+2,k-2)

  k == 0:  j M(i,j,0) = -theta^i sin^(j-1) cos + [i=0, j=1]
                        + i M(i-1,j-1,1) + (j-1) M(i,j-2,0)

Both recursions are derived with explicit evaluation of the boundary term at
the lower limit 0; for k >= 1 that contribution always vanishes, for k = 0 it
contributes exactly 1 when (i, j) = (0, 1) (the constant in 1 - cos(theta)).
Base case: M(i,0,0) = theta^(i+1)/(i+1).

Termination: the k >= 1 step strictly decreases (i+j+k, k) lexicographically,
the k = 0 step strictly decreases i+j+k.
"""

from __future__ import annotations

import threading
from fractions import Fraction
from typing import Mapping, Optional, Union

from .symcore import (FactoredDen, FracSeries, ParamFrac, ParamPoly, PiPoly,
                      TrigSeries, _QTYPE, _freeze_acc)

_memo: dict = {}
_memo_lock = threading.Lock()


def integrate_monomial(i: int, j: int, k: int) -> TrigSeries:
    """Exact M(i, j, k) as a TrigSeries in theta; vanishes at theta = 0."""
    if i < 0 or j < 0 or k < 0:
        raise ValueError("monomial exponents must be non-negative")
    cached = _memo.get((i, j, k))
    if cached is not None:
        return cached
    if k >= 1:
        result = TrigSeries.term(Fraction(1, j + 1), theta=i, sin=j + 1, cos=k - 1)
        result = result.reduce_cos()
        if i:
            result = result + integrate_monomial(i - 1, j + 1, k - 1).scale(Fraction(-i, j + 1))
        if k >= 2:
            result = result + integrate_monomial(i, j + 2, k - 2).scale(Fraction(k - 1, j + 1))
    elif j == 0:
        result = TrigSeries.term(Fraction(1, i + 1), theta=i + 1)
    else:
        result = TrigSeries.term(Fraction(-1), theta=i, sin=j - 1, cos=1)
        if i == 0 and j == 1:
            result = result + TrigSeries.one()
        if i:
            result = result + integrate_monomial(i - 1, j - 1, 1).scale(Fraction(i))
        if j >= 2:
            result = result + integrate_monomial(i, j - 2, 0).scale(Fraction(j - 1))
        result = result.scale(Fraction(1, j))
    with _memo_lock:
        # idempotent insert; concurrent recomputation yields the same value
        _memo.setdefault((i, j, k), result)
    return result


def integrate(series: Union[TrigSeries, FracSeries]) -> Union[TrigSeries, FracSeries]:
    """Definite integral from 0 to theta, termwise over the monomial table.

    Coefficients and powers of r are constants of the integration; the result
    vanishes identically at theta = 0.
    """
    if isinstance(series, FracSeries):
        return FracSeries(integrate(series.num), series.den)
    acc: dict = {}
    for (a, e, b, c), coef in series.terms.items():
        levels = [(lv, p.terms) for lv, p in enumerate(coef.coeffs) if p.terms]
        table = integrate_monomial(a, b, c)
        for (a2, e2, b2, c2), w in table.terms.items():
            # monomial-table coefficients are plain rationals
            q = w.coeffs[0].terms[0]
            key = (a2, e + e2, b2, c2)
            slot = acc.get(key)
            if slot is None:
                slot = acc[key] = {}
            for lv, pt in levels:
                d = slot.get(lv)
                if d is None:
                    d = slot[lv] = {}
                get = d.get
                for m, qq in pt.items():
                    prod = qq * q
                    v = get(m)
                    d[m] = prod if v is None else v + prod
    return _freeze_acc(acc)


class RadialPoly:
    """Laurent polynomial in r with PiPoly coefficients (the f_i carrier)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Optional[Mapping[int, PiPoly]] = None):
        clean: dict = {}
        if coeffs:
            for exp, coef in coeffs.items():
                if not coef.is_zero:
                    clean[exp] = coef
        self.coeffs = clean

    @classmethod
    def zero(cls) -> "RadialPoly":
        return cls()

    @classmethod
    def term(cls, coef, exp: int = 0) -> "RadialPoly":
        if not isinstance(coef, PiPoly):
            coef = PiPoly.const(coef)
        return cls({exp: coef})

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, exp: int) -> PiPoly:
        return self.coeffs.get(exp, PiPoly.zero())

    def min_exp(self) -> int:
        return min(self.coeffs, default=0)

    def max_exp(self) -> int:
        return max(self.coeffs, default=0)

    def exponents(self) -> list:
        return sorted(self.coeffs)

    def pi_degree(self) -> int:
        return max((c.pi_degree for c in self.coeffs.values()), default=-1)

    def params(self) -> frozenset:
        out: frozenset = frozenset()
        for c in self.coeffs.values():
            out |= c.params()
        return out

    def __add__(self, other) -> "RadialPoly":
        if not isinstance(other, RadialPoly):
            return NotImplemented
        merged = dict(self.coeffs)
        for exp, coef in other.coeffs.items():
            new = merged.get(exp)
            new = coef if new is None else new + coef
            if new.is_zero:
                merged.pop(exp, None)
            else:
                merged[exp] = new
        return RadialPoly(merged)

    def __neg__(self) -> "RadialPoly":
        return RadialPoly({e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other) -> "RadialPoly":
        return self + (-other)

    def scale(self, scalar) -> "RadialPoly":
        if isinstance(scalar, (int, Fraction, _QTYPE)) and scalar == 0:
            return RadialPoly()
        return RadialPoly({e: c * scalar for e, c in self.coeffs.items()})

    def shift_r(self, k: int) -> "RadialPoly":
        if k == 0:
            return self
        return RadialPoly({e + k: c for e, c in self.coeffs.items()})

    def subs(self, mapping: Mapping[str, ParamPoly]) -> "RadialPoly":
        return RadialPoly({e: c.subs(mapping) for e, c in self.coeffs.items()})

    def subs_frac(self, mapping: Mapping[str, ParamFrac]) -> tuple:
        """Returns (RadialPoly numerator, FactoredDen common denominator)."""
        pairs = {e: c.subs_frac(mapping) for e, c in self.coeffs.items()}
        den = FactoredDen()
        for _, (_, d) in pairs.items():
            den = den.lcm(d)
        out = {}
        for e, (num, d) in pairs.items():
            out[e] = num * d.cofactor(den)
        return RadialPoly(out), den

    def eval(self, r: Fraction, values: Mapping[str, Fraction],
             pi_value: Fraction) -> Fraction:
        total = Fraction(0)
        for e, c in self.coeffs.items():
            total += c.eval(values, pi_value) * r ** e
        return total

    def eval_float(self, r: float, values: Mapping[str, float],
                   pi_value: Optional[float] = None) -> float:
        import math
        pi_value = math.pi if pi_value is None else pi_value
        total = 0.0
        for e, c in self.coeffs.items():
            total += c.eval_float(values, pi_value) * r ** e
        return total

    def __eq__(self, other) -> bool:
        if not isinstance(other, RadialPoly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for e in sorted(self.coeffs, reverse=True):
            c = self.coeffs[e]
            rpart = "" if e == 0 else ("r" if e == 1 else f"r^{e}")
            ctext = str(c)
            if rpart:
                if ctext == "1":
                    parts.append(rpart)
                elif ctext == "-1":
                    parts.append(f"-{rpart}")
                else:
                    if " + " in ctext or " - " in ctext:
                        ctext = f"({ctext})"
                    parts.append(f"{ctext}*{rpart}")
            else:
                parts.append(f"({ctext})" if (" + " in ctext or " - " in ctext) else ctext)
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def __repr__(self) -> str:
        return f"RadialPoly({self})"


def eval_at_2pi(series: Union[TrigSeries, FracSeries]):
    """Evaluate at theta = 2*pi: sin -> 0, cos -> 1, theta^a -> (2*pi)^a.

    For a plain TrigSeries returns a RadialPoly; for a FracSeries returns
    (RadialPoly, FactoredDen).  The pi-degree of each output coefficient is
    at most the coefficient's pi-degree plus the theta exponent.
    """
    if isinstance(series, FracSeries):
        poly = eval_at_2pi(series.num)
        if poly.is_zero:
            return poly, FactoredDen()
        return poly, series.den
    out = RadialPoly()
    for (a, e, b, _c), coef in series.terms.items():
        if b:
            continue
        contrib = (coef * Fraction(2 ** a)).shift_pi(a)
        out = out + RadialPoly({e: contrib})
    return out


def eval_at_theta0(series: Union[TrigSeries, FracSeries]):
    """Evaluate at theta = 0: sin -> 0, cos -> 1, theta -> 0."""
    if isinstance(series, FracSeries):
        poly = eval_at_theta0(series.num)
        if poly.is_zero:
            return poly, FactoredDen()
        return poly, series.den
    out = RadialPoly()
    for (a, e, b, _c), coef in series.terms.items():
        if a or b:
            continue
        out = out + RadialPoly({e: coef})
    return out
