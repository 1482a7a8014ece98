"""Numeric confirmation of predicted limit cycles.

Instantiates the exact polar quotient dr/dtheta = H1 / (r + H2) at rational
parameter values and a concrete eps, integrates it over one revolution with
classical fixed-step RK4 plus Richardson step-halving, and locates fixed
points of the 2*pi return map by bisection.  A simple zero rbar of the first
nonvanishing averaged function corresponds to a fixed point r(eps) with
r(eps) -> rbar as eps -> 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Mapping, Optional, Tuple, Union

from .errors import BlowUpError, IntegrationError, NoSignChange
from .normalform import PolarQuotient, SystemSpec, to_polar_quotient

Number = Union[int, float, Fraction]


def _fold_series(quotient: PolarQuotient, side: int, eps: float,
                 values: Mapping[str, float]) -> list:
    """Collapse one side of the quotient at fixed eps to float trig terms.

    Coefficient folding happens once per run; each returned entry is
    (r_exp, sin_exp, cos_exp, coefficient).
    """
    acc: Dict[tuple, float] = {}
    series_list = quotient.h1 if side == 0 else quotient.h2
    for i, series in enumerate(series_list):
        w = eps ** i
        if w == 0.0 and i > 0:
            continue
        for (a, e, b, c), coef in series.terms.items():
            # theta powers never occur in the polar quotient
            key = (e, b, c)
            acc[key] = acc.get(key, 0.0) + w * coef.eval_float(values)
    return [(e, b, c, v) for (e, b, c), v in acc.items() if v != 0.0]


class NumericSystem:
    """A system instantiated for numeric integration of dr/dtheta.

    ``param_values`` maps parameter names to rationals; unmentioned
    parameters are zero.  The admissible domain is r in (r_min, r_max); the
    denominator r + H2 must stay away from zero along the integration.
    """

    def __init__(self, sys: SystemSpec, param_values: Mapping[str, Number],
                 eps: Number, r_min: float = 1e-9, r_max: float = 1e9,
                 den_floor: float = 1e-8):
        self.system = sys
        self.eps = float(eps)
        self.r_min = r_min
        self.r_max = r_max
        self.den_floor = den_floor
        floats = {name: float(Fraction(v) if not isinstance(v, float) else v)
                  for name, v in param_values.items()}
        quotient = to_polar_quotient(sys)
        self._num = _fold_series(quotient, 0, self.eps, floats)
        self._den = _fold_series(quotient, 1, self.eps, floats)

    def rhs(self, theta: float, r: float) -> float:
        s = math.sin(theta)
        c = math.cos(theta)
        num = 0.0
        for e, b, cc, v in self._num:
            num += v * r ** e * s ** b * c ** cc
        den = r
        for e, b, cc, v in self._den:
            den += v * r ** e * s ** b * c ** cc
        if abs(den) < self.den_floor:
            raise BlowUpError(f"denominator magnitude {abs(den):.2e} below floor")
        return num / den

    def _rk4_sweep(self, r0: float, steps: int) -> float:
        h = 2.0 * math.pi / steps
        r = r0
        theta = 0.0
        for _ in range(steps):
            k1 = self.rhs(theta, r)
            k2 = self.rhs(theta + 0.5 * h, r + 0.5 * h * k1)
            k3 = self.rhs(theta + 0.5 * h, r + 0.5 * h * k2)
            k4 = self.rhs(theta + h, r + h * k3)
            r += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            theta += h
            if not (self.r_min < r < self.r_max):
                raise BlowUpError(f"r = {r:.3e} left ({self.r_min}, {self.r_max})")
        return r


def poincare_return(ns: NumericSystem, r0: float, tol: float = 1e-10,
                    start_steps: int = 128, max_steps: int = 1 << 22) -> float:
    """r(2*pi) from r(0) = r0: RK4 with step halving until successive sweeps
    agree to ``tol``."""
    if not (ns.r_min < r0 < ns.r_max):
        raise BlowUpError(f"initial r0 = {r0} outside the admissible domain")
    steps = start_steps
    prev = ns._rk4_sweep(r0, steps)
    while steps <= max_steps:
        steps *= 2
        cur = ns._rk4_sweep(r0, steps)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
    raise IntegrationError(
        f"no {tol:g} agreement after {max_steps} steps (last delta "
        f"{abs(cur - prev):.2e})")


def displacement(ns: NumericSystem, r0: float, tol: float = 1e-10) -> float:
    """The return-map displacement d(r0) = r(2*pi) - r0."""
    return poincare_return(ns, r0, tol) - r0


@dataclass(frozen=True)
class CycleWitness:
    """A located fixed point of the return map near a predicted zero."""

    rbar_predicted: Optional[float]
    r_fixed: float
    eps: float
    residual: float

    def as_dict(self) -> dict:
        return {
            "rbar_predicted": self.rbar_predicted,
            "r_fixed": self.r_fixed,
            "eps": self.eps,
            "residual": self.residual,
        }


def find_fixed_point(ns: NumericSystem, bracket: Tuple[float, float],
                     rbar_predicted: Optional[float] = None,
                     tol: float = 1e-10, max_iter: int = 200) -> CycleWitness:
    """Bisect the displacement map over ``bracket`` to |d| < tol.

    Requires a sign change of the displacement over the bracket, which is
    exactly the situation near a simple zero of the first nonvanishing
    averaged function for small eps.
    """
    lo, hi = bracket
    d_lo = displacement(ns, lo, tol)
    d_hi = displacement(ns, hi, tol)
    if d_lo == 0.0:
        return CycleWitness(rbar_predicted, lo, ns.eps, 0.0)
    if d_hi == 0.0:
        return CycleWitness(rbar_predicted, hi, ns.eps, 0.0)
    if d_lo * d_hi > 0:
        raise NoSignChange(
            f"displacement has the same sign at both ends of ({lo}, {hi}): "
            f"{d_lo:.3e}, {d_hi:.3e}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        d_mid = displacement(ns, mid, tol)
        if abs(d_mid) < tol:
            return CycleWitness(rbar_predicted, mid, ns.eps, abs(d_mid))
        if d_lo * d_mid < 0:
            hi, d_hi = mid, d_mid
        else:
            lo, d_lo = mid, d_mid
    return CycleWitness(rbar_predicted, 0.5 * (lo + hi), ns.eps,
                        abs(displacement(ns, 0.5 * (lo + hi), tol)))
