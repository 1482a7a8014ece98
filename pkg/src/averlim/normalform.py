"""Transformation of a perturbed planar center to the averaging normal form.

Given a system

    dx/dt = -y + (higher order)  + sum_j eps^j p_j(x, y),
    dy/dt =  x + (higher order)  + sum_j eps^j q_j(x, y),

the scaling x = eps*X, y = eps*Y followed by polar coordinates X = r*cos,
Y = r*sin turns dr/dtheta into a quotient H1 / (r + H2) of polynomials in
(eps, r, sin, cos).  When the eps-constant part of the quotient vanishes
(no constant terms in the first-order perturbation), a geometric-series
expansion in eps yields the normal form

    dr/dtheta = sum_{i=1..k} eps^i F_i(theta, r) + O(eps^(k+1)),

where each F_i is a trigonometric series, Laurent in r with r-exponents in
[-(i-1), i*n2 - (i-1)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Mapping, Optional, Sequence, Tuple

from .errors import (
    DenominatorNotUnitError,
    F0NonzeroError,
    StructuralViolation,
    SystemShapeError,
)
from .symcore import (
    FactoredDen,
    FracSeries,
    ParamFrac,
    ParamPoly,
    TrigSeries,
    XYPoly,
    parse_poly,
)


@dataclass(frozen=True)
class SystemSpec:
    """A perturbed planar system with canonical center linear part (-y, x).

    ``perturbations[s-1]`` holds the pair (p_s, q_s) multiplying eps^s; a
    requested averaging order beyond the supplied perturbations treats the
    missing ones as zero.
    """

    pbar: XYPoly
    qbar: XYPoly
    perturbations: Tuple[Tuple[XYPoly, XYPoly], ...]
    order: int

    def __post_init__(self):
        if self.order < 1:
            raise SystemShapeError("averaging order must be >= 1")
        object.__setattr__(self, "perturbations", tuple(tuple(pq) for pq in self.perturbations))
        for poly, name, want_x, want_y in (
            (self.pbar, "unperturbed dx/dt", 0, -1),
            (self.qbar, "unperturbed dy/dt", 1, 0),
        ):
            if not poly.coeff(0, 0).is_zero:
                raise SystemShapeError(f"{name} has a constant term; the center must sit at the origin")
            if poly.coeff(1, 0) != ParamPoly.const(want_x) or poly.coeff(0, 1) != ParamPoly.const(want_y):
                raise SystemShapeError(
                    f"{name} must have linear part {'-y' if want_y else 'x'};"
                    " apply the linear change of variables first"
                )

    @classmethod
    def from_strings(cls, pbar: str, qbar: str,
                     perturbations: Sequence[Tuple[str, str]],
                     order: int) -> "SystemSpec":
        return cls(
            parse_poly(pbar),
            parse_poly(qbar),
            tuple((parse_poly(dx), parse_poly(dy)) for dx, dy in perturbations),
            order,
        )

    @property
    def n1(self) -> int:
        return max(self.pbar.degree(), self.qbar.degree(), 1)

    @property
    def n2(self) -> int:
        degs = [max(p.degree(), q.degree()) for p, q in self.perturbations
                if not (p.is_zero and q.is_zero)]
        return max(degs, default=0)

    @property
    def degree_bound(self) -> int:
        """Effective degree used in the structural bounds N_i <= i * n2.

        The theory assumes n2 >= max(n1, 2); for degenerate inputs the bound
        is taken with the effective value so the engine check stays sound.
        """
        return max(self.n2, self.n1, 2)

    def params(self) -> frozenset:
        out = self.pbar.params() | self.qbar.params()
        for p, q in self.perturbations:
            out |= p.params() | q.params()
        return out


def _xy_to_polar_eps(poly: XYPoly, eps_shift: int, orders: dict):
    """Accumulate poly(eps*r*C, eps*r*S) * eps^eps_shift into ``orders``.

    A monomial c * x^a y^b of degree t = a + b lands at eps-order
    t + eps_shift with the trig factor c * r^t * C^a * S^b.
    """
    for (a, b), coef in poly.terms.items():
        order = a + b + eps_shift
        term = TrigSeries.term(coef, r=a + b, sin=b, cos=a).reduce_cos()
        orders[order] = orders.get(order, TrigSeries.zero()) + term


class PolarQuotient:
    """dr/dtheta = H1 / (r + H2), exact in (eps, r, sin, cos).

    ``h1`` and ``h2`` are lists of trigonometric series indexed by eps-power;
    no truncation is applied, so the quotient represents the input system
    exactly.
    """

    __slots__ = ("h1", "h2")

    def __init__(self, h1: Sequence[TrigSeries], h2: Sequence[TrigSeries]):
        self.h1 = _trim(list(h1))
        self.h2 = _trim(list(h2))

    def eval_float(self, theta: float, r: float, eps: float,
                   values: Mapping[str, float]) -> float:
        num = 0.0
        for i, series in enumerate(self.h1):
            num += eps ** i * series.eval_float(theta, r, values)
        den = r
        for i, series in enumerate(self.h2):
            den += eps ** i * series.eval_float(theta, r, values)
        return num / den


def _trim(series_list: List[TrigSeries]) -> List[TrigSeries]:
    while series_list and series_list[-1].is_zero:
        series_list.pop()
    return series_list or [TrigSeries.zero()]


def to_polar_quotient(sys: SystemSpec) -> PolarQuotient:
    """Exact polar form of the eps-scaled system.

    H1 = r * (C * dX + S * dY) and r + H2 = C * dY - S * dX, where dX, dY are
    the scaled right-hand sides.  The center linear part cancels identically
    in H1 and produces the leading r of the denominator.
    """
    dx: dict = {}
    dy: dict = {}
    _xy_to_polar_eps(sys.pbar, -1, dx)
    _xy_to_polar_eps(sys.qbar, -1, dy)
    for s, (p, q) in enumerate(sys.perturbations, start=1):
        _xy_to_polar_eps(p, s - 1, dx)
        _xy_to_polar_eps(q, s - 1, dy)

    cos = TrigSeries.term(1, cos=1)
    sin = TrigSeries.term(1, sin=1)
    top = max(list(dx) + list(dy), default=0)
    h1 = []
    h2 = []
    for i in range(top + 1):
        xi = dx.get(i, TrigSeries.zero())
        yi = dy.get(i, TrigSeries.zero())
        h1.append((cos * xi + sin * yi).shift_r(1))
        h2.append(cos * yi - sin * xi)
    # the canonical linear part contributes exactly r to the denominator
    h2[0] = h2[0] - TrigSeries.term(1, r=1)
    return PolarQuotient(h1, h2)


def check_f0(quotient: PolarQuotient) -> None:
    """Verify that the unperturbed term F0 of the normal form vanishes.

    Raises :class:`F0NonzeroError` carrying the offending quotient
    F0 = H1_0 / (r + H2_0) otherwise.
    """
    if quotient.h1[0].is_zero:
        return
    denominator = TrigSeries.term(1, r=1) + quotient.h2[0]
    raise F0NonzeroError(quotient.h1[0], denominator)


@dataclass
class NormalForm:
    """The series F_1..F_k of dr/dtheta = sum eps^i F_i + O(eps^(k+1))."""

    order: int
    F: List[FracSeries]
    n1: int
    n2: int
    degree_bound: int

    def f_at(self, i: int) -> FracSeries:
        """F_i for 1 <= i <= order."""
        if not 1 <= i <= self.order:
            raise IndexError(f"order {i} outside 1..{self.order}")
        return self.F[i - 1]

    def subs_frac(self, mapping: Mapping[str, ParamFrac]) -> "NormalForm":
        return NormalForm(self.order, [f.subs_frac(mapping) for f in self.F],
                          self.n1, self.n2, self.degree_bound)

    def validate(self) -> None:
        """Structural invariants from the theory; failure is an engine bug."""
        for i, f in enumerate(self.F, start=1):
            if f.is_zero:
                continue
            if not f.theta_free():
                raise StructuralViolation(f"F_{i} contains an explicit theta power")
            if f.min_r_exp() < -(i - 1):
                raise StructuralViolation(
                    f"F_{i} has r-exponent {f.min_r_exp()} < -(i-1) = {-(i - 1)}")
            if f.max_r_exp() > i * self.degree_bound - (i - 1):
                raise StructuralViolation(
                    f"F_{i} has r-degree {f.max_r_exp() + i - 1} beyond i*n2 = {i * self.degree_bound}")


def taylor_in_eps(quotient: PolarQuotient, order: int,
                  n1: int = 1, n2: int = 0,
                  degree_bound: Optional[int] = None) -> NormalForm:
    """Expand H1 / (r + H2) as a power series in eps, truncated at ``order``.

    Uses the geometric series (H1/r) * sum_h (-H2/r)^h, which is valid once
    H2 has no eps-constant part; this is asserted (it cannot fail after the
    F0 gate, since a nonzero eps-constant part of H2 forces one in H1).
    """
    if order < 1:
        raise ValueError("expansion order must be >= 1")
    if not quotient.h1[0].is_zero:
        check_f0(quotient)
    if not quotient.h2[0].is_zero:
        raise DenominatorNotUnitError(
            "H2 has an eps-constant term; the geometric expansion does not apply")

    h1r = [t.shift_r(-1) for t in quotient.h1[: order + 1]]
    h2r = [(-t).shift_r(-1) for t in quotient.h2[: order + 1]]

    geo = [TrigSeries.zero() for _ in range(order + 1)]
    geo[0] = TrigSeries.one()
    power = geo[:]
    for _ in range(1, order):
        power = _eps_mul(power, h2r, order)
        if all(t.is_zero for t in power):
            break
        geo = _eps_add(geo, power)

    expansion = _eps_mul(h1r, geo, order)
    if not expansion[0].is_zero:
        raise StructuralViolation("eps-constant term survived the F0 gate")

    F = [FracSeries(expansion[i]) for i in range(1, order + 1)]
    if degree_bound is None:
        degree_bound = max(n2, n1, 2)
    nf = NormalForm(order, F, n1, n2, degree_bound)
    nf.validate()
    return nf


def _eps_add(a: List[TrigSeries], b: List[TrigSeries]) -> List[TrigSeries]:
    n = max(len(a), len(b))
    out = []
    for i in range(n):
        x = a[i] if i < len(a) else TrigSeries.zero()
        y = b[i] if i < len(b) else TrigSeries.zero()
        out.append(x + y)
    return out


def _eps_mul(a: List[TrigSeries], b: List[TrigSeries], order: int) -> List[TrigSeries]:
    out = [TrigSeries.zero() for _ in range(order + 1)]
    for i, x in enumerate(a):
        if x.is_zero or i > order:
            continue
        for j, y in enumerate(b):
            if i + j > order:
                break
            if y.is_zero:
                continue
            out[i + j] = out[i + j] + x * y
    return out


def normalize(sys: SystemSpec, order: Optional[int] = None) -> NormalForm:
    """Algorithmic STEP 1: system -> normal form F_1..F_k.

    Raises :class:`F0NonzeroError` when the first-order perturbation carries
    constant terms (the unperturbed term of the normal form then survives).
    """
    quotient = to_polar_quotient(sys)
    check_f0(quotient)
    return taylor_in_eps(quotient, order or sys.order, sys.n1, sys.n2,
                         sys.degree_bound)
