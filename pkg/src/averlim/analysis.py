"""Post-processing of averaged functions.

Normalization r^nu * f = fbar, structural bound checks, Descartes sign
bounds, Jacobian-rank independence checks, and the staged linear elimination
of parameters used to enforce f_1 = ... = f_{h-1} = 0 before computing f_h.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import (
    CyclicSubstitution,
    IndeterminateSign,
    NotLinearlySolvable,
    StructuralViolation,
)
from .symcore import (
    FactoredDen,
    FracSeries,
    ParamFrac,
    ParamPoly,
    PiPoly,
    _cancel_factors,
    parse_assignment,
)
from .symcore import _mono_divide as symcore_mono_divide
from .symcore import _mono_unit as symcore_mono_unit
from .trigcalc import RadialPoly

# rational enclosure of pi, tight enough to decide any sign that is not an
# exact cancellation at the 1e-20 scale
PI_LO = Fraction(31415926535897932384, 10 ** 19)
PI_HI = Fraction(31415926535897932385, 10 ** 19)


@dataclass(frozen=True)
class AveragedFunction:
    """An averaged function in normalized form: r^nu * f = fbar / den.

    ``fbar`` is a polynomial in r (non-negative exponents) over PiPoly;
    ``den`` is a pi-free parameter-polynomial denominator (trivial except
    after substitutions that divide by parameter expressions).
    """

    order: int
    nu: int
    fbar: RadialPoly
    den: FactoredDen = field(default_factory=FactoredDen)

    @property
    def N(self) -> int:
        return self.fbar.max_exp()

    @property
    def pi_degree(self) -> int:
        return self.fbar.pi_degree()

    @property
    def is_zero(self) -> bool:
        return self.fbar.is_zero

    def coeff(self, exp: int) -> PiPoly:
        return self.fbar.coeff(exp)

    def nonzero_exponents(self) -> List[int]:
        return self.fbar.exponents()

    def params(self) -> frozenset:
        return self.fbar.params() | self.den.params()

    def scaled_out(self) -> RadialPoly:
        """fbar multiplied back by the denominator (for cross-multiplied
        comparisons against published polynomial forms)."""
        if self.den.is_one:
            return self.fbar
        return self.fbar.scale(self.den.as_poly())

    def equals_poly(self, expected: RadialPoly,
                    expected_den: Optional[ParamPoly] = None) -> bool:
        """Symbolic equality with ``expected / expected_den``, cross-multiplied."""
        mine = self.fbar
        theirs = expected
        if expected_den is not None:
            mine = mine.scale(expected_den)
        if not self.den.is_one:
            theirs = theirs.scale(self.den.as_poly())
        return mine == theirs

    def __str__(self) -> str:
        body = str(self.fbar)
        if not self.den.is_one:
            body = f"({body}) / ({self.den})"
        if self.nu:
            body = f"r^-{self.nu} * [{body}]"
        return body


def normalize_f(f: RadialPoly, order: int, degree_bound: int,
                den: FactoredDen = FactoredDen()) -> AveragedFunction:
    """Shift a Laurent averaged function into (nu, fbar) and check the
    structural bounds nu <= i-1, deg fbar <= i*n2, pi-degree <= i.

    A violation indicates an engine defect, never bad user input.
    """
    if f.is_zero:
        return AveragedFunction(order, 0, f, FactoredDen())
    nu = max(0, -f.min_exp())
    fbar = f.shift_r(nu)
    if nu > order - 1:
        raise StructuralViolation(
            f"f_{order}: pole order nu = {nu} exceeds i-1 = {order - 1}")
    if fbar.max_exp() > order * degree_bound:
        raise StructuralViolation(
            f"f_{order}: degree {fbar.max_exp()} exceeds i*n2 = {order * degree_bound}")
    if fbar.pi_degree() > order:
        raise StructuralViolation(
            f"f_{order}: pi-degree {fbar.pi_degree()} exceeds i = {order}")
    return AveragedFunction(order, nu, fbar, den)


# ---------------------------------------------------------------------------
# Substitution maps
# ---------------------------------------------------------------------------


class SubstitutionMap:
    """An ordered, triangular list of parameter assignments.

    Assignments are applied strictly in order, each one rewriting the result
    of the previous ones.  Triangularity is enforced: a parameter may not
    appear in its own right-hand side nor in any later one, so after
    application it is fully eliminated.  Values may be fractions whose
    denominators are pi-free parameter polynomials (needed when a linear
    solve divides by a symbolic coefficient).
    """

    __slots__ = ("assignments",)

    def __init__(self, assignments: Sequence[Tuple[str, Union[ParamFrac, ParamPoly, Fraction, int]]] = ()):
        cooked: List[Tuple[str, ParamFrac]] = []
        for name, value in assignments:
            cooked.append((name, ParamFrac.of(value)))
        for idx, (name, _) in enumerate(cooked):
            for later, (other, value) in enumerate(cooked[idx:]):
                if name in value.params():
                    raise CyclicSubstitution(
                        f"parameter {name!r} appears in the right-hand side of "
                        f"{other!r} at or after its own assignment")
        self.assignments = tuple(cooked)

    @classmethod
    def parse(cls, texts: Sequence[str]) -> "SubstitutionMap":
        return cls([parse_assignment(t) for t in texts])

    def chain(self, other: "SubstitutionMap") -> "SubstitutionMap":
        """Sequential composition self; other (triangularity re-checked)."""
        return SubstitutionMap(tuple(self.assignments) + tuple(other.assignments))

    def as_mapping(self) -> Dict[str, ParamFrac]:
        """Collapse the ordered assignments into one simultaneous mapping by
        forward substitution (later assignments rewritten into earlier ones).
        """
        mapping: Dict[str, ParamFrac] = {}
        for name, value in self.assignments:
            mapping = {k: _frac_subs(v, {name: value}) for k, v in mapping.items()}
            mapping[name] = value
        return mapping

    def __len__(self) -> int:
        return len(self.assignments)

    def __iter__(self):
        return iter(self.assignments)

    def __str__(self) -> str:
        return "; ".join(f"{name} = {value}" for name, value in self.assignments)

    def __repr__(self) -> str:
        return f"SubstitutionMap({self})"


def _frac_subs(value: ParamFrac, mapping: Mapping[str, ParamFrac]) -> ParamFrac:
    out = value.num.subs_frac(mapping)
    for poly, exp in value.den.factors:
        sub = poly.subs_frac(mapping)
        for _ in range(exp):
            if not sub.den.is_one:
                out = out * ParamFrac(sub.den.as_poly())
            out = out.divide_by_poly(sub.num)
    return out


def apply_substitutions(target, subs: SubstitutionMap):
    """Exact substitution into an averaged function or a series carrier.

    Returns the same type as ``target`` (AveragedFunction, FracSeries, or any
    object exposing ``subs_frac``); the result is re-canonicalized, and for an
    averaged function the pole order nu is recomputed (a substitution can
    cancel leading or trailing coefficients).
    """
    mapping = subs.as_mapping()
    if not mapping:
        return target
    if isinstance(target, AveragedFunction):
        poly, extra_den = target.fbar.subs_frac(mapping)
        den = extra_den
        num_scale = ParamPoly.one()
        for factor, exp in target.den.factors:
            sub = factor.subs_frac(mapping)
            content, fden = FactoredDen.of(sub.num, exp)
            den = den * fden
            num_scale = num_scale * sub.den.as_poly() ** exp * (1 / content)
        poly = poly.scale(num_scale) if num_scale != ParamPoly.one() else poly
        poly, den = _reduce_radial(poly, den)
        if poly.is_zero:
            return AveragedFunction(target.order, 0, poly, FactoredDen())
        laurent = poly.shift_r(-target.nu)
        nu = max(0, -laurent.min_exp())
        return AveragedFunction(target.order, nu, laurent.shift_r(nu), den)
    if hasattr(target, "subs_frac"):
        return target.subs_frac(mapping)
    raise TypeError(f"cannot substitute into {type(target).__name__}")


def _reduce_radial(poly: RadialPoly, den: FactoredDen):
    if den.is_one or poly.is_zero:
        return poly, FactoredDen() if poly.is_zero else den
    exps = poly.exponents()
    layout = []
    flat: List[ParamPoly] = []
    for e in exps:
        coef = poly.coeff(e)
        layout.append((e, len(coef.coeffs)))
        flat.extend(coef.coeffs)
    new_flat, new_den = _cancel_factors(flat, den)
    if new_den == den:
        return poly, den
    out = {}
    pos = 0
    for e, width in layout:
        out[e] = PiPoly(tuple(new_flat[pos:pos + width]))
        pos += width
    return RadialPoly(out), new_den


# ---------------------------------------------------------------------------
# Descartes bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DescartesReport:
    """Sign data of fbar's nonzero coefficients and the variation bound."""

    exponents: Tuple[int, ...]
    signs: Tuple[str, ...]          # "+", "-", or "indep"
    variations: Optional[int]       # None in declared-independence mode
    bound: int
    mode: str                       # "numeric" or "independent"

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "exponents": list(self.exponents),
            "signs": list(self.signs),
            "variations": self.variations,
            "bound": self.bound,
        }


def _pi_interval_sign(coef: PiPoly, values: Mapping[str, Fraction]) -> int:
    """Rigorous sign of coef at the given rational point, with pi enclosed in
    [PI_LO, PI_HI].  Raises IndeterminateSign if the enclosure straddles 0."""
    lo = Fraction(0)
    hi = Fraction(0)
    for k, c in enumerate(coef.coeffs):
        v = c.eval(values)
        plo, phi = PI_LO ** k, PI_HI ** k
        if v >= 0:
            lo += v * plo
            hi += v * phi
        else:
            lo += v * phi
            hi += v * plo
    if lo > 0:
        return 1
    if hi < 0:
        return -1
    if lo == hi == 0:
        return 0
    raise IndeterminateSign(
        "sign of coefficient cannot be separated from zero at this point")


def descartes_bound(favg: Union[AveragedFunction, RadialPoly],
                    values: Optional[Mapping[str, Fraction]] = None,
                    assume_independent: bool = False) -> DescartesReport:
    """Upper bound on positive real roots by sign variations.

    Numeric mode instantiates the parameters at ``values`` (missing
    parameters are zero) and counts sign variations of the nonzero
    coefficients.  With ``assume_independent`` the coefficients are treated
    as freely choosable independent constants, so the reachable bound is
    (number of nonzero coefficients) - 1; justify the flag with
    :func:`independence_rank` first.
    """
    poly = favg.fbar if isinstance(favg, AveragedFunction) else favg
    exponents = poly.exponents()
    if assume_independent:
        exps = tuple(exponents)
        return DescartesReport(exps, tuple("indep" for _ in exps), None,
                               max(0, len(exps) - 1), "independent")
    values = values or {}
    signed: List[Tuple[int, int]] = []
    for e in exponents:
        sign = _pi_interval_sign(poly.coeff(e), values)
        if sign:
            signed.append((e, sign))
    variations = sum(1 for (_, s1), (_, s2) in zip(signed, signed[1:]) if s1 * s2 < 0)
    return DescartesReport(
        tuple(e for e, _ in signed),
        tuple("+" if s > 0 else "-" for _, s in signed),
        variations,
        variations,
        "numeric",
    )


# ---------------------------------------------------------------------------
# Independence (generic Jacobian rank)
# ---------------------------------------------------------------------------


def _rank_at_point(rows: Sequence[PiPoly], params: Sequence[str],
                   rng: random.Random) -> int:
    point = {name: Fraction(rng.randint(-99, 99), rng.randint(1, 40))
             for name in _all_params(rows)}
    pi_value = Fraction(rng.randint(200, 400), 100)  # generic stand-in for pi
    matrix = [[row.derivative(p).eval(point, pi_value) for p in params]
              for row in rows]
    return _fraction_rank(matrix)


def _all_params(rows: Sequence[PiPoly]) -> frozenset:
    out: frozenset = frozenset()
    for row in rows:
        out |= row.params()
    return out


def _fraction_rank(matrix: List[List[Fraction]]) -> int:
    m = [row[:] for row in matrix]
    rank = 0
    cols = len(m[0]) if m else 0
    row = 0
    for col in range(cols):
        pivot = next((r for r in range(row, len(m)) if m[r][col] != 0), None)
        if pivot is None:
            continue
        m[row], m[pivot] = m[pivot], m[row]
        pv = m[row][col]
        for r in range(len(m)):
            if r != row and m[r][col] != 0:
                factor = m[r][col] / pv
                m[r] = [a - factor * b for a, b in zip(m[r], m[row])]
        row += 1
        rank += 1
        if row == len(m):
            break
    return rank


def independence_rank(coeffs: Sequence[Union[ParamPoly, PiPoly]],
                      params: Sequence[str],
                      seed: int = 0, trials: int = 3) -> int:
    """Generic rank of the Jacobian d(coeffs)/d(params).

    Evaluated at ``trials`` random rational points (with a rational stand-in
    for pi); the maximum observed rank is reported.  A random point can only
    under-estimate the generic rank, hence the retries.
    """
    rows = [c if isinstance(c, PiPoly) else PiPoly.const(c) for c in coeffs]
    rng = random.Random(seed)
    best = 0
    for _ in range(max(1, trials)):
        best = max(best, _rank_at_point(rows, list(params), rng))
        if best == min(len(rows), len(params)):
            break
    return best


def coefficient_rows(favg: AveragedFunction) -> List[PiPoly]:
    """The nonzero r-coefficients of fbar, lowest exponent first."""
    return [favg.coeff(e) for e in favg.nonzero_exponents()]


# ---------------------------------------------------------------------------
# Linear parameter elimination (the staged f_h = 0 workflow)
# ---------------------------------------------------------------------------


def _linear_split(poly: ParamPoly, param: str) -> Tuple[ParamPoly, ParamPoly]:
    """Write poly = a * param + b with a, b free of param; a may be zero."""
    if poly.degree_in(param) > 1:
        raise NotLinearlySolvable(
            f"parameter {param!r} occurs with degree >= 2")
    unit = symcore_mono_unit(param)
    a_terms: dict = {}
    b_terms: dict = {}
    for mono, coef in poly.terms.items():
        reduced = symcore_mono_divide(mono, unit)
        if reduced is not None:
            a_terms[reduced] = coef
        else:
            b_terms[mono] = coef
    return ParamPoly(a_terms), ParamPoly(b_terms)


def solve_linear_param(favg: AveragedFunction, param: str,
                       exponent: Optional[int] = None,
                       allow_poly_coeff: bool = False) -> Tuple[str, ParamFrac]:
    """Solve coefficient equations of fbar = 0 for one parameter.

    With ``exponent`` given, only the r^exponent coefficient is solved (the
    published workflow eliminates one parameter per coefficient, top power
    first, and re-substitutes); otherwise the parameter must admit the same
    solution in every (r, pi)-coefficient it appears in.  By default its
    linear coefficient must be rational (pi-free); with ``allow_poly_coeff``
    a pi-free parameter polynomial coefficient is allowed and the solution is
    a fraction.  Denominators are nonzero, so solving the numerator suffices.
    """
    solution: Optional[ParamFrac] = None
    found = False
    exponents = favg.nonzero_exponents() if exponent is None else [exponent]
    for e in exponents:
        coef = favg.coeff(e)
        for k in range(coef.pi_degree + 1):
            poly = coef.coeff(k)
            if param not in poly.params():
                continue
            found = True
            a, b = _linear_split(poly, param)
            if a.is_zero:
                raise NotLinearlySolvable(
                    f"parameter {param!r} does not occur linearly in a "
                    "solvable position")
            if not a.is_const and not allow_poly_coeff:
                raise NotLinearlySolvable(
                    f"linear coefficient of {param!r} is not rational: {a}")
            value = ParamFrac(-b).divide_by_poly(a) if not a.is_const \
                else ParamFrac(-b * (1 / a.const_value()))
            if solution is None:
                solution = value
            elif solution != value:
                raise NotLinearlySolvable(
                    f"eliminating {param!r} leaves a nonzero residue: "
                    f"inconsistent solutions across coefficients")
    if not found:
        where = "fbar" if exponent is None else f"the r^{exponent} coefficient"
        raise NotLinearlySolvable(f"parameter {param!r} does not appear in {where}")
    assert solution is not None
    return param, solution


def solve_stage(favg: AveragedFunction, params: Sequence[str],
                allow_poly_coeff: bool = False) -> SubstitutionMap:
    """Solve fbar = 0 for ``params`` sequentially, re-substituting after each.

    Mirrors the published workflow: each parameter is solved from the highest
    r-coefficient it occurs in and eliminated from the averaged function
    before the next one is solved.
    """
    current = favg
    assignments: List[Tuple[str, ParamFrac]] = []
    for param in params:
        hits = [e for e in current.nonzero_exponents()
                if any(param in current.coeff(e).coeff(k).params()
                       for k in range(current.coeff(e).pi_degree + 1))]
        if not hits:
            raise NotLinearlySolvable(f"parameter {param!r} does not appear in fbar")
        name, value = solve_linear_param(current, param, hits[-1], allow_poly_coeff)
        step = SubstitutionMap([(name, value)])
        current = apply_substitutions(current, step)
        assignments.append((name, value))
    return SubstitutionMap(assignments)


def derive_stage_substitutions(favg: AveragedFunction,
                               allow_poly_coeff: bool = False,
                               prefer_isolated: bool = True) -> SubstitutionMap:
    """Derive a substitution map making fbar identically zero, if possible.

    For each nonzero coefficient (highest r-power first) a linearly occurring
    parameter is chosen, preferring parameters isolated to a single
    coefficient, then lowest-order/lexicographically-smallest names.  Raises
    NotLinearlySolvable if some coefficient admits no linear candidate.
    """
    current = favg
    assignments: List[Tuple[str, ParamFrac]] = []
    while not current.is_zero:
        exps = current.nonzero_exponents()
        target = exps[-1]
        coef = current.coeff(target)
        candidates = set()
        for k in range(coef.pi_degree + 1):
            poly = coef.coeff(k)
            for p in poly.params():
                if poly.degree_in(p) == 1:
                    a, _ = _linear_split(poly, p)
                    if a.is_const or allow_poly_coeff:
                        candidates.add(p)
        if not candidates:
            raise NotLinearlySolvable(
                f"no linear candidate parameter in the r^{target} coefficient")
        if prefer_isolated:
            isolated = {p for p in candidates
                        if all(p not in current.coeff(e).params()
                               for e in exps if e != target)}
            if isolated:
                candidates = isolated
        chosen = min(candidates, key=_param_sort_key)
        name, value = solve_linear_param(current, chosen, target, allow_poly_coeff)
        step = SubstitutionMap([(name, value)])
        current = apply_substitutions(current, step)
        assignments.append((name, value))
    return SubstitutionMap(assignments)


def _param_sort_key(name: str):
    parts = name.split("_")
    nums = []
    for p in parts[1:]:
        if p.isdigit():
            nums.append(int(p))
    return (nums, name)
