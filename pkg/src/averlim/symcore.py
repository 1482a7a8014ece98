"""Exact arithmetic kernel.

The coefficient tower, bottom up:

* ``Fraction`` (stdlib) -- arbitrary-precision reduced rationals.
* ``ParamPoly`` -- sparse multivariate polynomial in named free parameters
  over rationals.  Monomials are keyed by sorted ``(name, exponent)`` tuples,
  so equality and printing never depend on interning order.
* ``FactoredDen`` / ``ParamFrac`` -- quotients of parameter polynomials whose
  denominators are kept in factored form; cancellation uses exact division
  only (no polynomial gcd).  Denominators never contain pi.
* ``PiPoly`` -- dense polynomial in the transcendental symbol pi with
  ``ParamPoly`` coefficients.  pi is never cancelled against numbers.
* ``TrigSeries`` -- finite sum of terms ``coef * theta^a * r^e * sin^b(theta)
  * cos^c(theta)`` with ``coef`` a ``PiPoly`` and ``e`` possibly negative
  (Laurent in r).  Canonical form has ``cos`` exponent <= 1, obtained by
  rewriting ``cos^2 = 1 - sin^2`` to a fixed point.
* ``FracSeries`` -- a ``TrigSeries`` divided by a ``FactoredDen``.
* ``XYPoly`` -- polynomial in the plane variables (x, y) over ``ParamPoly``;
  the carrier for input systems, produced by :func:`parse_poly`.

All values are immutable after construction and safe to share between
threads.  There is no global mutable state.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from .errors import ParseError

try:  # gmpy2.mpq is drop-in for Fraction and much faster on small rationals
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover - gmpy2 is a hard dependency normally
    _Q = Fraction

Scalar = Union[int, Fraction]

_ZERO = _Q(0)
_ONE = _Q(1)

# ---------------------------------------------------------------------------
# Packed monomials
#
# A monomial in the parameters is one integer: parameter names are interned
# into a global append-only slot table, and the exponent of the parameter at
# slot s occupies bits [16 s, 16 s + 16).  Multiplying monomials is then a
# single integer addition.  Exponents must stay below 2**16, far beyond any
# degree this engine produces.  The table only maps names to slots; all
# ordering visible in output is by parameter *name*, so results do not depend
# on interning order.
# ---------------------------------------------------------------------------

_FIELD_BITS = 16
_FIELD_MASK = (1 << _FIELD_BITS) - 1

_slot_of_name: dict = {}
_name_of_slot: list = []
_table_lock = __import__("threading").Lock()

_DECODE_CACHE: dict = {}


def _slot(name: str) -> int:
    slot = _slot_of_name.get(name)
    if slot is None:
        with _table_lock:
            slot = _slot_of_name.get(name)
            if slot is None:
                slot = len(_name_of_slot)
                _name_of_slot.append(name)
                _slot_of_name[name] = slot
    return slot


def _mono_decode(key: int) -> tuple:
    """Packed key -> tuple of (name, exponent), sorted by name."""
    cached = _DECODE_CACHE.get(key)
    if cached is not None:
        return cached
    out = []
    k = key
    slot = 0
    while k:
        exp = k & _FIELD_MASK
        if exp:
            out.append((_name_of_slot[slot], exp))
        k >>= _FIELD_BITS
        slot += 1
    out.sort()
    result = tuple(out)
    _DECODE_CACHE[key] = result
    return result


def _mono_encode(named: Iterable) -> int:
    key = 0
    for name, exp in named:
        key += exp << (_FIELD_BITS * _slot(name))
    return key


def _mono_field(key: int, slot: int) -> int:
    return (key >> (_FIELD_BITS * slot)) & _FIELD_MASK


def _mono_unit(name: str) -> int:
    """The packed monomial name**1."""
    return 1 << (_FIELD_BITS * _slot(name))


def _mono_divide(m1: int, m2: int) -> Optional[int]:
    """m1 / m2 as packed keys, or None if some exponent would go negative."""
    if m2 == 0:
        return m1
    for _name, exp in _mono_decode(m2):
        if _mono_field(m1, _slot(_name)) < exp:
            return None
    return m1 - m2


_QTYPE = type(_ONE)


def _as_q(value):
    """Coerce an exact scalar (int, Fraction, mpq) to the internal rational."""
    if type(value) is _QTYPE:
        return value
    if isinstance(value, (int, Fraction, _QTYPE)):
        return _Q(value)
    if isinstance(value, float):
        raise TypeError("floats are not exact; pass Fraction or int")
    return _Q(value)


class ParamPoly:
    """Sparse polynomial in named free parameters with rational coefficients.

    Zero coefficients are never stored; two polynomials are equal iff their
    term maps are equal.
    """

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Optional[Mapping[int, Fraction]] = None):
        clean: dict = {}
        if terms:
            for mono, coef in terms.items():
                if coef:
                    clean[mono] = coef if type(coef) is _QTYPE else _as_q(coef)
        self.terms = clean
        self._hash = None

    @classmethod
    def _from_raw(cls, terms: dict) -> "ParamPoly":
        """Internal: adopt a dict of packed-mono -> nonzero mpq without checks."""
        out = cls.__new__(cls)
        out.terms = terms
        out._hash = None
        return out

    # -- constructors ------------------------------------------------------

    @classmethod
    def const(cls, value: Scalar) -> "ParamPoly":
        value = _as_q(value)
        return cls({0: value}) if value else cls()

    @classmethod
    def var(cls, name: str) -> "ParamPoly":
        return cls({1 << (_FIELD_BITS * _slot(name)): _ONE})

    @classmethod
    def zero(cls) -> "ParamPoly":
        return cls()

    @classmethod
    def one(cls) -> "ParamPoly":
        return cls.const(1)

    # -- predicates --------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_const(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and 0 in self.terms)

    def const_value(self) -> Fraction:
        if not self.terms:
            return _ZERO
        if self.is_const:
            return self.terms[0]
        raise ValueError(f"not a constant polynomial: {self}")

    def params(self) -> frozenset:
        return frozenset(name for mono in self.terms
                         for name, _ in _mono_decode(mono))

    def degree_in(self, name: str) -> int:
        if name not in _slot_of_name:
            return 0
        slot = _slot(name)
        return max((_mono_field(mono, slot) for mono in self.terms), default=0)

    def total_degree(self) -> int:
        return max((sum(e for _, e in _mono_decode(mono)) for mono in self.terms),
                   default=0)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other) -> "ParamPoly":
        other = _coerce_poly(other)
        if other is NotImplemented:
            return NotImplemented
        if not other.terms:
            return self
        if not self.terms:
            return other
        merged = dict(self.terms)
        for mono, coef in other.terms.items():
            new = merged.get(mono, _ZERO) + coef
            if new:
                merged[mono] = new
            else:
                merged.pop(mono, None)
        out = ParamPoly.__new__(ParamPoly)
        out.terms = merged
        out._hash = None
        return out

    __radd__ = __add__

    def __neg__(self) -> "ParamPoly":
        out = ParamPoly.__new__(ParamPoly)
        out.terms = {mono: -coef for mono, coef in self.terms.items()}
        out._hash = None
        return out

    def __sub__(self, other) -> "ParamPoly":
        other = _coerce_poly(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "ParamPoly":
        other = _coerce_poly(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other) -> "ParamPoly":
        other = _coerce_poly(other)
        if other is NotImplemented:
            return NotImplemented
        if not self.terms or not other.terms:
            return ParamPoly()
        # multiply the smaller term map into the larger one
        a, b = self.terms, other.terms
        if len(a) > len(b):
            a, b = b, a
        acc: dict = {}
        get = acc.get
        for mono1, coef1 in a.items():
            for mono2, coef2 in b.items():
                mono = mono1 + mono2
                new = get(mono, _ZERO) + coef1 * coef2
                if new:
                    acc[mono] = new
                else:
                    acc.pop(mono, None)
        out = ParamPoly.__new__(ParamPoly)
        out.terms = acc
        out._hash = None
        return out

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "ParamPoly":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("polynomial powers must be non-negative integers")
        result = ParamPoly.one()
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction, _QTYPE)):
            other = ParamPoly.const(other)
        if not isinstance(other, ParamPoly):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(sorted(self.terms.items())))
        return self._hash

    # -- substitution and evaluation ----------------------------------------

    def subs(self, mapping: Mapping[str, "ParamPoly"]) -> "ParamPoly":
        """Polynomial substitution; parameters absent from ``mapping`` stay."""
        if not mapping or not (self.params() & set(mapping)):
            return self
        acc: dict = {}
        power_cache: dict = {}
        for mono, coef in self.terms.items():
            rest = mono
            replaced = None
            for name, exp in _mono_decode(mono):
                base = mapping.get(name)
                if base is None:
                    continue
                rest -= exp << (_FIELD_BITS * _slot(name))
                key = (name, exp)
                piece = power_cache.get(key)
                if piece is None:
                    piece = base ** exp
                    power_cache[key] = piece
                replaced = piece if replaced is None else replaced * piece
            if replaced is None:
                acc[mono] = acc.get(mono, _ZERO) + coef
                if not acc[mono]:
                    del acc[mono]
                continue
            for rmono, rcoef in replaced.terms.items():
                key2 = rest + rmono
                new = acc.get(key2, _ZERO) + coef * rcoef
                if new:
                    acc[key2] = new
                else:
                    acc.pop(key2, None)
        return ParamPoly(acc)

    def subs_frac(self, mapping: Mapping[str, "ParamFrac"]) -> "ParamFrac":
        """Substitution with fractional values; result is a ``ParamFrac``."""
        if not (self.params() & set(mapping)):
            return ParamFrac(self)
        # split the values into numerators and a shared denominator per
        # (name, exp) so the accumulation runs over plain polynomials
        power_cache: dict = {}

        def powered(name: str, exp: int):
            key = (name, exp)
            out = power_cache.get(key)
            if out is None:
                out = mapping[name] ** exp
                power_cache[key] = out
            return out

        pieces = []
        den = FactoredDen()
        for mono, coef in self.terms.items():
            rest = mono
            replaced = None
            part_den = FactoredDen()
            for name, exp in _mono_decode(mono):
                if name not in mapping:
                    continue
                rest -= exp << (_FIELD_BITS * _slot(name))
                piece = powered(name, exp)
                part_den = part_den * piece.den
                replaced = piece.num if replaced is None else replaced * piece.num
            if replaced is None:
                scaled = ParamPoly({mono: coef})
            else:
                scaled = ParamPoly({rest: coef}) * replaced
            pieces.append((scaled, part_den))
            den = den.lcm(part_den)
        acc: dict = {}
        for scaled, part_den in pieces:
            cof = part_den.cofactor(den)
            if not cof.is_const or cof.const_value() != 1:
                scaled = scaled * cof
            for smono, scoef in scaled.terms.items():
                new = acc.get(smono, _ZERO) + scoef
                if new:
                    acc[smono] = new
                else:
                    acc.pop(smono, None)
        return ParamFrac(ParamPoly(acc), den)

    def eval(self, values: Mapping[str, Fraction], default: Fraction = _ZERO) -> Fraction:
        total = _ZERO
        for mono, coef in self.terms.items():
            prod = coef
            for name, exp in _mono_decode(mono):
                prod *= _as_q(values.get(name, default)) ** exp
            total += prod
        return total

    def eval_float(self, values: Mapping[str, float], default: float = 0.0) -> float:
        total = 0.0
        for mono, coef in self.terms.items():
            prod = float(coef)
            for name, exp in _mono_decode(mono):
                prod *= float(values.get(name, default)) ** exp
            total += prod
        return total

    def derivative(self, name: str) -> "ParamPoly":
        if name not in _slot_of_name:
            return ParamPoly()
        shift = _FIELD_BITS * _slot(name)
        acc: dict = {}
        for mono, coef in self.terms.items():
            e = (mono >> shift) & _FIELD_MASK
            if not e:
                continue
            key = mono - (1 << shift)
            new = acc.get(key, _ZERO) + coef * e
            if new:
                acc[key] = new
            else:
                acc.pop(key, None)
        return ParamPoly(acc)

    # -- exact division -----------------------------------------------------

    def _leading(self) -> tuple:
        # packed-key order is lex with interning-order precedence: admissible
        mono = max(self.terms)
        return mono, self.terms[mono]

    def divexact(self, divisor: "ParamPoly") -> Optional["ParamPoly"]:
        """Exact quotient ``self / divisor`` or None if not divisible.

        Lead-term elimination in pure lex order: sound and complete as a
        divisibility test because the leading monomial of any multiple of
        ``divisor`` is divisible by the leading monomial of ``divisor``.
        """
        if divisor.is_zero:
            raise ZeroDivisionError("division by the zero polynomial")
        if self.is_zero:
            return ParamPoly()
        if divisor.is_const:
            c = divisor.const_value()
            return ParamPoly({m: v / c for m, v in self.terms.items()})
        dmono, dcoef = divisor._leading()
        quotient: dict = {}
        rem = self
        while rem.terms:
            rmono, rcoef = rem._leading()
            qmono = _mono_divide(rmono, dmono)
            if qmono is None:
                return None
            qcoef = rcoef / dcoef
            quotient[qmono] = quotient.get(qmono, _ZERO) + qcoef
            rem = rem - divisor * ParamPoly({qmono: qcoef})
        return ParamPoly(quotient)

    def content_and_primitive(self) -> tuple:
        """Rational content (carrying the sign of the lex-leading coefficient)
        and the primitive part, so ``self == content * primitive``."""
        if self.is_zero:
            return _ONE, self
        num_gcd = 0
        den_lcm = 1
        for coef in self.terms.values():
            num_gcd = math.gcd(num_gcd, abs(coef.numerator))
            den_lcm = den_lcm * coef.denominator // math.gcd(den_lcm, coef.denominator)
        content = _Q(int(num_gcd), int(den_lcm))
        if self._leading()[1] < 0:
            content = -content
        prim = ParamPoly({m: v / content for m, v in self.terms.items()})
        return content, prim

    # -- display -------------------------------------------------------------

    def sorted_terms(self) -> list:
        """[(named monomial, coefficient)] sorted by degree then name."""
        named = [(_mono_decode(mono), coef) for mono, coef in self.terms.items()]
        named.sort(key=lambda kv: (-sum(e for _, e in kv[0]), kv[0]))
        return named

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for mono, coef in self.sorted_terms():
            factors = []
            if coef == -1 and mono:
                sign, mag = "-", ""
            elif coef < 0:
                sign, mag = "-", str(-coef)
            else:
                sign, mag = "+", "" if (coef == 1 and mono) else str(coef)
            if mag:
                factors.append(mag)
            for name, exp in mono:
                factors.append(name if exp == 1 else f"{name}^{exp}")
            text = "*".join(factors) if factors else "1"
            parts.append((sign, text))
        first_sign, first_text = parts[0]
        out = ("-" if first_sign == "-" else "") + first_text
        for sign, text in parts[1:]:
            out += f" {sign} {text}"
        return out

    def __repr__(self) -> str:
        return f"ParamPoly({self})"


def _coerce_poly(value) -> ParamPoly:
    if isinstance(value, ParamPoly):
        return value
    if isinstance(value, (int, Fraction, _QTYPE)):
        return ParamPoly.const(value)
    return NotImplemented


class FactoredDen:
    """A denominator kept as a product of primitive parameter polynomials.

    Factors are normalized (integer coefficients with gcd 1, positive leading
    coefficient) and sorted by a canonical key, so equal denominators compare
    equal structurally.  The trivial denominator is the empty product.
    """

    __slots__ = ("factors",)

    def __init__(self, factors: Sequence[tuple] = ()):
        merged: dict = {}
        for poly, exp in factors:
            if exp == 0:
                continue
            merged[poly] = merged.get(poly, 0) + exp
        items = [(p, e) for p, e in merged.items() if e != 0]
        items.sort(key=lambda pe: pe[0].sorted_terms())
        self.factors = tuple(items)

    @classmethod
    def one(cls) -> "FactoredDen":
        return cls()

    @classmethod
    def of(cls, poly: ParamPoly, exp: int = 1) -> tuple:
        """Normalize ``poly**exp`` into (rational content ** exp, FactoredDen)."""
        if poly.is_zero:
            raise ZeroDivisionError("denominator polynomial is zero")
        content, prim = poly.content_and_primitive()
        if prim.is_const:
            return content ** exp, cls()
        return content ** exp, cls(((prim, exp),))

    @property
    def is_one(self) -> bool:
        return not self.factors

    def __mul__(self, other: "FactoredDen") -> "FactoredDen":
        if self.is_one:
            return other
        if other.is_one:
            return self
        return FactoredDen(self.factors + other.factors)

    def __pow__(self, exp: int) -> "FactoredDen":
        return FactoredDen(tuple((p, e * exp) for p, e in self.factors))

    def lcm(self, other: "FactoredDen") -> "FactoredDen":
        if self.is_one:
            return other
        if other.is_one:
            return self
        merged = dict(self.factors)
        for poly, exp in other.factors:
            merged[poly] = max(merged.get(poly, 0), exp)
        return FactoredDen(tuple(merged.items()))

    def cofactor(self, target: "FactoredDen") -> ParamPoly:
        """The polynomial ``target / self`` (target must be a multiple)."""
        have = dict(self.factors)
        out = ParamPoly.one()
        for poly, exp in target.factors:
            missing = exp - have.get(poly, 0)
            if missing < 0:
                raise ValueError("cofactor: target is not a multiple")
            if missing:
                out = out * poly ** missing
        return out

    def as_poly(self) -> ParamPoly:
        out = ParamPoly.one()
        for poly, exp in self.factors:
            out = out * poly ** exp
        return out

    def params(self) -> frozenset:
        out: frozenset = frozenset()
        for poly, _ in self.factors:
            out |= poly.params()
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, FactoredDen):
            return NotImplemented
        return self.factors == other.factors

    def __hash__(self) -> int:
        return hash(self.factors)

    def __str__(self) -> str:
        if not self.factors:
            return "1"
        parts = []
        for poly, exp in self.factors:
            body = f"({poly})"
            parts.append(body if exp == 1 else f"{body}^{exp}")
        return "*".join(parts)

    def __repr__(self) -> str:
        return f"FactoredDen({self})"


def _cancel_factors(polys: Sequence[ParamPoly], den: FactoredDen):
    """Cancel denominator factors dividing *every* polynomial in ``polys``.

    Returns (new_polys, new_den).  Used to keep common-denominator carriers
    reduced without a polynomial gcd.
    """
    if den.is_one or not polys:
        return list(polys), den
    current = list(polys)
    remaining = []
    for factor, exp in den.factors:
        while exp > 0:
            divided = []
            for p in current:
                q = p.divexact(factor)
                if q is None:
                    break
                divided.append(q)
            else:
                current = divided
                exp -= 1
                continue
            break
        if exp:
            remaining.append((factor, exp))
    return current, FactoredDen(tuple(remaining))


class ParamFrac:
    """Quotient of a ``ParamPoly`` by a ``FactoredDen`` (pi-free)."""

    __slots__ = ("num", "den")

    def __init__(self, num: ParamPoly, den: FactoredDen = FactoredDen()):
        if num.is_zero:
            den = FactoredDen()
        elif not den.is_one:
            polys, den = _cancel_factors([num], den)
            num = polys[0]
        self.num = num
        self.den = den

    @classmethod
    def of(cls, value) -> "ParamFrac":
        if isinstance(value, ParamFrac):
            return value
        if isinstance(value, ParamPoly):
            return cls(value)
        return cls(ParamPoly.const(value))

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def is_poly(self) -> bool:
        return self.den.is_one

    def as_poly(self) -> ParamPoly:
        if not self.den.is_one:
            raise ValueError(f"not a polynomial: {self}")
        return self.num

    def __add__(self, other) -> "ParamFrac":
        other = ParamFrac.of(other)
        den = self.den.lcm(other.den)
        num = self.num * self.den.cofactor(den) + other.num * other.den.cofactor(den)
        return ParamFrac(num, den)

    __radd__ = __add__

    def __neg__(self) -> "ParamFrac":
        out = ParamFrac.__new__(ParamFrac)
        out.num = -self.num
        out.den = self.den
        return out

    def __sub__(self, other) -> "ParamFrac":
        return self + (-ParamFrac.of(other))

    def __rsub__(self, other) -> "ParamFrac":
        return ParamFrac.of(other) + (-self)

    def __mul__(self, other) -> "ParamFrac":
        other = ParamFrac.of(other)
        return ParamFrac(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __pow__(self, exp: int) -> "ParamFrac":
        if exp < 0:
            raise ValueError("negative powers of fractions are not supported")
        return ParamFrac(self.num ** exp, self.den ** exp)

    def divide_by_poly(self, poly: ParamPoly) -> "ParamFrac":
        content, den = FactoredDen.of(poly)
        return ParamFrac(self.num * (1 / content), self.den * den)

    def params(self) -> frozenset:
        return self.num.params() | self.den.params()

    def eval(self, values: Mapping[str, Fraction], default: Fraction = _ZERO) -> Fraction:
        den = self.den.as_poly().eval(values, default)
        if den == 0:
            raise ZeroDivisionError("denominator vanishes at evaluation point")
        return self.num.eval(values, default) / den

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction, _QTYPE, ParamPoly)):
            other = ParamFrac.of(other)
        if not isinstance(other, ParamFrac):
            return NotImplemented
        if self.den == other.den:
            return self.num == other.num
        return self.num * other.den.as_poly() == other.num * self.den.as_poly()

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    def __str__(self) -> str:
        if self.den.is_one:
            return str(self.num)
        return f"({self.num})/({self.den})"

    def __repr__(self) -> str:
        return f"ParamFrac({self})"


class PiPoly:
    """Polynomial in pi with ``ParamPoly`` coefficients, dense by pi-degree.

    pi is treated as transcendental: it is never evaluated or cancelled
    except by the explicit ``eval`` methods.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[ParamPoly] = ()):
        coeffs = tuple(coeffs)
        while coeffs and coeffs[-1].is_zero:
            coeffs = coeffs[:-1]
        self.coeffs = coeffs

    @classmethod
    def const(cls, value) -> "PiPoly":
        if isinstance(value, PiPoly):
            return value
        if not isinstance(value, ParamPoly):
            value = ParamPoly.const(value)
        return cls((value,))

    @classmethod
    def pi_power(cls, k: int, coef=None) -> "PiPoly":
        lead = ParamPoly.one() if coef is None else coef
        if not isinstance(lead, ParamPoly):
            lead = ParamPoly.const(lead)
        return cls((ParamPoly.zero(),) * k + (lead,))

    @classmethod
    def zero(cls) -> "PiPoly":
        return cls()

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def pi_degree(self) -> int:
        return len(self.coeffs) - 1

    def coeff(self, k: int) -> ParamPoly:
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return ParamPoly.zero()

    def __add__(self, other) -> "PiPoly":
        other = PiPoly.const(other) if not isinstance(other, PiPoly) else other
        if not self.coeffs:
            return other
        if not other.coeffs:
            return self
        n = max(len(self.coeffs), len(other.coeffs))
        return PiPoly(tuple(self.coeff(i) + other.coeff(i) for i in range(n)))

    __radd__ = __add__

    def __neg__(self) -> "PiPoly":
        return PiPoly(tuple(-c for c in self.coeffs))

    def __sub__(self, other) -> "PiPoly":
        other = PiPoly.const(other) if not isinstance(other, PiPoly) else other
        return self + (-other)

    def __mul__(self, other) -> "PiPoly":
        if not isinstance(other, PiPoly):
            # scalar fast path (Fraction, int, ParamPoly)
            if isinstance(other, (int, Fraction, _QTYPE)):
                if other == 0:
                    return PiPoly()
                other = ParamPoly.const(other)
            if isinstance(other, ParamPoly):
                if other.is_zero:
                    return PiPoly()
                return PiPoly(tuple(c * other for c in self.coeffs))
            return NotImplemented
        if not self.coeffs or not other.coeffs:
            return PiPoly()
        if len(self.coeffs) == 1 and len(other.coeffs) == 1:
            return PiPoly((self.coeffs[0] * other.coeffs[0],))
        out = [ParamPoly.zero()] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a.is_zero:
                continue
            for j, b in enumerate(other.coeffs):
                if b.is_zero:
                    continue
                out[i + j] = out[i + j] + a * b
        return PiPoly(tuple(out))

    __rmul__ = __mul__

    def shift_pi(self, k: int) -> "PiPoly":
        if not self.coeffs or k == 0:
            return self
        return PiPoly((ParamPoly.zero(),) * k + self.coeffs)

    def subs(self, mapping: Mapping[str, ParamPoly]) -> "PiPoly":
        return PiPoly(tuple(c.subs(mapping) for c in self.coeffs))

    def subs_frac(self, mapping: Mapping[str, "ParamFrac"]) -> tuple:
        """Substitute fractions; returns (PiPoly numerator, FactoredDen)."""
        fracs = [c.subs_frac(mapping) for c in self.coeffs]
        den = FactoredDen()
        for f in fracs:
            den = den.lcm(f.den)
        nums = [f.num * f.den.cofactor(den) for f in fracs]
        return PiPoly(tuple(nums)), den

    def eval(self, values: Mapping[str, Fraction], pi_value: Fraction) -> Fraction:
        total = _ZERO
        power = _ONE
        for c in self.coeffs:
            total += c.eval(values) * power
            power *= pi_value
        return total

    def eval_float(self, values: Mapping[str, float], pi_value: float = math.pi) -> float:
        total = 0.0
        power = 1.0
        for c in self.coeffs:
            total += c.eval_float(values) * power
            power *= pi_value
        return total

    def derivative(self, name: str) -> "PiPoly":
        return PiPoly(tuple(c.derivative(name) for c in self.coeffs))

    def divexact_all(self, divisor: ParamPoly) -> Optional["PiPoly"]:
        out = []
        for c in self.coeffs:
            q = c.divexact(divisor)
            if q is None:
                return None
            out.append(q)
        return PiPoly(tuple(out))

    def params(self) -> frozenset:
        out: frozenset = frozenset()
        for c in self.coeffs:
            out |= c.params()
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction, _QTYPE, ParamPoly)):
            other = PiPoly.const(other)
        if not isinstance(other, PiPoly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for k in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[k]
            if c.is_zero:
                continue
            pi_part = "" if k == 0 else ("pi" if k == 1 else f"pi^{k}")
            if c.is_const and not pi_part:
                parts.append(str(c))
            elif c.is_const:
                v = c.const_value()
                if v == 1:
                    parts.append(pi_part)
                elif v == -1:
                    parts.append(f"-{pi_part}")
                else:
                    parts.append(f"{v}*{pi_part}")
            else:
                body = f"({c})" if len(c.terms) > 1 else str(c)
                parts.append(f"{body}*{pi_part}" if pi_part else body)
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def __repr__(self) -> str:
        return f"PiPoly({self})"


# ---------------------------------------------------------------------------
# Trigonometric series
# ---------------------------------------------------------------------------

# term key: (theta_exp, r_exp, sin_exp, cos_exp)
TrigKey = tuple


class TrigTerm:
    """A single term coef * theta^a * r^e * sin^b * cos^c, for iteration."""

    __slots__ = ("theta_exp", "r_exp", "sin_exp", "cos_exp", "coef")

    def __init__(self, theta_exp: int, r_exp: int, sin_exp: int, cos_exp: int, coef: PiPoly):
        self.theta_exp = theta_exp
        self.r_exp = r_exp
        self.sin_exp = sin_exp
        self.cos_exp = cos_exp
        self.coef = coef

    def __repr__(self) -> str:
        return (f"TrigTerm(theta={self.theta_exp}, r={self.r_exp}, "
                f"sin={self.sin_exp}, cos={self.cos_exp}, coef={self.coef})")


def _key_str(key: TrigKey) -> str:
    a, e, b, c = key
    factors = []
    if a:
        factors.append("theta" if a == 1 else f"theta^{a}")
    if e:
        factors.append("r" if e == 1 else f"r^{e}")
    if b:
        factors.append("sin(theta)" if b == 1 else f"sin(theta)^{b}")
    if c:
        factors.append("cos(theta)" if c == 1 else f"cos(theta)^{c}")
    return "*".join(factors)


class TrigSeries:
    """Linear combination of theta^a * r^e * sin^b(theta) * cos^c(theta).

    Terms are keyed by the exponent 4-tuple; the canonical form produced by
    all arithmetic has cos exponent <= 1 (via cos^2 = 1 - sin^2) and drops
    zero coefficients.  Term order for display and iteration is lexicographic
    on the exponent tuple.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[TrigKey, PiPoly]] = None):
        clean: dict = {}
        if terms:
            for key, coef in terms.items():
                if not coef.is_zero:
                    clean[key] = coef
        self.terms = clean

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls) -> "TrigSeries":
        return cls()

    @classmethod
    def term(cls, coef=1, theta: int = 0, r: int = 0, sin: int = 0,
             cos: int = 0) -> "TrigSeries":
        """One term; ``coef`` may be a scalar, ParamPoly or PiPoly.

        The result is *not* cos-reduced; call :meth:`reduce_cos` if cos >= 2.
        """
        if not isinstance(coef, PiPoly):
            coef = PiPoly.const(coef)
        if coef.is_zero:
            return cls()
        return cls({(theta, r, sin, cos): coef})

    @classmethod
    def one(cls) -> "TrigSeries":
        return cls.term(1)

    @staticmethod
    def sum_of(pieces) -> "TrigSeries":
        """Merge many series into one (linear in the total monomial count)."""
        acc: dict = {}
        for piece in pieces:
            for key, coef in piece.terms.items():
                slot = acc.get(key)
                if slot is None:
                    slot = acc[key] = {}
                for level, p in enumerate(coef.coeffs):
                    if not p.terms:
                        continue
                    lv = slot.get(level)
                    if lv is None:
                        lv = slot[level] = {}
                    get = lv.get
                    for m, q in p.terms.items():
                        v = get(m)
                        lv[m] = q if v is None else v + q
        return _freeze_acc(acc)

    # -- predicates ------------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def iter_terms(self) -> Iterator[TrigTerm]:
        for key in sorted(self.terms):
            a, e, b, c = key
            yield TrigTerm(a, e, b, c, self.terms[key])

    def min_r_exp(self) -> int:
        return min((k[1] for k in self.terms), default=0)

    def max_r_exp(self) -> int:
        return max((k[1] for k in self.terms), default=0)

    def max_theta_exp(self) -> int:
        return max((k[0] for k in self.terms), default=0)

    def max_cos_exp(self) -> int:
        return max((k[3] for k in self.terms), default=0)

    def pi_degree(self) -> int:
        return max((c.pi_degree for c in self.terms.values()), default=-1)

    def params(self) -> frozenset:
        out: frozenset = frozenset()
        for c in self.terms.values():
            out |= c.params()
        return out

    def theta_free(self) -> bool:
        return all(k[0] == 0 for k in self.terms)

    # -- arithmetic -------------------------------------------------------------

    def __add__(self, other) -> "TrigSeries":
        if not isinstance(other, TrigSeries):
            return NotImplemented
        if not other.terms:
            return self
        if not self.terms:
            return other
        merged = dict(self.terms)
        for key, coef in other.terms.items():
            new = merged.get(key)
            new = coef if new is None else new + coef
            if new.is_zero:
                merged.pop(key, None)
            else:
                merged[key] = new
        out = TrigSeries.__new__(TrigSeries)
        out.terms = merged
        return out

    def __neg__(self) -> "TrigSeries":
        out = TrigSeries.__new__(TrigSeries)
        out.terms = {k: -c for k, c in self.terms.items()}
        return out

    def __sub__(self, other) -> "TrigSeries":
        if not isinstance(other, TrigSeries):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other) -> "TrigSeries":
        if not isinstance(other, TrigSeries):
            return self.scale(other)
        if not self.terms or not other.terms:
            return TrigSeries()
        # fused loops over trig keys, pi levels and packed monomials, with
        # inline cos^2 -> 1 - sin^2 reduction; one freeze at the end
        acc: dict = {}
        for (a1, e1, b1, c1), x in self.terms.items():
            xc = x.coeffs
            for (a2, e2, b2, c2), y in other.terms.items():
                a, e, b, c = a1 + a2, e1 + e2, b1 + b2, c1 + c2
                if c <= 1:
                    targets = (((a, e, b, c), 1),)
                else:  # canonical inputs have cos <= 1, so c == 2 here
                    targets = (((a, e, b, 0), 1), ((a, e, b + 2, 0), -1))
                for i, p in enumerate(xc):
                    pt = p.terms
                    if not pt:
                        continue
                    for j, q in enumerate(y.coeffs):
                        qt = q.terms
                        if not qt:
                            continue
                        level = i + j
                        for key, w in targets:
                            slot = acc.get(key)
                            if slot is None:
                                slot = acc[key] = {}
                            lv = slot.get(level)
                            if lv is None:
                                lv = slot[level] = {}
                            get = lv.get
                            if w == 1:
                                for m1, q1 in pt.items():
                                    for m2, q2 in qt.items():
                                        k3 = m1 + m2
                                        v = get(k3)
                                        lv[k3] = q1 * q2 if v is None else v + q1 * q2
                            else:
                                for m1, q1 in pt.items():
                                    for m2, q2 in qt.items():
                                        k3 = m1 + m2
                                        v = get(k3)
                                        lv[k3] = -(q1 * q2) if v is None else v - q1 * q2
        return _freeze_acc(acc)

    def __rmul__(self, other) -> "TrigSeries":
        return self.scale(other)

    def scale(self, scalar) -> "TrigSeries":
        """Multiply by an r/theta-free scalar (number, ParamPoly or PiPoly)."""
        if isinstance(scalar, (int, Fraction, _QTYPE)):
            if scalar == 0:
                return TrigSeries()
            scalar = PiPoly.const(scalar)
        elif isinstance(scalar, ParamPoly):
            scalar = PiPoly.const(scalar)
        elif not isinstance(scalar, PiPoly):
            return NotImplemented
        if scalar.is_zero:
            return TrigSeries()
        return TrigSeries({k: c * scalar for k, c in self.terms.items()})

    def __pow__(self, exponent: int) -> "TrigSeries":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("series powers must be non-negative integers")
        result = TrigSeries.one()
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def shift_r(self, k: int) -> "TrigSeries":
        """Multiply by r**k (k may be negative)."""
        if k == 0 or not self.terms:
            return self
        return TrigSeries({(a, e + k, b, c): coef
                           for (a, e, b, c), coef in self.terms.items()})

    def reduce_cos(self) -> "TrigSeries":
        """Rewrite cos^2 -> 1 - sin^2 until every term has cos exponent <= 1.

        Equivalent to pseudo-remainder against the (monic) circle relation,
        so no spurious content factor arises.  The result equals the input as
        a function on R^2.
        """
        if all(c <= 1 for (_, _, _, c) in self.terms):
            return self
        acc: dict = {}
        for (a, e, b, c), coef in self.terms.items():
            _accumulate_reduced(acc, a, e, b, c, coef)
        return TrigSeries(acc)

    def diff_r(self, m: int = 1) -> "TrigSeries":
        """m-th partial derivative in r, termwise falling factorial on r^e."""
        if m < 0:
            raise ValueError("derivative order must be non-negative")
        if m == 0:
            return self
        acc: dict = {}
        for (a, e, b, c), coef in self.terms.items():
            factor = 1
            for i in range(m):
                factor *= (e - i)
            if factor == 0:
                continue
            key = (a, e - m, b, c)
            scaled = coef * Fraction(factor)
            prev = acc.get(key)
            new = scaled if prev is None else prev + scaled
            if new.is_zero:
                acc.pop(key, None)
            else:
                acc[key] = new
        return TrigSeries(acc)

    def diff_theta(self) -> "TrigSeries":
        """Partial derivative in theta (product rule over theta^a sin^b cos^c)."""
        out = TrigSeries()
        for (a, e, b, c), coef in self.terms.items():
            if a:
                out = out + TrigSeries({(a - 1, e, b, c): coef * Fraction(a)})
            if b:
                out = out + TrigSeries.term(coef * Fraction(b), a, e, b - 1, c + 1).reduce_cos()
            if c:
                out = out + TrigSeries({(a, e, b + 1, c - 1): -(coef * Fraction(c))})
        return out

    # -- substitution and evaluation ---------------------------------------------

    def subs(self, mapping: Mapping[str, ParamPoly]) -> "TrigSeries":
        return TrigSeries({k: c.subs(mapping) for k, c in self.terms.items()})

    def subs_frac(self, mapping: Mapping[str, "ParamFrac"]) -> "FracSeries":
        pairs = {k: c.subs_frac(mapping) for k, c in self.terms.items()}
        den = FactoredDen()
        for _, (_, d) in pairs.items():
            den = den.lcm(d)
        terms = {}
        for key, (num, d) in pairs.items():
            cof = d.cofactor(den)
            terms[key] = num * cof
        return FracSeries(TrigSeries(terms), den)

    def eval_float(self, theta: float, r: float, values: Mapping[str, float],
                   pi_value: float = math.pi) -> float:
        s, co = math.sin(theta), math.cos(theta)
        total = 0.0
        for (a, e, b, c), coef in self.terms.items():
            total += (coef.eval_float(values, pi_value)
                      * theta ** a * r ** e * s ** b * co ** c)
        return total

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrigSeries):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.terms.items(), key=lambda kv: kv[0])))

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for key in sorted(self.terms):
            coef = self.terms[key]
            body = _key_str(key)
            ctext = str(coef)
            wrapped = ctext.startswith("(") and ctext.endswith(")")
            needs_parens = not wrapped and (
                " + " in ctext or " - " in ctext or (ctext.startswith("-") and bool(body)))
            if body:
                if ctext == "1":
                    parts.append(body)
                elif ctext == "-1":
                    parts.append(f"-{body}")
                else:
                    ctext = f"({ctext})" if needs_parens else ctext
                    parts.append(f"{ctext}*{body}")
            else:
                parts.append(f"({ctext})" if needs_parens else ctext)
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def __repr__(self) -> str:
        return f"TrigSeries({self})"


def _accumulate_reduced(acc: dict, a: int, e: int, b: int, c: int, coef: PiPoly):
    """Add coef * theta^a r^e sin^b cos^c to ``acc`` with cos reduced to <= 1."""
    if c <= 1:
        key = (a, e, b, c)
        prev = acc.get(key)
        new = coef if prev is None else prev + coef
        if new.is_zero:
            acc.pop(key, None)
        else:
            acc[key] = new
        return
    half, parity = divmod(c, 2)
    # cos^(2h) = (1 - sin^2)^h
    sign = 1
    binom = 1
    for j in range(half + 1):
        if j:
            binom = binom * (half - j + 1) // j
            sign = -sign
        contrib = coef * Fraction(sign * binom)
        key = (a, e, b + 2 * j, parity)
        prev = acc.get(key)
        new = contrib if prev is None else prev + contrib
        if new.is_zero:
            acc.pop(key, None)
        else:
            acc[key] = new


_POLY_ZERO = ParamPoly()


def _freeze_acc(acc: dict) -> TrigSeries:
    """Build a canonical TrigSeries from raw nested accumulation dicts
    (trig key -> pi power -> packed mono -> rational)."""
    terms: dict = {}
    for key, levels in acc.items():
        top = max(levels)
        coeffs = []
        for lv in range(top + 1):
            d = levels.get(lv)
            if d:
                d = {m: v for m, v in d.items() if v}
            coeffs.append(ParamPoly._from_raw(d) if d else _POLY_ZERO)
        pp = PiPoly(tuple(coeffs))
        if not pp.is_zero:
            terms[key] = pp
    out = TrigSeries.__new__(TrigSeries)
    out.terms = terms
    return out


class FracSeries:
    """A ``TrigSeries`` over a factored pi-free parameter denominator.

    The denominator is constant with respect to theta and r, so integration
    and differentiation act on the numerator only.  Construction cancels any
    denominator factor that exactly divides every coefficient.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: TrigSeries, den: FactoredDen = FactoredDen()):
        if num.is_zero:
            den = FactoredDen()
        elif not den.is_one:
            num, den = _reduce_series(num, den)
        self.num = num
        self.den = den

    @classmethod
    def of(cls, value) -> "FracSeries":
        if isinstance(value, FracSeries):
            return value
        if isinstance(value, TrigSeries):
            return cls(value)
        raise TypeError(f"cannot lift {type(value).__name__} to FracSeries")

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    def __add__(self, other) -> "FracSeries":
        other = FracSeries.of(other)
        if self.den == other.den:
            return FracSeries(self.num + other.num, self.den)
        den = self.den.lcm(other.den)
        left = self.num.scale(self.den.cofactor(den))
        right = other.num.scale(other.den.cofactor(den))
        return FracSeries(left + right, den)

    __radd__ = __add__

    def __neg__(self) -> "FracSeries":
        out = FracSeries.__new__(FracSeries)
        out.num = -self.num
        out.den = self.den
        return out

    def __sub__(self, other) -> "FracSeries":
        return self + (-FracSeries.of(other))

    def __mul__(self, other) -> "FracSeries":
        if isinstance(other, (TrigSeries, FracSeries)):
            other = FracSeries.of(other)
            return FracSeries(self.num * other.num, self.den * other.den)
        if isinstance(other, ParamFrac):
            num = self.num.scale(other.num)
            return FracSeries(num, self.den * other.den)
        return FracSeries(self.num.scale(other), self.den)

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "FracSeries":
        return FracSeries(self.num ** exponent, self.den ** exponent)

    def diff_r(self, m: int = 1) -> "FracSeries":
        out = FracSeries.__new__(FracSeries)
        out.num = self.num.diff_r(m)
        out.den = self.den if not out.num.is_zero else FactoredDen()
        return out

    def subs_frac(self, mapping: Mapping[str, ParamFrac]) -> "FracSeries":
        inner = self.num.subs_frac(mapping)
        den_polys = [(p.subs_frac(mapping), e) for p, e in self.den.factors]
        num = inner.num
        den = inner.den
        for frac, e in den_polys:
            # dividing by (n/d)^e multiplies by d^e / n^e
            content, extra = FactoredDen.of(frac.num, e)
            num = num.scale(frac.den.as_poly() ** e * (1 / content))
            den = den * extra
        return FracSeries(num, den)

    def eval_float(self, theta: float, r: float, values: Mapping[str, float],
                   pi_value: float = math.pi) -> float:
        den = self.den.as_poly().eval_float(values)
        return self.num.eval_float(theta, r, values, pi_value) / den

    def min_r_exp(self) -> int:
        return self.num.min_r_exp()

    def max_r_exp(self) -> int:
        return self.num.max_r_exp()

    def theta_free(self) -> bool:
        return self.num.theta_free()

    def __eq__(self, other) -> bool:
        if isinstance(other, TrigSeries):
            other = FracSeries.of(other)
        if not isinstance(other, FracSeries):
            return NotImplemented
        if self.den == other.den:
            return self.num == other.num
        return (self.num.scale(other.den.as_poly())
                == other.num.scale(self.den.as_poly()))

    def __str__(self) -> str:
        if self.den.is_one:
            return str(self.num)
        return f"({self.num}) / ({self.den})"

    def __repr__(self) -> str:
        return f"FracSeries({self})"


def _reduce_series(num: TrigSeries, den: FactoredDen):
    keys = sorted(num.terms)
    polys = []
    layout = []
    for key in keys:
        coef = num.terms[key]
        layout.append((key, len(coef.coeffs)))
        polys.extend(coef.coeffs)
    new_polys, new_den = _cancel_factors(polys, den)
    if new_den == den:
        return num, den
    terms = {}
    pos = 0
    for key, width in layout:
        terms[key] = PiPoly(tuple(new_polys[pos:pos + width]))
        pos += width
    return TrigSeries(terms), new_den


# ---------------------------------------------------------------------------
# Polynomials in the plane variables
# ---------------------------------------------------------------------------


class XYPoly:
    """Polynomial in (x, y) with ``ParamPoly`` coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[tuple, ParamPoly]] = None):
        clean: dict = {}
        if terms:
            for key, coef in terms.items():
                if not coef.is_zero:
                    clean[key] = coef
        self.terms = clean

    @classmethod
    def zero(cls) -> "XYPoly":
        return cls()

    @classmethod
    def const(cls, value) -> "XYPoly":
        if not isinstance(value, ParamPoly):
            value = ParamPoly.const(value)
        return cls({(0, 0): value})

    @classmethod
    def monomial(cls, coef, xexp: int, yexp: int) -> "XYPoly":
        if not isinstance(coef, ParamPoly):
            coef = ParamPoly.const(coef)
        return cls({(xexp, yexp): coef})

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((a + b for a, b in self.terms), default=0)

    def coeff(self, xexp: int, yexp: int) -> ParamPoly:
        return self.terms.get((xexp, yexp), ParamPoly.zero())

    def params(self) -> frozenset:
        out: frozenset = frozenset()
        for c in self.terms.values():
            out |= c.params()
        return out

    def __add__(self, other) -> "XYPoly":
        if not isinstance(other, XYPoly):
            return NotImplemented
        merged = dict(self.terms)
        for key, coef in other.terms.items():
            new = merged.get(key, ParamPoly.zero()) + coef
            if new.is_zero:
                merged.pop(key, None)
            else:
                merged[key] = new
        return XYPoly(merged)

    def __neg__(self) -> "XYPoly":
        return XYPoly({k: -c for k, c in self.terms.items()})

    def __sub__(self, other) -> "XYPoly":
        return self + (-other)

    def __mul__(self, other) -> "XYPoly":
        if isinstance(other, XYPoly):
            acc: dict = {}
            for (a1, b1), c1 in self.terms.items():
                for (a2, b2), c2 in other.terms.items():
                    key = (a1 + a2, b1 + b2)
                    new = acc.get(key, ParamPoly.zero()) + c1 * c2
                    if new.is_zero:
                        acc.pop(key, None)
                    else:
                        acc[key] = new
            return XYPoly(acc)
        if isinstance(other, (int, Fraction, _QTYPE, ParamPoly)):
            if not isinstance(other, ParamPoly):
                other = ParamPoly.const(other)
            return XYPoly({k: c * other for k, c in self.terms.items()})
        return NotImplemented

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "XYPoly":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("powers must be non-negative integers")
        result = XYPoly.const(1)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def subs_params(self, mapping: Mapping[str, ParamPoly]) -> "XYPoly":
        return XYPoly({k: c.subs(mapping) for k, c in self.terms.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, XYPoly):
            return NotImplemented
        return self.terms == other.terms

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (a, b) in sorted(self.terms, key=lambda k: (k[0] + k[1], k)):
            coef = self.terms[(a, b)]
            mono = []
            if a:
                mono.append("x" if a == 1 else f"x^{a}")
            if b:
                mono.append("y" if b == 1 else f"y^{b}")
            body = "*".join(mono)
            ctext = str(coef)
            if body:
                if ctext == "1":
                    parts.append(body)
                elif ctext == "-1":
                    parts.append(f"-{body}")
                else:
                    if " + " in ctext or " - " in ctext or ctext.startswith("-"):
                        ctext = f"({ctext})"
                    parts.append(f"{ctext}*{body}")
            else:
                parts.append(f"({ctext})" if (" + " in ctext or " - " in ctext) else ctext)
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def __repr__(self) -> str:
        return f"XYPoly({self})"


# ---------------------------------------------------------------------------
# Expression parser
# ---------------------------------------------------------------------------
#
# Grammar (CLI input):
#   expr    := term (('+' | '-') term)*
#   term    := factor (('*' | '/') factor)*
#   factor  := '-' factor | base ('^' INT)?
#   base    := '(' expr ')' | INT | IDENT
#
# '^' takes non-negative integer literal exponents.  In polynomial mode '/'
# is only allowed between integer literals (rational constants such as 3/2);
# in parameter-expression mode (substitution values) '/' by a pi-free
# parameter expression is allowed and the denominator is kept factored.
# Implicit multiplication is not allowed.

_TOKEN_INT = "int"
_TOKEN_IDENT = "ident"
_TOKEN_OP = "op"
_TOKEN_END = "end"


def _tokenize(text: str) -> list:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append((_TOKEN_INT, int(text[i:j]), i))
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append((_TOKEN_IDENT, text[i:j], i))
            i = j
            continue
        if ch in "+-*/^()":
            tokens.append((_TOKEN_OP, ch, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append((_TOKEN_END, None, n))
    return tokens


class _Parser:
    """Recursive-descent parser producing a small AST of tuples."""

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, value, pos = self.peek()
        if kind != _TOKEN_OP or value != op:
            raise ParseError(f"expected {op!r}", pos)
        self.advance()

    def parse(self):
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != _TOKEN_END:
            raise ParseError(f"unexpected {value!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, value, pos = self.peek()
            if kind == _TOKEN_OP and value in "+-":
                self.advance()
                rhs = self.term()
                node = (value, node, rhs, pos)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, value, pos = self.peek()
            if kind == _TOKEN_OP and value in "*/":
                self.advance()
                rhs = self.factor()
                node = (value, node, rhs, pos)
            else:
                return node

    def factor(self):
        kind, value, pos = self.peek()
        if kind == _TOKEN_OP and value == "-":
            self.advance()
            return ("neg", self.factor(), pos)
        node = self.base()
        kind, value, pos = self.peek()
        if kind == _TOKEN_OP and value == "^":
            self.advance()
            ekind, evalue, epos = self.peek()
            if ekind != _TOKEN_INT:
                raise ParseError("exponent must be a non-negative integer literal", epos)
            self.advance()
            node = ("pow", node, evalue, pos)
        return node

    def base(self):
        kind, value, pos = self.advance()
        if kind == _TOKEN_INT:
            return ("int", value, pos)
        if kind == _TOKEN_IDENT:
            return ("name", value, pos)
        if kind == _TOKEN_OP and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"expected a number, name or parenthesis", pos)


def _is_int_node(node) -> bool:
    return node[0] == "int" or (node[0] == "neg" and _is_int_node(node[1]))


def _eval_xy(node, vars: tuple) -> XYPoly:
    op = node[0]
    if op == "int":
        return XYPoly.const(Fraction(node[1]))
    if op == "name":
        name = node[1]
        if name in vars:
            x = 1 if name == vars[0] else 0
            return XYPoly.monomial(1, x, 1 - x)
        return XYPoly.const(ParamPoly.var(name))
    if op == "neg":
        return -_eval_xy(node[1], vars)
    if op == "+":
        return _eval_xy(node[1], vars) + _eval_xy(node[2], vars)
    if op == "-":
        return _eval_xy(node[1], vars) - _eval_xy(node[2], vars)
    if op == "*":
        return _eval_xy(node[1], vars) * _eval_xy(node[2], vars)
    if op == "/":
        if _is_int_node(node[1]) and _is_int_node(node[2]):
            num = _int_value(node[1])
            den = _int_value(node[2])
            if den == 0:
                raise ParseError("division by zero", node[3])
            return XYPoly.const(Fraction(num, den))
        raise ParseError("division is only allowed between integer literals", node[3])
    if op == "pow":
        return _eval_xy(node[1], vars) ** node[2]
    raise AssertionError(f"unhandled node {op}")


def _int_value(node) -> int:
    if node[0] == "int":
        return node[1]
    return -_int_value(node[1])


def _eval_frac(node) -> ParamFrac:
    op = node[0]
    if op == "int":
        return ParamFrac.of(Fraction(node[1]))
    if op == "name":
        return ParamFrac(ParamPoly.var(node[1]))
    if op == "neg":
        return -_eval_frac(node[1])
    if op == "+":
        return _eval_frac(node[1]) + _eval_frac(node[2])
    if op == "-":
        return _eval_frac(node[1]) - _eval_frac(node[2])
    if op == "*":
        return _eval_frac(node[1]) * _eval_frac(node[2])
    if op == "/":
        num = _eval_frac(node[1])
        for poly, exp in _den_factors(node[2]):
            if poly.is_zero:
                raise ParseError("division by zero", node[3])
            for _ in range(exp):
                num = num.divide_by_poly(poly)
        return num
    if op == "pow":
        return _eval_frac(node[1]) ** node[2]
    raise AssertionError(f"unhandled node {op}")


def _den_factors(node) -> list:
    """Structural factor list of a denominator AST: products and literal
    powers are kept apart so cancellation can work factor by factor."""
    op = node[0]
    if op == "*":
        return _den_factors(node[1]) + _den_factors(node[2])
    if op == "pow":
        return [(p, e * node[2]) for p, e in _den_factors(node[1])]
    if op == "neg":
        inner = _den_factors(node[1])
        return [(-inner[0][0], inner[0][1])] + inner[1:]
    frac = _eval_frac(node)
    if not frac.den.is_one:
        raise ParseError("nested denominators are not supported", node[-1])
    return [(frac.num, 1)]


def parse_poly(text: str, vars: Sequence[str] = ("x", "y")) -> XYPoly:
    """Parse an expression into a polynomial in ``vars`` over ``ParamPoly``.

    Identifiers other than the plane variables become free parameters.
    Division is rejected except between integer literals; exponents must be
    non-negative integer literals.
    """
    vars = tuple(vars)
    node = _Parser(text).parse()
    return _eval_xy(node, vars)


def parse_param_expr(text: str) -> ParamFrac:
    """Parse a parameter expression, allowing division by parameter
    polynomials (used for substitution values)."""
    node = _Parser(text).parse()
    return _eval_frac(node)


def parse_assignment(text: str) -> tuple:
    """Parse ``"param = expr"`` into (name, ParamFrac)."""
    if "=" not in text:
        raise ParseError("expected 'param = expression'", 0)
    lhs, rhs = text.split("=", 1)
    name = lhs.strip()
    if not name or not (name[0].isalpha() and all(c.isalnum() or c == "_" for c in name)):
        raise ParseError(f"invalid parameter name {name!r}", 0)
    return name, parse_param_expr(rhs)
