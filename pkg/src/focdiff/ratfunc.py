"""Exact multivariate rational functions in named coefficient atoms.

The symbolic engine needs nothing more than field arithmetic over rational
functions whose variables are transport-coefficient names (k_z, k_tz, ...)
and a few free scalars (v, lam, tau, ...), with exact rational number
coefficients.  Polynomials are dicts from monomials to Fractions; a rational
is a (numerator, denominator) pair normalized by numeric content and by the
sign of the denominator's leading monomial.  No polynomial gcd is computed:
equality is decided by cross-multiplication, which is exact and cheap at the
sizes that occur here, and keeps the arithmetic obviously correct.
"""

from __future__ import annotations

import threading
from fractions import Fraction

from .errors import AlgebraError


class Atom:
    """Interned, totally ordered variable name.

    Create through kappa_atom(m, n) or symbol(name); instances are interned,
    so identity is equality.  Lookups of existing atoms are lock-free reads
    of a dict; inserts are serialized by a module lock.
    """

    __slots__ = ("key", "label")

    def __init__(self, key, label):
        self.key = key
        self.label = label

    def __repr__(self):
        return self.label

    def __lt__(self, other):
        return self.key < other.key


_ATOMS: dict = {}
_ATOM_LOCK = threading.Lock()


def _intern(key, label):
    atom = _ATOMS.get(key)
    if atom is None:
        with _ATOM_LOCK:
            atom = _ATOMS.get(key)
            if atom is None:
                atom = Atom(key, label)
                _ATOMS[key] = atom
    return atom


def _index_label(m, n):
    if m == 0:
        tpart = ""
    elif m == 1:
        tpart = "t"
    elif m == 2:
        tpart = "tt"
    else:
        tpart = f"{m}t"
    if n == 0:
        zpart = ""
    elif n <= 3:
        zpart = "z" * n
    else:
        zpart = f"{n}z"
    return "k_" + tpart + zpart


def kappa_atom(m, n):
    """The coefficient name attached to the derivative multi-index (m, n)."""
    if not isinstance(m, int) or not isinstance(n, int) or m < 0 or n < 0 or (m, n) == (0, 0):
        raise AlgebraError(f"no coefficient atom for multi-index ({m!r}, {n!r})")
    return _intern(("k", m, n), _index_label(m, n))


def symbol(name):
    """A free scalar symbol (v, lam, tau, integration constants, ...)."""
    if not name or not isinstance(name, str):
        raise AlgebraError(f"symbol name must be a nonempty string, got {name!r}")
    return _intern(("s", name), name)


# A monomial is a tuple of (atom, positive exponent) pairs sorted by atom key;
# the empty tuple is the constant monomial.

def _mono_mul(a, b):
    out = dict(a)
    for atom, e in b:
        out[atom] = out.get(atom, 0) + e
    return tuple(sorted(out.items(), key=lambda kv: kv[0].key))


def _mono_order(mono):
    return (sum(e for _a, e in mono), tuple((a.key, e) for a, e in mono))


class Poly:
    """Multivariate polynomial with Fraction coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {} if terms is None else terms

    @classmethod
    def const(cls, value):
        f = Fraction(value)
        return cls({(): f} if f else {})

    @classmethod
    def from_atom(cls, atom):
        return cls({((atom, 1),): Fraction(1)})

    @property
    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    __hash__ = None

    def __add__(self, other):
        out = dict(self.terms)
        for mono, c in other.terms.items():
            s = out.get(mono, 0) + c
            if s:
                out[mono] = s
            else:
                out.pop(mono, None)
        return Poly(out)

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = _mono_mul(m1, m2)
                s = out.get(mono, 0) + c1 * c2
                if s:
                    out[mono] = s
                else:
                    out.pop(mono, None)
        return Poly(out)

    def scale(self, factor):
        f = Fraction(factor)
        if not f:
            return Poly()
        return Poly({m: c * f for m, c in self.terms.items()})

    def content(self):
        """Positive rational content: gcd of numerators over lcm of denominators."""
        num_gcd = 0
        den_lcm = 1
        for c in self.terms.values():
            num_gcd = _gcd(num_gcd, abs(c.numerator))
            den_lcm = den_lcm * c.denominator // _gcd(den_lcm, c.denominator)
        return Fraction(num_gcd, den_lcm)

    def leading_coeff(self):
        mono = max(self.terms, key=_mono_order)
        return self.terms[mono]

    def atoms(self):
        out = set()
        for mono in self.terms:
            for atom, _e in mono:
                out.add(atom)
        return out

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for mono in sorted(self.terms, key=_mono_order, reverse=True):
            c = self.terms[mono]
            factors = []
            for atom, e in mono:
                factors.append(atom.label if e == 1 else f"{atom.label}^{e}")
            body = "*".join(factors)
            mag = abs(c)
            if body and mag == 1:
                text = body
            elif body:
                text = f"{mag}*{body}"
            else:
                text = str(mag)
            if not parts:
                parts.append(text if c > 0 else "-" + text)
            else:
                parts.append(("+ " if c > 0 else "- ") + text)
        return " ".join(parts)


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


class RationalCoefficient:
    """Quotient of two Polys, normalized but not reduced to lowest terms.

    Normalization divides out the shared numeric content and makes the sign
    of the denominator's leading coefficient positive, so structurally equal
    values compare equal fast; full equality is by cross-multiplication.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=None):
        if den is None:
            den = Poly.const(1)
        if den.is_zero:
            raise ZeroDivisionError("rational coefficient with zero denominator")
        if num.is_zero:
            den = Poly.const(1)
        else:
            c_num = num.content()
            c_den = den.content()
            g = Fraction(_gcd(c_num.numerator, c_den.numerator),
                         c_den.denominator * c_num.denominator
                         // _gcd(c_den.denominator, c_num.denominator))
            if den.leading_coeff() < 0:
                g = -g
            if g != 1:
                num = num.scale(1 / g)
                den = den.scale(1 / g)
        self.num = num
        self.den = den

    # -- constructors

    @classmethod
    def from_value(cls, value):
        return cls(Poly.const(value))

    @classmethod
    def from_atom(cls, atom):
        return cls(Poly.from_atom(atom))

    @classmethod
    def zero(cls):
        return cls(Poly())

    @classmethod
    def one(cls):
        return cls(Poly.const(1))

    @property
    def is_zero(self):
        return self.num.is_zero

    def atoms(self):
        return self.num.atoms() | self.den.atoms()

    # -- field arithmetic

    def _coerce(self, other):
        if isinstance(other, RationalCoefficient):
            return other
        if isinstance(other, (int, Fraction)):
            return RationalCoefficient.from_value(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return RationalCoefficient(self.num * other.den + other.num * self.den,
                                   self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalCoefficient(-self.num, self.den)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return RationalCoefficient(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if other.num.is_zero:
            raise ZeroDivisionError("division by zero rational coefficient")
        return RationalCoefficient(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return RationalCoefficient.from_value(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, int) or exponent < 0:
            raise AlgebraError("only nonnegative integer powers are supported")
        out = RationalCoefficient.one()
        for _ in range(exponent):
            out = out * self
        return out

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self.num * other.den - other.num * self.den).is_zero

    __hash__ = None

    def substitute(self, mapping):
        """Replace atoms by rational coefficients (exact composition).

        mapping: dict from Atom to RationalCoefficient (or int/Fraction).
        Raises ZeroDivisionError if the substituted denominator vanishes.
        """
        clean = {}
        for atom, val in mapping.items():
            if not isinstance(val, RationalCoefficient):
                val = RationalCoefficient.from_value(val)
            clean[atom] = val
        return _poly_subst(self.num, clean) / _poly_subst(self.den, clean)

    def __repr__(self):
        if self.den == Poly.const(1):
            return repr(self.num)
        num = repr(self.num)
        den = repr(self.den)
        if " " in num:
            num = f"({num})"
        if " " in den:
            den = f"({den})"
        return f"{num}/{den}"


def _poly_subst(poly, mapping):
    out = RationalCoefficient.zero()
    for mono, c in poly.terms.items():
        term = RationalCoefficient.from_value(c)
        for atom, e in mono:
            rep = mapping.get(atom)
            if rep is None:
                rep = RationalCoefficient.from_atom(atom)
            term = term * rep**e
        out = out + term
    return out


def rc(value):
    """Coerce an int, Fraction, Atom, or RationalCoefficient to a rational."""
    if isinstance(value, RationalCoefficient):
        return value
    if isinstance(value, Atom):
        return RationalCoefficient.from_atom(value)
    return RationalCoefficient.from_value(value)


def rc_index(m, n):
    """Rational coefficient consisting of the single atom k_{(m,n)}."""
    return RationalCoefficient.from_atom(kappa_atom(m, n))
