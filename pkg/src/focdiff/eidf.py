"""Linear mixed-derivative transport equations and their rewriting operations.

An Eidf is an equation dF/dt = sum over (m, n) of c_{m,n} d^{m+n}F/dt^m dz^n
with exact rational-function coefficients, truncated by the grading
w(m, n) = m + n/2 <= W (the scaling that makes dF/dt comparable to d2F/dz2).
The derivative-iterative operations differentiate the equation, solve the
derived identity for one term, and substitute the result back, which is an
exact equivalence transformation followed by truncation.  Everything is
immutable; coefficients are never evaluated numerically here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType

from .errors import AlgebraError, ConfigError
from .ratfunc import Poly, RationalCoefficient, rc, rc_index, symbol

_FAMILIES = ("PzI", "PtI", "PtzI")


@dataclass(frozen=True)
class MultiIndex:
    """Derivative multi-index (m, n) for d^{m+n}F/dt^m dz^n."""

    m: int
    n: int

    def __post_init__(self):
        if not isinstance(self.m, int) or not isinstance(self.n, int) or self.m < 0 or self.n < 0:
            raise ConfigError(f"multi-index entries must be integers >= 0, got ({self.m!r}, {self.n!r})")

    @property
    def weight2(self):
        """Twice the grading weight m + n/2, kept integral."""
        return 2 * self.m + self.n

    @classmethod
    def parse(cls, text):
        """Parse 'm,n' (as in script files)."""
        try:
            m_str, n_str = str(text).split(",")
            return cls(int(m_str.strip()), int(n_str.strip()))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"cannot parse multi-index from {text!r}; expected 'm,n'") from exc

    def shifted(self, a, b):
        return MultiIndex(self.m + a, self.n + b)

    def __str__(self):
        return f"({self.m},{self.n})"


def as_multiindex(value):
    if isinstance(value, MultiIndex):
        return value
    if isinstance(value, tuple) and len(value) == 2:
        return MultiIndex(int(value[0]), int(value[1]))
    if isinstance(value, str):
        return MultiIndex.parse(value)
    raise ConfigError(f"cannot interpret {value!r} as a multi-index")


def _suffix(idx):
    m, n = idx.m, idx.n
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
    return tpart + zpart


def _idx_order(idx):
    return (idx.weight2, idx.m, idx.n)


def _format_terms(terms):
    if not terms:
        return "0"
    parts = []
    for idx in sorted(terms, key=_idx_order):
        parts.append(f"({terms[idx]!r}) F_{_suffix(idx)}")
    return " + ".join(parts)


class Eidf:
    """Immutable truncated equation dF/dt = sum c_{m,n} F_{(m,n)}.

    terms never contain the keys (0, 0) or (1, 0) (those belong to the
    left-hand side and normalization), every key satisfies 2m + n <= 2W, and
    zero coefficients are dropped.  For the focusing family the convection
    term is stored with its sign, i.e. -k_z at (0, 1).
    """

    __slots__ = ("terms", "max_weight")

    def __init__(self, terms, max_weight):
        if not isinstance(max_weight, int) or isinstance(max_weight, bool) or max_weight < 1:
            raise ConfigError(f"max_weight must be an integer >= 1, got {max_weight!r}")
        clean = {}
        for key, coeff in terms.items():
            idx = as_multiindex(key)
            if idx in (MultiIndex(0, 0), MultiIndex(1, 0)):
                raise AlgebraError(f"index {idx} cannot appear on the right-hand side")
            if idx.weight2 > 2 * max_weight:
                raise AlgebraError(f"term {idx} exceeds truncation weight {max_weight}")
            val = rc(coeff)
            if not val.is_zero:
                clean[idx] = val
        self.terms = MappingProxyType(clean)
        self.max_weight = max_weight

    def term(self, index):
        """Coefficient at index; zero if the term is absent."""
        return self.terms.get(as_multiindex(index), RationalCoefficient.zero())

    def sorted_terms(self):
        return [(idx, self.terms[idx]) for idx in sorted(self.terms, key=_idx_order)]

    def __eq__(self, other):
        if not isinstance(other, Eidf):
            return NotImplemented
        if self.max_weight != other.max_weight or set(self.terms) != set(other.terms):
            return False
        return all(self.terms[idx] == other.terms[idx] for idx in self.terms)

    __hash__ = None

    def __repr__(self):
        return f"F_t = {_format_terms(self.terms)}   [W = {self.max_weight}]"


@dataclass(frozen=True)
class DerivedEquation:
    """The (a, b)-derivative of an equation: F_{lhs} = shifted terms."""

    lhs: MultiIndex
    terms: "MappingProxyType"

    def __post_init__(self):
        if self.lhs.m < 1 or (self.lhs.m, self.lhs.n) == (1, 0):
            raise AlgebraError(f"derived-equation lhs {self.lhs} must strictly dominate (1,0)")

    def __eq__(self, other):
        if not isinstance(other, DerivedEquation):
            return NotImplemented
        if self.lhs != other.lhs or set(self.terms) != set(other.terms):
            return False
        return all(self.terms[idx] == other.terms[idx] for idx in self.terms)

    __hash__ = None

    def __repr__(self):
        return f"F_{_suffix(self.lhs)} = {_format_terms(self.terms)}"


def canonical_focusing_eidf(max_weight):
    """The generic focusing equation truncated at max_weight.

    One term per index (m, n) with n >= 1 and weight within the truncation:
    -k_z at (0, 1) and +k_{(m,n)} elsewhere.  Pure time-derivative terms do
    not occur here; they only arise from substitutions.
    """
    if not isinstance(max_weight, int) or isinstance(max_weight, bool) or max_weight < 2:
        raise ConfigError(f"canonical equation needs integer max_weight >= 2, got {max_weight!r}")
    terms = {}
    for n in range(1, 2 * max_weight + 1):
        for m in range((2 * max_weight - n) // 2 + 1):
            idx = MultiIndex(m, n)
            coeff = rc_index(m, n)
            terms[idx] = -coeff if (m, n) == (0, 1) else coeff
    return Eidf(terms, max_weight)


def bgk_second_order_eidf():
    """Second-order relaxation-model equation with atoms v and lam, W = 2."""
    v = rc(symbol("v"))
    lam = rc(symbol("lam"))
    third = Fraction(1, 3)
    terms = {
        MultiIndex(0, 2): v * lam * third,
        MultiIndex(1, 2): lam * lam * Fraction(-2, 3),
        MultiIndex(0, 4): v * lam**3 * Fraction(1, 5),
    }
    return Eidf(terms, 2)


def apply_derivative(equation, a, b):
    """Differentiate an Eidf (or DerivedEquation) a times by t and b times by z.

    Pure index shift: lhs gains (a, b), every term index gains (a, b),
    coefficients are untouched.  No truncation is applied; the derived
    equation is an exact identity.
    """
    if not isinstance(a, int) or not isinstance(b, int) or a < 0 or b < 0:
        raise ConfigError(f"derivative orders must be integers >= 0, got ({a!r}, {b!r})")
    if (a, b) == (0, 0):
        raise ConfigError("apply_derivative requires (a, b) != (0, 0)")
    if isinstance(equation, Eidf):
        base_lhs = MultiIndex(1, 0)
        items = equation.terms.items()
    elif isinstance(equation, DerivedEquation):
        base_lhs = equation.lhs
        items = equation.terms.items()
    else:
        raise ConfigError(f"cannot differentiate {type(equation).__name__}")
    shifted = {idx.shifted(a, b): coeff for idx, coeff in items}
    return DerivedEquation(lhs=base_lhs.shifted(a, b), terms=MappingProxyType(shifted))


def solve_for(equation, target):
    """Solve a derived equation for one term.

    Returns the map index -> coefficient expressing F_target; the lhs index
    appears with coefficient 1/c_target and every other term j with
    -c_j/c_target.  Solving for the lhs itself returns the equation's own
    term map.  An absent or identically-zero target is an algebra error.
    """
    target = as_multiindex(target)
    if target == equation.lhs:
        return dict(equation.terms)
    pivot = equation.terms.get(target)
    if pivot is None or pivot.is_zero:
        raise AlgebraError(f"cannot solve for {target}: no such term in the derived equation")
    expr = {equation.lhs: rc(1) / pivot}
    for idx, coeff in equation.terms.items():
        if idx != target:
            expr[idx] = -coeff / pivot
    return expr


def substitute(eidf, target, expression):
    """Replace the target term of an Eidf by c_target times the expression.

    If the expression feeds a (1, 0) term with coefficient c, the whole
    equation is renormalized by 1/(1 - c) to restore the form dF/dt = RHS
    (c identically 1 is a degenerate algebra error).  Terms beyond the
    truncation weight are discarded at the end.
    """
    target = as_multiindex(target)
    c_target = eidf.terms.get(target)
    if c_target is None:
        raise AlgebraError(f"substitution target {target} is not present in the equation")
    new = {idx: coeff for idx, coeff in eidf.terms.items() if idx != target}
    for key, coeff in expression.items():
        idx = as_multiindex(key)
        add = c_target * rc(coeff)
        if idx in new:
            new[idx] = new[idx] + add
        else:
            new[idx] = add

    c10 = new.pop(MultiIndex(1, 0), None)
    if c10 is not None and not c10.is_zero:
        denom = rc(1) - c10
        if denom.is_zero:
            raise AlgebraError("degenerate substitution: coefficient 1 at (1,0) cannot be normalized")
        new = {idx: coeff / denom for idx, coeff in new.items()}

    kept = {idx: coeff for idx, coeff in new.items() if idx.weight2 <= 2 * eidf.max_weight}
    return Eidf(kept, eidf.max_weight)


def fick_coefficient(eidf):
    """Coefficient of the second spatial derivative (zero if absent)."""
    return eidf.term(MultiIndex(0, 2))


@dataclass(frozen=True)
class DioStep:
    """One derivative-iterative operation: differentiate, solve, substitute.

    family PzI has (a, b) = (0, b >= 1); PtI has (a >= 1, 0); PtzI has both
    orders >= 1.  target names the term solved for in the derived equation
    and replaced in the base equation.
    """

    family: str
    a: int
    b: int
    target: MultiIndex

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ConfigError(f"unknown DIO family {self.family!r}; expected one of {_FAMILIES}")
        if not isinstance(self.a, int) or not isinstance(self.b, int) or self.a < 0 or self.b < 0:
            raise ConfigError(f"derivative orders must be integers >= 0, got ({self.a!r}, {self.b!r})")
        ok = {
            "PzI": self.a == 0 and self.b >= 1,
            "PtI": self.b == 0 and self.a >= 1,
            "PtzI": self.a >= 1 and self.b >= 1,
        }[self.family]
        if not ok:
            raise ConfigError(f"orders (a={self.a}, b={self.b}) are invalid for family {self.family}")


def parse_dio_step(obj):
    """Build a DioStep from a mapping {family, a, b, target: 'm,n'}."""
    if not isinstance(obj, dict):
        raise ConfigError(f"DIO step must be a mapping, got {type(obj).__name__}")
    unknown = set(obj) - {"family", "a", "b", "target"}
    if unknown:
        raise ConfigError(f"unknown DIO step keys: {sorted(unknown)}")
    try:
        family = obj["family"]
        a = obj["a"]
        b = obj["b"]
        target = obj["target"]
    except KeyError as exc:
        raise ConfigError(f"DIO step is missing key {exc.args[0]!r}") from exc
    if not isinstance(a, int) or not isinstance(b, int) or isinstance(a, bool) or isinstance(b, bool):
        raise ConfigError("DIO step orders a and b must be integers")
    return DioStep(family=family, a=a, b=b, target=as_multiindex(target))


def run_dio_step(eidf, step):
    """Apply one DioStep: derive by (a, b), solve for target, substitute back."""
    derived = apply_derivative(eidf, step.a, step.b)
    expr = solve_for(derived, step.target)
    return substitute(eidf, step.target, expr), derived


@dataclass(frozen=True)
class DioRun:
    """Result of running a script of DioSteps on one starting equation."""

    start: Eidf
    final: Eidf
    steps: tuple
    transcript: str


def run_dio_script(eidf, steps):
    """Run a sequence of DioSteps, threading the equation through each one."""
    steps = tuple(steps)
    lines = [f"start: {eidf!r}"]
    current = eidf
    for i, step in enumerate(steps, start=1):
        current, derived = run_dio_step(current, step)
        lines.append(f"step {i}: {step.family} a={step.a} b={step.b}, solve for {step.target}")
        lines.append(f"  derived:  {derived!r}")
        lines.append(f"  rewritten: {current!r}")
    return DioRun(start=eidf, final=current, steps=steps, transcript="\n".join(lines))


@dataclass(frozen=True)
class GombosiRoundtrip:
    """Transcript of the second-order -> telegraph reduction."""

    start: Eidf
    intermediate: Eidf
    final: Eidf
    transcript: str


def gombosi_roundtrip():
    """Reduce the second-order relaxation equation to telegraph form.

    A 2nd-order spatial DIO eliminates the fourth spatial derivative (the
    intermediate equation carries -lam^2/15 at (1,2)); a 1st-order temporal
    DIO then trades the mixed term for a second time derivative, giving the
    telegraph coefficients -lam/(5 v) at (2,0) and v lam / 3 at (0,2).
    All coefficient arithmetic is exact.
    """
    start = bgk_second_order_eidf()
    steps1 = (DioStep(family="PzI", a=0, b=2, target=MultiIndex(0, 4)),)
    run1 = run_dio_script(start, steps1)
    steps2 = (DioStep(family="PtI", a=1, b=0, target=MultiIndex(1, 2)),)
    run2 = run_dio_script(run1.final, steps2)
    transcript = run1.transcript + "\n" + run2.transcript
    return GombosiRoundtrip(start=start, intermediate=run1.final, final=run2.final,
                            transcript=transcript)
