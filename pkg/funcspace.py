"""
Function Space Module
Closed-form analytic functions on the unit disc: evaluation, derivatives, circle grids and Taylor data.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.signal import lfilter
from scipy.special import comb

from config import get_settings
from errors import (
    DomainError,
    EvalAtSingularity,
    NoLimit,
    PrecisionLoss,
    ValidationError,
)

logger = logging.getLogger(__name__)

UNIMODULAR_TOL = 1e-12
DOMAIN_TOL = 1e-12
POLE_TOL = 1e-9
SINGULAR_TOL = 1e-12
CAUCHY_RATIONAL_LIMIT = 8

Number = Union[int, float, complex]


def as_pair(c: Number) -> List[float]:
    """Complex number as the [re, im] pair used in JSON."""
    c = complex(c)
    return [c.real, c.imag]


def next_pow2(n: int) -> int:
    return 1 << max(0, int(np.ceil(np.log2(max(n, 1)))))


def circle_points(M: int, perturbed: Sequence[int] = ()) -> np.ndarray:
    """M-th roots of unity, the listed indices rotated by half a grid step."""
    theta = 2 * np.pi * np.arange(M) / M
    if len(perturbed):
        theta[list(perturbed)] += np.pi / M
    return np.exp(1j * theta)


def _spread(coeffs: np.ndarray, k: int) -> np.ndarray:
    """Coefficients of c(z^k) from those of c(z)."""
    out = np.zeros((len(coeffs) - 1) * k + 1, dtype=complex)
    out[::k] = coeffs
    return out


def _coerce(other):
    if isinstance(other, FnExpr):
        return other
    if isinstance(other, (int, float, complex, np.number)):
        return Poly([other])
    return NotImplemented


class FnExpr:
    """Base class for closed-form analytic functions on the disc."""

    kind = "expr"

    def __call__(self, z):
        return evaluate(self, z)

    def _eval(self, z: np.ndarray) -> np.ndarray:
        """Vectorised values; singular points come back as NaN."""
        raise NotImplementedError

    def _derivative(self) -> 'FnExpr':
        r = self.as_rational()
        if r is None:
            raise NotImplementedError(f"no derivative rule for {self.kind}")
        return r._derivative()

    def derivative(self, order: int = 1) -> 'FnExpr':
        return derivative(self, order)

    def as_rational(self) -> Optional['Rational']:
        return None

    def _taylor(self, D: int) -> Optional[np.ndarray]:
        r = self.as_rational()
        if r is None:
            return None
        return r._taylor(D)

    def analytic_on_closed_disc(self) -> bool:
        r = self.as_rational()
        return r is not None and r.analytic_on_closed_disc()

    def to_dict(self) -> Dict:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({json.dumps(self.to_dict(), sort_keys=True)})"

    # arithmetic builds combinators; polynomial pairs stay polynomials

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if isinstance(self, Poly) and isinstance(other, Poly):
            return Poly(P.polyadd(self.coeffs, other.coeffs))
        return Sum([self, other])

    __radd__ = __add__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            if isinstance(self, Poly):
                return Poly(self.coeffs * complex(other))
            return Scale(self, other)
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if isinstance(self, Poly) and isinstance(other, Poly):
            return Poly(P.polymul(self.coeffs, other.coeffs))
        return Product([self, other])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self * (1 / complex(other))
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return Quotient(self, other)


class Poly(FnExpr):
    """Polynomial with complex coefficients c_0..c_d (ascending)."""

    kind = "poly"

    def __init__(self, coeffs: Sequence[Number]):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        nonzero = np.flatnonzero(c)
        if len(nonzero) == 0:
            c = np.zeros(1, dtype=complex)
        else:
            c = c[:nonzero[-1] + 1].copy()
        self.coeffs = c

    @property
    def degree(self) -> int:
        """Index of the last nonzero coefficient, -1 for the zero polynomial."""
        if len(self.coeffs) == 1 and self.coeffs[0] == 0:
            return -1
        return len(self.coeffs) - 1

    @classmethod
    def from_roots(cls, roots: Sequence[Number], lead: Number = 1.0) -> 'Poly':
        if len(roots) == 0:
            return cls([lead])
        return cls(P.polyfromroots(np.asarray(roots, dtype=complex)) * complex(lead))

    def roots(self) -> np.ndarray:
        if self.degree <= 0:
            return np.zeros(0, dtype=complex)
        return P.polyroots(self.coeffs)

    def _eval(self, z):
        return P.polyval(z, self.coeffs)

    def _derivative(self):
        if self.degree <= 0:
            return Poly([0])
        return Poly(P.polyder(self.coeffs))

    def as_rational(self):
        return Rational(self, Poly([1]))

    def _taylor(self, D):
        out = np.zeros(D + 1, dtype=complex)
        n = min(D + 1, len(self.coeffs))
        out[:n] = self.coeffs[:n]
        return out

    def analytic_on_closed_disc(self):
        return True

    def to_dict(self):
        return {'type': self.kind, 'coeffs': [as_pair(c) for c in self.coeffs]}


class Rational(FnExpr):
    """
    Quotient of polynomials num/den.

    Args:
        num: Numerator
        den: Denominator, without zeros in the open disc
        boundary_safe: Allow denominator zeros on the unit circle
    """

    kind = "rational"

    def __init__(self, num: Poly, den: Poly, boundary_safe: bool = False):
        if den.degree < 0:
            raise ValidationError("rational denominator is identically zero")
        self.num = num
        self.den = den
        self.boundary_safe = boundary_safe
        poles = den.roots()
        if np.any(np.abs(poles) < 1 - POLE_TOL):
            raise ValidationError(
                "rational function has a pole inside the disc",
                {'poles': [as_pair(p) for p in poles]}
            )
        if not boundary_safe and np.any(np.abs(poles) <= 1 + POLE_TOL):
            raise ValidationError(
                "rational function has a pole on the unit circle (set boundary_safe)",
                {'poles': [as_pair(p) for p in poles]}
            )

    def _eval(self, z):
        d = P.polyval(z, self.den.coeffs)
        n = P.polyval(z, self.num.coeffs)
        with np.errstate(divide='ignore', invalid='ignore'):
            out = np.asarray(n / d, dtype=complex)
        tiny = 1e-14 * np.max(np.abs(self.den.coeffs))
        out[np.abs(d) <= tiny] = np.nan
        return out

    def _derivative(self):
        num = self.num._derivative() * self.den - self.num * self.den._derivative()
        return Rational(num, self.den * self.den, boundary_safe=self.boundary_safe)

    def as_rational(self):
        return self

    def _taylor(self, D):
        if self.den.coeffs[0] == 0:
            return None
        impulse = np.zeros(D + 1, dtype=complex)
        impulse[0] = 1.0
        return lfilter(self.num.coeffs, self.den.coeffs, impulse)

    def analytic_on_closed_disc(self):
        return bool(np.all(np.abs(self.den.roots()) > 1 + POLE_TOL))

    def to_dict(self):
        out = {'type': self.kind, 'num': self.num.to_dict(), 'den': self.den.to_dict()}
        if self.boundary_safe:
            out['boundary_safe'] = True
        return out


class Blaschke(FnExpr):
    """Finite Blaschke product gamma * prod (z - a)/(1 - conj(a) z)."""

    kind = "blaschke"

    def __init__(self, zeros: Sequence[Number], gamma: Number = 1.0):
        self.zeros = np.asarray(zeros, dtype=complex).reshape(-1)
        if np.any(np.abs(self.zeros) >= 1 - UNIMODULAR_TOL):
            raise ValidationError("Blaschke zeros must lie in the open disc")
        self.gamma = complex(gamma)
        if abs(abs(self.gamma) - 1) > UNIMODULAR_TOL:
            raise ValidationError("Blaschke constant must be unimodular",
                                  {'gamma': as_pair(self.gamma)})

    def _eval(self, z):
        out = np.full(np.shape(z), self.gamma, dtype=complex)
        for a in self.zeros:
            out = out * (z - a) / (1 - np.conj(a) * z)
        return out

    def as_rational(self):
        num = Poly.from_roots(self.zeros, self.gamma)
        den = Poly([1])
        for a in self.zeros:
            den = den * Poly([1, -np.conj(a)])
        return Rational(num, den)

    def analytic_on_closed_disc(self):
        return True

    def to_dict(self):
        return {
            'type': self.kind,
            'zeros': [as_pair(a) for a in self.zeros],
            'gamma': as_pair(self.gamma)
        }


class SingularInner(FnExpr):
    """Atomic singular inner function exp(-sum w_j (xi_j + z)/(xi_j - z))."""

    kind = "singular_inner"

    def __init__(self, atoms: Sequence[Number], masses: Sequence[float]):
        atoms = np.asarray(atoms, dtype=complex).reshape(-1)
        masses = np.asarray(masses, dtype=float).reshape(-1)
        if len(atoms) != len(masses) or len(atoms) == 0:
            raise ValidationError("singular inner function needs one mass per atom")
        if np.any(np.abs(np.abs(atoms) - 1) > UNIMODULAR_TOL):
            raise ValidationError("singular inner atoms must be unimodular",
                                  {'atoms': [as_pair(a) for a in atoms]})
        if np.any(masses <= 0):
            raise ValidationError("singular inner masses must be positive")
        atoms = atoms / np.abs(atoms)
        for i in range(len(atoms)):
            if np.any(np.abs(atoms[i + 1:] - atoms[i]) < UNIMODULAR_TOL):
                raise ValidationError("singular inner atoms must be distinct")
        self.atoms = atoms
        self.masses = masses

    def _eval(self, z):
        expo = np.zeros(np.shape(z), dtype=complex)
        hit = np.zeros(np.shape(z), dtype=bool)
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            for xi, w in zip(self.atoms, self.masses):
                d = xi - z
                hit |= np.abs(d) < SINGULAR_TOL
                expo = expo + w * (xi + z) / d
            out = np.exp(-expo)
        out = np.asarray(out, dtype=complex)
        out[hit] = np.nan
        return out

    def _derivative(self):
        log_derivative = CauchySum(self.atoms, -2 * self.masses * np.conj(self.atoms), power=2)
        return Product([self, log_derivative])

    def analytic_on_closed_disc(self):
        return False

    def to_dict(self):
        return {
            'type': self.kind,
            'atoms': [{'xi': as_pair(x), 'mass': float(w)} for x, w in zip(self.atoms, self.masses)]
        }


class HerglotzInner(FnExpr):
    """
    Inner function whose Clark measure at 1 is the given atomic measure.

    Built as I = (H - 1)/(H + 1) where H is the Herglotz integral of the
    measure; with H = P/Q this is the rational function (P - Q)/(P + Q).
    """

    kind = "herglotz_inner"

    def __init__(self, atoms: Sequence[Number], weights: Sequence[float]):
        atoms = np.asarray(atoms, dtype=complex).reshape(-1)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if len(atoms) != len(weights) or len(atoms) == 0:
            raise ValidationError("Herglotz measure needs one weight per atom")
        if np.any(np.abs(np.abs(atoms) - 1) > UNIMODULAR_TOL):
            raise ValidationError("Herglotz atoms must be unimodular")
        if np.any(weights <= 0):
            raise ValidationError("Herglotz weights must be positive")
        self.atoms = atoms / np.abs(atoms)
        self.weights = weights
        self._rational = self._build()

    def _build(self) -> Rational:
        Q = Poly([1])
        for xi in self.atoms:
            Q = Q * Poly([xi, -1])
        Pn = Poly([0])
        for j, (xi, w) in enumerate(zip(self.atoms, self.weights)):
            term = Poly([w * xi, w])
            for i, other in enumerate(self.atoms):
                if i != j:
                    term = term * Poly([other, -1])
            Pn = Pn + term
        return Rational(Pn - Q, Pn + Q, boundary_safe=True)

    def _eval(self, z):
        return self._rational._eval(z)

    def as_rational(self):
        return self._rational

    def to_dict(self):
        return {
            'type': self.kind,
            'atoms': [{'xi': as_pair(x), 'mass': float(w)} for x, w in zip(self.atoms, self.weights)]
        }


class H2Kernel(FnExpr):
    """Szego kernel 1/(1 - conj(point) z) of an interior point."""

    kind = "h2_kernel"

    def __init__(self, point: Number):
        self.point = complex(point)
        if abs(self.point) >= 1:
            raise DomainError("H2 kernel point must lie in the open disc",
                              {'point': as_pair(self.point)})

    def _eval(self, z):
        return 1 / (1 - np.conj(self.point) * z)

    def _derivative(self):
        return CauchySum([self.point], [np.conj(self.point)], power=2)

    def as_rational(self):
        return Rational(Poly([1]), Poly([1, -np.conj(self.point)]))

    def _taylor(self, D):
        return np.conj(self.point) ** np.arange(D + 1)

    def analytic_on_closed_disc(self):
        return True

    def to_dict(self):
        return {'type': self.kind, 'point': as_pair(self.point)}


class HbKernel(FnExpr):
    """
    Reproducing kernel (1 - conj(b(w)) b(z))/(1 - conj(w) z) of a symbol b.

    Args:
        b: Symbol
        point: Interior point, or boundary point where b has an angular derivative
        value: b(point); boundary points default to the non-tangential limit
    """

    kind = "hb_kernel"
    symbol_key = "b"

    def __init__(self, b: FnExpr, point: Number, value: Optional[Number] = None):
        self.b = b
        self.point = complex(point)
        if abs(self.point) > 1 + DOMAIN_TOL:
            raise DomainError("kernel point outside the closed disc",
                              {'point': as_pair(self.point)})
        self.boundary = abs(self.point) > 1 - DOMAIN_TOL
        if self.boundary:
            self.point = self.point / abs(self.point)
        if value is None:
            if self.boundary:
                limit = nontangential_limit(b, self.point)
                if limit.divergent:
                    raise NoLimit("symbol has no boundary value at the kernel point",
                                  {'point': as_pair(self.point)})
                value = limit.value
            else:
                value = evaluate(b, self.point)
        self.value = complex(value)
        self._form = self._build()

    def _build(self) -> FnExpr:
        wbar = np.conj(self.point)
        vbar = np.conj(self.value)
        r = self.b.as_rational()
        if r is None:
            return Product([Sum([Poly([1]), Scale(self.b, -vbar)]), CauchySum([self.point], [1.0])])
        num = r.den - r.num * vbar
        den = r.den * Poly([1, -wbar])
        if self.boundary:
            quo, rem = P.polydiv(num.coeffs, np.array([-self.point, 1]))
            if np.max(np.abs(rem)) <= 1e-10 * max(1.0, np.max(np.abs(num.coeffs))):
                return Rational(Poly(quo), r.den * (-wbar), boundary_safe=True)
        return Rational(num, den, boundary_safe=True)

    def _eval(self, z):
        return self._form._eval(z)

    def _derivative(self):
        return self._form._derivative()

    def as_rational(self):
        return self._form if isinstance(self._form, Rational) else None

    def _taylor(self, D):
        return self._form._taylor(D)

    def analytic_on_closed_disc(self):
        return self._form.analytic_on_closed_disc()

    def to_dict(self):
        return {
            'type': self.kind,
            self.symbol_key: self.b.to_dict(),
            'point': as_pair(self.point),
            'value': as_pair(self.value)
        }


class KIKernel(HbKernel):
    """Model-space kernel k_w^I of an inner function."""

    kind = "ki_kernel"
    symbol_key = "inner"

    @property
    def inner(self) -> FnExpr:
        return self.b


class CauchySum(FnExpr):
    """Finite sum of c_n / (1 - conj(p_n) z)^power, points in the closed disc."""

    kind = "cauchy_sum"

    def __init__(self, points: Sequence[Number], coeffs: Sequence[Number], power: int = 1):
        self.points = np.asarray(points, dtype=complex).reshape(-1)
        self.coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        if len(self.points) != len(self.coeffs):
            raise ValidationError("Cauchy sum needs one coefficient per point")
        if np.any(np.abs(self.points) > 1 + DOMAIN_TOL):
            raise ValidationError("Cauchy sum points must lie in the closed disc")
        if int(power) < 1:
            raise ValidationError("Cauchy sum power must be positive")
        self.power = int(power)

    def _eval(self, z):
        out = np.zeros(np.shape(z), dtype=complex)
        hit = np.zeros(np.shape(z), dtype=bool)
        with np.errstate(divide='ignore', invalid='ignore'):
            for p, c in zip(self.points, self.coeffs):
                d = 1 - np.conj(p) * z
                hit |= np.abs(d) < SINGULAR_TOL
                out = out + c / d ** self.power
        out[hit] = np.nan
        return out

    def _derivative(self):
        return CauchySum(self.points, self.coeffs * self.power * np.conj(self.points), self.power + 1)

    def as_rational(self):
        if len(self.points) > CAUCHY_RATIONAL_LIMIT:
            return None
        factors = [Poly([1, -np.conj(p)]) for p in self.points]
        den = Poly([1])
        for f in factors:
            for _ in range(self.power):
                den = den * f
        num = Poly([0])
        for i, c in enumerate(self.coeffs):
            term = Poly([c])
            for j, f in enumerate(factors):
                if j != i:
                    for _ in range(self.power):
                        term = term * f
            num = num + term
        return Rational(num, den, boundary_safe=True)

    def _taylor(self, D):
        k = np.arange(D + 1)
        binom = comb(k + self.power - 1, self.power - 1)
        powers = np.conj(self.points)[None, :] ** k[:, None]
        return binom * (powers @ self.coeffs)

    def analytic_on_closed_disc(self):
        return bool(np.all(np.abs(self.points) < 1 - DOMAIN_TOL))

    def to_dict(self):
        return {
            'type': self.kind,
            'points': [as_pair(p) for p in self.points],
            'coeffs': [as_pair(c) for c in self.coeffs],
            'power': self.power
        }


class Sum(FnExpr):
    kind = "sum"

    def __init__(self, terms: Sequence[FnExpr]):
        flat = []
        for t in terms:
            flat.extend(t.terms if isinstance(t, Sum) else [t])
        if not flat:
            raise ValidationError("sum needs at least one term")
        self.terms = tuple(flat)

    def _eval(self, z):
        out = np.zeros(np.shape(z), dtype=complex)
        for t in self.terms:
            out = out + t._eval(z)
        return out

    def _derivative(self):
        return Sum([t._derivative() for t in self.terms])

    def as_rational(self):
        parts = [t.as_rational() for t in self.terms]
        if any(p is None for p in parts):
            return None
        num, den = parts[0].num, parts[0].den
        for p in parts[1:]:
            num = num * p.den + p.num * den
            den = den * p.den
        return Rational(num, den, boundary_safe=any(p.boundary_safe for p in parts))

    def _taylor(self, D):
        out = np.zeros(D + 1, dtype=complex)
        for t in self.terms:
            c = t._taylor(D)
            if c is None:
                return None
            out += c
        return out

    def analytic_on_closed_disc(self):
        return all(t.analytic_on_closed_disc() for t in self.terms)

    def to_dict(self):
        return {'type': self.kind, 'terms': [t.to_dict() for t in self.terms]}


class Product(FnExpr):
    kind = "product"

    def __init__(self, factors: Sequence[FnExpr]):
        flat = []
        for f in factors:
            flat.extend(f.factors if isinstance(f, Product) else [f])
        if not flat:
            raise ValidationError("product needs at least one factor")
        self.factors = tuple(flat)

    def _eval(self, z):
        out = np.ones(np.shape(z), dtype=complex)
        for f in self.factors:
            out = out * f._eval(z)
        return out

    def _derivative(self):
        terms = []
        for i, f in enumerate(self.factors):
            rest = [g for j, g in enumerate(self.factors) if j != i]
            terms.append(Product([f._derivative()] + rest))
        return Sum(terms)

    def as_rational(self):
        parts = [f.as_rational() for f in self.factors]
        if any(p is None for p in parts):
            return None
        num, den = Poly([1]), Poly([1])
        for p in parts:
            num = num * p.num
            den = den * p.den
        return Rational(num, den, boundary_safe=any(p.boundary_safe for p in parts))

    def _taylor(self, D):
        out = None
        for f in self.factors:
            c = f._taylor(D)
            if c is None:
                return None
            out = c if out is None else np.convolve(out, c)[:D + 1]
        return out

    def analytic_on_closed_disc(self):
        return all(f.analytic_on_closed_disc() for f in self.factors)

    def to_dict(self):
        return {'type': self.kind, 'factors': [f.to_dict() for f in self.factors]}


class Scale(FnExpr):
    kind = "scale"

    def __init__(self, expr: FnExpr, factor: Number):
        self.expr = expr
        self.factor = complex(factor)

    def _eval(self, z):
        return self.factor * self.expr._eval(z)

    def _derivative(self):
        return Scale(self.expr._derivative(), self.factor)

    def as_rational(self):
        r = self.expr.as_rational()
        if r is None:
            return None
        return Rational(r.num * self.factor, r.den, boundary_safe=r.boundary_safe)

    def _taylor(self, D):
        c = self.expr._taylor(D)
        return None if c is None else self.factor * c

    def analytic_on_closed_disc(self):
        return self.expr.analytic_on_closed_disc()

    def to_dict(self):
        return {'type': self.kind, 'factor': as_pair(self.factor), 'expr': self.expr.to_dict()}


class ComposePower(FnExpr):
    """f(z^k)."""

    kind = "compose_power"

    def __init__(self, expr: FnExpr, power: int):
        if int(power) < 1:
            raise ValidationError("composition power must be positive")
        self.expr = expr
        self.power = int(power)

    def _eval(self, z):
        return self.expr._eval(np.asarray(z) ** self.power)

    def _derivative(self):
        k = self.power
        outer = ComposePower(self.expr._derivative(), k)
        return Product([Poly(np.eye(1, k, k - 1).ravel() * k), outer])

    def as_rational(self):
        r = self.expr.as_rational()
        if r is None:
            return None
        return Rational(Poly(_spread(r.num.coeffs, self.power)),
                        Poly(_spread(r.den.coeffs, self.power)),
                        boundary_safe=r.boundary_safe)

    def _taylor(self, D):
        c = self.expr._taylor(D // self.power)
        if c is None:
            return None
        out = np.zeros(D + 1, dtype=complex)
        spread = _spread(c, self.power)[:D + 1]
        out[:len(spread)] = spread
        return out

    def analytic_on_closed_disc(self):
        return self.expr.analytic_on_closed_disc()

    def to_dict(self):
        return {'type': self.kind, 'power': self.power, 'expr': self.expr.to_dict()}


class Quotient(FnExpr):
    """num/den where the zeros of den are removable singularities."""

    kind = "quotient"

    def __init__(self, num: FnExpr, den: FnExpr):
        self.num = num
        self.den = den

    def _eval(self, z):
        d = self.den._eval(z)
        with np.errstate(divide='ignore', invalid='ignore'):
            out = np.asarray(self.num._eval(z) / d, dtype=complex)
        out[np.abs(d) < SINGULAR_TOL] = np.nan
        return out

    def _derivative(self):
        top = Sum([Product([self.num._derivative(), self.den]),
                   Scale(Product([self.num, self.den._derivative()]), -1)])
        return Quotient(top, Product([self.den, self.den]))

    def as_rational(self):
        n, d = self.num.as_rational(), self.den.as_rational()
        if n is None or d is None:
            return None
        try:
            return Rational(n.num * d.den, n.den * d.num, boundary_safe=True)
        except ValidationError:
            return None

    def to_dict(self):
        return {'type': self.kind, 'num': self.num.to_dict(), 'den': self.den.to_dict()}


@dataclass(frozen=True, eq=False)
class CircleGrid:
    """Samples at the M-th roots of unity (some indices rotated by pi/M)."""

    M: int
    values: np.ndarray
    source: str = ""
    perturbed: Tuple[int, ...] = ()

    @property
    def points(self) -> np.ndarray:
        return circle_points(self.M, self.perturbed)

    def to_dict(self) -> Dict:
        return {'M': self.M, 'source': self.source, 'perturbed': list(self.perturbed)}


@dataclass(frozen=True)
class LimitResult:
    value: complex
    error: float
    divergent: bool = False

    def to_dict(self) -> Dict:
        return {'value': as_pair(self.value), 'error': self.error, 'divergent': self.divergent}


def expr_id(expr: FnExpr) -> str:
    """Short content hash of an expression tree."""
    blob = json.dumps(expr.to_dict(), sort_keys=True)
    return hashlib.md5(blob.encode()).hexdigest()[:12]


def evaluate(expr: FnExpr, z):
    """
    Evaluate an expression at a point (or array of points) of the closed disc.

    Args:
        expr: Expression
        z: Point or array of points with |z| <= 1

    Returns:
        Complex value(s)
    """
    scalar = np.ndim(z) == 0
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(np.abs(arr) > 1 + DOMAIN_TOL):
        raise DomainError("evaluation point outside the closed disc",
                          {'max_modulus': float(np.max(np.abs(arr)))})
    values = np.asarray(expr._eval(arr), dtype=complex)
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise EvalAtSingularity(
            f"{expr.kind} is singular at the requested point",
            {'points': [as_pair(p) for p in arr[bad][:8]]}
        )
    return complex(values[0]) if scalar else values


def derivative(expr: FnExpr, order: int = 1) -> FnExpr:
    """Closed-form derivative of the given order."""
    if order < 1:
        raise ValidationError("derivative order must be at least 1")
    out = expr
    for _ in range(order):
        out = out._derivative()
    return out


def joint_samples(exprs: Sequence[FnExpr], M: int) -> List[CircleGrid]:
    """
    Sample several expressions on one grid.

    Points where any expression is singular are rotated by pi/M for all of
    them, so the grids stay aligned.
    """
    if M < 16 or M & (M - 1):
        raise ValidationError(f"grid size must be a power of two >= 16, got {M}")
    pts = circle_points(M)
    values = [np.asarray(e._eval(pts), dtype=complex) for e in exprs]
    bad = np.zeros(M, dtype=bool)
    for v in values:
        bad |= ~np.isfinite(v)
    perturbed = tuple(int(i) for i in np.flatnonzero(bad))
    if perturbed:
        logger.debug(f"Rotating {len(perturbed)} singular grid points by pi/{M}")
        shifted = circle_points(M, perturbed)[list(perturbed)]
        for e, v in zip(exprs, values):
            v[list(perturbed)] = e._eval(shifted)
            if not np.all(np.isfinite(v)):
                raise EvalAtSingularity(f"{e.kind} stays singular after grid perturbation",
                                        {'M': M, 'perturbed': list(perturbed)})
    return [CircleGrid(M, v, expr_id(e), perturbed) for e, v in zip(exprs, values)]


def circle_samples(expr: FnExpr, M: int) -> CircleGrid:
    return joint_samples([expr], M)[0]


def taylor_coeffs(expr: FnExpr, D: int) -> np.ndarray:
    """
    First D+1 Taylor coefficients at the origin.

    Exact for expressions with a rational or power-series form; otherwise by
    contour quadrature at radius 0.5 (D <= 32) or 1 - 8/(D+1).
    """
    exact = expr._taylor(D)
    if exact is not None:
        return np.asarray(exact, dtype=complex)

    rho = 0.5 if D <= 32 else 1 - 8 / (D + 1)
    M = next_pow2(max(64, 8 * (D + 1)))
    samples = np.asarray(expr._eval(rho * circle_points(M)), dtype=complex)
    if not np.all(np.isfinite(samples)):
        raise PrecisionLoss(f"{expr.kind} is not finite on the contour of radius {rho}")
    spectrum = np.fft.fft(samples) / M
    tail = np.max(np.abs(spectrum[M // 2:]))
    scale = max(1.0, np.max(np.abs(samples)))
    if tail > 1e-8 * scale:
        raise PrecisionLoss(
            f"Taylor tail of {expr.kind} not resolved on {M} contour points",
            {'tail': float(tail), 'radius': rho, 'M': M}
        )
    return spectrum[:D + 1] / rho ** np.arange(D + 1)


def nontangential_limit(expr: FnExpr, zeta: Number, tol: Optional[float] = None) -> LimitResult:
    """
    Radial limit at a boundary point with one Richardson pass.

    Args:
        expr: Expression
        zeta: Unimodular point
        tol: Accepted extrapolation error (default limit_tol setting)

    Returns:
        LimitResult; divergent=True when the radial values blow up
    """
    zeta = complex(zeta)
    if abs(abs(zeta) - 1) > 1e-10:
        raise DomainError("non-tangential limits are taken at unimodular points",
                          {'zeta': as_pair(zeta)})
    zeta = zeta / abs(zeta)
    tol = get_settings().limit_tol if tol is None else tol

    radii = 1 - 2.0 ** -np.arange(4, 27)
    values = np.asarray(expr._eval(radii * zeta), dtype=complex)
    finite = np.isfinite(values)
    if not finite[-1]:
        return LimitResult(complex(np.nan), float('inf'), True)
    values = values[finite]
    first, last = abs(values[0]), abs(values[-1])
    if len(values) >= 2 and last > 1e6 * max(1.0, first) and last > abs(values[-2]):
        return LimitResult(complex(values[-1]), float('inf'), True)

    extrapolated = 2 * values[1:] - values[:-1]
    value = complex(extrapolated[-1])
    error = float(abs(extrapolated[-1] - extrapolated[-2]))
    if error > tol * max(1.0, abs(value)):
        raise NoLimit(
            f"radial values of {expr.kind} do not settle at {zeta:.6g}",
            {'error': error, 'tol': tol}
        )
    return LimitResult(value, error, False)


def boundary_value(expr: FnExpr, zeta: Number) -> complex:
    """Value at a boundary point: direct when finite, else the radial limit."""
    try:
        return evaluate(expr, zeta)
    except EvalAtSingularity:
        limit = nontangential_limit(expr, zeta)
        if limit.divergent:
            raise EvalAtSingularity(f"{expr.kind} has no finite boundary value at {complex(zeta):.6g}",
                                    {'zeta': as_pair(zeta)})
        return limit.value


def is_unimodular_on_grid(expr: FnExpr, M: int = 256, tol: float = 1e-10) -> bool:
    grid = circle_samples(expr, M)
    return bool(np.max(np.abs(np.abs(grid.values) - 1)) <= tol)


def inner_parts(expr: FnExpr) -> Optional[Tuple[List[complex], List[Tuple[complex, float]]]]:
    """
    Blaschke zeros and singular atoms of a recognisably inner expression.

    Returns:
        (zeros, atoms) or None when the expression is not recognised as inner
    """
    if isinstance(expr, Poly):
        c = expr.coeffs
        if expr.degree >= 0 and np.count_nonzero(c) == 1 and abs(abs(c[-1]) - 1) <= UNIMODULAR_TOL:
            return [0j] * expr.degree, []
        return None
    if isinstance(expr, Blaschke):
        return list(expr.zeros), []
    if isinstance(expr, SingularInner):
        return [], list(zip(expr.atoms, expr.masses))
    if isinstance(expr, (HerglotzInner, Rational)):
        r = expr.as_rational()
        if r.num.degree < 0 or not r.analytic_on_closed_disc():
            return None
        if not is_unimodular_on_grid(r):
            return None
        return list(r.num.roots()), []
    if isinstance(expr, Scale):
        if abs(abs(expr.factor) - 1) > UNIMODULAR_TOL:
            return None
        return inner_parts(expr.expr)
    if isinstance(expr, Product):
        zeros, atoms = [], []
        for f in expr.factors:
            parts = inner_parts(f)
            if parts is None:
                return None
            zeros += parts[0]
            atoms += parts[1]
        return zeros, atoms
    if isinstance(expr, ComposePower):
        parts = inner_parts(expr.expr)
        if parts is None:
            return None
        k = expr.power
        roots = np.exp(2j * np.pi * np.arange(k) / k)
        zeros = [complex(a ** (1 / k) * w) if a != 0 else 0j for a in parts[0] for w in roots]
        atoms = [(complex(xi ** (1 / k) * w), m / k) for xi, m in parts[1] for w in roots]
        return zeros, atoms
    return None


def is_inner(expr: FnExpr) -> bool:
    return inner_parts(expr) is not None
