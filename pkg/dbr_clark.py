"""
Clark Module
Half-inner symbols b = (1+I)/2: Clark atoms, model-space kernels, the decomposition f = (1-I)g1 + g2 and its norms.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from config import get_settings
from dbr_rational import BSpec
from errors import EvalAtSingularity, NoLimit, NotDiscrete, NotInE0, TailTooLarge, ValidationError
from funcspace import (
    CauchySum,
    FnExpr,
    HerglotzInner,
    KIKernel,
    Poly,
    Product,
    Quotient,
    Rational,
    Scale,
    SingularInner,
    Sum,
    as_pair,
    boundary_value,
    circle_points,
    circle_samples,
    derivative,
    evaluate,
    is_inner,
    nontangential_limit,
)
from hardy import h2_norm

logger = logging.getLogger(__name__)

ATOM_TOL = 1e-6
MULTIPLIER_RADII = (1 - 2.0 ** -8, 1 - 2.0 ** -10)
MULTIPLIER_RTOL = 0.01
MULTIPLIER_ATOL = 1e-10
TAIL_MASS_RTOL = 1e-12


@dataclass(frozen=True)
class ClarkAtom:
    point: complex
    weight: float

    def to_dict(self) -> Dict:
        return {'zeta': as_pair(self.point), 'weight': self.weight}


@dataclass(frozen=True, eq=False)
class ClarkData:
    """
    Atoms of the Clark measure of an inner function at a base point.

    Attributes:
        inner: The inner function I
        alpha: Unimodular base point
        atoms: Retained atoms, heaviest first
        n_trunc: Truncation index (at most 2N+1 atoms kept)
        total_mass_target: (1 - |I(0)|^2)/|alpha - I(0)|^2
        method: How the atoms were found
    """

    inner: FnExpr
    alpha: complex
    atoms: Tuple[ClarkAtom, ...]
    n_trunc: int
    total_mass_target: float
    method: str

    @property
    def points(self) -> np.ndarray:
        return np.array([a.point for a in self.atoms], dtype=complex)

    @property
    def weights(self) -> np.ndarray:
        return np.array([a.weight for a in self.atoms], dtype=float)

    @property
    def retained_mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def tail_mass(self) -> float:
        return max(self.total_mass_target - self.retained_mass, 0.0)

    @property
    def has_tail(self) -> bool:
        return self.tail_mass > TAIL_MASS_RTOL * max(1.0, self.total_mass_target)

    def lightest(self) -> np.ndarray:
        """Indices of the lightest retained atoms, at least two of them when available."""
        w = self.weights
        group = np.flatnonzero(w <= np.min(w) * (1 + 1e-9))
        if len(group) < 2:
            group = np.argsort(w)[:2]
        return group

    def to_dict(self) -> Dict:
        return {
            'inner': self.inner.to_dict(),
            'alpha': as_pair(self.alpha),
            'method': self.method,
            'n_trunc': self.n_trunc,
            'total_mass_target': self.total_mass_target,
            'retained_mass': self.retained_mass,
            'atoms': [a.to_dict() for a in self.atoms]
        }


@dataclass(eq=False)
class ClarkDecomp:
    """
    f = (1 - I) g1 + g2 with g2 = sum c_n k_n^I.

    When the Clark measure has mass beyond the retained atoms, those atoms
    carry tail_value as their value of f; g2_coeffs stay f(zeta_n) w_n.
    """

    f: FnExpr
    data: ClarkData
    g1: FnExpr
    g2: FnExpr
    g2_coeffs: np.ndarray
    tail_estimate: float
    tail_value: Optional[complex] = None
    _norms: Optional[Tuple[float, float]] = field(default=None, repr=False)

    def g2_norm(self) -> float:
        """Exact from the orthogonal Clark basis: ||k_n||^2 = 1/w_n."""
        square = float(np.sum(np.abs(self.g2_coeffs) ** 2 / self.data.weights))
        if self.tail_value is not None:
            square += abs(self.tail_value) ** 2 * self.data.tail_mass
        return float(np.sqrt(square))

    def g1_norm(self, M: Optional[int] = None) -> float:
        return h2_norm(self.g1, M or get_settings().clark_grid)

    def to_dict(self) -> Dict:
        triple, exact = hb_norm_clark(self)
        return {
            'g1': self.g1.to_dict(),
            'g2_coeffs': [as_pair(c) for c in self.g2_coeffs],
            'tail_value': as_pair(self.tail_value) if self.tail_value is not None else None,
            'g1_norm': self.g1_norm(),
            'g2_norm': self.g2_norm(),
            'triple_bar_norm': triple,
            'exact_norm': exact,
            'tail_estimate': self.tail_estimate
        }


def herglotz_inner(atoms: Sequence[Tuple[complex, float]]) -> FnExpr:
    """Inner function whose Clark measure at 1 is sum w_j delta_{xi_j}."""
    return HerglotzInner([x for x, _ in atoms], [w for _, w in atoms])


def rebase(inner: FnExpr, alpha: complex) -> BSpec:
    """b = (1 + conj(alpha) I)/2, moving base point alpha to 1."""
    alpha = complex(alpha)
    if abs(abs(alpha) - 1) > 1e-12:
        raise ValidationError("base point must be unimodular", {'alpha': as_pair(alpha)})
    return BSpec.half_inner(inner * np.conj(alpha))


def _mass_target(inner: FnExpr, alpha: complex) -> float:
    i0 = evaluate(inner, 0)
    return float((1 - abs(i0) ** 2) / abs(alpha - i0) ** 2)


def _weight(inner: FnExpr, zeta: complex) -> float:
    slope = boundary_value(derivative(inner), zeta)
    return float(1 / abs(slope))


def _monomial_atoms(inner: Poly, alpha: complex) -> List[ClarkAtom]:
    k = inner.degree
    root = (alpha / inner.coeffs[-1]) ** (1 / k)
    return [ClarkAtom(complex(root * np.exp(2j * np.pi * j / k)), 1.0 / k) for j in range(k)]


def _singular_atoms(inner: SingularInner, alpha: complex, N: int) -> List[ClarkAtom]:
    # S(xi (is - mu)/(is + mu)) = exp(-is), so S = alpha at s = 2 pi n - arg(alpha)
    xi, mu = inner.atoms[0], float(inner.masses[0])
    phi = float(np.angle(alpha))
    centre = int(round(phi / (2 * np.pi)))
    n = np.arange(centre - N - 1, centre + N + 2)
    s = 2 * np.pi * n - phi
    points = xi * (1j * s - mu) / (1j * s + mu)
    weights = 2 * mu / (s ** 2 + mu ** 2)
    return [ClarkAtom(complex(z), float(w)) for z, w in zip(points, weights)]


def _rational_atoms(inner: FnExpr, r: Rational, alpha: complex) -> List[ClarkAtom]:
    level = r.num - r.den * alpha
    atoms = []
    for z in level.roots():
        if abs(abs(z) - 1) > ATOM_TOL:
            continue
        z = z / abs(z)
        atoms.append(ClarkAtom(complex(z), _weight(inner, z)))
    return atoms


def _phase_atoms(inner: FnExpr, alpha: complex, target: float) -> List[ClarkAtom]:
    """Solve I(e^{it}) = alpha by a phase scan on the Clark grid with bisection refinement."""
    M = get_settings().clark_grid
    theta = 2 * np.pi * np.arange(M + 1) / M
    phase = np.angle(inner._eval(np.exp(1j * theta)) * np.conj(alpha))

    def phase_at(t: float) -> float:
        return float(np.angle(inner._eval(np.array([np.exp(1j * t)]))[0] * np.conj(alpha)))

    cells = []
    for j in range(M):
        a, b = phase[j], phase[j + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a <= 0 < b and abs(a) < np.pi / 2 and abs(b) < np.pi / 2:
            cells.append(j)

    atoms = []
    for j in cells:
        t = theta[j] if phase[j] == 0 else brentq(phase_at, theta[j], theta[j + 1], xtol=1e-15)
        zeta = complex(np.exp(1j * t))
        try:
            w = _weight(inner, zeta)
        except (EvalAtSingularity, NoLimit):
            continue
        if np.isfinite(w) and w > 0:
            atoms.append(ClarkAtom(zeta, w))

    crowded = sum(1 for a, b in zip(cells, cells[1:]) if b - a <= 2)
    found = sum(a.weight for a in atoms)
    if crowded and found < 0.5 * target:
        raise NotDiscrete(
            "phase scan finds accumulating solutions without summable weights",
            {'found_mass': found, 'target': target, 'crowded_cells': crowded}
        )
    return atoms


def clark_atoms(inner: FnExpr, alpha: complex = 1.0, N: Optional[int] = None) -> ClarkData:
    """
    Atoms and weights of the Clark measure sigma_alpha of an inner function.

    Closed forms cover unimodular monomials, single-atom singular inner
    functions and rational inner functions; anything else goes through a
    numeric phase solve.

    Args:
        inner: Inner function
        alpha: Unimodular base point
        N: Truncation index; the 2N+1 heaviest atoms are kept

    Returns:
        ClarkData sorted by weight descending, argument ascending on ties
    """
    if not is_inner(inner):
        raise ValidationError(f"{inner.kind} is not recognised as an inner function")
    alpha = complex(alpha)
    if abs(abs(alpha) - 1) > 1e-12:
        raise ValidationError("base point must be unimodular", {'alpha': as_pair(alpha)})
    N = get_settings().clark_n if N is None else int(N)
    target = _mass_target(inner, alpha)

    if isinstance(inner, HerglotzInner) and abs(alpha - 1) < 1e-14:
        atoms, method = [ClarkAtom(complex(x), float(w)) for x, w in zip(inner.atoms, inner.weights)], 'herglotz'
    elif isinstance(inner, Poly):
        atoms, method = _monomial_atoms(inner, alpha), 'monomial'
    elif isinstance(inner, SingularInner) and len(inner.atoms) == 1:
        atoms, method = _singular_atoms(inner, alpha, N), 'singular_closed_form'
    elif inner.as_rational() is not None:
        atoms, method = _rational_atoms(inner, inner.as_rational(), alpha), 'rational_roots'
    else:
        atoms, method = _phase_atoms(inner, alpha, target), 'phase_scan'

    atoms.sort(key=lambda a: (-a.weight, float(np.angle(a.point) % (2 * np.pi))))
    atoms = atoms[:2 * N + 1]
    found = sum(a.weight for a in atoms)
    if found > target + 1e-8:
        logger.warning(f"Clark weights sum to {found:.10g}, above the mass target {target:.10g}")
    logger.info(f"Clark atoms ({method}): kept {len(atoms)}, mass {found:.6g} of {target:.6g}")
    return ClarkData(inner, alpha, tuple(atoms), N, target, method)


def ki_kernel(inner: FnExpr, point: complex) -> KIKernel:
    """
    Model-space kernel k_point^I at an interior point or a point of E0(I).

    Raises:
        NotInE0: boundary point without a unimodular limit and finite derivative
    """
    point = complex(point)
    if abs(point) < 1 - 1e-12:
        return KIKernel(inner, point)
    zeta = point / abs(point)
    try:
        limit = nontangential_limit(inner, zeta)
        slope = nontangential_limit(derivative(inner), zeta)
    except NoLimit as e:
        raise NotInE0(f"{zeta:.6g} is not in E0(I)", e.details) from e
    if limit.divergent or slope.divergent or abs(abs(limit.value) - 1) > ATOM_TOL:
        raise NotInE0(f"{zeta:.6g} is not in E0(I)", {'point': as_pair(zeta)})
    return KIKernel(inner, zeta, limit.value / abs(limit.value))


def atom_values(f: FnExpr, data: ClarkData) -> np.ndarray:
    """Boundary values f(zeta_n) at the retained atoms."""
    return np.array([boundary_value(f, a.point) for a in data.atoms], dtype=complex)


def _require_base_one(data: ClarkData):
    if abs(data.alpha - 1) > 1e-12:
        raise ValidationError("Clark decomposition is defined at base point 1; rebase the inner function first",
                              {'alpha': as_pair(data.alpha)})


def _herglotz_constant(data: ClarkData, mass: float) -> complex:
    i0 = evaluate(data.inner, 0)
    c = ((1 + i0) / (1 - i0)).imag
    return complex(0.5 * (1 - mass + 1j * c))


def clark_reciprocal(data: ClarkData) -> FnExpr:
    """
    Truncated Herglotz form of 1/(1 - I).

    1/(1-I) = (1 - m + i c)/2 + sum w_n/(1 - conj(zeta_n) z), with m the
    retained mass and c = Im((1 + I(0))/(1 - I(0))).
    """
    _require_base_one(data)
    const = _herglotz_constant(data, data.retained_mass)
    return Sum([Poly([const]), CauchySum(data.points, data.weights)])


def herglotz_remainder(data: ClarkData) -> Tuple[FnExpr, complex]:
    """
    B = 1 - (1 - I) K with K the full-mass Herglotz constant.

    B = (1 - I) sum w_n/(1 - conj(zeta_n) z) over every atom, retained or
    not, so B = sum w_n k_n^I and B(zeta_n) = 1.

    Returns:
        (B, K)
    """
    _require_base_one(data)
    K = _herglotz_constant(data, data.total_mass_target)
    return Sum([Poly([1 - K]), Scale(data.inner, K)]), K


def tail_model(values: np.ndarray, data: ClarkData) -> Tuple[complex, float]:
    """
    Value assigned to the atoms beyond the retained ones.

    Returns:
        (mean of values over the lightest retained atoms, its spread there)
    """
    group = values[data.lightest()]
    t = complex(np.mean(group))
    return t, float(np.max(np.abs(group - t)))


def _g1_rational(r: Rational, data: ClarkData, values: np.ndarray, const: complex) -> FnExpr:
    # w (f - f(zeta))/(1 - conj(zeta) z) = -zeta w (n - f(zeta) d)/((z - zeta) d)
    num = r.num * const
    for atom, v in zip(data.atoms, values):
        quo, rem = P.polydiv((r.num - r.den * v).coeffs, np.array([-atom.point, 1]))
        num = num + Poly(quo) * (-atom.point * atom.weight)
    if r.den.degree == 0:
        return num * (1 / r.den.coeffs[0])
    return Rational(num, r.den, boundary_safe=r.boundary_safe)


def decompose_clark(f: FnExpr, data: ClarkData, tol: Optional[float] = None) -> ClarkDecomp:
    """
    Orthogonal split f = (1 - I) g1 + g2 with g2 in the model space K_I.

    With finitely many atoms (or all of them retained) g2 is the finite
    Clark expansion. Otherwise the atoms beyond the retained ones take the
    tail value t, and with B = sum over all atoms of w_n k_n^I,

        g2 = (1 - I) sum (f(zeta_n) - t) w_n/(1 - conj(zeta_n) z) + t B
        g1 = t K - sum (f(zeta_n) - t) w_n/(1 - conj(zeta_n) z) + (f - t)/(1 - I)

    which reassembles f exactly and is exact whenever f takes the value t
    at every atom past the retained ones.

    Args:
        f: Function in H(b), b = (1+I)/2
        data: Clark atoms of I at base point 1
        tol: Accepted truncation tail (default clark_tail_tol setting)

    Returns:
        ClarkDecomp with the truncation tail estimate
    """
    _require_base_one(data)
    settings = get_settings()
    tol = settings.clark_tail_tol if tol is None else tol

    values = atom_values(f, data)
    coeffs = values * data.weights
    one_minus = 1 - data.inner

    if data.has_tail:
        t, spread = tail_model(values, data)
        shifted = (values - t) * data.weights
        B, K = herglotz_remainder(data)
        g2 = Sum([Product([one_minus, CauchySum(data.points, shifted)]), Scale(B, t)])
        g1 = Sum([Poly([t * K]), CauchySum(data.points, -shifted), Quotient(f - t, one_minus)])
        tail = float(spread * np.sqrt(data.tail_mass))
        logger.debug(f"Clark tail value {t:.6g}, spread {spread:.3e} over mass {data.tail_mass:.3e}")
    else:
        t = None
        g2 = Product([one_minus, CauchySum(data.points, coeffs)])
        recip = clark_reciprocal(data)
        const = complex(recip.terms[0].coeffs[0])
        r = f.as_rational()
        if r is not None:
            g1 = _g1_rational(r, data, values, const)
        else:
            g1 = Sum([
                Scale(f, const),
                Product([f, CauchySum(data.points, data.weights)]),
                CauchySum(data.points, -coeffs)
            ])
        tail = 0.0

    dec = ClarkDecomp(f, data, g1, g2, coeffs, tail, t)
    g2_norm = dec.g2_norm()
    if tail > tol * max(1.0, g2_norm):
        raise TailTooLarge(
            f"Clark truncation tail {tail:.3e} exceeds {tol:.3e}",
            {'tail': tail, 'tol': tol, 'tail_mass': data.tail_mass}
        )
    return dec


def hb_norm_clark(dec: ClarkDecomp) -> Tuple[float, float]:
    """
    Returns:
        (triple-bar norm sqrt(|g1|^2 + |g2|^2), exact norm sqrt(4|g1|^2 + 2|g2|^2))
    """
    if dec._norms is None:
        n1, n2 = dec.g1_norm(), dec.g2_norm()
        dec._norms = (float(np.sqrt(n1 ** 2 + n2 ** 2)), float(np.sqrt(4 * n1 ** 2 + 2 * n2 ** 2)))
    return dec._norms


def _sup_on_circle(expr: FnExpr, radius: float, M: int) -> float:
    values = expr._eval(radius * circle_points(M))
    if not np.all(np.isfinite(values)):
        return float('inf')
    return float(np.max(np.abs(values)))


def multiplier_sufficient(dec: ClarkDecomp, M: Optional[int] = None) -> bool:
    """
    Whether g1 and g2 look bounded: their sup-norms on two interior circles
    agree within 1%. Parts below MULTIPLIER_ATOL on both circles count as
    zero. False means "not established".
    """
    M = M or get_settings().clark_grid
    for part in (dec.g1, dec.g2):
        inner_sup, outer_sup = (_sup_on_circle(part, r, M) for r in MULTIPLIER_RADII)
        if not (np.isfinite(inner_sup) and np.isfinite(outer_sup)):
            return False
        if max(inner_sup, outer_sup) <= MULTIPLIER_ATOL:
            continue
        if abs(outer_sup - inner_sup) > MULTIPLIER_RTOL * inner_sup:
            logger.debug(f"sup-norm moves from {inner_sup:.6g} to {outer_sup:.6g}")
            return False
    return True


def shift_by_inner(dec: ClarkDecomp) -> ClarkDecomp:
    """Decomposition of I f: I f = (1 - I)(I g1 - g2) + g2."""
    inner = dec.data.inner
    g1 = Sum([Product([inner, dec.g1]), Scale(dec.g2, -1)])
    return ClarkDecomp(Product([inner, dec.f]), dec.data, g1, dec.g2, dec.g2_coeffs, dec.tail_estimate,
                       dec.tail_value)


def witness_norm(data: ClarkData, atom: Union[int, ClarkAtom]) -> float:
    """||k_zeta^b||_b = (2 w)^(-1/2), since k_zeta^b = k_zeta^I / 2."""
    if isinstance(atom, int):
        atom = data.atoms[atom]
    return float((2 * atom.weight) ** -0.5)
