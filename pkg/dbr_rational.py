"""
Rational Symbol Module
Symbols b of H(b): Pythagorean mate, boundary nodes, decomposition f = a1*ftilde + p, norms, f-plus and kernels.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

from config import get_settings
from errors import (
    EvalAtSingularity,
    Inconclusive,
    IsInner,
    NotContractive,
    NotInE0,
    NotInSpace,
    ValidationError,
)
from funcspace import (
    Blaschke,
    FnExpr,
    H2Kernel,
    HbKernel,
    Poly,
    Product,
    Quotient,
    Rational,
    SingularInner,
    as_pair,
    boundary_value,
    circle_samples,
    derivative,
    is_inner,
    nontangential_limit,
    taylor_coeffs,
)
from hardy import (
    TrigPoly,
    cluster_circle_roots,
    fejer_riesz,
    h2_inner,
    h2_norm,
    hermite_interpolate,
    toeplitz_coanalytic_apply,
    toeplitz_coanalytic_solve,
)

logger = logging.getLogger(__name__)

MATE_CHECK_GRID = 4096
NODE_TOL = 1e-8
CIRCLE_ROOT_TOL = 1e-6

Node = Tuple[complex, int]


@dataclass(frozen=True, eq=False)
class BSpec:
    """
    A symbol b with the structure the H(b) computations need.

    kind is 'rational' (rational non-inner b), 'half_inner' (b = (1+I)/2)
    or 'factored' (b = O*B*S with rational outer O, finite Blaschke B and
    atomic singular S).
    """

    b: FnExpr
    kind: str
    a: Optional[FnExpr] = None
    b_num: Optional[Poly] = None
    b_den: Optional[Poly] = None
    a_num: Optional[Poly] = None
    a1: Poly = field(default_factory=lambda: Poly([1]))
    nodes: Tuple[Node, ...] = ()
    inner: Optional[FnExpr] = None
    outer: Optional[FnExpr] = None
    blaschke_zeros: Tuple[complex, ...] = ()
    atoms: Tuple[Tuple[complex, float], ...] = ()
    mate_deviation: float = 0.0

    @property
    def N(self) -> int:
        return int(sum(m for _, m in self.nodes))

    @classmethod
    def half_inner(cls, inner: FnExpr) -> 'BSpec':
        """b = (1 + I)/2 with mate (1 - I)/2."""
        if not is_inner(inner):
            raise ValidationError(f"{inner.kind} is not recognised as an inner function")
        return cls(b=(1 + inner) * 0.5, kind='half_inner', a=(1 - inner) * 0.5, inner=inner)

    @classmethod
    def factored(cls, outer: FnExpr, blaschke_zeros: Sequence[complex] = (),
                 atoms: Sequence[Tuple[complex, float]] = ()) -> 'BSpec':
        """
        b = O * B * S from its three factors.

        Args:
            outer: Rational outer part O, not inner
            blaschke_zeros: Zeros of the finite Blaschke factor
            atoms: (xi, mass) pairs of the singular factor
        """
        parts = _rational_mate(outer)
        factors: List[FnExpr] = [outer]
        if len(blaschke_zeros):
            factors.append(Blaschke(blaschke_zeros))
        if len(atoms):
            factors.append(SingularInner([x for x, _ in atoms], [w for _, w in atoms]))
        b = factors[0] if len(factors) == 1 else Product(factors)
        return cls(
            b=b, kind='factored', a=parts['a'], b_num=parts['p'], b_den=parts['q'],
            a_num=parts['A'], a1=parts['a1'], nodes=parts['nodes'], outer=outer,
            blaschke_zeros=tuple(complex(a) for a in blaschke_zeros),
            atoms=tuple((complex(x), float(w)) for x, w in atoms),
            mate_deviation=parts['deviation']
        )

    def symbols(self) -> Tuple[Union[Poly, FnExpr], Union[Poly, FnExpr]]:
        """
        Symbols (beta, alpha) with the same f-plus equation as (b, a).

        The common denominator of b and a is cancelled, so for rational data
        both symbols are polynomials.
        """
        if self.kind == 'rational':
            return self.b_num, self.a_num
        if self.kind == 'factored':
            factors: List[FnExpr] = [self.b_num]
            if self.blaschke_zeros:
                factors.append(Blaschke(self.blaschke_zeros))
            if self.atoms:
                factors.append(SingularInner([x for x, _ in self.atoms], [w for _, w in self.atoms]))
            beta = factors[0] if len(factors) == 1 else Product(factors)
            return beta, self.a_num
        r = self.inner.as_rational()
        if r is not None:
            return (r.den + r.num) * 0.5, (r.den - r.num) * 0.5
        return self.b, self.a

    def to_dict(self) -> Dict:
        out = {
            'kind': self.kind,
            'b': self.b.to_dict(),
            'nodes': [{'zeta': as_pair(z), 'multiplicity': m} for z, m in self.nodes],
            'N': self.N,
        }
        if self.a is not None:
            out['a'] = self.a.to_dict()
        if self.kind != 'half_inner':
            out['a1'] = self.a1.to_dict()
            out['mate_deviation'] = self.mate_deviation
        return out


@dataclass
class RationalDecomp:
    """f = a1 * ftilde + p with deg p < N."""

    ftilde: FnExpr
    p: Poly
    equivalent_norm: float
    canonical_norm: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            'ftilde': self.ftilde.to_dict(),
            'p': self.p.to_dict(),
            'equivalent_norm': self.equivalent_norm,
            'canonical_norm': self.canonical_norm
        }


@dataclass
class E0Report:
    """Membership of a boundary point in E0(b) with the criterion terms."""

    point: complex
    member: bool
    method: str
    blaschke_term: Optional[float] = None
    atomic_term: Optional[float] = None
    log_term: Optional[float] = None
    angular_derivative: Optional[float] = None
    divergent: Dict[str, bool] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.member

    def to_dict(self) -> Dict:
        return {
            'point': as_pair(self.point),
            'member': self.member,
            'method': self.method,
            'blaschke_term': _finite(self.blaschke_term),
            'atomic_term': _finite(self.atomic_term),
            'log_term': _finite(self.log_term),
            'angular_derivative': _finite(self.angular_derivative),
            'divergent': self.divergent
        }


def _finite(v: Optional[float]) -> Optional[float]:
    return None if v is None or not np.isfinite(v) else float(v)


def _group_nodes(roots: np.ndarray) -> Tuple[Node, ...]:
    circle = roots[np.abs(np.abs(roots) - 1) <= CIRCLE_ROOT_TOL]
    nodes = cluster_circle_roots(circle)
    return tuple(sorted(nodes, key=lambda n: (np.angle(n[0]) % (2 * np.pi))))


def _rational_mate(b: FnExpr) -> Dict:
    r = b.as_rational()
    if r is None:
        raise ValidationError(f"{b.kind} has no rational form")
    if not r.analytic_on_closed_disc():
        raise NotContractive("symbol has a pole on the closed disc")

    phase = r.den.coeffs[0] / abs(r.den.coeffs[0])
    p, q = r.num * (1 / phase), r.den * (1 / phase)

    peak = float(np.max(np.abs(circle_samples(b, MATE_CHECK_GRID).values)))
    if peak > 1 + 1e-10:
        raise NotContractive(f"sup |b| = {peak:.12g} exceeds 1", {'sup': peak})

    diff = np.convolve(q.coeffs, np.conj(q.coeffs[::-1]))[len(q.coeffs) - 1:]
    scale = max(1.0, float(np.max(np.abs(diff))))
    t = TrigPoly.from_modulus_difference(q, p)
    if np.max(np.abs(t.coeffs)) <= 1e-12 * scale:
        raise IsInner("1 - |b|^2 vanishes identically; b is inner")

    A = fejer_riesz(t)
    a = Rational(A, q)
    nodes = _group_nodes(A.roots())
    a1 = Poly.from_roots([z for z, m in nodes for _ in range(m)])

    grid_b = circle_samples(b, MATE_CHECK_GRID).values
    grid_a = circle_samples(a, MATE_CHECK_GRID).values
    deviation = float(np.max(np.abs(np.abs(grid_a) ** 2 + np.abs(grid_b) ** 2 - 1)))
    if deviation > 1e-9:
        logger.warning(f"Mate identity deviates by {deviation:.3e}")
    return {'p': p, 'q': q, 'A': A, 'a': a, 'nodes': nodes, 'a1': a1, 'deviation': deviation}


def mate(b: FnExpr) -> BSpec:
    """
    Pythagorean mate of a rational non-inner symbol.

    Args:
        b: Rational symbol with sup |b| <= 1

    Returns:
        BSpec with a = A/q, the boundary polynomial a1 and its nodes
    """
    parts = _rational_mate(b)
    logger.info(f"Mate built: degree {parts['A'].degree}, {len(parts['nodes'])} boundary nodes")
    return BSpec(
        b=b, kind='rational', a=parts['a'], b_num=parts['p'], b_den=parts['q'],
        a_num=parts['A'], a1=parts['a1'], nodes=parts['nodes'],
        mate_deviation=parts['deviation']
    )


def node_jets(f: FnExpr, nodes: Sequence[Node]) -> List[List[complex]]:
    """Boundary values f, f', ... at each node up to its multiplicity."""
    jets = []
    for zeta, m in nodes:
        jet, d = [], f
        for j in range(m):
            if j:
                d = derivative(d)
            try:
                jet.append(boundary_value(d, zeta))
            except EvalAtSingularity as e:
                raise NotInSpace(f"no boundary value of order {j} at {zeta:.6g}",
                                 {'zeta': as_pair(zeta), 'order': j}) from e
        jets.append(jet)
    return jets


def _require(spec: BSpec, *kinds: str):
    if spec.kind not in kinds:
        raise ValidationError(f"operation needs a {' or '.join(kinds)} symbol, got {spec.kind}")


def decompose_rational(f: FnExpr, spec: BSpec) -> RationalDecomp:
    """
    Split f = a1 * ftilde + p with p the Hermite interpolant at the nodes.

    Args:
        f: Function analytic near each node
        spec: Rational symbol

    Returns:
        RationalDecomp with the equivalent norm filled in
    """
    _require(spec, 'rational')
    if spec.N == 0:
        return RationalDecomp(f, Poly([0]), h2_norm(f))

    nodes = [z for z, _ in spec.nodes]
    p = hermite_interpolate(nodes, node_jets(f, spec.nodes))

    ftilde: Optional[FnExpr] = None
    r = f.as_rational()
    if r is not None:
        top = r.num - p * r.den
        quo, rem = P.polydiv(top.coeffs, spec.a1.coeffs)
        if np.max(np.abs(rem)) <= 1e-8 * max(1.0, float(np.max(np.abs(top.coeffs)))):
            if r.den.degree == 0:
                ftilde = Poly(quo / r.den.coeffs[0])
            else:
                ftilde = Rational(Poly(quo), r.den, boundary_safe=r.boundary_safe)
    if ftilde is None:
        ftilde = Quotient(f - p, spec.a1)
        M = get_settings().grid_size
        coarse, fine = h2_norm(ftilde, M), h2_norm(ftilde, 4 * M)
        if fine > 1.5 * coarse and fine > 1e3:
            raise NotInSpace("(f - p)/a1 grows under grid refinement",
                             {'norm_M': coarse, 'norm_4M': fine})

    norm = float(np.sqrt(h2_norm(ftilde) ** 2 + h2_norm(p) ** 2))
    return RationalDecomp(ftilde, p, norm)


def hb_norm_equiv(f: FnExpr, spec: BSpec) -> float:
    """Equivalent norm sqrt(||ftilde||^2 + ||p||^2)."""
    return decompose_rational(f, spec).equivalent_norm


def fplus(f: FnExpr, spec: BSpec, D: Optional[int] = None) -> Tuple[Poly, float]:
    """
    The function f+ with T_conj(b) f = T_conj(a) f+, and the norm it gives.

    Args:
        f: Function in H(b)
        spec: Symbol
        D: Truncation degree (default taylor_degree setting)

    Returns:
        (f+ coefficients up to D, ||f||_b)
    """
    settings = get_settings()
    D = settings.taylor_degree if D is None else D
    beta, alpha = spec.symbols()
    n = D + settings.toeplitz_buffer + 1
    # twice the solve length so the top rows of T_conj(beta) f see enough of f
    fc = Poly(f.coeffs) if isinstance(f, Poly) else Poly(taylor_coeffs(f, 2 * n - 1))
    g = toeplitz_coanalytic_apply(beta, fc, max(n - 1, len(fc.coeffs) - 1))
    f_plus = toeplitz_coanalytic_solve(alpha, g, D)
    norm = float(np.sqrt(h2_norm(f) ** 2 + h2_norm(f_plus) ** 2))
    return f_plus, norm


def hb_norm(f: FnExpr, spec: BSpec, D: Optional[int] = None) -> float:
    return fplus(f, spec, D)[1]


def hb_inner(f: FnExpr, g: FnExpr, spec: BSpec, D: Optional[int] = None) -> complex:
    """<f, g>_b = <f, g>_2 + <f+, g+>_2."""
    fp, _ = fplus(f, spec, D)
    gp, _ = fplus(g, spec, D)
    return h2_inner(f, g) + h2_inner(fp, gp)


def kernel_kb(spec: BSpec, point: complex) -> FnExpr:
    """
    Reproducing kernel of H(b) at an interior point or a point of E0(b).

    Raises:
        NotInE0: boundary point outside E0(b)
    """
    point = complex(point)
    if abs(point) < 1 - 1e-12:
        return HbKernel(spec.b, point)
    report = e0_contains(spec, point)
    if not report.member:
        raise NotInE0(f"{point:.6g} is not in E0(b)", report.to_dict())
    zeta = point / abs(point)
    return HbKernel(spec.b, zeta, boundary_value(spec.b, zeta))


def kernel_bk(spec: BSpec, point: complex) -> FnExpr:
    """b * k_point for an interior point."""
    return Product([spec.b, H2Kernel(point)])


def _atomic_term(zeta: complex, atoms: Sequence[Tuple[complex, float]]) -> float:
    total = 0.0
    for xi, w in atoms:
        d = abs(zeta - xi)
        if d < 1e-12:
            return float('inf')
        total += w / d ** 2
    return total


def _log_term(outer: FnExpr, zeta: complex) -> Tuple[float, bool]:
    """Integral of |log|O|| / |zeta - xi|^2 with divergence detection."""
    if abs(boundary_value(outer, zeta)) < 1 - 1e-9:
        return float('inf'), True
    M = get_settings().grid_size
    history = []
    for _ in range(3):
        pts = zeta * np.exp(1j * (2 * np.pi * np.arange(M) + np.pi) / M)
        integrand = np.abs(np.log(np.abs(outer._eval(pts)))) / np.abs(zeta - pts) ** 2
        history.append(float(np.mean(integrand)))
        M *= 2
    if abs(history[-1] - history[-2]) <= 1e-3 * max(1e-12, abs(history[-1])):
        return history[-1], False
    if history[-1] > 1.8 * history[-2] and history[-2] > 1.8 * history[-3]:
        return float('inf'), True
    raise Inconclusive("E0 log-term quadrature neither converges nor diverges",
                       {'history': history, 'zeta': as_pair(zeta)})


def e0_contains(spec: BSpec, zeta: complex) -> E0Report:
    """
    Whether b has an angular derivative at a boundary point.

    Rational symbols use the node set; half-inner symbols need I(zeta) = 1 and
    a finite derivative; factored symbols run the three-term test.
    """
    zeta = complex(zeta)
    if abs(abs(zeta) - 1) > 1e-10:
        raise ValidationError("E0 membership is tested at unimodular points")
    zeta = zeta / abs(zeta)

    if spec.kind == 'rational':
        member = any(abs(zeta - z) <= NODE_TOL for z, _ in spec.nodes)
        return E0Report(zeta, member, 'nodes', divergent={'mate_nonzero': not member})

    if spec.kind == 'half_inner':
        limit = nontangential_limit(spec.inner, zeta)
        if limit.divergent or abs(limit.value - 1) > 1e-6:
            return E0Report(zeta, False, 'half_inner', divergent={'log': True})
        slope = nontangential_limit(derivative(spec.inner), zeta)
        member = not slope.divergent
        return E0Report(zeta, member, 'half_inner',
                        angular_derivative=abs(slope.value) if member else float('inf'),
                        divergent={'angular_derivative': not member})

    blaschke = float(sum((1 - abs(a) ** 2) / abs(zeta - a) ** 2 for a in spec.blaschke_zeros))
    atomic = _atomic_term(zeta, spec.atoms)
    if np.isfinite(atomic):
        log_value, log_divergent = _log_term(spec.outer, zeta)
    else:
        log_value, log_divergent = None, False
    divergent = {'blaschke': False, 'atomic': not np.isfinite(atomic), 'log': log_divergent}
    member = not any(divergent.values())
    return E0Report(zeta, member, 'three_term', blaschke, atomic, log_value, divergent)


def e0_points(spec: BSpec, N: Optional[int] = None) -> List[complex]:
    """
    Finite candidate set of E0(b).

    Mate nodes for rational and factored symbols (filtered through the
    three-term test), retained Clark atoms for half-inner symbols.
    """
    if spec.kind == 'rational':
        return [z for z, _ in spec.nodes]
    if spec.kind == 'factored':
        return [z for z, _ in spec.nodes if e0_contains(spec, z).member]
    from dbr_clark import clark_atoms
    data = clark_atoms(spec.inner, 1.0, N if N is not None else get_settings().clark_n)
    return [atom.point for atom in data.atoms]


def hcr_margin(spec: BSpec, M: Optional[int] = None) -> float:
    """inf over the grid of |a| + |b|; positive means the corona pair condition holds there."""
    M = M or get_settings().grid_size
    grid_b = circle_samples(spec.b, M).values
    grid_a = circle_samples(spec.a, M).values
    return float(np.min(np.abs(grid_a) + np.abs(grid_b)))
