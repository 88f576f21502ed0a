"""
Cyclicity Module
Cyclicity oracles for the shift on H(b), constructive certificates and non-cyclicity witnesses.
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.linalg import lstsq, solve_triangular
from scipy.special import comb
from tqdm import tqdm

from config import get_settings
from dbr_clark import (
    ClarkData,
    clark_atoms,
    clark_reciprocal,
    decompose_clark,
    herglotz_remainder,
    multiplier_sufficient,
)
from dbr_rational import BSpec, decompose_rational, e0_contains, e0_points, fplus, kernel_kb
from errors import (
    DivisionRemainder,
    DivisionUnstable,
    EvalAtSingularity,
    Inconclusive,
    NoLimit,
    NodeZero,
    NotAZero,
    TailTooLarge,
    ValidationError,
)
from funcspace import (
    CauchySum,
    FnExpr,
    HbKernel,
    Poly,
    Product,
    Scale,
    Sum,
    as_pair,
    boundary_value,
    circle_samples,
    derivative,
    evaluate,
    nontangential_limit,
    taylor_coeffs,
)
from hardy import (
    LSResult,
    OuterVerdict,
    coanalytic_matrix,
    hermite_interpolate,
    is_outer,
    poly_ls_sequence,
    residual_rose,
)

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-8
CONSISTENCY_ATOMS = 20


class Verdict(Enum):
    CONVERGING = "converging"
    STALLED = "stalled"
    INCONCLUSIVE = "inconclusive"


@dataclass
class Certificate:
    """
    Residual table of a constructive cyclicity proof.

    residuals[i] is the controlled norm of q_n f - 1 (or its rational or
    Clark counterpart) at degrees[i]; norm names which norm that is.
    ill_conditioned lists the degrees whose residual came out above the
    previous one, which nested least squares only allows through rounding.
    """

    kind: str
    norm: str
    degrees: List[int]
    residuals: List[float]
    verdict: Verdict
    beta: Optional[float] = None
    floor: Optional[float] = None
    tail_estimate: float = 0.0
    wall_ms: List[float] = field(default_factory=list)
    r: Optional[FnExpr] = None
    q: Optional[FnExpr] = None
    g3: Optional[FnExpr] = None
    final_q: Optional[Poly] = None
    ill_conditioned: List[int] = field(default_factory=list)

    def rows(self, timings: bool = False) -> List[Dict]:
        """Convergence table: degree, residual, tail_estimate, wall_ms."""
        rows = []
        for i, (n, res) in enumerate(zip(self.degrees, self.residuals)):
            rows.append({
                'degree': n,
                'residual': res,
                'tail_estimate': self.tail_estimate,
                'wall_ms': self.wall_ms[i] if timings and i < len(self.wall_ms) else 0.0
            })
        return rows

    def to_dict(self, timings: bool = False) -> Dict:
        out = {
            'kind': self.kind,
            'norm': self.norm,
            'verdict': self.verdict.value,
            'beta': self.beta,
            'floor': self.floor,
            'tail_estimate': self.tail_estimate,
            'ill_conditioned': self.ill_conditioned,
            'rows': self.rows(timings)
        }
        for name in ('r', 'q', 'g3', 'final_q'):
            value = getattr(self, name)
            if value is not None:
                out[name] = value.to_dict()
        return out


@dataclass
class ConditionsReport:
    """Necessary conditions, and for Clark data the three sufficient ones."""

    outer: Optional[OuterVerdict]
    boundary: List[Dict] = field(default_factory=list)
    min_abs: float = float('inf')
    multiplier: Optional[bool] = None
    condition_c_sum: Optional[float] = None
    condition_c_tail: Optional[float] = None
    consistency: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    @property
    def outer_ok(self) -> Optional[bool]:
        return None if self.outer is None else bool(self.outer)

    @property
    def nonvanishing(self) -> bool:
        return self.min_abs > ZERO_TOL

    @property
    def condition_c(self) -> Optional[bool]:
        if self.condition_c_sum is None:
            return None
        return bool(np.isfinite(self.condition_c_sum) and np.isfinite(self.condition_c_tail or 0.0))

    @property
    def passes(self) -> bool:
        """Necessary conditions, plus (a) and (c) when they were evaluated."""
        ok = bool(self.outer_ok) and self.nonvanishing
        if self.multiplier is not None:
            ok = ok and self.multiplier
        if self.condition_c_sum is not None:
            ok = ok and bool(self.condition_c)
        return ok

    def to_dict(self) -> Dict:
        return {
            'outer': self.outer.to_dict() if self.outer is not None else None,
            'boundary': self.boundary,
            'min_abs': _finite(self.min_abs),
            'nonvanishing': self.nonvanishing,
            'multiplier': self.multiplier,
            'condition_c_sum': _finite(self.condition_c_sum),
            'condition_c_tail': _finite(self.condition_c_tail),
            'condition_c': self.condition_c,
            'consistency': _finite(self.consistency),
            'passes': self.passes,
            'notes': self.notes
        }


def _finite(v: Optional[float]) -> Optional[float]:
    return None if v is None or not np.isfinite(v) else float(v)


def verdict(degrees: Sequence[int], residuals: Sequence[float],
            rate_required: bool = True) -> Tuple[Verdict, Optional[float], Optional[float]]:
    """
    Classify a residual table.

    Args:
        degrees: Degrees of the table
        residuals: Residual per degree
        rate_required: When False a strictly decreasing table that ends below
            converge_ratio times its first entry converges whatever its fitted rate

    Returns:
        (verdict, fitted power-law exponent beta, floor estimate when stalled)
    """
    settings = get_settings()
    res = np.asarray(residuals, dtype=float)
    if len(res) < 4:
        return Verdict.INCONCLUSIVE, None, None
    if res[-1] <= settings.converged_floor:
        return Verdict.CONVERGING, None, None

    quarter = res[-max(2, len(res) // 4):]
    if (quarter[0] - quarter[-1]) < settings.stall_rtol * max(quarter[0], 1e-300):
        return Verdict.STALLED, None, float(res[-1])

    half = slice(len(res) // 2, None)
    n = np.asarray(degrees, dtype=float)[half] + 1
    positive = res[half] > 0
    beta = None
    if np.count_nonzero(positive) >= 2:
        slope = np.polyfit(np.log(n[positive]), np.log(res[half][positive]), 1)[0]
        beta = float(-slope)
    shrinks = res[-1] < settings.converge_ratio * res[0]
    if not rate_required and shrinks and np.all(np.diff(res) < 0):
        return Verdict.CONVERGING, beta, None
    if beta is not None and beta >= settings.converge_beta and shrinks:
        return Verdict.CONVERGING, beta, None
    return Verdict.INCONCLUSIVE, beta, None


def _boundary_entry(f: FnExpr, zeta: complex) -> Dict:
    try:
        value, error = evaluate(f, zeta), 0.0
    except EvalAtSingularity:
        limit = nontangential_limit(f, zeta)
        value, error = (complex(np.inf), float('inf')) if limit.divergent else (limit.value, limit.error)
    return {'zeta': as_pair(zeta), 'value': as_pair(value), 'abs': float(abs(value)), 'error': error}


def necessary_conditions(f: FnExpr, spec: BSpec) -> ConditionsReport:
    """
    f outer and f(zeta) != 0 on E0(b); failure of either proves f is not cyclic.
    """
    report = ConditionsReport(outer=is_outer(f))
    for zeta in e0_points(spec):
        report.boundary.append(_boundary_entry(f, zeta))
    if report.boundary:
        report.min_abs = min(e['abs'] for e in report.boundary)
    logger.info(f"Necessary conditions: outer={report.outer_ok}, min |f| on E0 = {report.min_abs:.3g}")
    return report


def is_cyclic_rational(f: FnExpr, spec: BSpec) -> bool:
    """Cyclic iff f is outer and f(zeta_k) != 0 at every node (rational b)."""
    if spec.kind != 'rational':
        raise ValidationError("the rational characterization needs a rational symbol")
    decompose_rational(f, spec)
    if not is_outer(f):
        return False
    return all(abs(boundary_value(f, z)) > ZERO_TOL for z, _ in spec.nodes)


def _circle_zeros(f: FnExpr) -> List[complex]:
    r = f.as_rational()
    if r is None:
        raise ValidationError(f"{f.kind} has no rational form; circle zeros are not available")
    roots = r.num.roots()
    return [complex(z / abs(z)) for z in roots if abs(abs(z) - 1) <= 1e-6]


def is_cyclic_hol_closure(f: FnExpr, spec: BSpec) -> bool:
    """For f analytic on the closed disc: outer and no zero in E0(b)."""
    if not f.analytic_on_closed_disc():
        raise ValidationError(f"{f.kind} is not analytic on the closed disc")
    if not is_outer(f):
        return False
    for zeta in _circle_zeros(f):
        if e0_contains(spec, zeta).member:
            logger.info(f"Zero of f at {zeta:.6g} lies in E0(b)")
            return False
    return True


def is_cyclic_by_inverse(f: FnExpr, spec: BSpec) -> Optional[bool]:
    """True when 1/f is holomorphic near the closed disc; None otherwise."""
    if not f.analytic_on_closed_disc():
        return None
    r = f.as_rational()
    if r is not None:
        if r.num.degree < 0:
            return None
        return True if np.all(np.abs(r.num.roots()) > 1 + 1e-9) else None
    grid = circle_samples(f, get_settings().grid_size)
    if np.min(np.abs(grid.values)) > ZERO_TOL and is_outer(f):
        return True
    return None


def polynomial_cyclic(p: Poly, spec: BSpec) -> bool:
    """A polynomial is cyclic iff it has no zero in the open disc or in E0(b)."""
    if p.degree < 0:
        return False
    roots = p.roots()
    if np.any(np.abs(roots) < 1 - 1e-9):
        return False
    for z in roots:
        if abs(abs(z) - 1) <= 1e-6 and e0_contains(spec, z / abs(z)).member:
            return False
    return True


def hermite_r(nodes: Sequence[Tuple[complex, int]], p: Poly) -> Poly:
    """
    Polynomial r of degree < N with (r p - 1) vanishing to order m_k at each node.

    Jets of 1/p follow r^(j) = -(1/p) sum_{i=1..j} C(j,i) p^(i) r^(j-i).
    """
    scale = max(1.0, float(np.max(np.abs(p.coeffs))))
    jets, points = [], []
    for zeta, m in nodes:
        pj = [evaluate(derivative(p, i), zeta) for i in range(m)]
        if abs(pj[0]) < 1e-12 * scale:
            raise NodeZero(f"p vanishes at node {zeta:.6g}", {'zeta': as_pair(zeta)})
        r = [1 / pj[0]]
        for j in range(1, m):
            acc = sum(comb(j, i, exact=True) * pj[i] * r[j - i] for i in range(1, j + 1))
            r.append(-acc / pj[0])
        jets.append(r)
        points.append(zeta)
    return hermite_interpolate(points, jets)


def _rising(results: Sequence[LSResult]) -> List[int]:
    return [res.degree for res in results if res.ill_conditioned]


def _finish(kind: str, norm: str, degrees: Sequence[int], residuals: List[float],
            rate_required: bool = True, **extra) -> Certificate:
    v, beta, floor = verdict(degrees, residuals, rate_required)
    if extra.get('ill_conditioned'):
        logger.warning(f"{kind} certificate: residual rose at degrees {extra['ill_conditioned']}")
    logger.info(f"{kind} certificate: {v.value}, final residual {residuals[-1]:.3e}")
    return Certificate(kind, norm, list(degrees), residuals, v, beta, floor, **extra)


def certify_rational(f: FnExpr, spec: BSpec, degrees: Sequence[int], M: Optional[int] = None) -> Certificate:
    """
    Least-squares realisation of p_n f - 1 = a1 (q_n f + r ftilde + q).

    Nodes where p vanishes fall back to certify_direct.

    Args:
        f: Function in H(b)
        spec: Rational symbol
        degrees: Strictly increasing degrees
        M: Quadrature grid size

    Returns:
        Certificate measuring the equivalent norm
    """
    if spec.kind != 'rational':
        raise ValidationError("rational certificates need a rational symbol")
    if spec.N == 0:
        results = poly_ls_sequence(f, Poly([1]), degrees, M)
        return _finish('rational', 'equivalent', degrees, [r.residual for r in results],
                       wall_ms=[r.wall_ms for r in results], final_q=results[-1].q,
                       ill_conditioned=_rising(results))

    dec = decompose_rational(f, spec)
    try:
        r = hermite_r(spec.nodes, dec.p)
    except NodeZero as e:
        logger.info(f"{e.message}; using the direct certificate")
        return certify_direct(f, spec, degrees)

    top = r * dec.p - 1
    quo, rem = P.polydiv(top.coeffs, spec.a1.coeffs)
    bound = 1e-8 * max(1.0, float(np.linalg.norm(top.coeffs)))
    if np.max(np.abs(rem)) > bound:
        raise DivisionRemainder("r p - 1 is not divisible by a1",
                                {'remainder': float(np.max(np.abs(rem))), 'bound': bound})
    q = Poly(quo)
    target = -(r * dec.ftilde + q)
    results = poly_ls_sequence(f, target, degrees, M)
    return _finish('rational', 'equivalent', degrees, [res.residual for res in results],
                   wall_ms=[res.wall_ms for res in results], r=r, q=q, final_q=results[-1].q,
                   ill_conditioned=_rising(results))


def _coeff_vector(expr: FnExpr, L: int) -> np.ndarray:
    out = np.zeros(L, dtype=complex)
    c = expr.coeffs if isinstance(expr, Poly) else taylor_coeffs(expr, L - 1)
    c = c[:L]
    out[:len(c)] = c
    return out


def certify_direct(f: FnExpr, spec: BSpec, degrees: Sequence[int], D: Optional[int] = None) -> Certificate:
    """
    Minimise the canonical norm ||q f - 1||_b over deg q <= n.

    Each column stacks the coefficients of z^k f over those of (z^k f)+; the
    f+ map is the co-analytic solve of T_conj(alpha) x = T_conj(beta) h.
    """
    settings = get_settings()
    degrees = [int(n) for n in degrees]
    if any(b <= a for a, b in zip(degrees, degrees[1:])) or (degrees and degrees[0] < 0):
        raise ValidationError("degrees must be nonnegative and strictly increasing")
    D = settings.taylor_degree if D is None else D
    nmax = degrees[-1]
    n = D + settings.toeplitz_buffer + 1
    L = 2 * n + nmax

    beta, alpha = spec.symbols()
    T_beta = coanalytic_matrix(_coeff_vector(beta, L), L)[:n]
    alpha_c = _coeff_vector(alpha, n)
    if abs(alpha_c[0]) < 1e-10:
        raise ValidationError("co-analytic symbol vanishes at the origin")
    T_alpha = coanalytic_matrix(alpha_c, n)

    fc = _coeff_vector(f, L)
    H = np.zeros((L, nmax + 2), dtype=complex)
    for k in range(nmax + 1):
        H[k:, k] = fc[:L - k]
    H[0, nmax + 1] = 1.0
    X = solve_triangular(T_alpha, T_beta @ H, lower=False)
    scale = max(1.0, float(np.max(np.abs(X[:D + 1]))))
    tail = float(np.max(np.abs(X[D + 1:]))) / scale
    if tail > settings.tail_tol:
        logger.warning(f"f+ columns not decayed by degree {D} (tail {tail:.2e}); residuals carry this error")

    A = np.vstack([H[:, :nmax + 1], X[:D + 1, :nmax + 1]])
    y = np.concatenate([H[:, nmax + 1], X[:D + 1, nmax + 1]])

    residuals, walls, rising, x = [], [], [], None
    for deg in tqdm(degrees, desc="direct certificate", disable=not settings.progress):
        start = time.perf_counter()
        x = lstsq(A[:, :deg + 1], y)[0]
        res = float(np.linalg.norm(A[:, :deg + 1] @ x - y))
        if residuals and residual_rose(residuals[-1], res):
            rising.append(deg)
        residuals.append(res)
        walls.append((time.perf_counter() - start) * 1000)
    return _finish('direct', 'canonical', degrees, residuals, tail_estimate=tail,
                   wall_ms=walls, final_q=Poly(x), ill_conditioned=rising)


def _lower_bound_on_atoms(f: FnExpr, data: ClarkData, values: np.ndarray) -> float:
    """|k_w^b(zeta)| >= |1 - b(w)|/(1 + |w|) when b(zeta) = 1; else the retained minimum."""
    retained = float(np.min(np.abs(values)))
    if isinstance(f, HbKernel) and not f.boundary and data.atoms:
        try:
            if abs(boundary_value(f.b, data.atoms[0].point) - 1) < 1e-8:
                return min(retained, abs(1 - np.conj(f.value)) / (1 + abs(f.point)))
        except EvalAtSingularity:
            pass
    return retained


def thm5_conditions(f: FnExpr, data: ClarkData, N: Optional[int] = None) -> ConditionsReport:
    """
    Sufficient conditions for cyclicity with b = (1+I)/2:
    (a) g1, g2 bounded, (b) f outer, (c) sum w_n/|f(zeta_n)|^2 finite.
    """
    if N is not None and N != data.n_trunc:
        data = clark_atoms(data.inner, data.alpha, N)
    dec = decompose_clark(f, data)
    report = ConditionsReport(outer=None)
    try:
        report.outer = is_outer(f)
    except Inconclusive as e:
        report.notes.append(f"outer test inconclusive: {e.message}")

    report.multiplier = multiplier_sufficient(dec)
    values = dec.g2_coeffs / data.weights
    for atom, v in zip(data.atoms, values):
        report.boundary.append({'zeta': as_pair(atom.point), 'value': as_pair(v), 'abs': float(abs(v)), 'error': 0.0})
    report.min_abs = float(np.min(np.abs(values))) if len(values) else float('inf')

    if report.min_abs <= ZERO_TOL:
        report.condition_c_sum = float('inf')
        report.condition_c_tail = float('inf')
        report.notes.append("f vanishes at a Clark atom")
    else:
        report.condition_c_sum = float(np.sum(data.weights / np.abs(values) ** 2))
        lower = _lower_bound_on_atoms(f, data, values)
        report.condition_c_tail = float(data.tail_mass / lower ** 2)

    gaps = []
    for atom, v in list(zip(data.atoms, values))[:CONSISTENCY_ATOMS]:
        try:
            gaps.append(abs(boundary_value(dec.g2, atom.point) - v))
        except (EvalAtSingularity, NoLimit):
            continue
    if gaps:
        report.consistency = float(max(gaps))
    return report


def certify_clark(f: FnExpr, data: ClarkData, degrees: Sequence[int], N: Optional[int] = None,
                  M: Optional[int] = None) -> Certificate:
    """
    Least-squares realisation of psi_n f - 1 = (1 - I)(q_n f + r g1 + g3).

    r = sum w_n/f(zeta_n) k_n^I carries 1/f(zeta_n) at the atoms, so r g2 - 1
    vanishes there and divides by 1 - I. With a Clark tail the atoms past the
    retained ones carry 1/t, t the tail value of the decomposition.

    The Clark route converges slowly, so the verdict asks for a strictly
    decreasing table that halves rather than a fitted rate.

    Args:
        f: Function in H(b), b = (1+I)/2
        data: Clark atoms at base point 1
        degrees: Strictly increasing degrees
        N: Truncation index (re-derives the atoms when it differs from data)
        M: Grid size (default clark_grid setting)

    Returns:
        Certificate measuring the exact norm 2 ||q_n f + r g1 + g3||_2
    """
    settings = get_settings()
    if N is not None and N != data.n_trunc:
        data = clark_atoms(data.inner, data.alpha, N)
    M = M or settings.clark_grid
    dec = decompose_clark(f, data)
    values = dec.g2_coeffs / data.weights
    if np.min(np.abs(values)) <= ZERO_TOL:
        raise NodeZero("f vanishes at a Clark atom")

    one_minus = 1 - data.inner
    rho = 1 / values
    if dec.tail_value is None:
        r_coeffs = data.weights * rho
        r_norm = float(np.sqrt(np.sum(data.weights * np.abs(rho) ** 2)))
        r_tail = 0.0
        r = Product([one_minus, CauchySum(data.points, r_coeffs)])
        g3 = Sum([
            Product([one_minus, CauchySum(data.points, r_coeffs), CauchySum(data.points, dec.g2_coeffs)]),
            Scale(clark_reciprocal(data), -1)
        ])
    else:
        t = dec.tail_value
        if abs(t) <= ZERO_TOL:
            raise NodeZero("f tends to zero along the Clark atoms", {'tail_value': as_pair(t)})
        rho_t = 1 / t
        spread = float(np.max(np.abs(rho[data.lightest()] - rho_t)))
        r_norm = float(np.sqrt(np.sum(data.weights * np.abs(rho) ** 2) + abs(rho_t) ** 2 * data.tail_mass))
        r_tail = float(spread * np.sqrt(data.tail_mass))

        B, K = herglotz_remainder(data)
        A_f = CauchySum(data.points, (values - t) * data.weights)
        A_rho = CauchySum(data.points, (rho - rho_t) * data.weights)
        r = Sum([Product([one_minus, A_rho]), Scale(B, rho_t)])
        # r g2 - 1 = (1 - I) g3, using B - 1 = -(1 - I) K
        g3 = Sum([
            Product([one_minus, A_rho, A_f]),
            Product([B, Sum([Scale(A_f, rho_t), Scale(A_rho, t)])]),
            Scale(B + 1, -K)
        ])
    if r_tail > settings.clark_tail_tol * max(1.0, r_norm):
        raise TailTooLarge(f"r-series tail {r_tail:.3e} too large",
                           {'tail': r_tail, 'r_norm': r_norm})

    g3_grid = circle_samples(g3, M)
    distance = np.full(M, np.inf)
    for zeta in data.points:
        distance = np.minimum(distance, np.abs(g3_grid.points - zeta))
    away = distance > 8 * np.pi / M
    rms = float(np.sqrt(np.mean(np.abs(g3_grid.values) ** 2)))
    if np.any(away) and float(np.max(np.abs(g3_grid.values[away]))) > 1e6 * max(1.0, rms):
        raise DivisionUnstable("g3 grid values blow up away from the atoms", {'rms': rms})

    target = Scale(Sum([Product([r, dec.g1]), g3]), -1)
    results = poly_ls_sequence(f, target, degrees, M)
    tail = max(dec.tail_estimate, r_tail)
    return _finish('clark', 'exact', degrees, [2 * res.residual for res in results], rate_required=False,
                   tail_estimate=tail, wall_ms=[res.wall_ms for res in results],
                   r=r, g3=g3, final_q=results[-1].q, ill_conditioned=_rising(results))


def noncyclicity_witness(f: FnExpr, spec: BSpec, zeta: complex) -> float:
    """
    Lower bound 1/||k_zeta^b||_b for inf over polynomials of ||q f - 1||_b,
    valid when f(zeta) = 0 at a point of E0(b).
    """
    zeta = complex(zeta)
    value = boundary_value(f, zeta)
    if abs(value) > ZERO_TOL:
        raise NotAZero(f"f({zeta:.6g}) = {value:.3g} is not zero", {'value': as_pair(value)})
    kernel = kernel_kb(spec, zeta)
    _, norm = fplus(kernel, spec)
    return float(1 / norm)
