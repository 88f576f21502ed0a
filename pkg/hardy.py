"""
Hardy Space Module
H2 numerics: quadrature, outer functions, co-analytic Toeplitz systems, least squares and Fejer-Riesz factorization.
"""

import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.linalg import cho_factor, cho_solve, solve_triangular, toeplitz
from scipy.signal import fftconvolve
from scipy.special import binom

from config import get_settings
from errors import (
    EvalAtSingularity,
    GridMismatch,
    IllConditioned,
    Inconclusive,
    NegativeSymbol,
    NotLogIntegrable,
    TailNotDecayed,
    ValidationError,
)
from funcspace import (
    CircleGrid,
    ComposePower,
    FnExpr,
    HbKernel,
    Poly,
    Product,
    Scale,
    SingularInner,
    Sum,
    evaluate,
    inner_parts,
    joint_samples,
    next_pow2,
    taylor_coeffs,
)

logger = logging.getLogger(__name__)

Sampleable = Union[FnExpr, CircleGrid]

SYMBOL_CHECK_GRID = 8192
CIRCLE_CLUSTER_DIST = 1e-4
MAX_REFINEMENTS = 20
LS_RISE_RTOL = 1e-9


class TrigPoly:
    """
    Nonnegative trigonometric polynomial t = sum_{|k|<=d} c_k e^{ik theta}.

    Only c_0..c_d are stored; c_{-k} = conj(c_k).
    """

    def __init__(self, coeffs: Sequence[complex]):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        if abs(c[0].imag) > 1e-12 * max(1.0, abs(c[0])):
            raise ValidationError("constant coefficient of a real trigonometric polynomial must be real")
        c[0] = c[0].real
        nonzero = np.flatnonzero(c)
        self.coeffs = c[:nonzero[-1] + 1] if len(nonzero) else np.zeros(1, dtype=complex)

        low = float(np.min(self.values(SYMBOL_CHECK_GRID)))
        if low < -1e-10:
            raise NegativeSymbol("trigonometric polynomial takes negative values",
                                 {'min': low})

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def from_modulus_difference(cls, q: Poly, p: Poly) -> 'TrigPoly':
        """|q|^2 - |p|^2 on the circle, via coefficient autocorrelation."""
        n = max(len(q.coeffs), len(p.coeffs))
        qc = np.pad(q.coeffs, (0, n - len(q.coeffs)))
        pc = np.pad(p.coeffs, (0, n - len(p.coeffs)))
        d = n - 1
        qq = np.convolve(qc, np.conj(qc[::-1]))[d:]
        pp = np.convolve(pc, np.conj(pc[::-1]))[d:]
        return cls(qq - pp)

    def values(self, M: int) -> np.ndarray:
        if M <= 2 * self.degree:
            raise ValidationError(f"grid of {M} points cannot resolve degree {self.degree}")
        spectrum = np.zeros(M, dtype=complex)
        spectrum[:len(self.coeffs)] = self.coeffs
        if self.degree > 0:
            spectrum[-self.degree:] = np.conj(self.coeffs[1:][::-1])
        return (np.fft.ifft(spectrum) * M).real

    def to_dict(self) -> Dict:
        return {'coeffs': [[c.real, c.imag] for c in self.coeffs]}


@dataclass
class LSResult:
    """
    Least-squares polynomial q minimising ||q f - g||_2 over degree <= n.

    ill_conditioned marks a residual above the one at the previous degree.
    """

    q: Poly
    residual: float
    degree: int
    condition: float
    wall_ms: float = 0.0
    ill_conditioned: bool = False

    def to_dict(self) -> Dict:
        return {
            'degree': self.degree,
            'residual': self.residual,
            'condition': self.condition,
            'ill_conditioned': self.ill_conditioned,
            'q': self.q.to_dict()
        }


@dataclass
class OuterVerdict:
    outer: bool
    log_abs_f0: float
    log_integral: float
    gap: float
    method: str

    def __bool__(self) -> bool:
        return self.outer

    def to_dict(self) -> Dict:
        return {
            'outer': self.outer,
            'log_abs_f0': _finite_or_none(self.log_abs_f0),
            'log_integral': _finite_or_none(self.log_integral),
            'gap': _finite_or_none(self.gap),
            'method': self.method
        }


def _finite_or_none(v: float) -> Optional[float]:
    return float(v) if np.isfinite(v) else None


def _values_on(f: Sampleable, grid: CircleGrid) -> np.ndarray:
    if isinstance(f, CircleGrid):
        if f.M != grid.M:
            raise GridMismatch(f"grid sizes differ: {f.M} vs {grid.M}")
        return f.values
    values = np.asarray(f._eval(grid.points), dtype=complex)
    if not np.all(np.isfinite(values)):
        raise EvalAtSingularity(f"{f.kind} is singular on the shared grid",
                                {'M': grid.M, 'source': grid.source})
    return values


def sample_pair(f: Sampleable, g: Sampleable, M: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Values of two functions on one grid."""
    if isinstance(f, CircleGrid) and isinstance(g, CircleGrid):
        if f.M != g.M:
            raise GridMismatch(f"grid sizes differ: {f.M} vs {g.M}", {'M_f': f.M, 'M_g': g.M})
        return f.values, g.values
    if isinstance(f, CircleGrid):
        return f.values, _values_on(g, f)
    if isinstance(g, CircleGrid):
        return _values_on(f, g), g.values
    M = M or get_settings().grid_size
    gf, gg = joint_samples([f, g], M)
    return gf.values, gg.values


def h2_inner(f: Sampleable, g: Sampleable, M: Optional[int] = None) -> complex:
    """
    H2 inner product <f, g> by the trapezoidal rule on the circle.

    Polynomial pairs are handled exactly from coefficients.
    """
    if isinstance(f, Poly) and isinstance(g, Poly):
        n = min(len(f.coeffs), len(g.coeffs))
        return complex(np.sum(f.coeffs[:n] * np.conj(g.coeffs[:n])))
    fv, gv = sample_pair(f, g, M)
    return complex(np.sum(fv * np.conj(gv)) / len(fv))


def h2_norm(f: Sampleable, M: Optional[int] = None) -> float:
    if isinstance(f, Poly):
        return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))
    if isinstance(f, CircleGrid):
        return float(np.sqrt(np.mean(np.abs(f.values) ** 2)))
    return float(np.sqrt(max(h2_inner(f, f, M).real, 0.0)))


def _rational_log_integral(num: Poly, den: Poly) -> float:
    if num.degree < 0:
        raise NotLogIntegrable("log|f| is not integrable for f = 0")

    def jensen(p: Poly) -> float:
        lead = p.coeffs[-1]
        roots = p.roots()
        return float(np.log(abs(lead)) + np.sum(np.log(np.maximum(1.0, np.abs(roots)))))

    return jensen(num) - jensen(den)


def _structural_log_integral(f: FnExpr) -> Optional[float]:
    if isinstance(f, Product):
        parts = [_structural_log_integral(g) for g in f.factors]
        return None if any(p is None for p in parts) else float(sum(parts))
    if isinstance(f, Scale):
        inner = _structural_log_integral(f.expr)
        return None if inner is None else float(np.log(abs(f.factor)) + inner)
    if isinstance(f, ComposePower):
        return _structural_log_integral(f.expr)
    if isinstance(f, SingularInner):
        return 0.0
    if isinstance(f, HbKernel) and f.as_rational() is None:
        return float(np.log(abs(evaluate(f, 0))))
    if isinstance(f, Sum) and len(f.terms) == 2:
        consts = [t for t in f.terms if isinstance(t, Poly) and t.degree <= 0]
        others = [t for t in f.terms if not (isinstance(t, Poly) and t.degree <= 0)]
        if len(consts) == 1 and len(others) == 1:
            c = consts[0].coeffs[0]
            other, s = others[0], 1.0
            if isinstance(other, Scale):
                other, s = other.expr, other.factor
            if inner_parts(other) is not None and abs(c) >= abs(s) and abs(c) > 0:
                return float(np.log(abs(evaluate(f, 0))))
    r = f.as_rational()
    if r is not None:
        return _rational_log_integral(r.num, r.den)
    return None


def _grid_log_integral(f: FnExpr, tol: float) -> float:
    M = get_settings().grid_size
    history = []
    for _ in range(MAX_REFINEMENTS):
        pts = np.exp(1j * (2 * np.pi * np.arange(M) + np.pi) / M)
        values = np.abs(np.asarray(f._eval(pts), dtype=complex))
        values = values[np.isfinite(values)]
        if np.any(values == 0):
            raise NotLogIntegrable(f"{f.kind} vanishes on the quadrature grid", {'M': M})
        history.append(float(np.mean(np.log(values))))
        if len(history) >= 2 and abs(history[-1] - history[-2]) <= tol / 10:
            return history[-1]
        if M >= 2 ** 20:
            break
        M *= 2
    steps = np.diff(history)
    if len(steps) >= 3 and np.all(steps[-3:] < -1.0):
        raise NotLogIntegrable("log-modulus quadrature drifts to -infinity",
                               {'history': history})
    raise Inconclusive("log-modulus quadrature did not converge",
                       {'history': history, 'tol': tol})


def log_integral(f: FnExpr, tol: Optional[float] = None) -> Tuple[float, str]:
    """
    Integral of log|f| over the circle.

    Returns:
        (value, method) with method 'structural' or 'quadrature'
    """
    tol = get_settings().outer_tol if tol is None else tol
    value = _structural_log_integral(f)
    if value is not None:
        return value, 'structural'
    return _grid_log_integral(f, tol), 'quadrature'


def is_outer(f: FnExpr, tol: Optional[float] = None) -> OuterVerdict:
    """
    Outer test log|f(0)| = integral of log|f|.

    Args:
        f: Expression, not identically zero
        tol: Accepted gap (default outer_tol setting)

    Returns:
        OuterVerdict with both sides of the identity
    """
    tol = get_settings().outer_tol if tol is None else tol
    if isinstance(f, Poly) and f.degree < 0:
        raise ValidationError("the zero function has no outer test")
    f0 = abs(evaluate(f, 0))
    value, method = log_integral(f, tol)
    if f0 == 0:
        return OuterVerdict(False, float('-inf'), value, float('inf'), method)
    log_f0 = float(np.log(f0))
    gap = value - log_f0
    logger.debug(f"Outer test for {f.kind}: log|f(0)|={log_f0:.3e} integral={value:.3e}")
    return OuterVerdict(abs(gap) <= tol, log_f0, value, float(abs(gap)), method)


def boundary_zero_orders(values: np.ndarray, rtol: float = 1e-10) -> List[Tuple[int, float]]:
    """
    Isolated zeros of a modulus sampled on the grid, with their orders.

    A sample at or below rtol times the maximum whose two neighbours on each
    side are not counts as a zero; its order p comes from w(2h)/w(h) = 2^p
    and snaps to the nearest integer within 1e-2.

    Returns:
        (grid index, order) pairs
    """
    M = len(values)
    tiny = values <= rtol * np.max(values)
    zeros = []
    for j in np.flatnonzero(tiny):
        near = [(j + s) % M for s in (-2, -1, 1, 2)]
        if np.any(tiny[near]):
            continue
        p = 0.5 * (np.log2(values[near[0]] / values[near[1]]) + np.log2(values[near[3]] / values[near[2]]))
        if abs(p - round(p)) < 1e-2:
            p = float(round(p))
        if p > 0:
            zeros.append((int(j), float(p)))
    return zeros


def _zero_factor_coeffs(zeta: complex, p: float, M: int) -> np.ndarray:
    """Taylor coefficients of (1 - conj(zeta) z)^p, at most M of them."""
    k = np.arange(M if p != int(p) else min(int(p) + 1, M))
    return binom(p, k) * (-np.conj(zeta)) ** k


def outer_from_modulus(w: CircleGrid, eps: float = 1e-12) -> Poly:
    """
    Outer function with boundary modulus w, by the folded cepstrum.

    Isolated zeros of w at grid points are split off as analytic factors
    (1 - conj(zeta) z)^p before the cepstrum sees the modulus.

    Args:
        w: Nonnegative samples on the circle
        eps: Floor applied to tiny samples that remain

    Returns:
        Poly with all M coefficients of the outer function on the grid
    """
    values = np.asarray(w.values)
    if np.max(np.abs(np.imag(values))) > 1e-12 * max(1.0, np.max(np.abs(values))):
        raise ValidationError("modulus samples must be real")
    values = np.real(values).astype(float)
    if np.any(values < 0):
        raise ValidationError("modulus samples must be nonnegative")
    M = len(values)
    points = w.points

    zeros = boundary_zero_orders(values) if np.max(values) > 0 else []
    for j, p in zeros:
        factor = np.abs(1 - np.conj(points[j]) * points) ** p
        factor[j] = 1.0
        values = values / factor
        values[j] = 0.5 * (values[(j - 1) % M] + values[(j + 1) % M])
    if zeros:
        logger.debug(f"split off boundary zeros {[(int(j), p) for j, p in zeros]}")

    small = values < eps
    if np.any(small):
        logger.warning(f"{int(np.sum(small))} modulus samples below {eps}, clamping")
        if np.mean(small) > 0.5:
            raise NotLogIntegrable("modulus vanishes on most of the circle",
                                   {'clamped': int(np.sum(small))})
        values = np.maximum(values, eps)

    cepstrum = np.fft.fft(np.log(values)) / M
    folded = np.zeros(M, dtype=complex)
    folded[0] = cepstrum[0]
    folded[1:M // 2] = 2 * cepstrum[1:M // 2]
    folded[M // 2] = cepstrum[M // 2]
    outer_values = np.exp(np.fft.ifft(folded) * M)
    coeffs = np.fft.fft(outer_values) / M

    for j, p in zeros:
        series = _zero_factor_coeffs(points[j], p, M)
        if len(series) <= 64:
            coeffs = np.convolve(coeffs, series)[:M]
        else:
            coeffs = fftconvolve(coeffs, series)[:M]
    coeffs[0] = coeffs[0].real
    return Poly(coeffs)


def _symbol_coeffs(phi: Union[FnExpr, np.ndarray], n: int) -> np.ndarray:
    if isinstance(phi, FnExpr):
        return taylor_coeffs(phi, n - 1)
    out = np.zeros(n, dtype=complex)
    c = np.asarray(phi, dtype=complex)[:n]
    out[:len(c)] = c
    return out


def coanalytic_matrix(phi_coeffs: np.ndarray, n: int) -> np.ndarray:
    """Upper-triangular matrix of the co-analytic Toeplitz operator on degrees 0..n-1."""
    row = np.zeros(n, dtype=complex)
    m = min(n, len(phi_coeffs))
    row[:m] = np.conj(phi_coeffs[:m])
    col = np.zeros(n, dtype=complex)
    col[0] = row[0]
    return toeplitz(col, row)


def toeplitz_coanalytic_apply(phi: Union[FnExpr, np.ndarray], f: Poly, D: int) -> Poly:
    """
    Apply the co-analytic Toeplitz operator of phi to a polynomial.

    Args:
        phi: Symbol (expression or Taylor coefficients)
        f: Polynomial
        D: Output truncation degree

    Returns:
        Coefficients of P+(conj(phi) f) in degrees 0..D
    """
    n = max(len(f.coeffs), D + 1)
    fc = np.zeros(n, dtype=complex)
    fc[:len(f.coeffs)] = f.coeffs
    out = coanalytic_matrix(_symbol_coeffs(phi, n), n) @ fc
    return Poly(out[:D + 1])


def coanalytic_solve_with_tail(phi: Union[FnExpr, np.ndarray], g: Poly, D: int) -> Tuple[Poly, float]:
    """
    Solve the co-analytic Toeplitz system with the H2 tail condition.

    Back-substitution starts from degree D + buffer with a zero tail.

    Args:
        phi: Outer symbol with phi(0) != 0
        g: Right-hand side
        D: Requested degree

    Returns:
        (solution coefficients in degrees 0..D, largest buffer coefficient
        relative to the solution scale)
    """
    settings = get_settings()
    n = max(D + settings.toeplitz_buffer + 1, len(g.coeffs))
    phi_c = _symbol_coeffs(phi, n)
    if abs(phi_c[0]) < 1e-10:
        raise IllConditioned("co-analytic symbol vanishes at the origin",
                             {'phi0': abs(phi_c[0])})
    rhs = np.zeros(n, dtype=complex)
    rhs[:len(g.coeffs)] = g.coeffs
    x = solve_triangular(coanalytic_matrix(phi_c, n), rhs, lower=False)
    scale = max(1.0, float(np.max(np.abs(x[:D + 1]))))
    tail = float(np.max(np.abs(x[D + 1:]))) if n > D + 1 else 0.0
    return Poly(x[:D + 1]), tail / scale


def toeplitz_coanalytic_solve(phi: Union[FnExpr, np.ndarray], g: Poly, D: int) -> Poly:
    """
    Solve the co-analytic Toeplitz system; the buffer coefficients must
    come out below tail_tol.

    Raises:
        TailNotDecayed: the solution does not decay by degree D
    """
    x, tail = coanalytic_solve_with_tail(phi, g, D)
    tol = get_settings().tail_tol
    if tail > tol:
        raise TailNotDecayed(
            f"Toeplitz solution does not decay by degree {D}",
            {'tail': tail, 'tol': tol, 'D': D}
        )
    return x


def _ls_grids(f: Sampleable, g: Sampleable, nmax: int, M: Optional[int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(f, CircleGrid) or isinstance(g, CircleGrid):
        fv, gv = sample_pair(f, g)
        points = (f if isinstance(f, CircleGrid) else g).points
    else:
        if M is None:
            M = max(get_settings().grid_size, next_pow2(8 * (nmax + 1)))
        gf, gg = joint_samples([f, g], M)
        fv, gv, points = gf.values, gg.values, gf.points
    if len(fv) < 4 * (nmax + 1):
        raise ValidationError(f"grid of {len(fv)} points too coarse for degree {nmax}")
    return fv, gv, points


def residual_rose(previous: float, current: float) -> bool:
    """Whether a nested least-squares residual went up by more than LS_RISE_RTOL."""
    return current > previous * (1 + LS_RISE_RTOL)


def poly_ls_sequence(f: Sampleable, g: Sampleable, degrees: Sequence[int],
                     M: Optional[int] = None) -> List[LSResult]:
    """
    Least-squares solutions of min ||q f - g||_2 for a list of degrees.

    One Gram matrix (Toeplitz in the Fourier coefficients of |f|^2) serves
    every degree; residuals are recomputed by quadrature.

    Args:
        f: Multiplier function
        g: Target
        degrees: Polynomial degrees, increasing
        M: Grid size (default from settings, enlarged for high degrees)

    Returns:
        One LSResult per degree
    """
    settings = get_settings()
    degrees = [int(n) for n in degrees]
    if any(b <= a for a, b in zip(degrees, degrees[1:])) or (degrees and degrees[0] < 0):
        raise ValidationError("degrees must be nonnegative and strictly increasing")
    nmax = degrees[-1]
    start = time.perf_counter()
    fv, gv, points = _ls_grids(f, g, nmax, M)
    M = len(fv)

    w_hat = np.fft.fft(np.abs(fv) ** 2) / M
    rhs = (np.fft.fft(gv * np.conj(fv)) / M)[:nmax + 1]
    gram = toeplitz(w_hat[:nmax + 1])
    ridge = settings.ls_ridge * max(w_hat[0].real, 1e-300)

    results = []
    for n in degrees:
        G = gram[:n + 1, :n + 1] + ridge * np.eye(n + 1)
        condition = float(np.linalg.cond(G))
        if condition > settings.ls_max_condition:
            raise IllConditioned(f"normal equations ill-conditioned at degree {n}",
                                 {'degree': n, 'condition': condition})
        q = cho_solve(cho_factor(G), rhs[:n + 1])
        residual = float(np.sqrt(np.mean(np.abs(P.polyval(points, q) * fv - gv) ** 2)))
        rose = bool(results) and residual_rose(results[-1].residual, residual)
        if rose:
            logger.warning(f"least-squares residual rose at degree {n}: "
                           f"{results[-1].residual:.6e} -> {residual:.6e} (condition {condition:.2e})")
        wall_ms = (time.perf_counter() - start) * 1000
        start = time.perf_counter()
        results.append(LSResult(Poly(q), residual, n, condition, wall_ms, rose))
    return results


def poly_ls_approx(f: Sampleable, g: Sampleable, n: int, M: Optional[int] = None) -> LSResult:
    return poly_ls_sequence(f, g, [n], M)[0]


def cluster_circle_roots(roots: np.ndarray) -> List[Tuple[complex, int]]:
    """Group roots near the unit circle; returns (unimodular centre, count) pairs."""
    roots = np.asarray(roots, dtype=complex)
    if len(roots) == 0:
        return []
    order = np.argsort(np.angle(roots))
    clusters: List[List[complex]] = []
    for rho in roots[order]:
        if clusters and abs(rho - np.mean(clusters[-1])) < CIRCLE_CLUSTER_DIST:
            clusters[-1].append(rho)
        else:
            clusters.append([rho])
    if len(clusters) > 1 and abs(np.mean(clusters[0]) - np.mean(clusters[-1])) < CIRCLE_CLUSTER_DIST:
        clusters[0].extend(clusters.pop())

    out = []
    for cluster in clusters:
        centre = np.mean(cluster)
        out.append((complex(centre / abs(centre)), len(cluster)))
    return out


def fejer_riesz(t: TrigPoly) -> Poly:
    """
    Outer polynomial a with |a|^2 = t on the circle and a(0) > 0.

    Roots of the Laurent lift z^d t(z) come in reciprocal pairs; one root of
    each pair outside the disc is kept, circle roots are clustered to half
    their multiplicity.
    """
    cluster_tol = get_settings().cluster_tol
    c = t.coeffs
    d = t.degree
    if d == 0:
        if c[0].real <= 0:
            raise ValidationError("cannot factor the zero symbol")
        return Poly([np.sqrt(c[0].real)])

    lift = np.concatenate([np.conj(c[1:][::-1]), c])
    roots = P.polyroots(lift)
    moduli = np.abs(roots)
    on_circle = np.abs(moduli - 1) <= max(cluster_tol, 1e-6)
    outside = roots[(~on_circle) & (moduli > 1)]
    chosen = list(outside)
    for zeta, count in cluster_circle_roots(roots[on_circle]):
        if count % 2:
            logger.warning(f"Odd circle-root cluster of size {count} at {zeta:.6g}")
        chosen.extend([zeta] * ((count + 1) // 2))
    if len(chosen) != d:
        logger.warning(f"Fejer-Riesz kept {len(chosen)} roots for degree {d}")

    monic = P.polyfromroots(chosen) if chosen else np.ones(1, dtype=complex)
    scale = np.sqrt(c[0].real / np.sum(np.abs(monic) ** 2))
    phase = monic[0] / abs(monic[0])
    a = monic * scale / phase
    a[0] = a[0].real
    return Poly(a)


def hermite_interpolate(nodes: Sequence[complex], jets: Sequence[Sequence[complex]]) -> Poly:
    """
    Hermite interpolant by confluent Newton divided differences.

    Args:
        nodes: Distinct interpolation points
        jets: For each node, [f, f', f'', ...] up to its multiplicity

    Returns:
        Polynomial of degree < sum of multiplicities
    """
    points, owner = [], []
    for k, (zeta, jet) in enumerate(zip(nodes, jets)):
        points.extend([complex(zeta)] * len(jet))
        owner.extend([k] * len(jet))
    N = len(points)
    if N == 0:
        return Poly([0])

    table = np.zeros((N, N), dtype=complex)
    for i in range(N):
        table[i, 0] = jets[owner[i]][0]
    factorial = 1.0
    for j in range(1, N):
        factorial *= j
        for i in range(j, N):
            if owner[i] == owner[i - j]:
                table[i, j] = jets[owner[i]][j] / factorial
            else:
                table[i, j] = (table[i, j - 1] - table[i - 1, j - 1]) / (points[i] - points[i - j])

    result = Poly([table[N - 1, N - 1]])
    for i in range(N - 2, -1, -1):
        result = result * Poly([-points[i], 1]) + Poly([table[i, i]])
    return result


def project_analytic(grid: CircleGrid) -> CircleGrid:
    """Riesz projection P+ of grid samples (nonnegative frequencies kept)."""
    M = grid.M
    spectrum = np.fft.fft(grid.values) / M
    spectrum[M // 2 + 1:] = 0
    return CircleGrid(M, np.fft.ifft(spectrum) * M, grid.source, grid.perturbed)
