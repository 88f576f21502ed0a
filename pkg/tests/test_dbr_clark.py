import numpy as np
import pytest

from errors import NotInE0, TailTooLarge, ValidationError
from funcspace import (
    CircleGrid,
    HbKernel,
    Poly,
    Product,
    Rational,
    Scale,
    SingularInner,
    Sum,
    boundary_value,
    circle_samples,
    derivative,
    evaluate,
)
from hardy import h2_inner, h2_norm, project_analytic
from dbr_rational import hb_norm, mate
from dbr_clark import (
    clark_atoms,
    clark_reciprocal,
    decompose_clark,
    hb_norm_clark,
    herglotz_inner,
    ki_kernel,
    multiplier_sufficient,
    rebase,
    shift_by_inner,
    witness_norm,
)

E = np.exp(-1)
MASS = (1 + E) / (1 - E)


@pytest.fixture
def S():
    return SingularInner([1.0], [1.0])


def zeta(n):
    return (2j * np.pi * n - 1) / (2j * np.pi * n + 1)


def weight(n):
    return 2 / (4 * np.pi ** 2 * n ** 2 + 1)


class TestClarkAtoms:
    def test_monomial(self):
        data = clark_atoms(Poly([0, 0, 0, 1]), 1.0, N=4)
        assert data.method == 'monomial'
        assert len(data.atoms) == 3
        np.testing.assert_allclose(data.weights, [1 / 3] * 3)
        np.testing.assert_allclose(np.abs(data.points ** 3 - 1), 0, atol=1e-12)

    def test_singular_closed_form(self, S):
        data = clark_atoms(S, 1.0, N=50)
        assert data.method == 'singular_closed_form'
        assert len(data.atoms) == 101
        assert data.total_mass_target == pytest.approx(MASS)
        for n in range(-50, 51):
            hits = np.abs(data.points - zeta(n)) < 1e-12
            assert hits.sum() == 1
            assert data.weights[hits][0] == pytest.approx(weight(n), rel=1e-12)

    def test_heaviest_first(self, S):
        data = clark_atoms(S, 1.0, N=10)
        assert data.atoms[0].point == pytest.approx(-1)
        assert data.atoms[0].weight == pytest.approx(2)
        assert all(a.weight >= b.weight for a, b in zip(data.atoms, data.atoms[1:]))

    def test_weights_match_angular_derivative(self, S):
        data = clark_atoms(S, 1.0, N=5)
        for atom in data.atoms:
            slope = boundary_value(derivative(S), atom.point)
            assert 1 / abs(slope) == pytest.approx(atom.weight, rel=1e-6)

    @pytest.mark.parametrize("N", [10, 100, 1000])
    def test_tail_mass_bound(self, S, N):
        data = clark_atoms(S, 1.0, N=N)
        assert 0 < data.tail_mass < 1 / (np.pi ** 2 * N)

    def test_other_base_point(self, S):
        data = clark_atoms(S, 1j, N=5)
        for atom in data.atoms[:5]:
            assert abs(boundary_value(S, atom.point) - 1j) < 1e-6

    def test_herglotz_atoms(self):
        data = clark_atoms(herglotz_inner([(1.0, 2.0)]), 1.0, N=3)
        assert data.method == 'herglotz'
        assert [(a.point, a.weight) for a in data.atoms] == [(1, 2)]

    def test_rational_inner(self):
        data = clark_atoms(Rational(Poly([1, 3]), Poly([3, 1])), 1.0, N=3)
        assert data.method == 'rational_roots'
        assert len(data.atoms) == 1
        assert data.atoms[0].point == pytest.approx(1)
        assert data.atoms[0].weight == pytest.approx(2, rel=1e-8)

    def test_rejects_non_inner(self):
        with pytest.raises(ValidationError):
            clark_atoms(Poly([1, 1]))

    def test_rejects_interior_base_point(self, S):
        with pytest.raises(ValidationError):
            clark_atoms(S, 0.5)

    def test_to_dict(self, S):
        d = clark_atoms(S, 1.0, N=2).to_dict()
        assert len(d['atoms']) == 5
        assert d['retained_mass'] < d['total_mass_target']


class TestKernels:
    def test_boundary_kernel_of_z_squared(self):
        k = ki_kernel(Poly([0, 0, 1]), 1.0)
        for z in (0, 0.5, -0.3j):
            assert evaluate(k, z) == pytest.approx(1 + z)
        assert h2_norm(k) ** 2 == pytest.approx(2)

    def test_interior_kernel(self, S):
        k = ki_kernel(S, 0)
        for z in (0.1, 0.4j):
            assert evaluate(k, z) == pytest.approx(1 - E * evaluate(S, z))

    def test_kernel_at_atom_of_singular_measure(self, S):
        with pytest.raises(NotInE0):
            ki_kernel(S, 1.0)

    def test_reciprocal(self):
        recip = clark_reciprocal(clark_atoms(Poly([0, 1]), 1.0))
        assert evaluate(recip, 0.5) == pytest.approx(2)


class TestDecomposition:
    def test_identity_inner_one_plus_z(self):
        dec = decompose_clark(Poly([1, 1]), clark_atoms(Poly([0, 1]), 1.0))
        np.testing.assert_allclose(dec.g2_coeffs, [2])
        assert evaluate(dec.g1, 0.3) == pytest.approx(-1)
        triple, exact = hb_norm_clark(dec)
        assert triple ** 2 == pytest.approx(5)
        assert exact ** 2 == pytest.approx(12)

    def test_identity_inner_one_minus_z(self):
        dec = decompose_clark(Poly([1, -1]), clark_atoms(Poly([0, 1]), 1.0))
        assert evaluate(dec.g1, 0.3) == pytest.approx(1)
        assert hb_norm_clark(dec)[1] ** 2 == pytest.approx(4)

    def test_z_squared_inner(self):
        dec = decompose_clark(Poly([1, 1]), clark_atoms(Poly([0, 0, 1]), 1.0))
        assert dec.g1_norm() < 1e-12
        assert hb_norm_clark(dec)[1] ** 2 == pytest.approx(4)

    def test_decomposition_reassembles(self):
        inner = Poly([0, 0, 1])
        f = Poly([1, 2, -1, 0.5])
        dec = decompose_clark(f, clark_atoms(inner, 1.0))
        for z in (0.2, -0.5j, 0.3 + 0.3j):
            rebuilt = (1 - z ** 2) * evaluate(dec.g1, z) + evaluate(dec.g2, z)
            assert rebuilt == pytest.approx(complex(evaluate(f, z)), abs=1e-10)

    def test_agrees_with_rational_route(self):
        f = Poly([1, 2, -1, 0.5])
        exact = hb_norm_clark(decompose_clark(f, clark_atoms(Poly([0, 0, 1]), 1.0)))[1]
        assert exact == pytest.approx(hb_norm(f, mate(Poly([0.5, 0, 0.5]))), rel=1e-8)

    def test_shift_by_inner(self):
        inner = Poly([0, 1])
        shifted = shift_by_inner(decompose_clark(Poly([1, 1]), clark_atoms(inner, 1.0)))
        for z in (0.3, -0.2j):
            rebuilt = (1 - z) * evaluate(shifted.g1, z) + evaluate(shifted.g2, z)
            assert rebuilt == pytest.approx(z * (1 + z), abs=1e-10)

    def test_multiplier_check(self):
        dec = decompose_clark(Poly([1, 1]), clark_atoms(Poly([0, 1]), 1.0))
        assert multiplier_sufficient(dec, M=1024)

    def test_tail_too_large(self, S):
        with pytest.raises(TailTooLarge):
            decompose_clark(Poly([1, 1]), clark_atoms(S, 1.0, N=2), tol=1e-6)

    def test_base_point_must_be_one(self, S):
        with pytest.raises(ValidationError):
            decompose_clark(Poly([1]), clark_atoms(S, 1j, N=5))

    def test_to_dict(self):
        d = decompose_clark(Poly([1, 1]), clark_atoms(Poly([0, 1]), 1.0)).to_dict()
        assert d['exact_norm'] == pytest.approx(np.sqrt(12))
        assert d['tail_estimate'] == 0
        assert d['tail_value'] is None


def test_witness_norm():
    assert witness_norm(clark_atoms(Poly([0, 1]), 1.0), 0) == pytest.approx(1 / np.sqrt(2))


def test_rebase_moves_base_point():
    spec = rebase(Poly([0, 1]), 1j)
    assert spec.kind == 'half_inner'
    np.testing.assert_allclose(spec.inner.coeffs, [0, -1j])
    with pytest.raises(ValidationError):
        rebase(Poly([0, 1]), 0.5)


def test_norms_agree_on_random_polynomials():
    rng = np.random.default_rng(11)
    data = clark_atoms(Poly([0, 1]), 1.0)
    spec = mate(Poly([0.5, 0.5]))
    for _ in range(20):
        deg = int(rng.integers(0, 6))
        f = Poly(rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1))
        exact = hb_norm_clark(decompose_clark(f, data))[1]
        assert exact == pytest.approx(hb_norm(f, spec), rel=1e-6)


class TestClarkTail:
    @pytest.fixture
    def kernel(self, S):
        return HbKernel((1 + S) * 0.5, 0)

    def test_kernel_at_origin(self, S, kernel):
        dec = decompose_clark(kernel, clark_atoms(S, 1.0))
        assert dec.tail_value == pytest.approx((1 - E) / 2)
        assert dec.tail_estimate < 1e-12
        for z in (0.3, -0.5j, 0.2 + 0.6j):
            assert evaluate(dec.g1, z) == pytest.approx((1 - E) / 4, abs=1e-10)
            assert evaluate(dec.g2, z) == pytest.approx(0.5 - 0.5 * E * evaluate(S, z), abs=1e-10)

    def test_kernel_norm_is_exact(self, S, kernel):
        c = (1 + E) / 2
        dec = decompose_clark(kernel, clark_atoms(S, 1.0))
        assert dec.g2_norm() ** 2 == pytest.approx((1 - E ** 2) / 4, rel=1e-10)
        assert hb_norm_clark(dec)[1] ** 2 == pytest.approx(1 - c ** 2, rel=1e-6)

    def test_kernel_parts_are_bounded(self, S, kernel):
        assert multiplier_sufficient(decompose_clark(kernel, clark_atoms(S, 1.0)))

    def test_one_plus_inner_times_model_kernel(self, S):
        k = ki_kernel(S, 0)
        dec = decompose_clark((1 + S) * k, clark_atoms(S, 1.0))
        assert dec.tail_value == pytest.approx(2 * (1 - E))
        for z in (0.3, -0.4j):
            assert evaluate(dec.g1, z) == pytest.approx(-evaluate(k, z), abs=1e-9)
            assert evaluate(dec.g2, z) == pytest.approx(2 * evaluate(k, z), abs=1e-9)
        assert multiplier_sufficient(dec)

    def test_tail_decomposition_reassembles(self, S):
        f = Poly([1, 1])
        dec = decompose_clark(f, clark_atoms(S, 1.0, N=32))
        for z in (0.2, -0.5j, 0.3 + 0.3j):
            rebuilt = (1 - evaluate(S, z)) * evaluate(dec.g1, z) + evaluate(dec.g2, z)
            assert rebuilt == pytest.approx(1 + z, abs=1e-10)

    def test_tail_estimate_shrinks_with_n(self, S):
        f = Poly([1, 1])
        coarse = decompose_clark(f, clark_atoms(S, 1.0, N=16)).tail_estimate
        fine = decompose_clark(f, clark_atoms(S, 1.0, N=64)).tail_estimate
        assert 0 < fine < coarse


class TestModelSpaceBasis:
    @pytest.fixture
    def inner(self):
        angles = 2 * np.pi * np.arange(12) / 12 + 0.1
        return herglotz_inner(list(zip(np.exp(1j * angles), np.arange(1, 13) / 78)))

    def test_clark_kernels_are_orthogonal(self, inner):
        data = clark_atoms(inner, 1.0)
        kernels = [ki_kernel(inner, a.point) for a in data.atoms]
        norms = [h2_norm(k) for k in kernels]
        for i in range(len(kernels)):
            for j in range(i + 1, len(kernels)):
                assert abs(h2_inner(kernels[i], kernels[j])) <= 1e-8 * norms[i] * norms[j]

    def test_kernel_norm_is_angular_derivative(self, inner):
        data = clark_atoms(inner, 1.0)
        for atom in data.atoms:
            square = h2_norm(ki_kernel(inner, atom.point)) ** 2
            assert square == pytest.approx(1 / atom.weight, rel=1e-8)
            assert square == pytest.approx(abs(boundary_value(derivative(inner), atom.point)), rel=1e-4)

    def test_products_of_kernels_lie_in_square_model_space(self, inner):
        data = clark_atoms(inner, 1.0)
        k = [ki_kernel(inner, a.point) for a in data.atoms[:4]]
        f = Sum([k[0], Scale(k[1], 2.0)])
        g = Sum([k[2], Scale(k[3], -0.5j)])
        M = 4096
        fg = circle_samples(Product([f, g]), M)
        inner_grid = circle_samples(inner, M)
        projected = project_analytic(CircleGrid(M, fg.values * np.conj(inner_grid.values) ** 2))
        assert h2_norm(projected) <= 1e-8 * h2_norm(fg)
