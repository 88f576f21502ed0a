import numpy as np
import pytest

from errors import IsInner, NotContractive, NotInE0, ValidationError
from funcspace import Poly, Rational, SingularInner, evaluate
from dbr_rational import (
    BSpec,
    decompose_rational,
    e0_contains,
    e0_points,
    fplus,
    hb_inner,
    hb_norm,
    hb_norm_equiv,
    hcr_margin,
    kernel_bk,
    kernel_kb,
    mate,
)

HALF_SUM = Poly([0.5, 0.5])
HALF_ONE_MINUS_SQ = Poly([0.5, 0, -0.5])


@pytest.fixture
def half_sum():
    return mate(HALF_SUM)


def zeta(n):
    return (2j * np.pi * n - 1) / (2j * np.pi * n + 1)


class TestMate:
    def test_half_sum(self, half_sum):
        np.testing.assert_allclose(half_sum.a_num.coeffs, [0.5, -0.5], atol=1e-8)
        assert len(half_sum.nodes) == 1
        node, mult = half_sum.nodes[0]
        assert abs(node - 1) < 1e-6 and mult == 1
        assert half_sum.N == 1

    def test_two_nodes_sorted_by_angle(self):
        spec = mate(HALF_ONE_MINUS_SQ)
        np.testing.assert_allclose(spec.a_num.coeffs, [0.5, 0, 0.5], atol=1e-8)
        points = [z for z, _ in spec.nodes]
        np.testing.assert_allclose(points, [1j, -1j], atol=1e-6)

    def test_constant_symbol_has_no_nodes(self):
        spec = mate(Poly([0.5]))
        np.testing.assert_allclose(spec.a_num.coeffs, [np.sqrt(3) / 2])
        assert spec.N == 0

    def test_rational_symbol(self):
        spec = mate(Rational(Poly([1]), Poly([2, -1])))
        np.testing.assert_allclose(spec.a_num.coeffs, [np.sqrt(2), -np.sqrt(2)], atol=1e-7)
        assert spec.N == 1

    @pytest.mark.parametrize("b", [HALF_SUM, HALF_ONE_MINUS_SQ, Poly([0.5]), Poly([0.5, 0, 0, 0.5])])
    def test_pythagorean_identity(self, b):
        assert mate(b).mate_deviation <= 1e-9

    def test_inner_symbol_rejected(self):
        with pytest.raises(IsInner):
            mate(Poly([0, 1]))

    def test_large_symbol_rejected(self):
        with pytest.raises(NotContractive):
            mate(Poly([1, 1]))

    def test_to_dict(self, half_sum):
        d = half_sum.to_dict()
        assert d['kind'] == 'rational'
        assert d['N'] == 1
        assert set(d) >= {'b', 'a', 'a1', 'nodes', 'mate_deviation'}


class TestDecomposition:
    def test_one_plus_z(self, half_sum):
        dec = decompose_rational(Poly([1, 1]), half_sum)
        np.testing.assert_allclose(dec.ftilde.coeffs, [1], atol=1e-12)
        np.testing.assert_allclose(dec.p.coeffs, [2], atol=1e-12)
        assert dec.equivalent_norm == pytest.approx(np.sqrt(5))

    def test_constant(self, half_sum):
        dec = decompose_rational(Poly([1]), half_sum)
        assert np.max(np.abs(dec.ftilde.coeffs)) < 1e-12
        np.testing.assert_allclose(dec.p.coeffs, [1], atol=1e-12)
        assert dec.equivalent_norm == pytest.approx(1)

    def test_interpolant_at_two_nodes(self):
        dec = decompose_rational(Poly([0, 1]), mate(HALF_ONE_MINUS_SQ))
        np.testing.assert_allclose(dec.p.coeffs, [0, 1], atol=1e-8)
        assert np.max(np.abs(dec.ftilde.coeffs)) < 1e-8

    def test_function_vanishing_at_node(self, half_sum):
        assert hb_norm_equiv(Poly([0, -1, 1]), half_sum) == pytest.approx(1, abs=1e-10)

    def test_needs_rational_symbol(self):
        with pytest.raises(ValidationError):
            decompose_rational(Poly([1]), BSpec.half_inner(SingularInner([1.0], [1.0])))


class TestFplus:
    def test_constant(self, half_sum):
        fp, norm = fplus(Poly([1]), half_sum)
        np.testing.assert_allclose(fp.coeffs[:2], [1, 0], atol=1e-10)
        assert norm == pytest.approx(np.sqrt(2))

    def test_z_minus_one(self, half_sum):
        fp, norm = fplus(Poly([-1, 1]), half_sum)
        np.testing.assert_allclose(fp.coeffs[:3], [1, 1, 0], atol=1e-10)
        assert norm == pytest.approx(2)

    def test_one_plus_z(self, half_sum):
        fp, norm = fplus(Poly([1, 1]), half_sum)
        np.testing.assert_allclose(fp.coeffs[:2], [3, 1], atol=1e-10)
        assert hb_norm(Poly([1, 1]), half_sum) == pytest.approx(np.sqrt(12))


class TestFplusIdentities:
    @pytest.fixture
    def half_sum_sq(self):
        return mate(Poly([0.5, 0, 0.5]))

    def test_model_space_functions_are_fixed(self, half_sum_sq):
        fp, _ = fplus(Poly([1, 2]), half_sum_sq)
        np.testing.assert_allclose(fp.coeffs[:4], [1, 2, 0, 0], atol=1e-8)

    def test_one_minus_inner_multiples(self, half_sum_sq):
        # (1 - z^2)(1 + z) maps to -(1 + z^2)(1 + z)
        fp, _ = fplus(Poly([1, 1, -1, -1]), half_sum_sq)
        np.testing.assert_allclose(fp.coeffs[:5], [-1, -1, -1, -1, 0], atol=1e-8)

    def test_pairing_with_b_times_szego_kernel(self, half_sum):
        lam = 0.3 + 0.2j
        f = Poly([1, 1])
        fp, _ = fplus(f, half_sum)
        expected = evaluate(fp, lam) / evaluate(half_sum.a, lam)
        assert expected == pytest.approx((3 + lam) / ((1 - lam) / 2), rel=1e-8)
        assert hb_inner(f, kernel_bk(half_sum, lam), half_sum) == pytest.approx(expected, abs=1e-8)


class TestKernels:
    def test_kernel_at_origin(self, half_sum):
        k = kernel_kb(half_sum, 0)
        for z in (0.2, -0.4j, 0.5 + 0.1j):
            assert evaluate(k, z) == pytest.approx((3 - z) / 4)

    def test_boundary_kernel_at_node(self, half_sum):
        k = kernel_kb(half_sum, 1.0)
        for z in (0, 0.3, -0.7j):
            assert evaluate(k, z) == pytest.approx(0.5)

    def test_boundary_kernel_two_nodes(self):
        spec = mate(HALF_ONE_MINUS_SQ)
        k = kernel_kb(spec, 1j)
        for z in (0.1, 0.5j, -0.3 + 0.2j):
            expected = (1 - evaluate(HALF_ONE_MINUS_SQ, z)) / (1 + 1j * z)
            assert evaluate(k, z) == pytest.approx(expected)

    def test_boundary_kernel_outside_e0(self, half_sum):
        with pytest.raises(NotInE0):
            kernel_kb(half_sum, -1.0)

    def test_reproducing_property(self, half_sum):
        f = Poly([1, 2, -0.5j])
        lam = 0.3 + 0.2j
        k = kernel_kb(half_sum, lam)
        assert hb_inner(f, k, half_sum) == pytest.approx(complex(evaluate(f, lam)), abs=1e-8)

    def test_kernel_norm(self, half_sum):
        lam = 0.4
        k = kernel_kb(half_sum, lam)
        bl = evaluate(HALF_SUM, lam)
        expected = (1 - abs(bl) ** 2) / (1 - lam ** 2)
        assert hb_norm(k, half_sum) ** 2 == pytest.approx(expected, rel=1e-8)

    def test_boundary_reproducing_property(self, half_sum):
        k = kernel_kb(half_sum, 1.0)
        assert hb_inner(Poly([1, 1]), k, half_sum) == pytest.approx(2, abs=1e-10)

    def test_kernel_bk(self, half_sum):
        k = kernel_bk(half_sum, 0.5)
        z = 0.2j
        assert evaluate(k, z) == pytest.approx(evaluate(HALF_SUM, z) / (1 - 0.5 * z))


class TestE0:
    def test_rational_nodes(self):
        spec = mate(HALF_ONE_MINUS_SQ)
        assert e0_contains(spec, 1j)
        assert not e0_contains(spec, 1.0)
        assert len(e0_points(spec)) == 2

    def test_half_sum_away_from_node(self, half_sum):
        assert not e0_contains(half_sum, -1.0)

    def test_factored_symbol(self):
        spec = BSpec.factored(HALF_SUM, atoms=[(1.0, 1.0)])
        at_atom = e0_contains(spec, 1.0)
        assert not at_atom.member
        assert at_atom.divergent['atomic']
        opposite = e0_contains(spec, -1.0)
        assert not opposite.member
        assert opposite.divergent['log']

    def test_half_inner(self):
        spec = BSpec.half_inner(SingularInner([1.0], [1.0]))
        assert e0_contains(spec, zeta(1))
        assert not e0_contains(spec, 1.0)

    def test_rejects_interior_points(self, half_sum):
        with pytest.raises(ValidationError):
            e0_contains(half_sum, 0.5)


def test_half_inner_requires_inner():
    with pytest.raises(ValidationError):
        BSpec.half_inner(Poly([1, 1]))


def test_half_inner_symbols_for_finite_blaschke():
    beta, alpha = BSpec.half_inner(Poly([0, 1])).symbols()
    np.testing.assert_allclose(beta.coeffs, [0.5, 0.5])
    np.testing.assert_allclose(alpha.coeffs, [0.5, -0.5])


def test_corona_margin(half_sum):
    assert hcr_margin(half_sum) == pytest.approx(1, abs=1e-6)
