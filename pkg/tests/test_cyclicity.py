import numpy as np
import pytest
from scipy.linalg import lstsq

import cyclicity
from config import update_settings
from errors import NodeZero, NotAZero, ValidationError
from funcspace import H2Kernel, HbKernel, Poly, Product, Scale, SingularInner, Sum
from dbr_rational import BSpec, mate
from dbr_clark import clark_atoms
from cyclicity import (
    Verdict,
    certify_clark,
    certify_direct,
    certify_rational,
    hermite_r,
    is_cyclic_by_inverse,
    is_cyclic_hol_closure,
    is_cyclic_rational,
    necessary_conditions,
    noncyclicity_witness,
    polynomial_cyclic,
    thm5_conditions,
    verdict,
)

HALF_SUM = Poly([0.5, 0.5])
HALF_ONE_MINUS_SQ = Poly([0.5, 0, -0.5])
DEGREES = list(range(0, 65))


@pytest.fixture
def half_sum():
    return mate(HALF_SUM)


class TestVerdict:
    def test_too_few_degrees(self):
        assert verdict([0, 1, 2], [1, 0.5, 0.25])[0] is Verdict.INCONCLUSIVE

    def test_below_floor(self):
        assert verdict([0, 1, 2, 3], [1, 1e-3, 1e-8, 1e-12])[0] is Verdict.CONVERGING

    def test_stalled(self):
        v, beta, floor = verdict(DEGREES, [1.0] * len(DEGREES))
        assert v is Verdict.STALLED
        assert floor == pytest.approx(1.0)

    def test_power_law(self):
        residuals = [1 / np.sqrt(n + 2) for n in DEGREES]
        v, beta, _ = verdict(DEGREES, residuals)
        assert v is Verdict.CONVERGING
        assert beta == pytest.approx(0.5, abs=0.05)

    def test_slow_decay_is_inconclusive(self):
        residuals = [(n + 1) ** -0.1 for n in DEGREES]
        assert verdict(DEGREES, residuals)[0] is Verdict.INCONCLUSIVE

    def test_slow_monotone_decay_converges_without_rate(self):
        degrees = list(range(0, 129, 16))
        residuals = [(n + 1) ** -0.2 for n in degrees]
        assert verdict(degrees, residuals)[0] is Verdict.INCONCLUSIVE
        assert verdict(degrees, residuals, rate_required=False)[0] is Verdict.CONVERGING

    def test_rate_free_rule_needs_halving(self):
        degrees = list(range(0, 129, 16))
        residuals = [(n + 1) ** -0.1 for n in degrees]
        assert verdict(degrees, residuals, rate_required=False)[0] is Verdict.INCONCLUSIVE


class TestRationalCertificates:
    def test_one_plus_z(self, half_sum):
        cert = certify_rational(Poly([1, 1]), half_sum, DEGREES)
        expected = [1 / (2 * np.sqrt(n + 2)) for n in DEGREES]
        np.testing.assert_allclose(cert.residuals, expected, atol=1e-8)
        assert cert.verdict is Verdict.CONVERGING
        assert cert.kind == 'rational' and cert.norm == 'equivalent'

    def test_constant_is_exact(self, half_sum):
        cert = certify_rational(Poly([1]), half_sum, [0, 1, 2, 3])
        assert max(cert.residuals) < 1e-10
        assert cert.verdict is Verdict.CONVERGING

    def test_identity_stalls(self):
        cert = certify_rational(Poly([0, 1]), mate(HALF_ONE_MINUS_SQ), list(range(0, 17)))
        np.testing.assert_allclose(cert.residuals, 1, atol=1e-8)
        assert cert.verdict is Verdict.STALLED

    def test_zero_at_node_uses_direct_route(self, half_sum):
        cert = certify_rational(Poly([-1, 1]), half_sum, list(range(0, 9)))
        assert cert.kind == 'direct'
        np.testing.assert_allclose(cert.residuals, np.sqrt(2), rtol=1e-6)
        assert cert.verdict is Verdict.STALLED

    def test_rows(self, half_sum):
        cert = certify_rational(Poly([1, 1]), half_sum, [0, 4, 8, 16])
        rows = cert.to_dict()['rows']
        assert [r['degree'] for r in rows] == [0, 4, 8, 16]
        assert all(r['wall_ms'] == 0.0 for r in rows)

    def test_needs_rational_symbol(self):
        with pytest.raises(ValidationError):
            certify_rational(Poly([1]), BSpec.half_inner(Poly([0, 1])), [0, 1, 2, 3])


class TestDirectCertificate:
    def test_residuals_nonincreasing(self, half_sum):
        cert = certify_direct(Poly([1, 1]), half_sum, list(range(0, 33, 4)))
        assert all(b <= a for a, b in zip(cert.residuals, cert.residuals[1:]))
        assert cert.residuals[-1] < cert.residuals[0]
        assert cert.norm == 'canonical'

    def test_rejects_unordered_degrees(self, half_sum):
        with pytest.raises(ValidationError):
            certify_direct(Poly([1]), half_sum, [4, 2])

    def test_rising_residual_is_kept_and_flagged(self, half_sum, monkeypatch):
        calls = []

        def dropped_third_solve(a, b):
            calls.append(a.shape[1])
            x, *rest = lstsq(a, b)
            return (np.zeros_like(x) if len(calls) == 3 else x, *rest)

        monkeypatch.setattr(cyclicity, "lstsq", dropped_third_solve)
        cert = certify_direct(Poly([1, 1]), half_sum, [0, 1, 2, 3])
        assert cert.ill_conditioned == [2]
        assert cert.residuals[2] > cert.residuals[1]
        assert cert.residuals[3] < cert.residuals[2]
        assert cert.to_dict()['ill_conditioned'] == [2]


class TestConditions:
    def test_necessary_conditions(self, half_sum):
        report = necessary_conditions(Poly([1, 1]), half_sum)
        assert report.passes
        assert report.min_abs == pytest.approx(2)
        failing = necessary_conditions(Poly([-1, 1]), half_sum)
        assert not failing.nonvanishing
        assert not failing.passes

    def test_rational_characterization(self, half_sum):
        assert is_cyclic_rational(Poly([1, 1]), half_sum)
        assert not is_cyclic_rational(Poly([-1, 1]), half_sum)
        assert not is_cyclic_rational(Poly([0, 1]), half_sum)

    def test_hol_closure(self):
        factored = BSpec.factored(HALF_SUM, atoms=[(1.0, 1.0)])
        assert is_cyclic_hol_closure(Poly([-1, 1]), factored)
        assert not is_cyclic_hol_closure(Poly([-1j, 1]), mate(HALF_ONE_MINUS_SQ))
        assert is_cyclic_hol_closure(H2Kernel(0.5), mate(HALF_ONE_MINUS_SQ))

    def test_inverse_route(self, half_sum):
        assert is_cyclic_by_inverse(Poly([2, 1]), half_sum)
        assert is_cyclic_by_inverse(Poly([-1, 1]), half_sum) is None

    def test_polynomials(self, half_sum):
        assert polynomial_cyclic(Poly([1, 1]), half_sum)
        assert not polynomial_cyclic(Poly([-1, 1]), half_sum)
        assert not polynomial_cyclic(Poly([-0.5, 1]), half_sum)


class TestHermiteR:
    def test_single_node(self):
        np.testing.assert_allclose(hermite_r([(1, 1)], Poly([2])).coeffs, [0.5])

    def test_two_nodes(self):
        r = hermite_r([(1j, 1), (-1j, 1)], Poly([0, 1]))
        np.testing.assert_allclose(r.coeffs, [0, -1], atol=1e-12)

    def test_double_node(self):
        r = hermite_r([(1, 2)], Poly([2, 1]))
        np.testing.assert_allclose(r.coeffs, [4 / 9, -1 / 9], atol=1e-12)

    def test_zero_at_node(self):
        with pytest.raises(NodeZero):
            hermite_r([(1, 1)], Poly([-1, 1]))


class TestWitness:
    def test_bound_at_node(self, half_sum):
        assert noncyclicity_witness(Poly([-1, 1]), half_sum, 1.0) == pytest.approx(np.sqrt(2))

    def test_needs_a_zero(self, half_sum):
        with pytest.raises(NotAZero):
            noncyclicity_witness(Poly([1, 1]), half_sum, 1.0)

    def test_two_node_symbol(self):
        assert noncyclicity_witness(Poly([-1j, 1]), mate(HALF_ONE_MINUS_SQ), 1j) > 0


class TestClarkCertificates:
    @pytest.fixture(autouse=True)
    def small_grid(self):
        update_settings(clark_grid=4096)

    def test_identity_inner(self):
        data = clark_atoms(Poly([0, 1]), 1.0)
        cert = certify_clark(Poly([1, 1]), data, list(range(0, 33)))
        expected = [1 / np.sqrt(n + 2) for n in range(0, 33)]
        np.testing.assert_allclose(cert.residuals, expected, atol=1e-6)
        assert cert.norm == 'exact'

    def test_constant_is_exact(self):
        cert = certify_clark(Poly([1]), clark_atoms(Poly([0, 1]), 1.0), [0, 1, 2, 3])
        assert max(cert.residuals) < 1e-10

    def test_sufficient_conditions(self):
        report = thm5_conditions(Poly([1, 1]), clark_atoms(Poly([0, 1]), 1.0))
        assert report.passes
        assert report.condition_c_sum == pytest.approx(0.25)

    def test_vanishing_at_atoms_fails(self):
        S = SingularInner([1.0], [1.0])
        report = thm5_conditions(1 - S, clark_atoms(S, 1.0))
        assert not report.passes
        assert "f vanishes at a Clark atom" in report.notes

    def test_half_singular_kernel_conditions(self):
        S = SingularInner([1.0], [1.0])
        report = thm5_conditions(HbKernel((1 + S) * 0.5, 0), clark_atoms(S, 1.0))
        assert report.multiplier
        assert report.passes

    def test_half_singular_kernel_certificate(self):
        S = SingularInner([1.0], [1.0])
        cert = certify_clark(HbKernel((1 + S) * 0.5, 0), clark_atoms(S, 1.0), list(range(0, 129, 16)))
        assert all(b < a for a, b in zip(cert.residuals, cert.residuals[1:]))
        assert cert.residuals[-1] < 0.5 * cert.residuals[0]
        assert cert.verdict is Verdict.CONVERGING
        assert cert.tail_estimate < 1e-6

    def test_one_plus_inner_times_model_kernel(self):
        S = SingularInner([1.0], [1.0])
        k = Sum([Poly([1.0]), Scale(S, -np.exp(-1))])
        report = thm5_conditions(Product([Sum([Poly([1.0]), S]), k]), clark_atoms(S, 1.0))
        assert report.passes
        assert report.min_abs == pytest.approx(2 * (1 - np.exp(-1)))

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("coeffs", [[2, 1], [1, 1]])
    def test_clark_route_agrees_with_rational_route(self, k, coeffs):
        f = Poly(coeffs)
        inner = Poly([0] * k + [1])
        rational = is_cyclic_rational(f, mate((1 + inner) * 0.5))
        data = clark_atoms(inner, 1.0)
        clark = thm5_conditions(f, data).passes
        if clark:
            clark = certify_clark(f, data, list(range(0, 33, 4))).verdict is Verdict.CONVERGING
        assert clark == rational

def test_zero_outside_e0_keeps_improving():
    spec = BSpec.factored(HALF_SUM, atoms=[(1.0, 1.0)])
    cert = certify_direct(Poly([-1, 1]), spec, [0, 8, 16, 32])
    assert all(b <= a for a, b in zip(cert.residuals, cert.residuals[1:]))
    assert cert.residuals[-1] < cert.residuals[0] < np.sqrt(2)
    assert cert.verdict is Verdict.CONVERGING
