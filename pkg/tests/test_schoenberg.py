import math

import numpy as np
import pytest
from scipy.special import eval_legendre

from spherefield import models as md
from spherefield import schoenberg as sb
from conftest import validate_schema


def random_spd(rng, p, jitter=0.05):
    a = rng.standard_normal((p, p))
    return a @ a.T + jitter * np.eye(p)


class TestOperatorConstruction:
    def test_scalar_rejects_negative(self):
        with pytest.raises(ValueError):
            sb.SchoenbergOperator.scalar(-0.1)

    def test_matrix_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            sb.SchoenbergOperator.matrix([[1.0, 0.2], [0.3, 1.0]])

    def test_matrix_rejects_indefinite(self):
        with pytest.raises(ValueError, match="PSD"):
            sb.SchoenbergOperator.matrix([[1.0, 2.0], [2.0, 1.0]])

    def test_fourier_rejects_negative_entries(self):
        with pytest.raises(ValueError):
            sb.SchoenbergOperator.fourier_diagonal([1.0, -0.5])

    def test_fourier_trace_uses_multiplicities(self):
        op = sb.SchoenbergOperator.fourier_diagonal([1.0, 0.5, 0.25])
        assert op.trace() == pytest.approx(1.0 + 2 * 0.5 + 2 * 0.25)

    def test_quadratic_form_multiplicities(self):
        op = sb.SchoenbergOperator.fourier_diagonal([2.0, 3.0])
        # <b u, u> = gamma_0 u_0^2 + 2 gamma_1 u_1^2
        assert op.quadratic_form([1.0, 1.0]) == pytest.approx(8.0)


class TestInverseSquareRoot:
    def test_identity(self):
        op = sb.SchoenbergOperator.matrix(np.eye(3))
        out = sb.operator_inv_sqrt(op)
        assert np.allclose(out.data, np.eye(3))

    def test_diagonal(self):
        op = sb.SchoenbergOperator.matrix(np.diag([4.0, 9.0]))
        out = sb.operator_inv_sqrt(op)
        assert np.allclose(out.data, np.diag([0.5, 1.0 / 3.0]), rtol=1e-14)

    def test_reconstruction_random_spd(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            p = int(rng.integers(1, 9))
            b = random_spd(rng, p)
            op = sb.SchoenbergOperator.matrix(b)
            s = sb.operator_inv_sqrt(op)
            recon = s.data @ b @ s.data
            assert np.max(np.abs(recon - np.eye(p))) < 1e-10

    def test_fourier_entrywise(self):
        op = sb.SchoenbergOperator.fourier_diagonal([4.0, 0.25])
        out = sb.operator_inv_sqrt(op)
        assert np.allclose(out.data, [0.5, 2.0])

    def test_near_singular_rejected_with_diagnostics(self):
        op = sb.SchoenbergOperator.matrix(np.diag([1.0, 1e-14]))
        with pytest.raises(ValueError, match="trace/min ratio"):
            sb.operator_inv_sqrt(op)

    def test_zero_scalar_rejected(self):
        with pytest.raises(ValueError, match="strictly positive"):
            sb.operator_inv_sqrt(sb.SchoenbergOperator.scalar(0.0))


class TestPsdSquareRoot:
    def test_zero_modes_allowed(self):
        op = sb.SchoenbergOperator.matrix(np.diag([1.0, 0.0]))
        s = sb.operator_sqrt(op)
        assert np.allclose(s.data @ s.data, op.data)

    def test_matches_square(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            b = random_spd(rng, 4)
            s = sb.operator_sqrt(sb.SchoenbergOperator.matrix(b))
            assert np.max(np.abs(s.data @ s.data - b)) < 1e-11


class TestHsDistance:
    def test_identity_is_zero(self):
        assert sb.hs_distance_to_identity(sb.SchoenbergOperator.matrix(np.eye(4))) == 0.0

    def test_single_perturbed_eigenvalue(self):
        eps = 1e-3
        op = sb.SchoenbergOperator.matrix(np.diag([1.0 + eps, 1.0]))
        assert sb.hs_distance_to_identity(op) == pytest.approx(eps ** 2, rel=1e-12)

    def test_frobenius_by_hand(self):
        op = sb.SchoenbergOperator.matrix([[1.0, 0.1], [0.1, 1.0]])
        assert sb.hs_distance_to_identity(op) == pytest.approx(0.02, rel=1e-12)

    def test_fourier_multiplicity_weighting(self):
        op = sb.SchoenbergOperator.fourier_diagonal([1.0, 1.5])
        assert sb.hs_distance_to_identity(op) == pytest.approx(2 * 0.25)


class TestSequence:
    def test_heterogeneous_rejected(self):
        with pytest.raises(ValueError, match="heterogeneous"):
            sb.SchoenbergSequence(d=2, coeffs=(
                sb.SchoenbergOperator.scalar(1.0),
                sb.SchoenbergOperator.matrix(np.eye(2))))

    def test_truncate(self):
        seq = sb.SchoenbergSequence(
            d=2, coeffs=tuple(sb.SchoenbergOperator.scalar(v) for v in (1, .5, .25)))
        short = sb.truncate_sequence(seq, 1)
        assert short.l_max == 1 and short.coeffs == seq.coeffs[:2]
        with pytest.raises(ValueError):
            sb.truncate_sequence(seq, 5)


class TestKernelEval:
    def test_scalar_sum_at_one(self):
        seq = sb.SchoenbergSequence(
            d=2, coeffs=tuple(sb.SchoenbergOperator.scalar(v) for v in (1, .5, .25)))
        k = sb.IsotropicKernel(seq)
        # P_l(1) = 1: 1 + 0.5 + 0.25
        assert float(k(1.0).value.data) == pytest.approx(1.75, rel=1e-14)

    def test_out_of_range_rejected(self):
        seq = sb.SchoenbergSequence(d=2, coeffs=(sb.SchoenbergOperator.scalar(1.0),))
        with pytest.raises(ValueError):
            sb.IsotropicKernel(seq)(1.01)

    def test_matrix_value_symmetric(self):
        p = md.MultiquadraticParams(d=2, sigma=(1.0, 2.0), rho12=0.3,
                                    alpha=(0.4, 0.6, 0.45))
        seq = md.build_sequence(p, 64)
        k = sb.IsotropicKernel(seq)
        for t in (-1.0, -0.3, 0.2, 0.9):
            v = k(t).value.data
            assert np.array_equal(v, v.T)

    def test_variance_at_zero_angle_mq_d3(self):
        p = md.MultiquadraticParams(d=3, sigma=(1.0, 1.2), rho12=0.4,
                                    alpha=(0.5, 0.5, 0.45))
        seq = md.build_sequence(p, 200)
        v = sb.IsotropicKernel(seq)(1.0).value.data
        s1, s2 = p.sigma
        expect = np.array([[s1 * s1, p.rho12 * s1 * s2],
                           [p.rho12 * s1 * s2, s2 * s2]])
        assert np.max(np.abs(v - expect)) < 1e-10

    def test_scalar_kernel_against_legendre_oracle(self):
        rng = np.random.default_rng(4)
        bl = rng.uniform(0.1, 1.0, 8)
        seq = sb.SchoenbergSequence(
            d=2, coeffs=tuple(sb.SchoenbergOperator.scalar(v) for v in bl))
        k = sb.IsotropicKernel(seq)
        for t in np.linspace(-1, 1, 9):
            expect = sum(b * eval_legendre(l, t) for l, b in enumerate(bl))
            assert float(k(t).value.data) == pytest.approx(expect, abs=1e-12)

    def test_trace_at_one_matches_weighted_sum(self):
        p = md.MultiquadraticParams(d=3, sigma=(1.0, 1.0), rho12=0.5,
                                    alpha=(0.3, 0.4, 0.3))
        seq = md.build_sequence(p, 50)
        k = sb.IsotropicKernel(seq)
        expect = float(np.sum(seq.trace_terms()))
        assert np.trace(k(1.0).value.data) == pytest.approx(expect, rel=1e-13)

    def test_psd_at_one_and_joint_two_point(self):
        # R(1) is PSD up to the tail; the joint two-point covariance
        # [[R(1), R(t)], [R(t)^T, R(1)]] is PSD up to twice the tail.
        p = md.MultiquadraticParams(d=2, sigma=(1.0, 1.0), rho12=0.42,
                                    alpha=(0.9, 0.1, 0.3))
        seq = md.build_sequence(p, 200)
        k = sb.IsotropicKernel(seq)
        tail = k.tail_bound
        r1 = k(1.0).value.data
        assert np.linalg.eigvalsh(r1)[0] >= -(tail + 1e-10)
        for t in np.linspace(-1, 1, 21):
            rt = k(t).value.data
            joint = np.block([[r1, rt], [rt.T, r1]])
            assert np.linalg.eigvalsh(joint)[0] >= -(2 * tail + 1e-10)

    def test_tail_heuristic_flagged(self):
        seq = sb.SchoenbergSequence(
            d=2, coeffs=tuple(sb.SchoenbergOperator.scalar(v) for v in (1, .5, .25)))
        kv = sb.IsotropicKernel(seq)(0.5)
        assert kv.tail_is_heuristic
        assert kv.tail_bound == pytest.approx(0.25)


class TestTailBounds:
    def test_geometric_tail_dominates_brute_force(self):
        # oracle: direct summation of c * binom(n+d-2, n) * a^n far past L
        for d in (2, 3, 5):
            tail = sb.GeometricTail(coefficients=(0.7, 1.3), ratios=(0.6, 0.4), d=d)
            for L in (10, 50, 200):
                brute = 0.0
                for c, a in ((0.7, 0.6), (1.3, 0.4)):
                    n = np.arange(L + 1, L + 4000)
                    lb = (np.vectorize(math.lgamma)(n + d - 1.0)
                          - np.vectorize(math.lgamma)(n + 1.0) - math.lgamma(d - 1.0))
                    brute += np.sum(c * np.exp(lb + n * math.log(a)))
                bound = tail.trace_tail_bound(L)
                # at d = 2 the bound is the exact geometric tail, so allow
                # summation rounding on the brute-force side
                assert brute <= bound * (1.0 + 1e-12) + 1e-300
                assert bound <= brute * 50 + 1e-300

    def test_power_law_tail_dominates_brute_force(self):
        for sigma, alpha, nu in ((1.0, 1.0, 1.0), (2.0, 0.5, 0.75)):
            p = md.LegendreMaternParams(sigma, alpha, nu, 2, 2)
            tail = sb.PowerLawTail(sigma, alpha, nu)
            for L in (5, 50, 200):
                grid = md.legendre_matern_gamma_grid(p, l_max=L + 3000, k_max=4000)
                mult = np.full(4001, 2.0)
                mult[0] = 1.0
                brute = float(np.sum(grid[L + 1:] @ mult))
                assert brute <= tail.trace_tail_bound(L)

    def test_serialization_roundtrip(self):
        for tail in (sb.GeometricTail((1.0,), (0.5,), 3),
                     sb.PowerLawTail(1.0, 2.0, 0.8)):
            assert sb.tail_from_dict(tail.to_dict()) == tail


class TestValidateSequence:
    def test_multiquadratic_valid_passes(self):
        p = md.MultiquadraticParams(d=2, sigma=(1.0, 1.0), rho12=0.5,
                                    alpha=(0.5, 0.5, 0.5))
        report = sb.validate_sequence(md.build_sequence(p, 100))
        assert report.passed and report.psd_valid and report.strictly_positive
        assert not report.flags

    def test_zero_coefficient_flagged(self):
        coeffs = (sb.SchoenbergOperator.matrix(np.eye(2)),
                  sb.SchoenbergOperator.matrix(np.zeros((2, 2))))
        report = sb.validate_sequence(sb.SchoenbergSequence(d=2, coeffs=coeffs))
        assert not report.passed
        assert report.psd_valid
        assert "not strictly positive" in report.flags

    def test_legendre_matern_tail_small(self):
        p = md.LegendreMaternParams(1.0, 1.0, 1.0, 200, 200)
        report = sb.validate_sequence(md.build_sequence(p))
        total = report.weighted_partial_sums[-1]
        assert report.tail_estimate is not None and not report.tail_is_heuristic
        assert report.tail_estimate < 1e-3 * total

    def test_report_serializes_against_schema(self):
        p = md.LegendreMaternParams(1.0, 1.0, 1.0, 20, 20)
        report = sb.validate_sequence(md.build_sequence(p))
        validate_schema("validity_report.schema.json", report.to_dict())


class TestSequenceSerialization:
    @pytest.mark.parametrize("make", [
        lambda: sb.SchoenbergSequence(
            d=2, coeffs=tuple(sb.SchoenbergOperator.scalar(v) for v in (1, .5))),
        lambda: md.build_sequence(
            md.MultiquadraticParams(d=3, sigma=(1, 1.2), rho12=.4,
                                    alpha=(.5, .5, .45)), 10),
        lambda: md.build_sequence(md.LegendreMaternParams(1.0, 1.0, 1.0, 8, 8)),
    ])
    def test_roundtrip(self, make, tmp_path):
        seq = make()
        obj = sb.sequence_to_dict(seq)
        validate_schema("sequence.schema.json", obj)
        back = sb.sequence_from_dict(obj)
        assert back.d == seq.d and back.variant == seq.variant
        assert np.allclose(back.coeff_stack(), seq.coeff_stack())
        assert back.tail == seq.tail
        path = tmp_path / "seq.json"
        sb.save_sequence(seq, path)
        assert np.allclose(sb.load_sequence(path).coeff_stack(), seq.coeff_stack())
