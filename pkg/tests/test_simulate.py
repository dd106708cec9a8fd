import math

import numpy as np
import pytest
from scipy import stats

from spherefield import harmonics as sh
from spherefield import models as md
from spherefield import schoenberg as sb
from spherefield import simulate as sim
from conftest import validate_schema


def mq_sequence(l_max=20, d=2, sigma=(1.0, 1.0), rho12=0.4, alpha=(0.5, 0.5, 0.3)):
    p = md.MultiquadraticParams(d=d, sigma=sigma, rho12=rho12, alpha=alpha)
    return md.build_sequence(p, l_max)


def theta_pairs(thetas):
    return np.array([[[0.0, 0.0, 1.0],
                      [math.sin(t), 0.0, math.cos(t)]] for t in thetas])


class TestRng:
    def test_same_key_bit_identical(self):
        a = sim.make_generator(123, 5).standard_normal(100)
        b = sim.make_generator(123, 5).standard_normal(100)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = sim.make_generator(123, 5).standard_normal(100)
        b = sim.make_generator(123, 6).standard_normal(100)
        assert not np.allclose(a, b)


class TestSampleGrid:
    def test_grid_builders(self):
        g1 = sim.SampleGrid.equispaced_circle(7)
        assert g1.d == 1 and g1.n_points == 7
        g2 = sim.SampleGrid.equiangular(4, 8)
        assert g2.d == 2 and g2.n_points == 32
        g3 = sim.SampleGrid.uniform_random(2, 11, seed=3)
        assert g3.n_points == 11
        assert np.allclose(np.linalg.norm(g3.points, axis=1), 1.0, atol=1e-12)

    def test_uniform_reproducible(self):
        a = sim.SampleGrid.uniform_random(1, 5, seed=9)
        b = sim.SampleGrid.uniform_random(1, 5, seed=9)
        assert np.array_equal(a.points, b.points)

    def test_unsupported_dimension_message(self):
        with pytest.raises(ValueError, match="restricted to d in \\{1, 2\\}"):
            sim.SampleGrid.from_points(3, np.eye(4))

    def test_from_spec(self):
        g = sim.SampleGrid.from_spec({"kind": "equispaced", "n": 4})
        assert g.d == 1
        g2 = sim.SampleGrid.from_spec(
            {"kind": "points", "d": 2, "points": [[0, 0, 1], [1, 0, 0]]})
        assert g2.n_points == 2
        with pytest.raises(ValueError, match="unknown grid kind"):
            sim.SampleGrid.from_spec({"kind": "fibonacci", "n": 5})


class TestSampleCoefficients:
    def test_zero_coefficient_gives_zero_draws(self):
        coeffs = (sb.SchoenbergOperator.scalar(1.0), sb.SchoenbergOperator.scalar(0.0))
        seq = sb.SchoenbergSequence(d=2, coeffs=coeffs)
        a = sim.sample_coefficients(seq, 1, sim.make_generator(0))
        assert a.shape == (3, 1) and np.all(a == 0.0)

    def test_scalar_bridge_variance(self):
        # b_l = 1, d = 2: coefficient variance is 4 pi / (2l + 1)
        l = 3
        seq = sb.SchoenbergSequence(
            d=2, coeffs=tuple(sb.SchoenbergOperator.scalar(1.0) for _ in range(l + 1)))
        rng = sim.make_generator(2024)
        n_draws = 100_000
        h = sh.h_dim(2, l)
        draws = np.empty((n_draws, h))
        for i in range(n_draws):
            draws[i] = sim.sample_coefficients(seq, l, rng)[:, 0]
        target = 4 * math.pi / (2 * l + 1)
        emp = draws.var(axis=0, ddof=1)
        # variance of a sample variance: 2 sigma^4 / (n - 1)
        se = target * math.sqrt(2.0 / (n_draws - 1))
        assert np.all(np.abs(emp - target) < 3 * se)

    def test_matrix_coefficient_law(self):
        # E[a a^T] = bhat_l within 4 SE over 10^4 draws (p = 2)
        seq = mq_sequence(6)
        l = 2
        rng = sim.make_generator(77)
        n_draws = 10_000
        h = sh.h_dim(2, l)
        draws = np.empty((n_draws, h, 2))
        for i in range(n_draws):
            draws[i] = sim.sample_coefficients(seq, l, rng)
        flat = draws.reshape(n_draws * h, 2)
        emp = flat.T @ flat / flat.shape[0]
        prods = flat[:, :, None] * flat[:, None, :]
        se = prods.std(axis=0, ddof=1) / math.sqrt(flat.shape[0])
        bhat = sim.coefficient_covariance(seq, l)
        assert np.all(np.abs(emp - bhat) < 4 * se)

    def test_cross_degree_orthogonality(self):
        seq = mq_sequence(4)
        rng = sim.make_generator(5)
        n_draws = 4000
        a2 = np.empty((n_draws, 2))
        a3 = np.empty((n_draws, 2))
        for i in range(n_draws):
            a2[i] = sim.sample_coefficients(seq, 2, rng)[0]
            a3[i] = sim.sample_coefficients(seq, 3, rng)[0]
        prods = a2[:, :, None] * a3[:, None, :]
        z = prods.mean(axis=0) / (prods.std(axis=0, ddof=1) / math.sqrt(n_draws))
        assert np.max(np.abs(z)) < 4.0

    def test_fourier_two_normals_per_frequency(self):
        seq = md.build_sequence(md.LegendreMaternParams(1.0, 1.0, 1.0, 4, 3))
        a = sim.sample_coefficients(seq, 1, sim.make_generator(1))
        assert a.shape == (3, 2 * 3 + 1)


class TestSynthesizeField:
    def test_degree_zero_only_constant(self):
        coeffs = (sb.SchoenbergOperator.scalar(1.0),)
        seq = sb.SchoenbergSequence(d=2, coeffs=coeffs)
        grid = sim.SampleGrid.uniform_random(2, 9, seed=1)
        f = sim.synthesize_field(seq, grid, seed=3)
        assert np.allclose(f.values, f.values[0])

    def test_determinism_and_stream_separation(self):
        seq = mq_sequence(10)
        grid = sim.SampleGrid.uniform_random(2, 5, seed=0)
        f1 = sim.synthesize_field(seq, grid, seed=9, stream=2)
        f2 = sim.synthesize_field(seq, grid, seed=9, stream=2)
        f3 = sim.synthesize_field(seq, grid, seed=9, stream=3)
        assert np.array_equal(f1.values, f2.values)
        assert not np.allclose(f1.values, f3.values)

    def test_dimension_mismatch_rejected(self):
        seq = mq_sequence(5)
        grid = sim.SampleGrid.equispaced_circle(4)
        with pytest.raises(ValueError, match="does not match"):
            sim.synthesize_field(seq, grid)

    def test_variance_matches_kernel_trace(self):
        seq = mq_sequence(15)
        grid = sim.SampleGrid.uniform_random(2, 6, seed=8)
        vals = sim.synthesize_ensemble(seq, grid, 5000, seed=21)
        sq = (vals ** 2).sum(axis=2)            # ||Z(x)||^2 per field/point
        emp = sq.mean()
        se = sq.mean(axis=1).std(ddof=1) / math.sqrt(vals.shape[0])
        analytic = sb.IsotropicKernel(seq).trace_at_one()
        assert abs(emp - analytic) < 4 * se

    def test_ensemble_deterministic_and_batching_invariant(self):
        seq = md.build_sequence(md.LegendreMaternParams(1.0, 1.0, 1.0, 8, 4))
        grid = sim.SampleGrid.uniform_random(2, 4, seed=2)
        a = sim.synthesize_ensemble(seq, grid, 40, seed=5, stream=1)
        b = sim.synthesize_ensemble(seq, grid, 40, seed=5, stream=1)
        assert np.array_equal(a, b)
        old = sim._BATCH_ELEMS
        try:
            sim._BATCH_ELEMS = 500  # force many small batches
            c = sim.synthesize_ensemble(seq, grid, 40, seed=5, stream=1)
        finally:
            sim._BATCH_ELEMS = old
        assert np.array_equal(a, c)

    def test_truncation_monotonicity(self):
        # added degrees contribute nonnegative variance
        seq = mq_sequence(30)
        grid = sim.SampleGrid.uniform_random(2, 4, seed=4)
        v10 = sim.synthesize_ensemble(seq, grid, 4000, seed=6, l_max=10)
        v30 = sim.synthesize_ensemble(seq, grid, 4000, seed=6, l_max=30)
        m10 = (v10 ** 2).sum(axis=2).mean()
        m30 = (v30 ** 2).sum(axis=2).mean()
        analytic = sb.IsotropicKernel(seq).trace_at_one()
        sq30 = (v30 ** 2).sum(axis=2).mean(axis=1)
        se = sq30.std(ddof=1) / math.sqrt(4000)
        assert m10 <= m30 + 4 * se
        assert m30 <= analytic + 4 * se

    def test_circle_field_covariance(self):
        # d = 1: scalar sequence, empirical covariance against the
        # Chebyshev-basis kernel at a few angles
        values = (1.0, 0.6, 0.3, 0.1)
        seq = sb.SchoenbergSequence(
            d=1, coeffs=tuple(sb.SchoenbergOperator.scalar(v) for v in values))
        grid = sim.SampleGrid.equispaced_circle(8)
        vals = sim.synthesize_ensemble(seq, grid, 6000, seed=44)
        kernel = sb.IsotropicKernel(seq)
        for j in (0, 1, 3, 4):
            t = float(np.clip(grid.points[0] @ grid.points[j], -1, 1))
            prod = vals[:, 0, 0] * vals[:, j, 0]
            se = prod.std(ddof=1) / math.sqrt(prod.shape[0])
            assert abs(prod.mean() - float(kernel(t).value.data)) < 4 * se

    def test_gaussianity_of_projections(self):
        # <Z(x), u> must pass an Anderson-Darling normality check
        seq = mq_sequence(12)
        grid = sim.SampleGrid.from_points(2, [[0.0, 0.0, 1.0]])
        vals = sim.synthesize_ensemble(seq, grid, 5000, seed=31)
        u = np.array([0.7, -0.3])
        proj = vals[:, 0, :] @ u
        res = stats.anderson(proj, dist="norm")
        crit_1pct = res.critical_values[list(res.significance_level).index(1.0)]
        assert res.statistic < crit_1pct  # p-value > 0.01

    def test_isotropy_chi2_consistency(self):
        # pairs at equal geodesic angle estimate one covariance value
        seq = mq_sequence(12)
        theta = math.pi / 5
        ref = np.array([0.0, 0.0, 1.0])
        pts = [ref, [math.sin(theta), 0.0, math.cos(theta)]]
        # rotate the same configuration to three other positions
        rng = np.random.default_rng(3)
        for _ in range(3):
            q, _r = np.linalg.qr(rng.standard_normal((3, 3)))
            if np.linalg.det(q) < 0:
                q[:, 0] = -q[:, 0]
            pts.extend([q @ pts[0], q @ pts[1]])
        grid = sim.SampleGrid.from_points(2, np.array(pts))
        vals = sim.synthesize_ensemble(seq, grid, 6000, seed=17)
        ests, ses = [], []
        for g in range(4):
            prod = vals[:, 2 * g, 0] * vals[:, 2 * g + 1, 0]
            ests.append(prod.mean())
            ses.append(prod.std(ddof=1) / math.sqrt(prod.shape[0]))
        ests = np.array(ests)
        ses = np.array(ses)
        wmean = np.sum(ests / ses ** 2) / np.sum(1.0 / ses ** 2)
        chi2 = float(np.sum(((ests - wmean) / ses) ** 2))
        assert chi2 < stats.chi2.ppf(0.999, df=3)


class TestEmpiricalCovariance:
    def test_zero_samples_give_zero(self):
        seq = sb.SchoenbergSequence(d=2, coeffs=(sb.SchoenbergOperator.scalar(0.0),))
        grid = sim.SampleGrid.uniform_random(2, 3, seed=0)
        samples = [sim.synthesize_field(seq, grid, seed=0, stream=i) for i in range(4)]
        est, se = sim.empirical_covariance(samples, 0, 1)
        assert np.all(est == 0.0) and np.all(se == 0.0)

    def test_variance_identity_scalar(self):
        values = (1.0, 0.5, 0.25)
        seq = sb.SchoenbergSequence(
            d=2, coeffs=tuple(sb.SchoenbergOperator.scalar(v) for v in values))
        grid = sim.SampleGrid.uniform_random(2, 2, seed=5)
        vals = sim.synthesize_ensemble(seq, grid, 6000, seed=9)
        est, se = sim.empirical_covariance(vals, 0, 0)
        assert abs(est[0, 0] - 1.75) < 4 * se[0, 0]

    def test_mismatched_grids_rejected(self):
        seq = mq_sequence(4)
        g1 = sim.SampleGrid.uniform_random(2, 3, seed=1)
        g2 = sim.SampleGrid.uniform_random(2, 3, seed=2)
        s1 = sim.synthesize_field(seq, g1, seed=0)
        s2 = sim.synthesize_field(seq, g2, seed=0)
        with pytest.raises(ValueError, match="share one grid"):
            sim.empirical_covariance([s1, s2], 0, 0)

    def test_requires_two_samples(self):
        seq = mq_sequence(4)
        grid = sim.SampleGrid.uniform_random(2, 3, seed=1)
        with pytest.raises(ValueError, match="at least 2"):
            sim.empirical_covariance([sim.synthesize_field(seq, grid)], 0, 0)


class TestMonteCarloKernelCheck:
    def test_self_consistency_passes(self):
        seq = mq_sequence(15)
        report = sim.monte_carlo_kernel_check(
            seq, theta_pairs(np.linspace(0, math.pi, 6)), 3000, seed=11)
        assert report.passed and report.z_max < 4.0

    def test_inflated_scale_fails(self):
        seq = mq_sequence(15)
        wrong = mq_sequence(15, sigma=(1.2, 1.2))
        report = sim.monte_carlo_kernel_check(
            seq, theta_pairs(np.linspace(0, math.pi, 6)), 3000, seed=11,
            analytic_seq=wrong)
        assert not report.passed

    def test_zero_sequence_exact_pass(self):
        coeffs = tuple(sb.SchoenbergOperator.scalar(0.0) for _ in range(4))
        seq = sb.SchoenbergSequence(d=2, coeffs=coeffs)
        report = sim.monte_carlo_kernel_check(
            seq, theta_pairs([0.0, 1.0]), 500, seed=0)
        assert report.passed and report.z_max == 0.0

    def test_fourier_variant_folded_entries(self):
        seq = md.build_sequence(md.LegendreMaternParams(1.0, 1.0, 1.0, 10, 5))
        report = sim.monte_carlo_kernel_check(
            seq, theta_pairs([0.0, math.pi / 3]), 2000, seed=13)
        assert report.passed
        assert report.pairs[0].labels == [f"gamma[{k}]" for k in range(6)]

    def test_report_schema(self):
        seq = mq_sequence(8)
        report = sim.monte_carlo_kernel_check(
            seq, theta_pairs([0.0, 2.0]), 500, seed=2)
        validate_schema("check_report.schema.json", report.to_dict())

    def test_bad_pair_shape_rejected(self):
        seq = mq_sequence(8)
        with pytest.raises(ValueError, match="shape"):
            sim.monte_carlo_kernel_check(seq, np.zeros((3, 3)), 100)


class TestFunctionReconstruction:
    def test_matches_manual_basis_sum(self):
        v = np.array([1.0, 0.5, -0.25, 0.1, 0.0])
        taus = np.array([0.0, 0.3, 0.75])
        expect = (v[0]
                  + math.sqrt(2) * (v[1] * np.cos(2 * np.pi * taus)
                                    + v[2] * np.sin(2 * np.pi * taus))
                  + math.sqrt(2) * (v[3] * np.cos(4 * np.pi * taus)
                                    + v[4] * np.sin(4 * np.pi * taus)))
        assert np.allclose(sim.fourier_function_values(v, taus), expect, atol=1e-14)

    def test_pointwise_variance_is_trace(self):
        # stationarity on [0,1]: E f(tau)^2 equals the operator trace
        seq = md.build_sequence(md.LegendreMaternParams(1.0, 1.0, 1.0, 8, 6))
        grid = sim.SampleGrid.from_points(2, [[0.0, 0.0, 1.0]])
        vals = sim.synthesize_ensemble(seq, grid, 6000, seed=19)
        f = np.stack([sim.fourier_function_values(vals[i, 0], [0.2, 0.6])
                      for i in range(vals.shape[0])])
        analytic = sb.IsotropicKernel(seq).trace_at_one()
        emp = (f ** 2).mean(axis=0)
        se = (f ** 2).std(axis=0, ddof=1) / math.sqrt(f.shape[0])
        assert np.all(np.abs(emp - analytic) < 4 * se)


class TestExports:
    def test_csv_roundtrip(self, tmp_path):
        seq = mq_sequence(6)
        grid = sim.SampleGrid.uniform_random(2, 4, seed=3)
        sample = sim.synthesize_field(seq, grid, seed=1)
        path = tmp_path / "field.csv"
        sim.write_field_csv(sample, path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "x0,x1,x2,v0,v1"
        back = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
        assert np.array_equal(back[:, :3], grid.points)
        assert np.array_equal(back[:, 3:], sample.values)

    def test_json_export(self, tmp_path):
        import json
        seq = mq_sequence(6)
        grid = sim.SampleGrid.uniform_random(2, 3, seed=2)
        sample = sim.synthesize_field(seq, grid, seed=4)
        path = tmp_path / "field.json"
        sim.write_field_json(sample, path)
        obj = json.loads(path.read_text())
        assert obj["seed"] == 4 and obj["L_max"] == 6
        assert np.allclose(obj["values"], sample.values)
