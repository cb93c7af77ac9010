import math

import numpy as np
import pytest

from overparam.data import generate_separated
from overparam.linalg import PortableRng
from overparam.losses import builtin_loss
from overparam.network import init_network
from overparam.verify import (INIT_ITEMS, concavity_inequality_check,
                              mc_relu_kernel, relu_kernel_closed_form,
                              subset_mean_variance, verify_init_properties,
                              verify_perturbation_properties)

INV_2PI = 1.0 / (2.0 * np.pi)


class TestReluKernelClosedForm:
    def test_full_correlation_is_half_second_moment(self):
        assert relu_kernel_closed_form(1.0) == pytest.approx(0.5, abs=1e-15)

    def test_independence_factorizes(self):
        assert relu_kernel_closed_form(0.0) == pytest.approx(INV_2PI, rel=1e-15)

    def test_anticorrelation_vanishes(self):
        assert relu_kernel_closed_form(-1.0) == pytest.approx(0.0, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            relu_kernel_closed_form(1.5)

    def test_near_one_expansion_bounds(self):
        # closed(1 - theta^2/2) <= 1/2 - theta^2/4 + 0.2 theta^3 ...
        for theta in np.linspace(1e-3, 0.5, 200):
            rho = 1.0 - theta * theta / 2.0
            val = relu_kernel_closed_form(rho)
            assert val <= 0.5 - theta ** 2 / 4.0 + 0.2 * theta ** 3 + 1e-15
            # ... and >= rho / 2
            assert val >= rho / 2.0 - 1e-15

    def test_half_correlation_lower_bound_on_grid(self):
        grid = np.linspace(-1.0, 1.0, 1001)
        vals = relu_kernel_closed_form(grid)
        assert np.min(vals - grid / 2.0) >= -1e-12

    def test_specific_value_against_quadrature(self):
        # independent oracle: 2-d Gaussian quadrature over the positive quadrant
        rho = 0.99
        grid = np.linspace(0.0, 8.0, 1601)
        w = np.gradient(grid)
        z1 = grid[:, None]
        z2 = grid[None, :]
        det = 1.0 - rho * rho
        density = np.exp(-(z1 ** 2 - 2 * rho * z1 * z2 + z2 ** 2) / (2 * det)) \
            / (2 * np.pi * np.sqrt(det))
        quad = float(np.sum(z1 * z2 * density * w[:, None] * w[None, :]))
        assert relu_kernel_closed_form(rho) == pytest.approx(quad, rel=1e-4)


class TestMcReluKernel:
    def test_perfect_correlation(self):
        est, se = mc_relu_kernel(1.0, samples=100_000, seed=0)
        assert abs(est - 0.5) <= 3 * se

    def test_independent(self):
        est, se = mc_relu_kernel(0.0, samples=100_000, seed=1)
        assert abs(est - INV_2PI) <= 3 * se

    def test_negative_correlation(self):
        est, se = mc_relu_kernel(-0.5, samples=100_000, seed=2)
        assert abs(est - relu_kernel_closed_form(-0.5)) <= 4 * se

    def test_preconditions(self):
        with pytest.raises(ValueError):
            mc_relu_kernel(0.0, samples=10, seed=0)
        with pytest.raises(ValueError):
            mc_relu_kernel(2.0, samples=5000, seed=0)


class TestSubsetMeanVariance:
    def test_worked_case(self):
        enum, formula = subset_mean_variance(np.array([1.0, -1.0, 2.0, -2.0]), 2)
        assert enum == pytest.approx(5.0 / 6.0, abs=1e-15)
        assert formula == pytest.approx(5.0 / 6.0, abs=1e-15)
        assert abs(enum - formula) <= 1e-12

    def test_full_batch_is_zero(self):
        u = np.array([3.0, -1.0, -2.0, 1.5, -1.5])
        enum, formula = subset_mean_variance(u, 5)
        assert enum == pytest.approx(0.0, abs=1e-15)
        assert formula == 0.0

    def test_singleton_batch_gives_mean_square(self):
        u = np.array([2.0, -3.0, 1.0])
        enum, formula = subset_mean_variance(u, 1)
        expected = float(np.mean(u * u))
        assert enum == pytest.approx(expected, rel=1e-15)
        assert formula == pytest.approx(expected, rel=1e-15)

    def test_random_zero_sum_vectors(self):
        rng = PortableRng(42)
        for n in range(2, 9):
            for _ in range(5):
                u = rng.normals(n)
                u = u - u.mean()
                for batch in range(1, n + 1):
                    enum, formula = subset_mean_variance(u, batch)
                    assert abs(enum - formula) <= 1e-12

    def test_preconditions(self):
        with pytest.raises(ValueError):
            subset_mean_variance(np.array([1.0, 1.0]), 1)   # nonzero sum
        with pytest.raises(ValueError):
            subset_mean_variance(np.zeros(25), 2)           # n too large
        with pytest.raises(ValueError):
            subset_mean_variance(np.array([1.0, -1.0]), 3)  # batch too large


class TestConcavityInequality:
    def test_p_zero_is_equality(self):
        assert concavity_inequality_check(3.7, 1.2, 0.0)
        assert concavity_inequality_check(1.2, 3.7, 0.0)

    def test_worked_case(self):
        # a=4, b=1, p=1: lhs = 3, rhs = (1/4 - 1)/(-1) = 0.75
        assert concavity_inequality_check(4.0, 1.0, 1.0)

    def test_equal_arguments(self):
        for p in (0.0, 0.3, 0.9, 1.0):
            assert concavity_inequality_check(2.5, 2.5, p)

    def test_half_excluded(self):
        with pytest.raises(ValueError):
            concavity_inequality_check(1.0, 2.0, 0.5)

    def test_positive_arguments_required(self):
        with pytest.raises(ValueError):
            concavity_inequality_check(-1.0, 2.0, 0.3)

    def test_random_triples(self):
        rng = PortableRng(7)
        violations = 0
        for _ in range(10_000):
            a, b = np.exp(rng.normals(2) * 2.0)
            p = float(rng.uniforms(1)[0])
            if abs(p - 0.5) < 1e-6:
                p = 0.25
            if not concavity_inequality_check(float(a), float(b), p):
                violations += 1
        assert violations == 0


def small_battery_inputs(m=48, depth=3, n=8, d=6, seed=0):
    ds = generate_separated(n=n, d=d, mu=0.5, phi=0.08, seed=seed)
    params = init_network([d] + [m] * depth, seed=seed + 1)
    return params, ds


class TestInitBattery:
    def test_all_items_present_and_finite(self):
        params, ds = small_battery_inputs()
        report = verify_init_properties(params, ds, trials=3, seed=11,
                                        probes=8, gradient_probes=4)
        names = [e.name for e in report.entries]
        assert names == list(INIT_ITEMS)
        for entry in report.entries:
            assert len(entry.per_trial) == 3
            assert np.isfinite(entry.measured)

    def test_thresholded_items_pass_at_easy_scale(self):
        params, ds = small_battery_inputs(m=256, depth=2)
        report = verify_init_properties(
            params, ds, trials=4, seed=3, allowed_failures=0,
            items=("hidden_norm_deviation", "cross_class_separation",
                   "output_magnitude", "near_threshold_fraction",
                   "pairwise_inner_product"),
            thresholds={"hidden_norm_deviation": 0.5, "output_magnitude": 8.0})
        assert report.passed, report.as_dict()

    def test_beta_zero_counts_exact_zeros(self):
        params, ds = small_battery_inputs()
        report = verify_init_properties(params, ds, beta=0.0, trials=1,
                                        seed=0, items=("near_threshold_fraction",))
        assert report.entry("near_threshold_fraction").measured == 0.0

    def test_fitted_constants_stable_across_seeds(self):
        params, ds = small_battery_inputs(m=128, depth=2)
        items = ("chain_product_norm", "active_gradient_nodes")
        r1 = verify_init_properties(params, ds, trials=2, seed=100, probes=8,
                                    items=items)
        r2 = verify_init_properties(init_network(params.layer_dims, 999), ds,
                                    trials=2, seed=200, probes=8, items=items)
        for name in items:
            a = r1.entry(name).measured
            b = r2.entry(name).measured
            assert a > 0 and b > 0
            assert max(a, b) / min(a, b) <= 10.0

    def test_sparsity_out_of_range(self):
        params, ds = small_battery_inputs(m=16)
        with pytest.raises(ValueError):
            verify_init_properties(params, ds, sparsity_s=64, trials=1)

    def test_report_serializes(self):
        import json
        params, ds = small_battery_inputs()
        report = verify_init_properties(params, ds, trials=1, seed=5, probes=4,
                                        gradient_probes=2)
        blob = json.dumps(report.as_dict())
        assert "hidden_norm_deviation" in blob


class TestPerturbationBattery:
    def test_identical_params_all_drift_zero(self):
        params, ds = small_battery_inputs()
        report = verify_perturbation_properties(params, params, params, ds)
        assert report.meta["measured_tau"] == 0.0
        assert report.entry("hidden_drift_ratio").measured == 0.0
        assert report.entry("pattern_drift_ratio").measured == 0.0
        assert report.entry("pattern_flip_union").measured == 0.0

    def test_rank_one_perturbation_drift_bounds(self):
        params, ds = small_battery_inputs(m=64)
        tau = 0.05
        tilde = params.copy()
        u = np.zeros(tilde.weights[1].shape[0]); u[0] = 1.0
        v = np.zeros(tilde.weights[1].shape[1]); v[1] = 1.0
        tilde.weights[1] = tilde.weights[1] + tau * np.outer(u, v)
        report = verify_perturbation_properties(params, tilde, params, ds,
                                                declared_tau=0.1)
        assert report.meta["measured_tau"] == pytest.approx(tau, rel=1e-3)
        # hidden drift stays within a small multiple of L * sum ||dW||
        assert report.entry("hidden_drift_ratio").measured <= 5.0
        assert report.entry("perturbation_radius").passed()

    def test_exceeding_declared_tau_flags_not_throws(self):
        params, ds = small_battery_inputs()
        tilde = params.copy()
        tilde.weights[0] = tilde.weights[0] + 0.5 * np.eye(*tilde.weights[0].shape)
        report = verify_perturbation_properties(params, tilde, params, ds,
                                                declared_tau=1e-3)
        entry = report.entry("perturbation_radius")
        assert not entry.passed()
        assert "exceeds declared tau" in entry.note

    def test_gradient_ratio_positive_and_stable(self):
        ds = generate_separated(n=10, d=6, mu=0.5, phi=0.08, seed=4)
        loss = builtin_loss("logistic")
        ratios = []
        for seed in range(3):
            params = init_network([6, 96, 96], seed=seed)
            report = verify_perturbation_properties(params, params, params, ds,
                                                    loss=loss)
            r = report.entry("gradient_lower_ratio").measured
            assert r > 0
            ratios.append(r)
        assert max(ratios) / min(ratios) <= 100.0

    def test_gradient_upper_ratios_finite(self):
        params, ds = small_battery_inputs(m=64)
        report = verify_perturbation_properties(params, params, params, ds)
        assert np.isfinite(report.entry("gradient_upper_ratio").measured)
        assert np.isfinite(
            report.entry("stochastic_gradient_upper_ratio").measured)

    def test_shape_mismatch_rejected(self):
        params, ds = small_battery_inputs()
        other = init_network([6, 24, 24, 48], seed=9)
        with pytest.raises(ValueError):
            verify_perturbation_properties(params, other, params, ds)
