import math

import numpy as np
import pytest

from meanfield_ldp.errors import CapacityError, DomainError, TrajectoryDivergedError
from meanfield_ldp.ito_euler import (
    ControlPath,
    EulerGrid,
    GaussianPathLaw,
    ItoSpec,
    LinearCoefficients,
    TanhAttraction,
    as_staged_spec,
    discretized_wiener_law,
    frozen_law,
    mckean_vlasov_flow,
    minimal_control_energy,
    rate_entropy_form,
    simulate,
    simulate_controlled,
    wiener_shift_entropy,
)
from meanfield_ldp.measures import GaussianMeasure
from meanfield_ldp.noise_systems import mckean_vlasov_law


def brownian_spec():
    return ItoSpec(1, 1, [0.0], 1.0, LinearCoefficients([[0.0]], [[0.0]], [0.0], [[1.0]]))


def drifting_spec(rate=0.7):
    return ItoSpec(1, 1, [0.0], 1.0, LinearCoefficients([[0.0]], [[0.0]], [rate], [[0.0]]))


def mean_reverting_spec(kappa=1.5, start=1.0):
    # drift kappa * (mean - x): state matrix -kappa, mean matrix +kappa
    return ItoSpec(
        1, 1, [start], 1.0,
        LinearCoefficients([[-kappa]], [[kappa]], [0.0], [[1.0]]),
    )


GRID = EulerGrid.for_horizon(1.0, 8)


class TestGrid:
    def test_product_matches_horizon(self):
        assert EulerGrid.for_horizon(2.0, 16).horizon == pytest.approx(2.0, abs=1e-15)

    def test_mismatched_horizon_rejected(self):
        with pytest.raises(DomainError):
            as_staged_spec(brownian_spec(), EulerGrid.for_horizon(2.0, 8))

    def test_bad_grid_rejected(self):
        with pytest.raises(DomainError):
            EulerGrid(step=-0.1, steps=8)


class TestSimulate:
    def test_zero_drift_paths_are_scaled_noise_sums(self):
        run = simulate(brownian_spec(), GRID, 16, seed=0)
        sqrt_h = math.sqrt(GRID.step)
        for path, noise in zip(run.paths, run.staged.noise_paths):
            partial = 0.0
            for k in range(1, GRID.steps + 1):
                partial = partial + sqrt_h * noise[k][0]
                assert path[k, 0] == pytest.approx(partial, abs=1e-12)

    def test_deterministic_line_with_zero_dispersion(self):
        run = simulate(drifting_spec(0.7), GRID, 5, seed=1)
        times = GRID.times()
        for path in run.paths:
            assert np.allclose(path[:, 0], 0.7 * times, atol=1e-12)

    def test_mean_reverting_cross_mean_is_noise_average_map(self):
        # summing the update over particles cancels the interaction exactly
        spec = mean_reverting_spec()
        run = simulate(spec, GRID, 64, seed=2)
        sqrt_h = math.sqrt(GRID.step)
        mean = np.full(GRID.steps + 1, 0.0)
        mean[0] = 1.0
        noise = np.array([[y[k][0] for k in range(GRID.steps + 1)] for y in run.staged.noise_paths])
        for k in range(GRID.steps):
            mean[k + 1] = mean[k] + sqrt_h * float(np.mean(noise[:, k + 1]))
        assert np.allclose(run.paths[:, :, 0].mean(axis=0), mean, atol=1e-10)

    def test_exploding_drift_names_particle_and_stage(self):
        spec = ItoSpec(1, 1, [1.0], 1.0, LinearCoefficients([[1e8]], [[0.0]], [0.0], [[0.0]]))
        with pytest.raises(TrajectoryDivergedError) as err:
            simulate(spec, EulerGrid.for_horizon(1.0, 50), 3, seed=0)
        assert err.value.stage is not None
        assert err.value.particle is not None

    def test_empirical_fixed_point_through_staged_route(self):
        spec = mean_reverting_spec()
        run = simulate(spec, GRID, 50, seed=3)
        law = mckean_vlasov_law(run.empirical_noise, as_staged_spec(spec, GRID))
        assert law.equals_exact(run.empirical_paths)


class TestControlledSimulate:
    def test_zero_control_is_bit_identical(self):
        spec = mean_reverting_spec()
        base = simulate(spec, GRID, 24, seed=7)
        controlled = simulate_controlled(
            spec, GRID, [ControlPath.zero(GRID.steps, 1)] * 24, seed=7
        )
        assert np.array_equal(base.paths, controlled)

    def test_constant_control_with_silent_noise(self):
        spec = ItoSpec(1, 1, [0.0], 1.0, LinearCoefficients([[0.0]], [[0.0]], [0.0], [[1.0]]))
        silent = lambda rng: tuple((0.0,) for _ in range(GRID.steps + 1))  # noqa: E731
        paths = simulate_controlled(
            spec, GRID, [ControlPath.constant(GRID.steps, [2.0])] * 3, seed=0,
            noise_sampler=silent,
        )
        assert np.allclose(paths[:, :, 0], 2.0 * GRID.times(), atol=1e-12)

    def test_energy_of_zero_control(self):
        assert ControlPath.zero(8, 2).energy(GRID) == 0.0

    def test_control_shape_checked(self):
        with pytest.raises(DomainError):
            simulate_controlled(brownian_spec(), GRID, [ControlPath.zero(3, 1)], seed=0)


class TestMcKeanVlasovFlow:
    def test_brownian_covariance_is_min_kernel(self):
        flow = mckean_vlasov_flow(brownian_spec(), GRID)
        expected = GRID.step * np.minimum.outer(np.arange(1, 9), np.arange(1, 9))
        assert np.allclose(flow.law.gaussian.covariance, expected, atol=1e-15)
        assert flow.residual == 0.0

    def test_mean_reverting_flow_is_constant(self):
        flow = mckean_vlasov_flow(mean_reverting_spec(kappa=2.0, start=1.0), GRID)
        assert np.allclose(flow.flow_means, 1.0, atol=1e-14)

    def test_zero_dispersion_follows_euler_ode(self):
        spec = ItoSpec(1, 1, [2.0], 1.0, LinearCoefficients([[-1.0]], [[0.0]], [0.0], [[0.0]]))
        flow = mckean_vlasov_flow(spec, GRID)
        value = 2.0
        for k in range(GRID.steps):
            value = value * (1.0 - GRID.step)
            assert flow.flow_means[k + 1, 0] == pytest.approx(value, abs=1e-15)

    def test_nonlinear_spec_rejected_for_exact_flow(self):
        spec = ItoSpec(1, 1, [0.0], 1.0, TanhAttraction(1.0, [[1.0]]))
        with pytest.raises(CapacityError):
            mckean_vlasov_flow(spec, GRID)


class TestFrozenLaw:
    def test_fixed_point_property(self):
        spec = mean_reverting_spec()
        flow = mckean_vlasov_flow(spec, GRID)
        frozen = frozen_law(spec, GRID, flow.flow_means)
        assert np.allclose(frozen.gaussian.mean, flow.law.gaussian.mean, atol=1e-14)
        assert np.array_equal(frozen.gaussian.covariance, flow.law.gaussian.covariance)

    def test_only_the_mean_flow_matters(self):
        spec = mean_reverting_spec()
        flow = np.linspace(0.0, 1.0, GRID.steps + 1).reshape(-1, 1)
        assert np.allclose(
            frozen_law(spec, GRID, flow).gaussian.mean,
            frozen_law(spec, GRID, flow.copy()).gaussian.mean,
        )

    def test_zero_drift_frozen_law_ignores_argument(self):
        spec = brownian_spec()
        a = frozen_law(spec, GRID, np.zeros((GRID.steps, 1)))
        b = frozen_law(spec, GRID, np.ones((GRID.steps, 1)))
        assert np.array_equal(a.gaussian.mean, b.gaussian.mean)


class TestRateAndControl:
    def test_rate_zero_at_limit_law(self):
        spec = mean_reverting_spec()
        flow = mckean_vlasov_flow(spec, GRID)
        assert rate_entropy_form(flow.law, spec, GRID) <= 1e-12

    def test_shifted_wiener_rate_is_control_energy(self):
        spec = brownian_spec()
        flow = mckean_vlasov_flow(spec, GRID)
        for c in (0.5, 1.0):
            target = flow.law.with_means((c * GRID.times()[1:]).reshape(-1, 1))
            assert rate_entropy_form(target, spec, GRID) == pytest.approx(
                c * c / 2.0, abs=1e-12
            )

    def test_doubling_the_shift_quadruples_the_rate(self):
        spec = mean_reverting_spec()
        flow = mckean_vlasov_flow(spec, GRID)
        shift = np.sin(GRID.times()[1:]).reshape(-1, 1)
        small = rate_entropy_form(flow.law.with_means(flow.law.marginal_means + shift), spec, GRID)
        large = rate_entropy_form(
            flow.law.with_means(flow.law.marginal_means + 2 * shift), spec, GRID
        )
        assert large == pytest.approx(4.0 * small, rel=1e-9)

    def test_control_solution_reproduces_line(self):
        spec = brownian_spec()
        flow = mckean_vlasov_flow(spec, GRID)
        target = flow.law.with_means((2.0 * GRID.times()[1:]).reshape(-1, 1))
        solution = minimal_control_energy(target, spec, GRID)
        assert solution.reachable
        assert np.allclose(solution.control.values, 2.0, atol=1e-10)
        assert solution.value == pytest.approx(2.0, abs=1e-10)

    def test_limit_law_needs_no_control(self):
        spec = mean_reverting_spec()
        flow = mckean_vlasov_flow(spec, GRID)
        solution = minimal_control_energy(flow.law, spec, GRID)
        assert solution.value <= 1e-12

    def test_inflated_covariance_unreachable(self):
        spec = brownian_spec()
        flow = mckean_vlasov_flow(spec, GRID)
        fat = GaussianPathLaw(
            GaussianMeasure(flow.law.gaussian.mean, 2.0 * flow.law.gaussian.covariance),
            dim=1,
            steps=GRID.steps,
        )
        solution = minimal_control_energy(fat, spec, GRID)
        assert solution.value == math.inf and not solution.reachable

    def test_variational_equals_entropy_on_random_affine_specs(self):
        from meanfield_ldp.harness import random_linear_ito_spec

        rng = np.random.default_rng(42)
        for _ in range(10):
            spec = random_linear_ito_spec(rng)
            for steps in (8, 32):
                grid = EulerGrid.for_horizon(spec.horizon, steps)
                flow = mckean_vlasov_flow(spec, grid)
                shift = np.cumsum(
                    rng.uniform(-0.5, 0.5, size=(steps, spec.dim)), axis=0
                ) * grid.step
                target = flow.law.with_means(flow.law.marginal_means + shift)
                entropy_form = rate_entropy_form(target, spec, grid)
                variational = minimal_control_energy(target, spec, grid)
                assert variational.value == pytest.approx(entropy_form, abs=1e-6)


class TestWienerShiftEntropy:
    def test_zero_control(self):
        assert wiener_shift_entropy(ControlPath.zero(8, 1), GRID) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_constant_control_value(self):
        value = wiener_shift_entropy(ControlPath.constant(8, [2.0]), GRID)
        assert value == pytest.approx(2.0, abs=1e-12)

    def test_matches_energy_for_random_controls(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            steps = int(rng.integers(4, 33))
            grid = EulerGrid.for_horizon(float(rng.uniform(0.5, 2.0)), steps)
            control = ControlPath(rng.uniform(-3, 3, size=(steps, int(rng.integers(1, 3)))))
            assert wiener_shift_entropy(control, grid) == pytest.approx(
                control.energy(grid), abs=1e-12
            )

    def test_refinement_invariance_for_aligned_controls(self):
        coarse = EulerGrid.for_horizon(1.0, 8)
        fine = EulerGrid.for_horizon(1.0, 16)
        u = np.arange(1.0, 9.0).reshape(-1, 1)
        coarse_value = wiener_shift_entropy(ControlPath(u), coarse)
        fine_value = wiener_shift_entropy(ControlPath(np.repeat(u, 2, axis=0)), fine)
        assert fine_value == pytest.approx(coarse_value, abs=1e-12)

    def test_wiener_law_shape(self):
        law = discretized_wiener_law(GRID, 2)
        assert law.gaussian.dim == 16
        assert law.marginal_covariance(0)[0, 0] == pytest.approx(GRID.step, abs=1e-15)


class TestGrowthBounds:
    def test_simulated_coefficients_respect_declared_constants(self):
        for spec in (mean_reverting_spec(), brownian_spec()):
            run = simulate(spec, GRID, 32, seed=0)
            k_growth = spec.growth_constant
            k_disp = spec.dispersion_bound
            means = run.paths[:, :, :].mean(axis=0)
            for path in run.paths:
                for step_index in range(GRID.steps):
                    x = path[step_index]
                    mean = means[step_index]
                    drift = spec.drift(step_index * GRID.step, x, mean)
                    disp = spec.dispersion(step_index * GRID.step, x, mean)
                    bound = k_growth * (
                        1.0 + max(float(np.abs(x).max()), float(np.abs(mean).max()))
                    )
                    assert float(np.linalg.norm(drift)) <= bound + 1e-12
                    assert float(np.linalg.norm(disp, 2)) <= k_disp + 1e-12
