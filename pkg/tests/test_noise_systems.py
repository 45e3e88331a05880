import math

import numpy as np
import pytest

from meanfield_ldp.errors import ConvergenceError, DomainError
from meanfield_ldp.measures import DiscreteDistribution, pushforward, relative_entropy
from meanfield_ldp.noise_systems import (
    StagedSystemSpec,
    empirical_distribution,
    frozen_path_law,
    marginal_flow,
    mckean_vlasov_law,
    particle_rng,
    rate_contraction_form,
    rate_entropy_form,
    simulate_particles,
    solve_fixed_point,
)


def measure_free_spec():
    """x0 = y0, x1 = x0 + y1: no measure dependence."""
    return StagedSystemSpec(
        stages=1, initial_map=lambda y: y, stage_map=lambda t, x, marg, y: x + y
    )


def shift_by_mean_spec():
    """x(t+1) = x(t) + mean(marginal) + y(t+1): genuine interaction."""

    def stage(t, x, marg, y):
        mean = sum(w * a for a, w in marg.items())
        return x + mean + y

    return StagedSystemSpec(stages=1, initial_map=lambda y: y, stage_map=stage)


def grid_noise(values0, values1, weights=None):
    atoms = [(a, b) for a in values0 for b in values1]
    if weights is None:
        return DiscreteDistribution.uniform(atoms)
    return DiscreteDistribution.from_weights(atoms, weights)


class TestFrozenPathLaw:
    def test_measure_free_equals_plain_pushforward(self):
        spec = measure_free_spec()
        gamma = grid_noise([-1.0, 1.0], [0.0, 2.0])
        mu = DiscreteDistribution.dirac((0.0, 0.0))
        law = frozen_path_law(gamma, mu, spec)
        direct = pushforward(gamma, lambda y: (y[0], y[0] + y[1]))
        assert law.equals_exact(direct)

    def test_dirac_noise_maps_to_dirac_path(self):
        spec = shift_by_mean_spec()
        gamma = DiscreteDistribution.dirac((1.0, 2.0))
        mu = DiscreteDistribution.dirac((5.0, 5.0))
        law = frozen_path_law(gamma, mu, spec)
        assert law.weight((1.0, 1.0 + 5.0 + 2.0)) == 1.0

    def test_stage_reads_time_t_marginal(self):
        spec = shift_by_mean_spec()
        gamma = DiscreteDistribution.dirac((0.0, 0.0))
        mu = DiscreteDistribution.from_weights([(0.0, 9.0), (2.0, 9.0)], [0.5, 0.5])
        law = frozen_path_law(gamma, mu, spec)
        # mean of time-0 marginal is 1.0, the time-1 coordinate (9.0) is ignored
        assert law.weight((0.0, 1.0)) == 1.0

    def test_rejects_wrong_path_length(self):
        spec = measure_free_spec()
        with pytest.raises(DomainError, match="tuples of length 2"):
            frozen_path_law(
                DiscreteDistribution.dirac((0.0, 0.0, 0.0)),
                DiscreteDistribution.dirac((0.0, 0.0)),
                spec,
            )


class TestMcKeanVlasovLaw:
    def test_measure_free_is_pushforward(self):
        spec = measure_free_spec()
        gamma = grid_noise([-1.0, 0.0, 1.0], [-1.0, 1.0])
        law = mckean_vlasov_law(gamma, spec)
        direct = pushforward(gamma, lambda y: (y[0], y[0] + y[1]))
        assert law.equals_exact(direct)

    def test_time_zero_marginal_is_noise_marginal(self):
        spec = shift_by_mean_spec()
        gamma = grid_noise([-1.0, 2.0], [0.5, 1.5], weights=[0.1, 0.2, 0.3, 0.4])
        law = mckean_vlasov_law(gamma, spec)
        m0 = law.coordinate_marginal(0)
        g0 = gamma.coordinate_marginal(0)
        for atom in g0.support:
            assert m0.weight(atom) == pytest.approx(g0.weight(atom), abs=1e-15)

    def test_is_exact_fixed_point(self):
        spec = shift_by_mean_spec()
        gamma = grid_noise([-1.0, 2.0], [0.5, 1.5], weights=[0.1, 0.2, 0.3, 0.4])
        law = mckean_vlasov_law(gamma, spec)
        assert frozen_path_law(gamma, law, spec).equals_exact(law)

    def test_marginals_match_flow(self):
        spec = shift_by_mean_spec()
        gamma = grid_noise([0.0, 1.0], [0.0, 1.0], weights=[0.4, 0.1, 0.25, 0.25])
        flow, _ = marginal_flow(gamma, spec)
        law = mckean_vlasov_law(gamma, spec)
        for t, marginal in enumerate(flow):
            from_law = law.coordinate_marginal(t)
            for atom in marginal.support:
                assert from_law.weight(atom) == pytest.approx(marginal.weight(atom), abs=1e-15)

    def test_two_state_chain_matches_matrix_powers(self):
        # constant row-stochastic matrix: marginals follow q A^t
        from meanfield_ldp.meanfield_chain import (
            MeanFieldChainSpec,
            as_staged_spec,
            discretized_noise,
        )

        matrix = np.array([[0.75, 0.25], [0.4, 0.6]])
        spec = MeanFieldChainSpec(["u", "v"], [0.5, 0.5], lambda t, p: matrix, 3)
        law = mckean_vlasov_law(discretized_noise(spec), as_staged_spec(spec))
        expect = np.array([0.5, 0.5])
        for t in range(4):
            marg = law.coordinate_marginal(t)
            assert marg.weight("u") == pytest.approx(expect[0], abs=1e-12)
            assert marg.weight("v") == pytest.approx(expect[1], abs=1e-12)
            expect = matrix.T @ expect


class TestSolveFixedPoint:
    def test_measure_free_converges_immediately(self):
        spec = measure_free_spec()
        gamma = grid_noise([-1.0, 1.0], [0.0, 2.0])
        report = solve_fixed_point(gamma, spec)
        assert report.iterations == 1
        assert report.residual == 0.0
        assert report.solution.equals_exact(mckean_vlasov_law(gamma, spec))

    def test_interacting_spec_agrees_with_recursion(self):
        spec = shift_by_mean_spec()
        gamma = grid_noise([0.0, 1.0], [0.0, 1.0], weights=[0.4, 0.1, 0.25, 0.25])
        report = solve_fixed_point(gamma, spec)
        assert report.iterations <= spec.stages + 1
        assert report.solution.equals_exact(mckean_vlasov_law(gamma, spec))

    def test_damped_iteration_still_converges(self):
        spec = shift_by_mean_spec()
        gamma = grid_noise([0.0, 1.0], [0.0, 1.0])
        report = solve_fixed_point(gamma, spec, tol=1e-8, max_iter=200, damping=0.5)
        reference = mckean_vlasov_law(gamma, spec)
        for atom in reference.support:
            assert report.solution.weight(atom) == pytest.approx(
                reference.weight(atom), abs=1e-6
            )

    def test_exhausted_iterations_raise(self):
        spec = shift_by_mean_spec()
        gamma = grid_noise([0.0, 1.0], [0.0, 1.0])
        with pytest.raises(ConvergenceError) as err:
            solve_fixed_point(gamma, spec, tol=1e-12, max_iter=1, damping=0.9)
        assert err.value.residual > 0.0


class TestSimulateParticles:
    @staticmethod
    def sampler(rng):
        draw = rng.normal(size=2)
        return (float(draw[0]), float(draw[1]))

    def test_single_particle_runs_its_own_field(self):
        spec = shift_by_mean_spec()
        sim = simulate_particles(self.sampler, spec, 1, seed=0)
        (path,) = sim.paths
        y = sim.noise_paths[0]
        assert path == (y[0], y[0] + y[0] + y[1])

    def test_empirical_fixed_point_identity(self):
        spec = shift_by_mean_spec()
        for seed in range(10):
            sim = simulate_particles(self.sampler, spec, 64, seed=seed)
            law = mckean_vlasov_law(sim.empirical_noise, spec)
            assert law.equals_exact(sim.empirical_paths)
            assert frozen_path_law(
                sim.empirical_noise, sim.empirical_paths, spec
            ).equals_exact(sim.empirical_paths)

    def test_replay_is_bit_identical(self):
        spec = shift_by_mean_spec()
        a = simulate_particles(self.sampler, spec, 32, seed=11)
        b = simulate_particles(self.sampler, spec, 32, seed=11)
        assert a.paths == b.paths
        assert a.noise_paths == b.noise_paths

    def test_particle_streams_do_not_depend_on_count(self):
        spec = shift_by_mean_spec()
        small = simulate_particles(self.sampler, spec, 4, seed=3)
        large = simulate_particles(self.sampler, spec, 8, seed=3)
        assert small.noise_paths == large.noise_paths[:4]

    def test_weights_are_exact_rationals(self):
        spec = shift_by_mean_spec()
        sim = simulate_particles(self.sampler, spec, 10, seed=1)
        assert sim.empirical_paths.denominator == 10
        assert sum(sim.empirical_paths.counts) == 10

    def test_particle_rng_is_pair_seeded(self):
        a = particle_rng(7, 3).normal(size=4)
        b = particle_rng(7, 3).normal(size=4)
        c = particle_rng(7, 4).normal(size=4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestRateFunctions:
    def small_instance(self, seed):
        from meanfield_ldp.harness import random_staged_instance

        return random_staged_instance(np.random.default_rng(seed))

    def test_rate_vanishes_at_the_limit_law(self):
        spec = shift_by_mean_spec()
        gamma0 = grid_noise([0.0, 1.0], [0.0, 1.0], weights=[0.4, 0.1, 0.25, 0.25])
        law = mckean_vlasov_law(gamma0, spec)
        assert rate_entropy_form(law, gamma0, spec) == 0.0
        assert rate_contraction_form(law, gamma0, spec) <= 1e-9

    def test_rate_positive_away_from_the_limit(self):
        spec = shift_by_mean_spec()
        gamma0 = grid_noise([0.0, 1.0], [0.0, 1.0])
        tilted = grid_noise([0.0, 1.0], [0.0, 1.0], weights=[0.4, 0.1, 0.25, 0.25])
        eta = mckean_vlasov_law(tilted, spec)
        assert rate_entropy_form(eta, gamma0, spec) > 0.0

    def test_unsupported_law_has_infinite_rate(self):
        spec = shift_by_mean_spec()
        gamma0 = grid_noise([0.0, 1.0], [0.0, 1.0])
        eta = DiscreteDistribution.dirac((17.0, 17.0))
        assert rate_entropy_form(eta, gamma0, spec) == math.inf
        assert rate_contraction_form(eta, gamma0, spec) == math.inf

    def test_two_forms_agree_on_random_instances(self):
        for seed in range(25):
            eta, gamma0, spec = self.small_instance(seed)
            entropy_form = rate_entropy_form(eta, gamma0, spec)
            contraction = rate_contraction_form(eta, gamma0, spec, grid_resolution=40)
            assert contraction == pytest.approx(entropy_form, abs=1e-4)


class TestEmpiricalDistribution:
    def test_counts_and_order(self):
        d = empirical_distribution(["b", "a", "b", "b"])
        assert d.support == ("b", "a")
        assert d.count("b") == 3 and d.count("a") == 1

    def test_numeric_merge_by_value(self):
        d = empirical_distribution([1.0, 1, 2.0])
        assert d.count(1.0) == 2
