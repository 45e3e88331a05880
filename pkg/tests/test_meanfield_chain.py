import math

import numpy as np
import pytest

from meanfield_ldp.errors import CapacityError, DomainError
from meanfield_ldp.measures import DiscreteDistribution
from meanfield_ldp.meanfield_chain import (
    MeanFieldChainSpec,
    PathType,
    as_staged_spec,
    chain_simulate,
    chain_step,
    decay_bound_report,
    discretized_noise,
    exact_type_log_probability,
    exact_type_probability,
    feasible_paths,
    frozen_chain_law,
    initial_state,
    mckean_vlasov,
    rate_function,
    simulate_staged,
    transition_matrix,
)
from meanfield_ldp.noise_systems import mckean_vlasov_law


def fair_coin_chain(horizon=1):
    return MeanFieldChainSpec(
        ["s1", "s2"], [1.0, 0.0], lambda t, p: np.array([[0.5, 0.5], [0.5, 0.5]]), horizon
    )


def interacting_chain(horizon=2):
    """Rows interpolate between two stochastic matrices as p(s2) grows."""
    a0 = np.array([[0.7, 0.3], [0.6, 0.4]])
    a1 = np.array([[0.3, 0.7], [0.4, 0.6]])
    return MeanFieldChainSpec(
        ["s1", "s2"], [1.0, 0.0], lambda t, p: (1.0 - p[1]) * a0 + p[1] * a1, horizon
    )


def iid_chain(mu, horizon=0):
    m = len(mu)
    return MeanFieldChainSpec(
        [f"a{i}" for i in range(m)], mu, lambda t, p: np.eye(m), horizon
    )


class TestChainStep:
    def test_certain_row(self):
        spec = MeanFieldChainSpec(
            ["s1", "s2"], [1.0, 0.0], lambda t, p: np.array([[1.0, 0.0], [1.0, 0.0]]), 1
        )
        for y in (0.0, 0.3, 1.0):
            assert chain_step(1, "s1", np.array([1.0, 0.0]), y, spec) == "s1"

    def test_right_endpoint_belongs_to_lower_cell(self):
        spec = fair_coin_chain()
        p = np.array([1.0, 0.0])
        assert chain_step(1, "s1", p, 0.5, spec) == "s1"
        assert chain_step(1, "s1", p, 0.500000001, spec) == "s2"

    def test_zero_maps_to_first_positive_state(self):
        spec = MeanFieldChainSpec(
            ["s1", "s2"], [0.0, 1.0], lambda t, p: np.array([[0.0, 1.0], [0.0, 1.0]]), 1
        )
        assert initial_state(0.0, spec) == "s2"
        assert chain_step(1, "s1", np.array([0.5, 0.5]), 0.0, spec) == "s2"

    def test_zero_width_cell_is_skipped(self):
        spec = MeanFieldChainSpec(
            ["a", "b", "c"],
            [1.0, 0.0, 0.0],
            lambda t, p: np.tile([0.5, 0.0, 0.5], (3, 1)),
            1,
        )
        assert chain_step(1, "a", np.array([1.0, 0.0, 0.0]), 0.5, spec) == "a"
        assert chain_step(1, "a", np.array([1.0, 0.0, 0.0]), 0.50001, spec) == "c"

    def test_bad_row_surfaces_at_matrix_evaluation(self):
        spec = MeanFieldChainSpec(
            ["s1", "s2"], [1.0, 0.0], lambda t, p: np.array([[0.5, 0.6], [0.5, 0.5]]), 1
        )
        with pytest.raises(DomainError, match="sum to one"):
            transition_matrix(spec, 0, np.array([1.0, 0.0]))

    def test_noise_outside_unit_interval_rejected(self):
        spec = fair_coin_chain()
        with pytest.raises(DomainError):
            chain_step(1, "s1", np.array([1.0, 0.0]), 1.5, spec)


class TestSimulate:
    def test_single_state_chain(self):
        spec = MeanFieldChainSpec(["only"], [1.0], lambda t, p: np.eye(1), 3)
        ptype = chain_simulate(spec, 17, seed=0)
        assert ptype.to_measure().weight(("only",) * 4) == 1.0

    def test_replay_identical(self):
        spec = interacting_chain()
        a = chain_simulate(spec, 40, seed=4)
        b = chain_simulate(spec, 40, seed=4)
        assert dict(a.items()) == dict(b.items())

    def test_type_frequencies_match_exact_probabilities(self):
        # constant-matrix chain, N = 3: replicate and compare against the
        # closed-form type probabilities at binomial-confidence resolution
        spec = fair_coin_chain(horizon=1)
        n, reps = 3, 20000
        observed = {}
        for seed in range(reps):
            key = tuple(sorted(chain_simulate(spec, n, seed=seed).items()))
            observed[key] = observed.get(key, 0) + 1
        for key, count in observed.items():
            prob = exact_type_probability(PathType(dict(key), n), spec)
            sigma = math.sqrt(prob * (1 - prob) * reps)
            assert abs(count - prob * reps) <= 4.0 * sigma + 1.0

    def test_staged_route_pathwise_equal(self):
        spec = interacting_chain()
        direct = chain_simulate(spec, 33, seed=8)
        staged = simulate_staged(spec, 33, seed=8)
        assert direct.to_measure().equals_exact(staged.empirical_paths)


class TestFrozenLaw:
    def test_zero_horizon_returns_initial_law(self):
        spec = iid_chain([0.3, 0.7])
        eta = DiscreteDistribution.dirac(("a0",))
        law = frozen_chain_law(eta, spec)
        assert law.weight(("a0",)) == pytest.approx(0.3, abs=1e-15)
        assert law.weight(("a1",)) == pytest.approx(0.7, abs=1e-15)

    def test_constant_matrix_product_law(self):
        spec = fair_coin_chain(horizon=1)
        eta = DiscreteDistribution.dirac(("s1", "s1"))
        law = frozen_chain_law(eta, spec)
        assert law.weight(("s1", "s1")) == pytest.approx(0.5, abs=1e-15)
        assert law.weight(("s1", "s2")) == pytest.approx(0.5, abs=1e-15)

    def test_measure_dependence_enters_through_marginals(self):
        spec = interacting_chain(horizon=1)
        skew = DiscreteDistribution.from_weights([("s1", "s1"), ("s1", "s2")], [0.1, 0.9])
        law = frozen_chain_law(skew, spec)
        # time-0 marginal is a point mass at s1, so the matrix is evaluated at p=(1,0)
        assert law.weight(("s1", "s2")) == pytest.approx(0.3, abs=1e-15)


class TestExactTypeProbability:
    def test_binomial_pair(self):
        spec = fair_coin_chain(horizon=1)
        both = PathType({("s1", "s1"): 2}, 2)
        mixed = PathType({("s1", "s1"): 1, ("s1", "s2"): 1}, 2)
        assert exact_type_probability(both, spec) == pytest.approx(0.25, abs=1e-15)
        assert exact_type_probability(mixed, spec) == pytest.approx(0.5, abs=1e-14)

    def test_total_probability_is_one(self):
        for spec, n in ((fair_coin_chain(1), 6), (interacting_chain(2), 7)):
            total = 0.0
            for row in decay_bound_report(spec, n):
                total += math.exp(row.log_probability)
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_infeasible_type_is_minus_infinity(self):
        spec = MeanFieldChainSpec(
            ["s1", "s2"], [1.0, 0.0], lambda t, p: np.array([[1.0, 0.0], [0.0, 1.0]]), 1
        )
        dead = PathType({("s1", "s2"): 3}, 3)
        assert exact_type_log_probability(dead, spec) == -math.inf

    def test_capacity_guards(self):
        spec = fair_coin_chain(horizon=1)
        with pytest.raises(CapacityError):
            exact_type_log_probability(PathType({("s1", "s1"): 500}, 500), spec)
        deep = fair_coin_chain(horizon=7)
        with pytest.raises(CapacityError):
            exact_type_log_probability(PathType({("s1",) * 8: 5}, 5), deep)


class TestRateFunction:
    def test_limit_law_has_zero_rate(self):
        spec = interacting_chain()
        limit = mckean_vlasov(spec).path_law
        assert rate_function(limit, spec) <= 1e-14

    def test_blocked_transition_gives_infinite_rate(self):
        # the s1 row forbids s2 whenever nobody is at s2 yet
        spec = MeanFieldChainSpec(
            ["s1", "s2"],
            [1.0, 0.0],
            lambda t, p: np.array([[1.0 - p[1], p[1]], [0.0, 1.0]]),
            1,
        )
        eta = DiscreteDistribution.dirac(("s1", "s2"))
        assert rate_function(eta, spec) == math.inf

    def test_point_mass_on_fair_path(self):
        spec = fair_coin_chain(horizon=1)
        eta = DiscreteDistribution.dirac(("s1", "s2"))
        assert rate_function(eta, spec) == pytest.approx(math.log(2.0), abs=1e-15)


class TestDecayBounds:
    def test_iid_case_matches_classic_types_bound(self):
        spec = iid_chain([0.5, 0.5])
        rows = decay_bound_report(spec, 4)
        by_counts = {
            tuple(sorted(row.path_type.items())): row for row in rows
        }
        key = tuple(sorted({("a0",): 3, ("a1",): 1}.items()))
        row = by_counts[key]
        assert row.empirical_rate == pytest.approx(0.34657, abs=5e-6)
        assert row.rate == pytest.approx(0.13081, abs=5e-6)
        assert row.gap == pytest.approx(0.21576, abs=5e-5)
        assert row.bound == pytest.approx(2 * math.log(5) / 4, abs=1e-12)
        assert all(r.within_bound for r in rows)

    def test_gap_shrinks_when_doubling_n(self):
        spec = interacting_chain()
        base = {r.path_type.normalized(): r.gap for r in decay_bound_report(spec, 8)}
        for n in (16, 32):
            doubled = {r.path_type.normalized(): r.gap for r in decay_bound_report(spec, n)}
            for key, gap in base.items():
                if key in doubled:
                    assert doubled[key] <= gap + 1e-12
            base = doubled

    def test_measure_dependent_chain_within_bound(self):
        spec = interacting_chain()
        rows = decay_bound_report(spec, 20)
        assert rows and all(r.within_bound for r in rows)

    def test_feasible_paths_prune_uncharged_starts(self):
        spec = interacting_chain(horizon=1)
        assert all(path[0] == "s1" for path in feasible_paths(spec))


class TestStagedEquivalence:
    def test_mckean_vlasov_law_matches_discretized_noise_route(self):
        spec = interacting_chain()
        expected = mckean_vlasov(spec).path_law
        routed = mckean_vlasov_law(discretized_noise(spec), as_staged_spec(spec))
        assert set(routed.support) == set(expected.support)
        for path in expected.support:
            assert routed.weight(path) == pytest.approx(expected.weight(path), abs=1e-12)

    def test_marginal_flow_is_matrix_recursion(self):
        spec = interacting_chain()
        flow = mckean_vlasov(spec).marginal_flow
        p = np.array([1.0, 0.0])
        for t in range(spec.horizon):
            a = transition_matrix(spec, t, p)
            p = a.T @ p
            assert np.allclose(flow[t + 1], p, atol=1e-15)

    def test_staged_embedding_requires_a_stage(self):
        with pytest.raises(DomainError):
            as_staged_spec(iid_chain([0.5, 0.5], horizon=0))
