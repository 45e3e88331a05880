"""Acceptance gate: one test per criterion, at its stated tolerance and budget.

Each test prints a single ``PASS criterion N`` line (visible with ``pytest
-s``; with plain ``pytest -v`` the per-test PASSED lines serve the same
purpose).  Wall-clock budgets are asserted too: these checks are meant to be
cheap enough to run on every change.
"""

import math
import time

import numpy as np
import pytest

from meanfield_ldp import harness, ito_euler, meanfield_chain, noise_systems, toy_model
from meanfield_ldp.config import build_chain_spec, build_ito_spec, load_config
from meanfield_ldp.measures import (
    GaussianMeasure,
    brute_force_lift_infimum,
    optimal_lift,
    pushforward,
    relative_entropy,
)


def announce(number, name, elapsed, budget, detail):
    print(f"PASS criterion {number} ({name}): {detail} [{elapsed:.2f}s < {budget:.0f}s]")


def test_criterion_1_sanov_method_of_types():
    start = time.time()
    schedule = list(range(4, 201, 4))
    report = harness.sanov_check(2, [0.5, 0.5], schedule)
    assert report.passed, "some type violated the method-of-types bound"
    spot = next(r for r in report.rows if r[0] == 4 and r[1] == "3|1")
    assert spot[5] == pytest.approx(0.2158, abs=5e-5)
    assert spot[6] == pytest.approx(0.8047, abs=5e-5)
    elapsed = time.time() - start
    assert elapsed < 5.0
    announce(1, "Sanov types bound", elapsed, 5,
             f"{len(report.rows)} types over N in {{4..200}}, spot gap {spot[5]:.4f} <= {spot[6]:.4f}")


def test_criterion_2_entropy_contraction():
    start = time.time()
    rng = np.random.default_rng(20240702)
    worst_closed, worst_grid = 0.0, 0.0
    for _ in range(50):
        eta, gamma0, psi = harness.random_contraction_instance(rng)
        direct = relative_entropy(eta, pushforward(gamma0, psi))
        lifted = relative_entropy(optimal_lift(eta, gamma0, psi), gamma0)
        oracle = brute_force_lift_infimum(eta, gamma0, psi, 40)
        worst_closed = max(worst_closed, abs(direct - lifted))
        worst_grid = max(worst_grid, abs(direct - oracle))
    assert worst_closed <= 1e-12
    assert worst_grid <= 1e-4
    elapsed = time.time() - start
    assert elapsed < 30.0
    announce(2, "entropy contraction", elapsed, 30,
             f"50 instances, closed-form dev {worst_closed:.2e}, grid dev {worst_grid:.2e}")


def test_criterion_3_toy_rate_identity():
    start = time.time()
    anchor_spec = toy_model.ToyModelSpec.standard("constant", 0.0)
    anchor = toy_model.rate_function(
        GaussianMeasure([1.0, 1.0], [[1.0, 1.0], [1.0, 2.0]]), anchor_spec
    )
    assert anchor.tilt_form == pytest.approx(0.5, abs=1e-12)
    assert anchor.entropy_form == pytest.approx(0.5, abs=1e-12)
    rng = np.random.default_rng(20240703)
    worst = 0.0
    for kind, scale in (("tanh", 0.9), ("cosine", 1.1), ("constant", 0.4)):
        spec = toy_model.ToyModelSpec.standard(kind, scale)
        for _ in range(34):
            theta = harness.random_gaussian_candidate(rng)
            values = toy_model.rate_function(theta, spec)
            worst = max(worst, abs(values.tilt_form - values.entropy_form))
    assert worst <= 1e-9
    elapsed = time.time() - start
    assert elapsed < 1.0
    announce(3, "toy rate two forms", elapsed, 1,
             f"anchor = 0.5 both routes, 102 random candidates dev {worst:.2e}")


def test_criterion_4_staged_rate_identity():
    start = time.time()
    rng = np.random.default_rng(20240704)
    worst = 0.0
    finite = 0
    for _ in range(40):
        eta, gamma0, spec = harness.random_staged_instance(rng)
        entropy_form = noise_systems.rate_entropy_form(eta, gamma0, spec)
        contraction = noise_systems.rate_contraction_form(eta, gamma0, spec, 40)
        if math.isinf(entropy_form):
            assert math.isinf(contraction)
            continue
        finite += 1
        worst = max(worst, abs(entropy_form - contraction))
    assert finite >= 20
    assert worst <= 1e-4
    elapsed = time.time() - start
    assert elapsed < 60.0
    announce(4, "staged rate two forms", elapsed, 60,
             f"{finite} finite instances, max dev {worst:.2e}")


def test_criterion_5_chain_decay_bounds():
    start = time.time()
    spec = build_chain_spec(load_config(None))
    assert spec.size == 2 and spec.horizon == 2
    report = harness.decay_scan(spec, [20, 40, 60])
    assert report.passed, report.notes
    worst = {n: max(r[5] for r in report.rows if r[0] == n) for n in (20, 40, 60)}
    assert worst[60] < worst[40] < worst[20]
    elapsed = time.time() - start
    assert elapsed < 120.0
    announce(5, "chain decay bounds", elapsed, 120,
             f"max gaps {worst[20]:.4f} > {worst[40]:.4f} > {worst[60]:.4f}, all within bound")


def test_criterion_6_wiener_shift_telescope():
    start = time.time()
    grid = ito_euler.EulerGrid.for_horizon(1.0, 8)
    constant = ito_euler.wiener_shift_entropy(ito_euler.ControlPath.constant(8, [2.0]), grid)
    assert constant == pytest.approx(2.0, abs=1e-12)
    rng = np.random.default_rng(20240706)
    worst = 0.0
    for _ in range(100):
        steps = int(rng.integers(4, 33))
        g = ito_euler.EulerGrid.for_horizon(float(rng.uniform(0.5, 2.0)), steps)
        control = ito_euler.ControlPath(rng.uniform(-3, 3, size=(steps, int(rng.integers(1, 3)))))
        worst = max(worst, abs(ito_euler.wiener_shift_entropy(control, g) - control.energy(g)))
    assert worst <= 1e-12
    elapsed = time.time() - start
    assert elapsed < 1.0
    announce(6, "Wiener shift telescope", elapsed, 1,
             f"constant control = 2.0, 100 random controls dev {worst:.2e}")


def test_criterion_7_control_energy_identity():
    start = time.time()
    rng = np.random.default_rng(20240707)
    worst = 0.0
    for _ in range(10):
        spec = harness.random_linear_ito_spec(rng)
        for steps in (8, 32):
            grid = ito_euler.EulerGrid.for_horizon(spec.horizon, steps)
            flow = ito_euler.mckean_vlasov_flow(spec, grid)
            shift = np.cumsum(rng.uniform(-0.5, 0.5, size=(steps, spec.dim)), axis=0) * grid.step
            target = flow.law.with_means(flow.law.marginal_means + shift)
            entropy_form = ito_euler.rate_entropy_form(target, spec, grid)
            solution = ito_euler.minimal_control_energy(target, spec, grid)
            worst = max(worst, abs(entropy_form - solution.value))
    assert worst <= 1e-6
    elapsed = time.time() - start
    assert elapsed < 30.0
    announce(7, "control energy = path entropy", elapsed, 30,
             f"10 affine specs x K in {{8,32}}, max dev {worst:.2e}")


def test_criterion_8_exact_empirical_fixed_point():
    start = time.time()
    rng = np.random.default_rng(20240708)
    toy_spec = toy_model.as_staged_spec(toy_model.ToyModelSpec.standard("tanh", 1.0))
    chain_cfg = build_chain_spec(load_config(None))
    chain_spec = meanfield_chain.as_staged_spec(chain_cfg)
    chain_sampler = meanfield_chain.uniform_noise_sampler(chain_cfg.horizon)
    checked = 0
    for run in range(1000):
        n = int(rng.integers(1, 25))
        seed = int(rng.integers(0, 2**32))
        if run % 2 == 0:
            sim = noise_systems.simulate_particles(
                toy_model.normal_pair_sampler, toy_spec, n, seed
            )
            law = noise_systems.mckean_vlasov_law(sim.empirical_noise, toy_spec)
        else:
            sim = noise_systems.simulate_particles(chain_sampler, chain_spec, n, seed)
            law = noise_systems.mckean_vlasov_law(sim.empirical_noise, chain_spec)
        assert sim.empirical_paths.denominator == n
        assert law.equals_exact(sim.empirical_paths), f"run {run} broke the identity"
        checked += 1
    elapsed = time.time() - start
    assert elapsed < 30.0
    announce(8, "empirical fixed point", elapsed, 30,
             f"{checked} randomized runs, exact rational weights throughout")


def test_criterion_9_lln_trend():
    start = time.time()
    cfg = load_config(None)
    report, _ = harness.lln_trend(
        cfg, systems=["toy", "ito"], n_schedule=[100, 1000, 10000],
        replications=20, seed=cfg["seed"],
    )
    assert report.passed, report.notes
    elapsed = time.time() - start
    assert elapsed < 180.0
    announce(9, "LLN distance trend", elapsed, 180, "; ".join(report.notes))
