"""Experiment orchestration: exact bounds, identity cross-checks, LLN trends.

Each experiment consumes a validated config, runs deterministically under a
root seed, and returns a :class:`~meanfield_ldp.reports.RateReport` whose
rows carry both the measured quantity and the analytic bound it is judged
against -- no bound is hard-coded apart from its formula.

Experiments
-----------
``sanov_check``
    Exact multinomial type probabilities for i.i.d. sampling versus the
    entropy rate, with the method-of-types bound ``M log(N+1)/N``.
``decay_scan``
    The same comparison for mean-field chain path types (bound exponent
    ``M^(T+1)``), plus shrinkage of the gap along the particle schedule for
    types representable at every schedule point.
``identity_suite``
    The cross-module identities at fixed seeds: entropy contraction through a
    map (closed form and grid oracle), the two toy rate forms, the two staged
    rate forms, control energy versus path entropy, and the Wiener-shift
    telescope.  A mutation mode perturbs one side to prove the checks can
    fail.
``lln_trend``
    Seed-averaged bounded-Lipschitz distance between empirical and limiting
    final-time marginals over an increasing particle schedule, with a log-log
    SVG rendering.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import ito_euler, meanfield_chain, noise_systems, toy_model
from .errors import CapacityError, DomainError
from .measures import (
    DiscreteDistribution,
    GaussianMeasure,
    MeasurableMap,
    bounded_lipschitz_distance,
    brute_force_lift_infimum,
    discretize_gaussian_1d,
    gaussian_relative_entropy,
    optimal_lift,
    pushforward,
    relative_entropy,
)
from .reports import RateReport, line_plot_svg

SANOV_MAX_ALPHABET = 6
SANOV_MAX_N = 200


# ---------------------------------------------------------------------------
# Sanov check
# ---------------------------------------------------------------------------

def sanov_check(alphabet_size: int, mu, n_schedule) -> RateReport:
    """Exact i.i.d. types: ``|-(1/N) log P - R(type || mu)| <= M log(N+1)/N``.

    Type probabilities use exact integer multinomial coefficients; only the
    final logarithm is floating point.
    """
    if alphabet_size > SANOV_MAX_ALPHABET:
        raise CapacityError(f"alphabet size capped at {SANOV_MAX_ALPHABET}")
    if max(n_schedule) > SANOV_MAX_N:
        raise CapacityError(f"sample size capped at {SANOV_MAX_N}")
    mu = np.asarray(mu, dtype=float)
    if mu.size != alphabet_size or np.any(mu <= 0) or abs(mu.sum() - 1.0) > 1e-12:
        raise DomainError("mu must be a strictly positive probability vector")
    log_mu = np.log(mu)
    rows = []
    all_within = True
    worst = 0.0
    for n in n_schedule:
        bound = alphabet_size * math.log(n + 1) / n
        for counts in _compositions(n, alphabet_size):
            log_prob = _log_multinomial(n, counts) + sum(
                k * lm for k, lm in zip(counts, log_mu)
            )
            empirical_rate = -log_prob / n
            rate = sum(
                (k / n) * math.log((k / n) / m) for k, m in zip(counts, mu) if k > 0
            )
            gap = abs(empirical_rate - rate)
            within = gap <= bound
            all_within = all_within and within
            worst = max(worst, gap)
            rows.append(
                (n, "|".join(str(k) for k in counts), log_prob, empirical_rate, rate,
                 gap, bound, within)
            )
    return RateReport(
        name="sanov_check",
        columns=("N", "type", "log_prob", "empirical_rate", "rate", "gap", "bound", "pass"),
        rows=rows,
        passed=all_within,
        notes=(f"max gap {worst!r} over {len(rows)} types",),
    )


def _log_multinomial(n: int, counts) -> float:
    coefficient = math.factorial(n)
    for k in counts:
        coefficient //= math.factorial(k)
    return math.log(coefficient)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


# ---------------------------------------------------------------------------
# mean-field decay scan
# ---------------------------------------------------------------------------

def decay_scan(spec: meanfield_chain.MeanFieldChainSpec, n_schedule) -> RateReport:
    """Per-type decay gaps over a particle schedule, with cross-N shrinkage.

    A type is tracked across the schedule through its exact normalized form
    (path frequencies as fractions); for every type representable at each
    schedule point, the gap must not grow as N increases.
    """
    rows = []
    all_within = True
    gaps_by_n = {}
    for n in n_schedule:
        per_type = {}
        for row in meanfield_chain.decay_bound_report(spec, n):
            all_within = all_within and row.within_bound
            per_type[row.path_type.normalized()] = row.gap
            rows.append(
                (
                    n,
                    _type_id(row.path_type),
                    row.log_probability,
                    row.empirical_rate,
                    row.rate,
                    row.gap,
                    row.bound,
                    row.within_bound,
                )
            )
        gaps_by_n[n] = per_type
    shrinkage_ok, tracked = _gaps_shrink(gaps_by_n, n_schedule)
    notes = (
        f"{tracked} types tracked across the schedule",
        "gap shrinkage " + ("holds" if shrinkage_ok else "FAILS"),
    )
    return RateReport(
        name="decay_scan",
        columns=("N", "type", "log_prob", "empirical_rate", "rate", "gap", "bound", "pass"),
        rows=rows,
        passed=all_within and shrinkage_ok,
        notes=notes,
    )


def _type_id(path_type: meanfield_chain.PathType) -> str:
    parts = [
        ">".join(str(s) for s in path) + "x" + str(c)
        for path, c in path_type.items()
        if c > 0
    ]
    return ";".join(sorted(parts))


def _gaps_shrink(gaps_by_n, n_schedule):
    """Non-increase (within 1e-12) of gaps for types present at every N."""
    first = gaps_by_n[n_schedule[0]]
    tracked = 0
    ok = True
    for key, gap in first.items():
        sequence = [gap]
        for n in n_schedule[1:]:
            if key not in gaps_by_n[n]:
                sequence = None
                break
            sequence.append(gaps_by_n[n][key])
        if sequence is None:
            continue
        tracked += 1
        for earlier, later in zip(sequence, sequence[1:]):
            if later > earlier + 1e-12:
                ok = False
    return ok, tracked


# ---------------------------------------------------------------------------
# random instances for identity checks (shared with the test suite)
# ---------------------------------------------------------------------------

def random_contraction_instance(rng: np.random.Generator):
    """Random (eta, gamma0, psi) with |source| <= 6, |image classes| <= 3."""
    n_source = int(rng.integers(2, 7))
    n_target = int(rng.integers(1, min(n_source, 3) + 1))
    source = [f"y{i}" for i in range(n_source)]
    targets = [f"x{j}" for j in range(n_target)]
    # surjective assignment so every class is a genuine fiber
    assignment = list(rng.integers(0, n_target, size=n_source))
    for j in range(n_target):
        assignment[j] = j
    psi = MeasurableMap.from_table({y: targets[j] for y, j in zip(source, assignment)})
    gamma0 = DiscreteDistribution.from_weights(source, rng.dirichlet(np.ones(n_source)))
    eta = DiscreteDistribution.from_weights(targets, rng.dirichlet(np.ones(n_target)))
    return eta, gamma0, psi


def random_staged_instance(rng: np.random.Generator):
    """Random small staged system with noise-path support <= 8, <= 4 atoms/stage.

    States are integers mod 3; the stage map shifts by the *parity* of the
    noise and by a rounded multiple of the running marginal mean.  The parity
    collapses distinct noise values onto the same transition, so the path map
    has genuine multi-atom fibers and the lift infimum is a real minimization,
    while the mean term keeps the update measure-dependent.
    """
    stages = int(rng.integers(1, 3))
    pools = [sorted(rng.choice(4, size=int(rng.integers(2, 5)), replace=False))
             for _ in range(stages + 1)]
    all_paths = set()
    while len(all_paths) < min(8, int(np.prod([len(p) for p in pools]))):
        all_paths.add(tuple(int(pool[rng.integers(0, len(pool))]) for pool in pools))
    support = sorted(all_paths)
    gamma0 = DiscreteDistribution.from_weights(support, rng.dirichlet(np.ones(len(support))))

    def stage_map(t, x, marginal, y):
        mean = sum(w * float(a) for a, w in marginal.items())
        return int((x + y % 2 + round(2.0 * mean)) % 3)

    spec = noise_systems.StagedSystemSpec(
        stages=stages, initial_map=lambda y: int(y % 2), stage_map=stage_map
    )
    tilt = rng.dirichlet(np.ones(len(support)))
    gamma_tilted = DiscreteDistribution.from_weights(support, tilt)
    eta = noise_systems.mckean_vlasov_law(gamma_tilted, spec)
    return eta, gamma0, spec


def random_gaussian_candidate(rng: np.random.Generator) -> GaussianMeasure:
    mean = rng.normal(size=2)
    shape = rng.normal(size=(2, 2))
    return GaussianMeasure(mean, shape @ shape.T + 0.3 * np.eye(2))


def random_linear_ito_spec(rng: np.random.Generator) -> ito_euler.ItoSpec:
    d = int(rng.integers(1, 3))
    coefficients = ito_euler.LinearCoefficients(
        rng.uniform(-1, 1, size=(d, d)),
        rng.uniform(-1, 1, size=(d, d)),
        rng.uniform(-1, 1, size=d),
        rng.uniform(0.5, 1.5) * np.eye(d) + rng.uniform(-0.2, 0.2, size=(d, d)),
    )
    return ito_euler.ItoSpec(d, d, rng.uniform(-1, 1, size=d), 1.0, coefficients)


# ---------------------------------------------------------------------------
# identity suite
# ---------------------------------------------------------------------------

def identity_suite(seed: int = 2024, mutation_scale: float = 0.0) -> RateReport:
    """Run every cross-module identity at fixed seeds; one row per identity.

    ``mutation_scale`` tilts the reference side of the contraction identity
    (fault injection): any nonzero value must make the suite fail.
    """
    rows = []

    def record(name, instances, deviation, tolerance):
        rows.append((name, instances, deviation, tolerance, deviation <= tolerance))

    rng = np.random.default_rng([seed, 1])
    closed, grid = 0.0, 0.0
    for _ in range(50):
        eta, gamma0, psi = random_contraction_instance(rng)
        direct = relative_entropy(eta, _tilted(pushforward(gamma0, psi), mutation_scale))
        lifted = relative_entropy(optimal_lift(eta, gamma0, psi), gamma0)
        closed = max(closed, abs(direct - lifted))
        grid = max(grid, abs(lifted - brute_force_lift_infimum(eta, gamma0, psi, 40)))
    record("entropy_contraction_closed_form", 50, closed, 1e-12)
    record("entropy_contraction_grid_oracle", 50, grid, 1e-4)

    rng = np.random.default_rng([seed, 2])
    spec = toy_model.ToyModelSpec.standard("tanh", 0.9)
    deviation = 0.0
    for _ in range(100):
        values = toy_model.rate_function(random_gaussian_candidate(rng), spec)
        deviation = max(deviation, abs(values.tilt_form - values.entropy_form))
    record("toy_rate_two_forms", 100, deviation, 1e-9)

    rng = np.random.default_rng([seed, 3])
    deviation = 0.0
    for _ in range(20):
        eta, gamma0, staged = random_staged_instance(rng)
        entropy_form = noise_systems.rate_entropy_form(eta, gamma0, staged)
        contraction = noise_systems.rate_contraction_form(eta, gamma0, staged, 40)
        deviation = max(deviation, abs(entropy_form - contraction))
    record("staged_rate_two_forms", 20, deviation, 1e-4)

    rng = np.random.default_rng([seed, 4])
    deviation = 0.0
    for _ in range(10):
        spec_ito = random_linear_ito_spec(rng)
        for steps in (8, 32):
            grid_k = ito_euler.EulerGrid.for_horizon(spec_ito.horizon, steps)
            flow = ito_euler.mckean_vlasov_flow(spec_ito, grid_k)
            shift = np.cumsum(
                rng.uniform(-0.5, 0.5, size=(steps, spec_ito.dim)), axis=0
            ) * grid_k.step
            target = flow.law.with_means(flow.law.marginal_means + shift)
            entropy_form = ito_euler.rate_entropy_form(target, spec_ito, grid_k)
            variational = ito_euler.minimal_control_energy(target, spec_ito, grid_k)
            deviation = max(deviation, abs(entropy_form - variational.value))
    record("control_energy_vs_entropy", 20, deviation, 1e-6)

    rng = np.random.default_rng([seed, 5])
    deviation = 0.0
    for _ in range(100):
        steps = int(rng.integers(4, 33))
        grid_k = ito_euler.EulerGrid.for_horizon(float(rng.uniform(0.5, 2.0)), steps)
        control = ito_euler.ControlPath(rng.uniform(-3, 3, size=(steps, int(rng.integers(1, 3)))))
        deviation = max(
            deviation,
            abs(ito_euler.wiener_shift_entropy(control, grid_k) - control.energy(grid_k)),
        )
    record("wiener_shift_telescope", 100, deviation, 1e-12)

    passed = all(row[4] for row in rows)
    return RateReport(
        name="identity_suite",
        columns=("identity", "instances", "max_deviation", "tolerance", "pass"),
        rows=rows,
        passed=passed,
        notes=(f"mutation_scale={mutation_scale!r}",),
    )


def _tilted(measure: DiscreteDistribution, scale: float) -> DiscreteDistribution:
    """Multiplicative exponential tilt (fault injection); identity at scale 0."""
    if scale == 0.0:
        return measure
    weights = measure.weights * np.exp(scale * np.arange(len(measure)))
    weights = weights / weights.sum()
    return DiscreteDistribution(zip(measure.points, weights))


# ---------------------------------------------------------------------------
# law-of-large-numbers trend
# ---------------------------------------------------------------------------

def lln_trend(cfg: dict, systems=None, n_schedule=None, replications=None, seed=None):
    """Seed-averaged distance between empirical and limit final marginals per N.

    Both marginals are projected onto one fixed grid per system (the limit
    marginal via exact cell masses, the empirical one by nearest-grid-point
    rounding) so the bounded-Lipschitz program stays within its support cap
    and distances are comparable across N.  Passes when every system's
    distance sequence is strictly decreasing.

    Returns ``(report, svg_document)``.
    """
    lln = cfg["lln"]
    systems = systems if systems is not None else lln["systems"]
    n_schedule = n_schedule if n_schedule is not None else lln["n_schedule"]
    replications = replications if replications is not None else lln["replications"]
    seed = seed if seed is not None else cfg["seed"]
    grid_points = lln["grid_points"]
    halfwidth = lln["grid_halfwidth"]

    rows = []
    series = []
    passed = True
    for system in systems:
        sampler, limit_mean, limit_var = _final_marginal_model(cfg, system)
        sd = math.sqrt(limit_var)
        grid = np.linspace(limit_mean - halfwidth * sd, limit_mean + halfwidth * sd, grid_points)
        limit_marginal = discretize_gaussian_1d(limit_mean, limit_var, grid)
        means = []
        for n in n_schedule:
            distances = []
            for replication in range(replications):
                run_seed = _derived_seed(seed, system, n, replication)
                values = sampler(n, run_seed)
                empirical = _project_to_grid(values, grid)
                distances.append(bounded_lipschitz_distance(empirical, limit_marginal))
            mean_distance = float(np.mean(distances))
            means.append(mean_distance)
            rows.append((system, n, replications, mean_distance))
        decreasing = all(b < a for a, b in zip(means, means[1:]))
        passed = passed and decreasing
        series.append((system, list(n_schedule), means))
    svg = line_plot_svg(
        "Empirical-to-limit distance vs particle count",
        "particles N",
        "mean bounded-Lipschitz distance",
        series,
        log_x=True,
        log_y=True,
    )
    report = RateReport(
        name="lln_trend",
        columns=("system", "N", "replications", "mean_bl_distance"),
        rows=rows,
        passed=passed,
        notes=tuple(
            f"{label}: " + " > ".join(f"{v:.5f}" for v in means)
            for label, _, means in series
        ),
    )
    return report, svg


def _derived_seed(seed: int, system: str, n: int, replication: int) -> int:
    tag = sum(ord(c) for c in system)
    return int(np.random.SeedSequence([seed, tag, n, replication]).generate_state(1)[0])


def _final_marginal_model(cfg: dict, system: str):
    """Returns (sampler(n, seed) -> final values, limit mean, limit variance)."""
    from .config import build_ito_spec, build_toy_spec

    if system == "toy":
        spec = build_toy_spec(cfg)
        limit = toy_model.mckean_vlasov(spec)

        def sample(n, run_seed):
            paths, _ = toy_model.simulate(spec, n, run_seed)
            return paths[:, 1]

        return sample, float(limit.mean[1]), float(limit.covariance[1, 1])
    if system == "ito":
        spec = build_ito_spec(cfg)
        if spec.dim != 1:
            raise DomainError("the LLN trend uses scalar diffusion specs")
        grid = ito_euler.EulerGrid.for_horizon(spec.horizon, int(cfg["ito"]["steps"]))
        flow = ito_euler.mckean_vlasov_flow(spec, grid)
        limit_mean = float(flow.flow_means[-1, 0])
        limit_var = float(flow.law.marginal_covariance(grid.steps - 1)[0, 0])

        def sample(n, run_seed):
            run = ito_euler.simulate(spec, grid, n, run_seed)
            return run.paths[:, -1, 0]

        return sample, limit_mean, limit_var
    raise DomainError(f"unknown LLN system {system!r}")


def _project_to_grid(values, grid: np.ndarray) -> DiscreteDistribution:
    step = grid[1] - grid[0]
    indices = np.clip(np.rint((np.asarray(values) - grid[0]) / step), 0, len(grid) - 1)
    counts = np.bincount(indices.astype(int), minlength=len(grid))
    return DiscreteDistribution.from_counts(
        {float(grid[i]): int(c) for i, c in enumerate(counts) if c > 0}, len(values)
    )


# ---------------------------------------------------------------------------
# plumbing experiments for the CLI
# ---------------------------------------------------------------------------

def run_simulate(cfg: dict, out_dir: str):
    """Simulate the configured system; write its empirical measure as text."""
    import os

    from .config import build_chain_spec, build_ito_spec, build_toy_spec

    system = cfg["simulate"]["system"]
    os.makedirs(out_dir, exist_ok=True)
    if system == "toy":
        spec = build_toy_spec(cfg)
        _, empirical = toy_model.simulate(spec, int(cfg["toy"]["N"]), int(cfg["toy"]["seed"]))
        n, seed = cfg["toy"]["N"], cfg["toy"]["seed"]
    elif system == "chain":
        spec = build_chain_spec(cfg)
        empirical = meanfield_chain.chain_simulate(
            spec, int(cfg["chain"]["N"]), int(cfg["chain"]["seed"])
        ).to_measure()
        n, seed = cfg["chain"]["N"], cfg["chain"]["seed"]
    else:
        spec = build_ito_spec(cfg)
        grid = ito_euler.EulerGrid.for_horizon(spec.horizon, int(cfg["ito"]["steps"]))
        run = ito_euler.simulate(spec, grid, int(cfg["ito"]["N"]), int(cfg["ito"]["seed"]))
        empirical = run.final_marginal()
        n, seed = cfg["ito"]["N"], cfg["ito"]["seed"]
    measure_path = os.path.join(out_dir, f"{system}_empirical.txt")
    with open(measure_path, "w", encoding="utf-8") as handle:
        handle.write(empirical.to_tabular())
    report = RateReport(
        name="simulate",
        columns=("system", "N", "seed", "atoms", "measure_file"),
        rows=[(system, n, seed, len(empirical), measure_path)],
        passed=True,
    )
    return report


def run_rate(cfg: dict) -> RateReport:
    """Evaluate the configured rate-function instances across the models."""
    from .config import build_chain_spec, build_ito_spec, build_toy_spec

    rows = []
    toy_spec = build_toy_spec(cfg)
    if not toy_spec.is_indicator:
        theta = GaussianMeasure(cfg["rate"]["toy_mean"], cfg["rate"]["toy_cov"])
        values = toy_model.rate_function(theta, toy_spec)
        rows.append(("toy", "tilt_form", values.tilt_form))
        rows.append(("toy", "entropy_form", values.entropy_form))

    chain_spec = build_chain_spec(cfg)
    eta_file = cfg["rate"]["chain_eta_file"]
    if eta_file:
        with open(eta_file, "r", encoding="utf-8") as handle:
            eta = DiscreteDistribution.from_tabular(handle.read())
        rows.append(("chain", "from_file", meanfield_chain.rate_function(eta, chain_spec)))
    else:
        limit = meanfield_chain.mckean_vlasov(chain_spec).path_law
        rows.append(("chain", "mckean_vlasov_law", meanfield_chain.rate_function(limit, chain_spec)))

    ito_spec = build_ito_spec(cfg)
    if ito_spec.is_linear and ito_spec.dim == 1:
        grid = ito_euler.EulerGrid.for_horizon(ito_spec.horizon, int(cfg["ito"]["steps"]))
        flow = ito_euler.mckean_vlasov_flow(ito_spec, grid)
        shift = float(cfg["rate"]["ito_shift"]) * grid.times()[1:].reshape(-1, 1)
        target = flow.law.with_means(flow.law.marginal_means + shift)
        rows.append(("ito", "entropy_form", ito_euler.rate_entropy_form(target, ito_spec, grid)))
        solution = ito_euler.minimal_control_energy(target, ito_spec, grid)
        rows.append(("ito", "variational", solution.value))
    return RateReport(
        name="rate",
        columns=("model", "instance", "value"),
        rows=rows,
        passed=True,
    )
