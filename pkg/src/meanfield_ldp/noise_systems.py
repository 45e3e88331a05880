"""Staged noise-driven particle systems and their McKean-Vlasov fixed points.

A system is specified by a stage count ``T``, an initial map sending a noise
point to a state, and a stage map ``(t, state, marginal, noise) -> state``
where ``marginal`` is the time-``(t-1)`` marginal of the path law the system
is driven by.  Path measures and noise-path measures are
:class:`~meanfield_ldp.measures.DiscreteDistribution` instances whose atoms
are ``(T+1)``-tuples.

Core operations:

* :func:`frozen_path_law` -- image of a noise law under the path map with the
  measure argument frozen at a candidate path law.
* :func:`mckean_vlasov_law` -- the unique fixed point of that operator for a
  given noise law, computed by the exact forward recursion on marginals.
* :func:`solve_fixed_point` -- damped fixed-point iteration with a
  total-variation residual, for cross-checking the recursion.
* :func:`simulate_particles` -- joint simulation of ``N`` particles whose
  stage updates see the running empirical marginal; empirical measures carry
  exact integer counts, so the empirical path law coincides *exactly* with
  the McKean-Vlasov law of the empirical noise law.
* :func:`rate_entropy_form` / :func:`rate_contraction_form` -- the large
  deviation rate of a candidate path law, either as relative entropy with
  respect to its own frozen law or as the brute-force infimum of noise-side
  relative entropies over all lifts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError, TrajectoryDivergedError
from .measures import (
    DiscreteDistribution,
    MeasurableMap,
    _canon_and_key,
    _finalize_merge,
    brute_force_lift_infimum,
    mixture,
    pushforward,
    relative_entropy,
    total_variation,
)


@dataclass(frozen=True)
class StagedSystemSpec:
    """Discrete-time system driven stagewise by noise and the running marginal.

    Attributes
    ----------
    stages:
        Number of transitions ``T >= 1``; paths have ``T + 1`` coordinates.
    initial_map:
        ``noise_point -> state`` for time 0.
    stage_map:
        ``(t, state, marginal, noise_point) -> state`` for ``t = 1..T``; the
        marginal argument is a DiscreteDistribution over time-``(t-1)``
        states.  Only this staged shape is supported: a system whose update
        needs the joint path law (not just running marginals) has no
        stage-by-stage solution and is rejected by construction.
    """

    stages: int
    initial_map: Callable
    stage_map: Callable

    def __post_init__(self):
        if self.stages < 1:
            raise DomainError("a staged system needs at least one stage")


def validate_path_measure(dist: DiscreteDistribution, stages: int):
    for point in dist.points:
        if not isinstance(point, tuple) or len(point) != stages + 1:
            raise DomainError(
                f"path atoms must be tuples of length {stages + 1}, got {point!r}"
            )


def path_map(spec: StagedSystemSpec, marginals: Sequence[DiscreteDistribution], noise_path):
    """Evaluate the path map on one noise path given the stagewise marginals."""
    state = spec.initial_map(noise_path[0])
    path = [state]
    for t in range(1, spec.stages + 1):
        state = spec.stage_map(t, state, marginals[t - 1], noise_path[t])
        path.append(state)
    return tuple(path)


def frozen_path_law(
    gamma: DiscreteDistribution, mu: DiscreteDistribution, spec: StagedSystemSpec
) -> DiscreteDistribution:
    """Image of the noise law ``gamma`` under the path map frozen at ``mu``.

    The stage-``t`` update reads the time-``(t-1)`` marginal of ``mu``; the
    output is the path law of one particle driven by ``gamma`` in that frozen
    environment.
    """
    validate_path_measure(gamma, spec.stages)
    validate_path_measure(mu, spec.stages)
    marginals = [mu.coordinate_marginal(t) for t in range(spec.stages)]
    return pushforward(gamma, lambda y: path_map(spec, marginals, y))


def marginal_flow(gamma: DiscreteDistribution, spec: StagedSystemSpec):
    """The per-stage state marginals of the McKean-Vlasov law of ``gamma``.

    Built by the forward recursion: each stage pushes the noise law through
    the partial path map evaluated at the marginals already computed.
    """
    validate_path_measure(gamma, spec.stages)
    flow = []
    partial = [(spec.initial_map(y[0]),) for y in gamma.points]
    flow.append(_merge_states(gamma, [p[0] for p in partial]))
    for t in range(1, spec.stages + 1):
        partial = [
            path + (spec.stage_map(t, path[-1], flow[t - 1], y[t]),)
            for path, y in zip(partial, gamma.points)
        ]
        flow.append(_merge_states(gamma, [p[-1] for p in partial]))
    return flow, partial


def mckean_vlasov_law(gamma: DiscreteDistribution, spec: StagedSystemSpec) -> DiscreteDistribution:
    """The unique path law ``mu`` with ``frozen_path_law(gamma, mu, spec) == mu``.

    Computed constructively: the forward recursion determines each stage
    marginal from the previous ones, and the full law is the pushforward of
    ``gamma`` under the resulting path map.  The staged structure is what
    makes the fixed point unique.
    """
    _, paths = marginal_flow(gamma, spec)
    return _merge_states(gamma, paths)


def _merge_states(gamma: DiscreteDistribution, states):
    merged: dict = {}
    use_counts = gamma.counts is not None
    for pos, state in enumerate(states):
        canonical, key = _canon_and_key(state)
        entry = merged.get(key)
        if entry is None:
            merged[key] = entry = [canonical, 0.0, 0]
        entry[1] += gamma.weights[pos]
        if use_counts:
            entry[2] += gamma.counts[pos]
    return _finalize_merge(merged, use_counts, gamma.denominator)


@dataclass(frozen=True)
class FixedPointReport:
    """Outcome of the fixed-point iteration."""

    solution: DiscreteDistribution
    iterations: int
    residual: float


def solve_fixed_point(
    gamma: DiscreteDistribution,
    spec: StagedSystemSpec,
    tol: float = 1e-10,
    max_iter: int = 100,
    damping: float = 0.0,
    initial: DiscreteDistribution | None = None,
) -> FixedPointReport:
    """Iterate ``mu <- (1 - damping) * Psi(mu) + damping * mu`` to a fixed point.

    The residual is the total-variation gap between the iterate and its image.
    With ``damping = 0`` the iteration terminates exactly after at most
    ``T + 1`` steps on staged systems (each step pins one more marginal);
    positive damping converges only geometrically.

    Raises
    ------
    ConvergenceError
        If the residual is still above ``tol`` after ``max_iter`` iterations;
        the exception carries the last residual.
    """
    if tol <= 0:
        raise DomainError("tolerance must be positive")
    if initial is None:
        y0 = gamma.points[0]
        x0 = spec.initial_map(y0[0])
        initial = DiscreteDistribution.dirac((x0,) * (spec.stages + 1))
    mu = frozen_path_law(gamma, initial, spec)
    for iteration in range(1, max_iter + 1):
        image = frozen_path_law(gamma, mu, spec)
        residual = total_variation(mu, image)
        if residual < tol:
            return FixedPointReport(solution=mu, iterations=iteration, residual=residual)
        mu = image if damping == 0.0 else mixture(image, mu, damping)
    raise ConvergenceError(
        f"no fixed point within {max_iter} iterations (residual {residual:.3e})",
        residual=residual,
    )


# ---------------------------------------------------------------------------
# particle simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParticleSimulation:
    """Joint particle trajectories plus both empirical measures (exact counts)."""

    paths: tuple
    noise_paths: tuple
    empirical_paths: DiscreteDistribution
    empirical_noise: DiscreteDistribution


def particle_rng(seed: int, particle: int) -> np.random.Generator:
    """Per-particle stream: generator seeded by the pair ``(seed, particle)``.

    The draw sequence of particle ``i`` depends only on ``(seed, i)``, so
    neither the particle count nor any parallel execution order changes it.
    """
    return np.random.default_rng([int(seed), int(particle)])


def simulate_particles(
    noise_sampler: Callable[[np.random.Generator], tuple],
    spec: StagedSystemSpec,
    n: int,
    seed: int,
) -> ParticleSimulation:
    """Simulate ``n`` interacting particles; stage ``t`` sees the running marginal.

    ``noise_sampler`` draws one i.i.d. noise path (a ``(T+1)``-tuple) from a
    per-particle generator.  Replaying with the same seed is bit-identical.
    Empirical weights are integer counts over ``n``, which makes the
    identity ``empirical paths == mckean_vlasov_law(empirical noise)`` exact.
    """
    if n < 1:
        raise DomainError("need at least one particle")
    noise = [tuple(noise_sampler(particle_rng(seed, i))) for i in range(n)]
    states = []
    for i, y in enumerate(noise):
        try:
            states.append(spec.initial_map(y[0]))
        except TrajectoryDivergedError as err:
            err.particle = i
            raise
    paths = [(s,) for s in states]
    for t in range(1, spec.stages + 1):
        marginal = _empirical(states)
        new_states = []
        for i, y in enumerate(noise):
            try:
                new_states.append(spec.stage_map(t, states[i], marginal, y[t]))
            except TrajectoryDivergedError as err:
                err.particle = i
                raise
        states = new_states
        paths = [p + (s,) for p, s in zip(paths, states)]
    return ParticleSimulation(
        paths=tuple(paths),
        noise_paths=tuple(noise),
        empirical_paths=empirical_distribution(paths),
        empirical_noise=empirical_distribution(noise),
    )


def empirical_distribution(values) -> DiscreteDistribution:
    """Counts-backed empirical measure of a sequence (first-occurrence order)."""
    values = list(values)
    merged: dict = {}
    for value in values:
        canonical, key = _canon_and_key(value)
        entry = merged.get(key)
        if entry is None:
            merged[key] = entry = [canonical, 0.0, 0]
        entry[2] += 1
    return _finalize_merge(merged, True, len(values))


def _empirical(states) -> DiscreteDistribution:
    return empirical_distribution(states)


# ---------------------------------------------------------------------------
# rate functions
# ---------------------------------------------------------------------------

def rate_entropy_form(
    eta: DiscreteDistribution, gamma0: DiscreteDistribution, spec: StagedSystemSpec
) -> float:
    """Rate of ``eta``: relative entropy w.r.t. its own frozen path law."""
    return relative_entropy(eta, frozen_path_law(gamma0, eta, spec))


def rate_contraction_form(
    eta: DiscreteDistribution,
    gamma0: DiscreteDistribution,
    spec: StagedSystemSpec,
    grid_resolution: int = 40,
) -> float:
    """Rate of ``eta`` as the infimum of ``R(gamma || gamma0)`` over noise lifts.

    A noise law ``gamma`` has McKean-Vlasov law ``eta`` exactly when pushing
    ``gamma`` through the path map frozen at ``eta`` reproduces ``eta`` (the
    fixed point is unique for staged systems), so the constrained infimum
    reduces to the brute-force lift search under that frozen map.  Returns
    ``math.inf`` when no noise law on the reference support reaches ``eta``.
    """
    validate_path_measure(eta, spec.stages)
    marginals = [eta.coordinate_marginal(t) for t in range(spec.stages)]
    frozen = MeasurableMap.from_table(
        {y: path_map(spec, marginals, y) for y in gamma0.points}
    )
    return brute_force_lift_infimum(eta, gamma0, frozen, grid_resolution)
