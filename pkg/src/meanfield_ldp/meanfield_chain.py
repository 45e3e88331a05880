"""Finite-state mean-field Markov chains with exact path-type combinatorics.

Particles move on a finite state set; at each stage every particle applies a
row of the transition matrix ``A(t, p)`` evaluated at the current empirical
state distribution ``p``, using inverse-CDF sampling from a uniform noise
coordinate.  Because particles are exchangeable, the probability of an
empirical *path type* (the vector of counts per path) factorizes into a
multinomial coefficient times a product of transition probabilities evaluated
at the type's own marginals.  That exact formula is the finite-sample oracle
against which the relative-entropy rate function is compared: for every
feasible type,

    | -(1/N) log P(type)  -  rate(type) |  <=  M^(T+1) * log(N+1) / N,

the classical method-of-types bound with the path alphabet in the exponent.

All probabilities are computed in log space with exact log-factorials;
values below exp(-700) are meaningful only in log form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .errors import CapacityError, DomainError
from .measures import DiscreteDistribution, relative_entropy
from .noise_systems import StagedSystemSpec, simulate_particles

#: capacity limits for exact enumeration
MAX_PARTICLES = 200
MAX_PATH_ALPHABET = 64
MAX_ENUMERATED_TYPES = 2_000_000

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class MeanFieldChainSpec:
    """Finite-state chain: states, initial law, measure-dependent transitions.

    Attributes
    ----------
    states:
        State labels (hashable, typically strings).
    initial:
        Probability vector over ``states``.
    transition:
        ``(t, p) -> (M, M) row-stochastic matrix`` where ``p`` is the
        empirical state distribution as a vector aligned with ``states``.
        Every returned matrix is validated (rows nonnegative, summing to one
        within 1e-12): a family that fails validation is a broken spec, and
        the error surfaces at matrix evaluation, not inside the sampling step.
    horizon:
        Number of transitions ``T >= 0``; paths have ``T + 1`` coordinates.
    """

    states: tuple
    initial: np.ndarray
    transition: Callable[[int, np.ndarray], np.ndarray]
    horizon: int

    def __init__(self, states, initial, transition, horizon):
        states = tuple(states)
        initial = np.asarray(initial, dtype=float).copy()
        if initial.shape != (len(states),):
            raise DomainError("initial law must be a vector over the states")
        if np.any(initial < 0) or abs(float(initial.sum()) - 1.0) > ROW_SUM_TOL:
            raise DomainError("initial law is not a probability vector")
        if horizon < 0:
            raise DomainError("horizon must be nonnegative")
        initial.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "horizon", int(horizon))

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self, state) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise DomainError(f"unknown state {state!r}") from None


def transition_matrix(spec: MeanFieldChainSpec, t: int, p) -> np.ndarray:
    """Evaluate and validate ``A(t, p)``; ``p`` may be a vector or a measure."""
    if isinstance(p, DiscreteDistribution):
        p = state_vector(p, spec)
    p = np.asarray(p, dtype=float)
    matrix = np.asarray(spec.transition(t, p), dtype=float)
    m = spec.size
    if matrix.shape != (m, m):
        raise DomainError(f"transition matrix has shape {matrix.shape}, expected {(m, m)}")
    if np.any(matrix < 0):
        raise DomainError(f"negative transition probability at stage {t}")
    row_sums = matrix.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > ROW_SUM_TOL):
        raise DomainError(f"rows of A({t}, p) do not sum to one: {row_sums}")
    return matrix


def state_vector(marginal: DiscreteDistribution, spec: MeanFieldChainSpec) -> np.ndarray:
    """Probability vector over ``spec.states`` from a measure on state labels."""
    return np.array([marginal.weight(s) for s in spec.states])


def _inverse_cdf(row: np.ndarray, y: float) -> int:
    """Index of the half-open cumulative cell ``(sum_{k<j}, sum_{k<=j}]`` holding ``y``.

    ``y = 0`` is assigned to the first index with positive probability (the
    left endpoints are all open, so zero belongs to no cell; this choice is a
    measure-zero convention).
    """
    if not 0.0 <= y <= 1.0:
        raise DomainError(f"uniform noise {y!r} outside [0, 1]")
    if y == 0.0:
        for j, a in enumerate(row):
            if a > 0.0:
                return j
        raise DomainError("row has no positive entry")
    cumulative = np.cumsum(row)
    j = int(np.searchsorted(cumulative, y, side="left"))
    return min(j, len(row) - 1)


def initial_state(y: float, spec: MeanFieldChainSpec):
    """Inverse-CDF draw from the initial law."""
    return spec.states[_inverse_cdf(spec.initial, y)]


def chain_step(t: int, x, p, y: float, spec: MeanFieldChainSpec):
    """One particle's move at stage ``t`` (uses the stage ``t - 1`` matrix)."""
    matrix = transition_matrix(spec, t - 1, p)
    row = matrix[spec.index(x)]
    return spec.states[_inverse_cdf(row, y)]


# ---------------------------------------------------------------------------
# path types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathType:
    """Exact empirical path counts: ``counts[i]`` particles followed ``paths[i]``."""

    paths: tuple
    counts: tuple
    total: int

    def __init__(self, counted, total=None):
        items = [(tuple(path), int(c)) for path, c in dict(counted).items()]
        if any(c < 0 for _, c in items):
            raise DomainError("negative path count")
        n = sum(c for _, c in items)
        if total is not None and n != int(total):
            raise DomainError(f"counts sum to {n}, expected {total}")
        object.__setattr__(self, "paths", tuple(p for p, _ in items))
        object.__setattr__(self, "counts", tuple(c for _, c in items))
        object.__setattr__(self, "total", n)

    def items(self):
        return zip(self.paths, self.counts)

    def to_measure(self) -> DiscreteDistribution:
        positive = {p: c for p, c in self.items() if c > 0}
        return DiscreteDistribution.from_counts(positive, self.total)

    def normalized(self) -> tuple:
        """Order-free exact key ``((path, count/total), ...)`` for cross-N matching."""
        return tuple(
            sorted((p, Fraction(c, self.total)) for p, c in self.items() if c > 0)
        )


def chain_simulate(spec: MeanFieldChainSpec, n: int, seed: int) -> PathType:
    """Simulate ``n`` particles jointly and return their exact path type.

    Each stage's empirical state distribution feeds the next transition
    matrix.  Noise streams are per-particle (derived from ``(seed, i)``), so
    the run is reproducible and matches the staged-system embedding draw for
    draw.
    """
    if n < 1:
        raise DomainError("need at least one particle")
    from .noise_systems import particle_rng

    noise = [tuple(float(v) for v in particle_rng(seed, i).random(spec.horizon + 1))
             for i in range(n)]
    states = [initial_state(y[0], spec) for y in noise]
    paths = [(s,) for s in states]
    for t in range(1, spec.horizon + 1):
        counts = np.zeros(spec.size)
        for s in states:
            counts[spec.index(s)] += 1.0
        p = counts / n
        matrix = transition_matrix(spec, t - 1, p)
        states = [
            spec.states[_inverse_cdf(matrix[spec.index(s)], y[t])]
            for s, y in zip(states, noise)
        ]
        paths = [path + (s,) for path, s in zip(paths, states)]
    counted: dict = {}
    for path in paths:
        counted[path] = counted.get(path, 0) + 1
    return PathType(counted, n)


# ---------------------------------------------------------------------------
# frozen chain law and exact type probabilities
# ---------------------------------------------------------------------------

def _marginal_vectors(eta: DiscreteDistribution, spec: MeanFieldChainSpec):
    return [
        state_vector(eta.coordinate_marginal(t), spec) for t in range(spec.horizon)
    ]


def frozen_chain_law(eta: DiscreteDistribution, spec: MeanFieldChainSpec) -> DiscreteDistribution:
    """Law of the time-inhomogeneous chain with matrices frozen at ``eta``'s marginals.

    Path probability ``q(x_0) * prod_t A(t, eta(t))[x_t, x_{t+1}]`` over all
    state paths; zero-probability paths are omitted from the support.
    """
    matrices = [
        transition_matrix(spec, t, p) for t, p in enumerate(_marginal_vectors(eta, spec))
    ]
    pairs = []
    for path in product(spec.states, repeat=spec.horizon + 1):
        prob = float(spec.initial[spec.index(path[0])])
        for t in range(spec.horizon):
            if prob == 0.0:
                break
            prob *= float(matrices[t][spec.index(path[t]), spec.index(path[t + 1])])
        if prob > 0.0:
            pairs.append((path, prob))
    total = sum(w for _, w in pairs)
    return DiscreteDistribution((p, w / total) for p, w in pairs)


def _check_capacity(spec: MeanFieldChainSpec, n: int):
    if n > MAX_PARTICLES:
        raise CapacityError(f"exact type arithmetic capped at N = {MAX_PARTICLES}, got {n}")
    alphabet = spec.size ** (spec.horizon + 1)
    if alphabet > MAX_PATH_ALPHABET:
        raise CapacityError(
            f"path alphabet {alphabet} exceeds the cap {MAX_PATH_ALPHABET}"
        )


def exact_type_log_probability(path_type: PathType, spec: MeanFieldChainSpec) -> float:
    """Exact ``log P(empirical path type = path_type)`` for ``N`` particles.

    Exchangeability makes every particle configuration with this type equally
    likely; the probability is the multinomial coefficient times the product
    of per-path probabilities evaluated at the type's own stage marginals.
    Returns ``-inf`` for infeasible types.
    """
    _check_capacity(spec, path_type.total)
    n = path_type.total
    measure = path_type.to_measure()
    matrices = [
        transition_matrix(spec, t, p)
        for t, p in enumerate(_marginal_vectors(measure, spec))
    ]
    log_prob = math.lgamma(n + 1)
    for path, count in path_type.items():
        if count == 0:
            continue
        log_prob -= math.lgamma(count + 1)
        q0 = float(spec.initial[spec.index(path[0])])
        if q0 == 0.0:
            return -math.inf
        log_path = math.log(q0)
        for t in range(spec.horizon):
            a = float(matrices[t][spec.index(path[t]), spec.index(path[t + 1])])
            if a == 0.0:
                return -math.inf
            log_path += math.log(a)
        log_prob += count * log_path
    return log_prob


def exact_type_probability(path_type: PathType, spec: MeanFieldChainSpec) -> float:
    """``exp`` of :func:`exact_type_log_probability` (may underflow below exp(-700))."""
    return math.exp(exact_type_log_probability(path_type, spec))


def rate_function(nu, spec: MeanFieldChainSpec) -> float:
    """Relative entropy of a path law w.r.t. its own frozen chain law."""
    eta = nu.to_measure() if isinstance(nu, PathType) else nu
    return relative_entropy(eta, frozen_chain_law(eta, spec))


# ---------------------------------------------------------------------------
# decay-bound verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TypeDecayRow:
    """Per-type comparison of the exact finite-N decay against the rate."""

    path_type: PathType
    log_probability: float
    empirical_rate: float
    rate: float
    gap: float
    bound: float
    within_bound: bool


def feasible_paths(spec: MeanFieldChainSpec):
    """State paths with a positively-charged initial state (others never occur)."""
    return [
        path
        for path in product(spec.states, repeat=spec.horizon + 1)
        if spec.initial[spec.index(path[0])] > 0.0
    ]


def decay_bound_report(spec: MeanFieldChainSpec, n: int) -> list[TypeDecayRow]:
    """Check ``|-(1/N) log P - rate| <= M^(T+1) log(N+1)/N`` for every feasible type.

    Types with probability zero (a charged path becomes impossible at the
    type's own marginals) are skipped; they have infinite rate as well.
    """
    _check_capacity(spec, n)
    paths = feasible_paths(spec)
    n_types = math.comb(n + len(paths) - 1, len(paths) - 1)
    if n_types > MAX_ENUMERATED_TYPES:
        raise CapacityError(
            f"{n_types} types at N = {n} exceed the enumeration cap {MAX_ENUMERATED_TYPES}"
        )
    bound = spec.size ** (spec.horizon + 1) * math.log(n + 1) / n
    rows = []
    for counts in _compositions(n, len(paths)):
        path_type = PathType(dict(zip(paths, counts)), n)
        log_prob = exact_type_log_probability(path_type, spec)
        if log_prob == -math.inf:
            continue
        empirical_rate = -log_prob / n
        rate = rate_function(path_type, spec)
        gap = abs(empirical_rate - rate)
        rows.append(
            TypeDecayRow(
                path_type=path_type,
                log_probability=log_prob,
                empirical_rate=empirical_rate,
                rate=rate,
                gap=gap,
                bound=bound,
                within_bound=gap <= bound,
            )
        )
    return rows


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


# ---------------------------------------------------------------------------
# McKean-Vlasov law and the staged-system embedding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainMcKeanVlasov:
    """Limit marginal flow and the limiting path law."""

    marginal_flow: tuple
    path_law: DiscreteDistribution


def mckean_vlasov(spec: MeanFieldChainSpec) -> ChainMcKeanVlasov:
    """Limit of the empirical path measures: marginals follow ``p <- A(t, p)' p``."""
    flow = [np.array(spec.initial)]
    for t in range(spec.horizon):
        matrix = transition_matrix(spec, t, flow[-1])
        flow.append(matrix.T @ flow[-1])
    matrices = [transition_matrix(spec, t, flow[t]) for t in range(spec.horizon)]
    pairs = []
    for path in product(spec.states, repeat=spec.horizon + 1):
        prob = float(spec.initial[spec.index(path[0])])
        for t in range(spec.horizon):
            if prob == 0.0:
                break
            prob *= float(matrices[t][spec.index(path[t]), spec.index(path[t + 1])])
        if prob > 0.0:
            pairs.append((path, prob))
    total = sum(w for _, w in pairs)
    law = DiscreteDistribution((p, w / total) for p, w in pairs)
    return ChainMcKeanVlasov(marginal_flow=tuple(flow), path_law=law)


def as_staged_spec(spec: MeanFieldChainSpec) -> StagedSystemSpec:
    """The chain as a staged system driven by uniform [0, 1] noise coordinates."""
    if spec.horizon < 1:
        raise DomainError("staged embedding needs horizon >= 1")

    def stage(t, x, marginal, y):
        p = marginal.cached(
            ("state_vector", spec.states), lambda: state_vector(marginal, spec)
        )
        return chain_step(t, x, p, y, spec)

    return StagedSystemSpec(
        stages=spec.horizon,
        initial_map=lambda y: initial_state(y, spec),
        stage_map=stage,
    )


def uniform_noise_sampler(stages: int):
    """Sampler drawing a ``(stages + 1)``-tuple of uniforms, matching the chain draws."""

    def sample(rng: np.random.Generator) -> tuple:
        return tuple(float(v) for v in rng.random(stages + 1))

    return sample


def simulate_staged(spec: MeanFieldChainSpec, n: int, seed: int):
    """Route the chain through the generic particle simulator (same seeds)."""
    return simulate_particles(
        uniform_noise_sampler(spec.horizon), as_staged_spec(spec), n, seed
    )


def discretized_noise(spec: MeanFieldChainSpec) -> DiscreteDistribution:
    """Finite noise law equivalent to uniform coordinates for this chain.

    Along the limit marginal flow, each stage's inverse-CDF map is piecewise
    constant with cutpoints taken from the cumulative rows of the stage
    matrix (union over rows, so the cell a point falls in determines every
    row's image simultaneously).  Placing one atom at each cell midpoint with
    the cell length as weight therefore reproduces the exact McKean-Vlasov
    law through the staged recursion.
    """
    flow = mckean_vlasov(spec).marginal_flow
    coordinate_cells = [_cells(np.cumsum(spec.initial))]
    for t in range(spec.horizon):
        matrix = transition_matrix(spec, t, flow[t])
        cuts = np.concatenate([np.cumsum(row) for row in matrix])
        coordinate_cells.append(_cells(cuts))
    pairs = [((), 1.0)]
    for cells in coordinate_cells:
        pairs = [
            (atom + (mid,), weight * length)
            for atom, weight in pairs
            for mid, length in cells
        ]
    total = sum(w for _, w in pairs)
    return DiscreteDistribution((p, w / total) for p, w in pairs)


def _cells(cuts: np.ndarray):
    edges = sorted(set([0.0, 1.0] + [float(c) for c in cuts if 0.0 < c < 1.0]))
    cells = []
    for left, right in zip(edges, edges[1:]):
        if right > left:
            cells.append(((left + right) / 2.0, right - left))
    return cells
