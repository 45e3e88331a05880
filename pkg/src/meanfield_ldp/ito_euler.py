"""Euler discretization of weakly interacting diffusions with Gaussian path laws.

The particle system obeys, per Euler stage of width ``h``,

    X(k+1) = X(k) + drift(t_k, X(k), mean_k) * h
                  + sqrt(h) * dispersion(t_k, X(k), mean_k) @ Y(k+1),

where ``mean_k`` is the mean of the empirical (or limiting) state
distribution at stage ``k`` and the ``Y`` are i.i.d. standard normal
vectors.  The simulation routes through the generic staged-system machinery,
so everything proved for staged systems (exact empirical fixed point,
McKean-Vlasov recursion) applies verbatim.

For *linear* coefficient families (drift affine in state and law mean,
constant dispersion) the path law on the grid is an explicit Gaussian on the
stacked grid values, which gives closed forms for

* the McKean-Vlasov flow (``mckean_vlasov_flow``),
* the law with the measure argument frozen at a candidate flow
  (``frozen_law``),
* the rate of a Gaussian candidate as relative entropy w.r.t. its frozen law
  (``rate_entropy_form``),
* the minimal energy ``0.5 * sum |u_k|^2 h`` of a deterministic
  piecewise-constant control steering the controlled limit law onto a
  mean-shift target (``minimal_control_energy``), and
* the relative entropy of a mean-shifted discretized Wiener law
  (``wiener_shift_entropy``), which telescopes to exactly that control
  energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import CapacityError, DomainError, TrajectoryDivergedError
from .measures import DiscreteDistribution, GaussianMeasure, gaussian_relative_entropy
from .noise_systems import (
    ParticleSimulation,
    StagedSystemSpec,
    empirical_distribution,
    simulate_particles,
)


@dataclass(frozen=True)
class EulerGrid:
    """Uniform time grid: ``steps`` cells of width ``step``."""

    step: float
    steps: int

    def __post_init__(self):
        if self.step <= 0 or self.steps < 1:
            raise DomainError("grid needs positive step and at least one cell")

    @classmethod
    def for_horizon(cls, horizon: float, steps: int) -> "EulerGrid":
        return cls(step=horizon / steps, steps=steps)

    @property
    def horizon(self) -> float:
        return self.step * self.steps

    def times(self) -> np.ndarray:
        return self.step * np.arange(self.steps + 1)

    def check_horizon(self, horizon: float):
        if abs(self.horizon - horizon) > 1e-12:
            raise DomainError(
                f"grid horizon {self.horizon!r} does not match spec horizon {horizon!r}"
            )


@dataclass(frozen=True)
class LinearCoefficients:
    """Affine drift ``A x + B mean + c`` with constant dispersion ``S``.

    Constant dispersion is what keeps the grid path law exactly Gaussian;
    state-dependent dispersion would leave the linear family.
    """

    state_matrix: np.ndarray
    mean_matrix: np.ndarray
    offset: np.ndarray
    dispersion: np.ndarray

    def __init__(self, state_matrix, mean_matrix, offset, dispersion):
        a = np.atleast_2d(np.asarray(state_matrix, dtype=float)).copy()
        b = np.atleast_2d(np.asarray(mean_matrix, dtype=float)).copy()
        c = np.atleast_1d(np.asarray(offset, dtype=float)).copy()
        s = np.atleast_2d(np.asarray(dispersion, dtype=float)).copy()
        d = c.size
        if a.shape != (d, d) or b.shape != (d, d) or s.shape[0] != d:
            raise DomainError("inconsistent linear coefficient shapes")
        for arr in (a, b, c, s):
            if not np.all(np.isfinite(arr)):
                raise DomainError("non-finite linear coefficients")
            arr.setflags(write=False)
        object.__setattr__(self, "state_matrix", a)
        object.__setattr__(self, "mean_matrix", b)
        object.__setattr__(self, "offset", c)
        object.__setattr__(self, "dispersion", s)


@dataclass(frozen=True)
class TanhAttraction:
    """Bounded nonlinear drift ``scale * tanh(mean - x)`` with constant dispersion."""

    scale: float
    dispersion: np.ndarray

    def __init__(self, scale, dispersion):
        s = np.atleast_2d(np.asarray(dispersion, dtype=float)).copy()
        s.setflags(write=False)
        object.__setattr__(self, "scale", float(scale))
        object.__setattr__(self, "dispersion", s)


@dataclass(frozen=True)
class ItoSpec:
    """Diffusion-type coefficients, deterministic start, finite horizon."""

    dim: int
    noise_dim: int
    start: np.ndarray
    horizon: float
    coefficients: LinearCoefficients | TanhAttraction

    def __init__(self, dim, noise_dim, start, horizon, coefficients):
        start = np.atleast_1d(np.asarray(start, dtype=float)).copy()
        if start.size != dim:
            raise DomainError("start point has wrong dimension")
        if horizon <= 0:
            raise DomainError("horizon must be positive")
        if coefficients.dispersion.shape != (dim, noise_dim):
            raise DomainError(
                f"dispersion shape {coefficients.dispersion.shape} != {(dim, noise_dim)}"
            )
        start.setflags(write=False)
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "noise_dim", int(noise_dim))
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "horizon", float(horizon))
        object.__setattr__(self, "coefficients", coefficients)
        scalar = None
        if dim == 1 and noise_dim == 1:
            if isinstance(coefficients, LinearCoefficients):
                scalar = (
                    float(coefficients.state_matrix[0, 0]),
                    float(coefficients.mean_matrix[0, 0]),
                    float(coefficients.offset[0]),
                    float(coefficients.dispersion[0, 0]),
                )
            else:
                scalar = (
                    float(coefficients.scale),
                    0.0,
                    0.0,
                    float(coefficients.dispersion[0, 0]),
                )
        object.__setattr__(self, "_scalar", scalar)

    @property
    def is_linear(self) -> bool:
        return isinstance(self.coefficients, LinearCoefficients)

    def drift(self, t: float, x: np.ndarray, mean: np.ndarray) -> np.ndarray:
        co = self.coefficients
        if self.is_linear:
            return co.state_matrix @ x + co.mean_matrix @ mean + co.offset
        return co.scale * np.tanh(mean - x)

    def dispersion(self, t: float, x: np.ndarray, mean: np.ndarray) -> np.ndarray:
        return self.coefficients.dispersion

    @property
    def growth_constant(self) -> float:
        """Declared constant for the sublinear growth bound |drift| <= K(1 + sup|x|)."""
        co = self.coefficients
        if self.is_linear:
            return float(
                np.linalg.norm(co.state_matrix, 2)
                + np.linalg.norm(co.mean_matrix, 2)
                + np.linalg.norm(co.offset)
            )
        return abs(co.scale)

    @property
    def dispersion_bound(self) -> float:
        return float(np.linalg.norm(self.coefficients.dispersion, 2))


@dataclass(frozen=True)
class ControlPath:
    """Deterministic piecewise-constant control: one vector per grid cell."""

    values: np.ndarray

    def __init__(self, values):
        values = np.atleast_2d(np.asarray(values, dtype=float)).copy()
        if not np.all(np.isfinite(values)):
            raise DomainError("control values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zero(cls, steps: int, dim: int) -> "ControlPath":
        return cls(np.zeros((steps, dim)))

    @classmethod
    def constant(cls, steps: int, vector) -> "ControlPath":
        return cls(np.tile(np.atleast_1d(np.asarray(vector, dtype=float)), (steps, 1)))

    def energy(self, grid: EulerGrid) -> float:
        """Kinetic cost ``0.5 * sum_k |u_k|^2 * h``."""
        return 0.5 * float(np.sum(self.values**2)) * grid.step


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def _marginal_mean(marginal: DiscreteDistribution, dim: int) -> np.ndarray:
    points = np.array(marginal.points, dtype=float).reshape(len(marginal), dim)
    return marginal.weights @ points


def _euler_step(spec: ItoSpec, grid: EulerGrid, t: int, x, mean, y, control=None):
    if spec._scalar is not None:
        # scalar fast path: same expression tree as the array branch, so the
        # two produce bit-identical doubles for d = d1 = 1
        a, b_mean, offset, s = spec._scalar
        xf = float(x[0])
        mf = float(mean[0])
        if spec.is_linear:
            drift = a * xf + b_mean * mf + offset
        else:
            drift = a * math.tanh(mf - xf)
        new = xf + drift * grid.step
        if control is not None:
            new = new + (s * float(control[0])) * grid.step
        new = new + math.sqrt(grid.step) * (s * float(y[0]))
        if not math.isfinite(new):
            raise TrajectoryDivergedError(f"trajectory diverged at stage {t}", stage=t)
        return (new,)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    time = (t - 1) * grid.step
    drift = spec.drift(time, x, mean)
    disp = spec.dispersion(time, x, mean)
    new = x + drift * grid.step
    if control is not None:
        new = new + (disp @ control) * grid.step
    new = new + math.sqrt(grid.step) * (disp @ y)
    if not np.all(np.isfinite(new)):
        raise TrajectoryDivergedError(
            f"trajectory diverged at stage {t}", stage=t
        )
    return tuple(float(v) for v in new)


def as_staged_spec(spec: ItoSpec, grid: EulerGrid) -> StagedSystemSpec:
    """The Euler chain as a staged system (states and noise points are tuples)."""
    grid.check_horizon(spec.horizon)
    start = tuple(float(v) for v in spec.start)

    def stage(t, x, marginal, y):
        mean = marginal.cached(
            ("marginal_mean", spec.dim), lambda: _marginal_mean(marginal, spec.dim)
        )
        return _euler_step(spec, grid, t, x, mean, y)

    return StagedSystemSpec(
        stages=grid.steps, initial_map=lambda y: start, stage_map=stage
    )


def normal_path_sampler(grid: EulerGrid, noise_dim: int):
    """Per-particle noise path: ``steps + 1`` standard normal vectors.

    Coordinate 0 is drawn but unused (the start point is deterministic); it
    keeps the noise-path layout of the staged framework.
    """

    def sample(rng: np.random.Generator) -> tuple:
        draws = rng.normal(size=(grid.steps + 1, noise_dim))
        return tuple(tuple(float(v) for v in row) for row in draws)

    return sample


@dataclass(frozen=True)
class EulerSimulation:
    """Particle trajectories on the grid plus the underlying staged simulation."""

    times: np.ndarray
    paths: np.ndarray  # (n, steps + 1, dim)
    staged: ParticleSimulation

    @property
    def empirical_paths(self) -> DiscreteDistribution:
        return self.staged.empirical_paths

    @property
    def empirical_noise(self) -> DiscreteDistribution:
        return self.staged.empirical_noise

    def final_marginal(self) -> DiscreteDistribution:
        return self.staged.empirical_paths.coordinate_marginal(self.paths.shape[1] - 1)


def simulate(spec: ItoSpec, grid: EulerGrid, n: int, seed: int) -> EulerSimulation:
    """Simulate ``n`` interacting Euler particles (exact staged-system routing)."""
    staged = simulate_particles(
        normal_path_sampler(grid, spec.noise_dim), as_staged_spec(spec, grid), n, seed
    )
    paths = np.array([[list(state) for state in path] for path in staged.paths])
    return EulerSimulation(times=grid.times(), paths=paths, staged=staged)


def simulate_controlled(
    spec: ItoSpec,
    grid: EulerGrid,
    controls: Sequence[ControlPath],
    seed: int,
    noise_sampler: Callable | None = None,
) -> np.ndarray:
    """Simulate with one deterministic control per particle; returns (n, K+1, d).

    Zero controls reproduce :func:`simulate` bit for bit: the per-particle
    noise streams coincide and the update only gains an exactly-zero term.
    """
    grid.check_horizon(spec.horizon)
    n = len(controls)
    if n < 1:
        raise DomainError("need at least one control path")
    for control in controls:
        if control.values.shape != (grid.steps, spec.noise_dim):
            raise DomainError(
                f"control shape {control.values.shape} != {(grid.steps, spec.noise_dim)}"
            )
    from .noise_systems import particle_rng

    sampler = noise_sampler or normal_path_sampler(grid, spec.noise_dim)
    noise = [sampler(particle_rng(seed, i)) for i in range(n)]
    start = tuple(float(v) for v in spec.start)
    states = [start] * n
    trajectories = [[start] for _ in range(n)]
    for t in range(1, grid.steps + 1):
        mean = _marginal_mean(empirical_distribution(states), spec.dim)
        new_states = []
        for i in range(n):
            try:
                new_states.append(
                    _euler_step(
                        spec, grid, t, states[i], mean, noise[i][t],
                        control=controls[i].values[t - 1],
                    )
                )
            except TrajectoryDivergedError as err:
                err.particle = i
                raise
        states = new_states
        for i in range(n):
            trajectories[i].append(states[i])
    return np.array([[list(s) for s in traj] for traj in trajectories])


# ---------------------------------------------------------------------------
# exact Gaussian path laws (linear specs)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianPathLaw:
    """Gaussian law of the stacked grid values ``(X(t_1), ..., X(t_K))``."""

    gaussian: GaussianMeasure
    dim: int
    steps: int

    def __post_init__(self):
        if self.gaussian.dim != self.dim * self.steps:
            raise DomainError("stacked dimension mismatch")

    @property
    def marginal_means(self) -> np.ndarray:
        return self.gaussian.mean.reshape(self.steps, self.dim)

    def marginal_covariance(self, k: int) -> np.ndarray:
        sl = slice(k * self.dim, (k + 1) * self.dim)
        return self.gaussian.covariance[sl, sl]

    def with_means(self, means: np.ndarray) -> "GaussianPathLaw":
        """Mean-shift variant: same covariance, new marginal mean flow."""
        means = np.asarray(means, dtype=float).reshape(self.steps, self.dim)
        return GaussianPathLaw(
            gaussian=GaussianMeasure(means.reshape(-1), self.gaussian.covariance),
            dim=self.dim,
            steps=self.steps,
        )


def _require_linear(spec: ItoSpec, what: str):
    if not spec.is_linear:
        raise CapacityError(
            f"{what} is exact for linear coefficient families only; "
            "use the particle approximation for nonlinear builtins"
        )


def _stacked_gaussian(spec: ItoSpec, grid: EulerGrid, argument_means: np.ndarray) -> GaussianPathLaw:
    """Gaussian law of the Euler chain with the measure argument frozen.

    ``argument_means[k]`` is the mean fed to the drift at stage ``k + 1``
    (times ``t_0 .. t_{K-1}``, including the deterministic start).
    """
    _require_linear(spec, "the stacked Gaussian path law")
    grid.check_horizon(spec.horizon)
    co = spec.coefficients
    d, k_steps, h = spec.dim, grid.steps, grid.step
    forward = np.eye(d) + co.state_matrix * h
    noise_cov = h * (co.dispersion @ co.dispersion.T)

    means = np.zeros((k_steps + 1, d))
    means[0] = spec.start
    # blocks[k][j] = Cov(X(t_k), X(t_j)) for 1 <= j <= k
    blocks: list[list[np.ndarray]] = [[]]
    for k in range(k_steps):
        means[k + 1] = forward @ means[k] + (co.mean_matrix @ argument_means[k] + co.offset) * h
        row = [forward @ blocks[k][j] for j in range(len(blocks[k]))]
        own = (
            forward @ blocks[k][k - 1] @ forward.T + noise_cov
            if k >= 1
            else noise_cov
        )
        row.append(own)
        blocks.append(row)

    stacked_cov = np.zeros((k_steps * d, k_steps * d))
    for k in range(1, k_steps + 1):
        for j in range(1, k + 1):
            block = blocks[k][j - 1]
            stacked_cov[
                (k - 1) * d : k * d, (j - 1) * d : j * d
            ] = block
            stacked_cov[
                (j - 1) * d : j * d, (k - 1) * d : k * d
            ] = block.T
    return GaussianPathLaw(
        gaussian=GaussianMeasure(means[1:].reshape(-1), stacked_cov),
        dim=d,
        steps=k_steps,
    )


@dataclass(frozen=True)
class McKeanVlasovFlow:
    """Fixed point of the mean-flow recursion plus the exact Gaussian law."""

    flow_means: np.ndarray  # (steps + 1, dim), includes the start point
    law: GaussianPathLaw
    iterations: int
    residual: float


def mckean_vlasov_flow(
    spec: ItoSpec,
    grid: EulerGrid,
    tol: float = 1e-10,
    max_iter: int = 500,
    damping: float = 0.0,
) -> McKeanVlasovFlow:
    """Fixed point of the marginal mean flow; exact Gaussian law for linear specs.

    The iteration rebuilds the mean recursion with the measure argument taken
    from the previous flow; with no damping it terminates exactly after at
    most ``steps + 1`` sweeps because the dependence is causal.
    """
    _require_linear(spec, "the McKean-Vlasov flow")
    grid.check_horizon(spec.horizon)
    co = spec.coefficients
    forward = np.eye(spec.dim) + co.state_matrix * grid.step
    flow = np.tile(spec.start, (grid.steps + 1, 1))
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        new = np.empty_like(flow)
        new[0] = spec.start
        for k in range(grid.steps):
            new[k + 1] = forward @ new[k] + (co.mean_matrix @ flow[k] + co.offset) * grid.step
        residual = float(np.max(np.abs(new - flow)))
        flow = new if damping == 0.0 else (1.0 - damping) * new + damping * flow
        if residual < tol:
            break
    else:
        from .errors import ConvergenceError

        raise ConvergenceError(
            f"mean flow did not converge in {max_iter} iterations", residual=residual
        )
    return McKeanVlasovFlow(
        flow_means=flow,
        law=_stacked_gaussian(spec, grid, flow[:-1]),
        iterations=iteration,
        residual=residual,
    )


def frozen_law(spec: ItoSpec, grid: EulerGrid, flow_means: np.ndarray) -> GaussianPathLaw:
    """Exact law of the Euler chain with the measure argument frozen at ``flow_means``.

    ``flow_means`` must cover times ``t_0 .. t_{K-1}`` (or ``t_0 .. t_K``;
    the final entry is then ignored).
    """
    flow_means = np.asarray(flow_means, dtype=float)
    if flow_means.ndim == 1:
        flow_means = flow_means.reshape(-1, spec.dim)
    if flow_means.shape[0] == grid.steps + 1:
        flow_means = flow_means[:-1]
    if flow_means.shape != (grid.steps, spec.dim):
        raise DomainError(
            f"need {grid.steps} argument means of dimension {spec.dim}, got {flow_means.shape}"
        )
    return _stacked_gaussian(spec, grid, flow_means)


def rate_entropy_form(theta: GaussianPathLaw, spec: ItoSpec, grid: EulerGrid) -> float:
    """Rate of a Gaussian candidate: entropy w.r.t. its own frozen law."""
    if theta.dim != spec.dim or theta.steps != grid.steps:
        raise DomainError("candidate law does not match spec/grid shape")
    argument = np.vstack([spec.start, theta.marginal_means])[:-1]
    reference = _stacked_gaussian(spec, grid, argument)
    return gaussian_relative_entropy(theta.gaussian, reference.gaussian)


# ---------------------------------------------------------------------------
# variational form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlSolution:
    """Outcome of the deterministic-control steering problem."""

    value: float
    control: ControlPath | None
    reachable: bool
    explanation: str


def minimal_control_energy(
    target: GaussianPathLaw,
    spec: ItoSpec,
    grid: EulerGrid,
    covariance_tol: float = 1e-8,
) -> ControlSolution:
    """Minimal energy of a deterministic control steering the limit law to ``target``.

    Deterministic piecewise-constant controls shift only the mean flow of the
    controlled McKean-Vlasov equation; the target must therefore carry the
    uncontrolled covariance, and its mean flow determines the control stage
    by stage through ``dispersion @ u_k * h = mean-flow defect``.  Targets
    with any other covariance (or defects outside the dispersion range) are
    unreachable within this family and get value ``inf``.
    """
    _require_linear(spec, "the control steering problem")
    grid.check_horizon(spec.horizon)
    if target.dim != spec.dim or target.steps != grid.steps:
        raise DomainError("target law does not match spec/grid shape")
    co = spec.coefficients
    h = grid.step
    uncontrolled = mckean_vlasov_flow(spec, grid)
    cov_gap = float(
        np.max(np.abs(target.gaussian.covariance - uncontrolled.law.gaussian.covariance))
    )
    scale = 1.0 + float(np.max(np.abs(uncontrolled.law.gaussian.covariance)))
    if cov_gap > covariance_tol * scale:
        return ControlSolution(
            value=math.inf,
            control=None,
            reachable=False,
            explanation=(
                "deterministic controls cannot change the path covariance; "
                f"target deviates by {cov_gap:.3e}"
            ),
        )
    self_forward = np.eye(spec.dim) + (co.state_matrix + co.mean_matrix) * h
    means = np.vstack([spec.start, target.marginal_means])
    controls = np.zeros((grid.steps, spec.noise_dim))
    for k in range(grid.steps):
        defect = means[k + 1] - self_forward @ means[k] - co.offset * h
        solution, residual, *_ = np.linalg.lstsq(co.dispersion * h, defect, rcond=None)
        reached = co.dispersion @ solution * h
        if float(np.max(np.abs(reached - defect))) > 1e-9 * (1.0 + float(np.max(np.abs(defect)))):
            return ControlSolution(
                value=math.inf,
                control=None,
                reachable=False,
                explanation=f"mean defect at stage {k} lies outside the dispersion range",
            )
        controls[k] = solution
    control = ControlPath(controls)
    return ControlSolution(
        value=control.energy(grid), control=control, reachable=True, explanation="ok"
    )


# ---------------------------------------------------------------------------
# discretized Wiener entropy
# ---------------------------------------------------------------------------

def discretized_wiener_law(grid: EulerGrid, dim: int) -> GaussianPathLaw:
    """Gaussian law of a standard Wiener process sampled on the grid."""
    k = grid.steps
    base = grid.step * np.minimum.outer(np.arange(1, k + 1), np.arange(1, k + 1))
    covariance = np.kron(base, np.eye(dim))
    return GaussianPathLaw(
        gaussian=GaussianMeasure(np.zeros(k * dim), covariance), dim=dim, steps=k
    )


def wiener_shift_entropy(control: ControlPath, grid: EulerGrid) -> float:
    """Entropy of the Wiener law mean-shifted by the integrated control.

    Computed through the generic Gaussian relative entropy between the
    shifted and unshifted grid laws; in exact arithmetic this telescopes over
    increments to the control energy ``0.5 * sum |u_k|^2 h``.
    """
    if control.values.shape[0] != grid.steps:
        raise DomainError("control does not match the grid")
    dim = control.values.shape[1]
    wiener = discretized_wiener_law(grid, dim)
    shift = np.cumsum(control.values, axis=0) * grid.step
    shifted = wiener.with_means(shift)
    return gaussian_relative_entropy(shifted.gaussian, wiener.gaussian)
