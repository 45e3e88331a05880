"""Finite-support and Gaussian probability measures with entropy machinery.

The two concrete measure families everything else is built on:

* :class:`DiscreteDistribution` -- a finite-support probability measure whose
  atoms are opaque ids, real scalars, real vectors, or (nested) tuples of
  these.  Weights may optionally be backed by exact integer counts ``k / n``
  so that empirical identities can be checked without float slack.
* :class:`GaussianMeasure` -- mean vector plus symmetric PSD covariance.

On top of these the module provides relative entropy (with the 0 log 0 = 0
and +inf conventions made explicit), its finite-partition lower bound, the
Donsker-Varadhan variational value, pushforward of a discrete measure under a
measurable map, the closed-form entropy-minimizing lift of a target measure
through a map together with a brute-force grid oracle for the same infimum,
the bounded-Lipschitz distance as a linear program, and the closed-form
Gaussian relative entropy.

Conventions
-----------
Infinity is ``math.inf``, produced only by explicit absolute-continuity
checks, never by evaluating ``log(0)`` inside a running sum.  Weight vectors
must sum to one within 1e-12; distributions failing that are rejected rather
than silently renormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import logsumexp, ndtr

from .errors import AbsoluteContinuityError, CapacityError, DomainError

INF = math.inf

WEIGHT_SUM_TOL = 1e-12
#: decimal places used when matching real-valued atoms between measures
ATOM_DECIMALS = 12

BRUTE_FORCE_SUPPORT_CAP = 8
BOUNDED_LIPSCHITZ_SUPPORT_CAP = 200


# ---------------------------------------------------------------------------
# atoms
# ---------------------------------------------------------------------------

def _canon_and_key(point):
    """One walk producing (canonical form, matching key) for an atom."""
    kind = type(point)
    if kind is float:
        return point, round(point, ATOM_DECIMALS)
    if kind is str:
        return point, point
    if kind is tuple:
        parts = [_canon_and_key(c) for c in point]
        return tuple(c for c, _ in parts), tuple(k for _, k in parts)
    if isinstance(point, (bool,)):
        return point, point
    if isinstance(point, (int, float, np.integer, np.floating, Fraction)):
        value = float(point)
        return value, round(value, ATOM_DECIMALS)
    if isinstance(point, (list, np.ndarray)):
        parts = [_canon_and_key(c) for c in point]
        return tuple(c for c, _ in parts), tuple(k for _, k in parts)
    return point, point  # opaque hashable id


def _canonical_point(point):
    """Normalize an atom to a hashable canonical form (floats, tuples, ids)."""
    return _canon_and_key(point)[0]


def atom_key(point):
    """Matching key for an atom: ids exactly, reals rounded to 1e-12 scale.

    Relative entropy is discontinuous in support membership, so matching has
    to be deliberate: abstract ids compare exactly, numeric values compare
    after rounding to ``ATOM_DECIMALS`` decimals (integers are matched by
    value), tuples compare componentwise.
    """
    return _canon_and_key(point)[1]


def _key_kind(key):
    if isinstance(key, tuple):
        return ("tuple", len(key)) + tuple(_key_kind(c)[0] for c in key[:1])
    if isinstance(key, float):
        return ("real",)
    return ("id",)


def _check_comparable(nu: "DiscreteDistribution", mu: "DiscreteDistribution"):
    kinds = {_key_kind(k) for k in nu._index} | {_key_kind(k) for k in mu._index}
    if len(kinds) > 1:
        raise DomainError(f"atom universes are not comparable: mixed kinds {sorted(kinds)}")


# ---------------------------------------------------------------------------
# DiscreteDistribution
# ---------------------------------------------------------------------------

class DiscreteDistribution:
    """Finite-support probability measure over hashable atoms.

    Parameters
    ----------
    pairs:
        Iterable of ``(point, weight)``.  Points must be pairwise distinct
        (after canonicalization), weights nonnegative and summing to one
        within 1e-12.  Insertion order is preserved; every derived measure in
        this library keeps first-occurrence order so that downstream
        floating-point reductions are reproducible.
    counts, denominator:
        Optional exact backing ``weight[i] == counts[i] / denominator``.  Use
        :meth:`from_counts` for empirical measures; exactness is preserved by
        :func:`pushforward` and mixtures are not allowed to fabricate it.
    """

    __slots__ = ("points", "weights", "counts", "denominator", "_index", "_cache")

    def __init__(self, pairs, *, counts=None, denominator=None):
        points = []
        keys = []
        weights = []
        for point, weight in pairs:
            canonical, key = _canon_and_key(point)
            points.append(canonical)
            keys.append(key)
            weights.append(float(weight))
        if not points:
            raise DomainError("a probability measure needs at least one atom")
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0.0):
            raise DomainError("negative weight in distribution")
        total = float(np.sum(w))
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError(
                f"weights sum to {total!r}, off by more than {WEIGHT_SUM_TOL}; "
                "refusing to renormalize"
            )
        index = {}
        for pos, key in enumerate(keys):
            if key in index:
                raise DomainError(f"duplicate atom {points[pos]!r}")
            index[key] = pos
        w.setflags(write=False)
        self.points = tuple(points)
        self.weights = w
        self._index = index
        if counts is not None:
            counts = tuple(int(c) for c in counts)
            if len(counts) != len(points) or denominator is None:
                raise DomainError("counts backing does not match atoms")
            if sum(counts) != int(denominator):
                raise DomainError("counts do not sum to the denominator")
        self.counts = counts
        self.denominator = int(denominator) if denominator is not None else None
        self._cache = {}

    @classmethod
    def _trusted(cls, points, weights, counts, denominator, keys):
        """Internal fast path: inputs already canonical, distinct, normalized."""
        self = object.__new__(cls)
        w = np.asarray(weights, dtype=float)
        w.setflags(write=False)
        self.points = tuple(points)
        self.weights = w
        self.counts = tuple(counts) if counts is not None else None
        self.denominator = denominator
        self._index = dict(zip(keys, range(len(keys))))
        self._cache = {}
        return self

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_weights(cls, points, weights):
        return cls(zip(points, weights))

    @classmethod
    def uniform(cls, points):
        points = list(points)
        n = len(points)
        return cls(((p, 1.0 / n) for p in points), counts=[1] * n, denominator=n)

    @classmethod
    def dirac(cls, point):
        return cls([(point, 1.0)], counts=[1], denominator=1)

    @classmethod
    def from_counts(cls, counted: Mapping, total: int | None = None):
        """Empirical measure from ``atom -> integer count`` (insertion order kept)."""
        items = [(p, int(c)) for p, c in counted.items()]
        if any(c < 0 for _, c in items):
            raise DomainError("negative count")
        n = sum(c for _, c in items)
        if total is not None and total != n:
            raise DomainError(f"counts sum to {n}, expected {total}")
        if n == 0:
            raise DomainError("empty empirical measure")
        return cls(
            ((p, c / n) for p, c in items),
            counts=[c for _, c in items],
            denominator=n,
        )

    # -- basic accessors ----------------------------------------------------

    def __len__(self):
        return len(self.points)

    def items(self):
        return zip(self.points, self.weights)

    @property
    def support(self):
        return self.points

    def weight(self, point) -> float:
        pos = self._index.get(atom_key(point))
        return float(self.weights[pos]) if pos is not None else 0.0

    def contains(self, point) -> bool:
        return atom_key(point) in self._index

    def count(self, point) -> int:
        if self.counts is None:
            raise DomainError("distribution has no exact count backing")
        pos = self._index.get(atom_key(point))
        return self.counts[pos] if pos is not None else 0

    def cached(self, key, compute):
        """Memoize a derived summary on this (immutable) distribution.

        Interacting-particle stage maps evaluate one summary of the running
        marginal for every particle; caching it here keeps the sweep linear
        in the particle count instead of quadratic.
        """
        if key not in self._cache:
            self._cache[key] = compute()
        return self._cache[key]

    def equals_exact(self, other: "DiscreteDistribution") -> bool:
        """Atomwise equality; exact rational comparison when both carry counts."""
        if set(self._index) != set(other._index):
            return False
        if self.counts is not None and other.counts is not None:
            for key, pos in self._index.items():
                mine = Fraction(self.counts[pos], self.denominator)
                theirs = Fraction(other.counts[other._index[key]], other.denominator)
                if mine != theirs:
                    return False
            return True
        for key, pos in self._index.items():
            if self.weights[pos] != other.weights[other._index[key]]:
                return False
        return True

    def coordinate_marginal(self, t: int) -> "DiscreteDistribution":
        """Marginal at coordinate ``t`` for tuple atoms (first-occurrence order)."""
        merged: dict = {}
        use_counts = self.counts is not None
        for pos, point in enumerate(self.points):
            if not isinstance(point, tuple) or t >= len(point):
                raise DomainError(f"atom {point!r} has no coordinate {t}")
            canonical, key = _canon_and_key(point[t])
            entry = merged.get(key)
            if entry is None:
                merged[key] = entry = [canonical, 0.0, 0]
            entry[1] += self.weights[pos]
            if use_counts:
                entry[2] += self.counts[pos]
        return _finalize_merge(merged, use_counts, self.denominator)

    def __repr__(self):
        inner = ", ".join(f"{p!r}: {w:.6g}" for p, w in self.items())
        return f"DiscreteDistribution({{{inner}}})"

    # -- serialization ------------------------------------------------------

    def to_tabular(self) -> str:
        """One atom per line: ``id_or_vector<TAB>weight`` with 17 significant digits."""
        lines = []
        for point, weight in self.items():
            lines.append(f"{_format_point(point)}\t{weight:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_tabular(cls, text: str) -> "DiscreteDistribution":
        pairs = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            token, weight = line.split("\t")
            pairs.append((_parse_point(token), float(weight)))
        return cls(pairs)


def _format_point(point) -> str:
    if isinstance(point, tuple):
        return ",".join(_format_point(c) for c in point)
    if isinstance(point, float):
        return f"{point:.17g}"
    return str(point)


def _parse_point(token: str):
    if "," in token:
        return tuple(_parse_point(t) for t in token.split(","))
    try:
        return float(token)
    except ValueError:
        return token


def total_variation(nu: DiscreteDistribution, mu: DiscreteDistribution) -> float:
    """Total-variation distance ``0.5 * sum |nu - mu|`` over the union support."""
    keys = dict(nu._index)
    gap = 0.0
    for key, pos in keys.items():
        gap += abs(nu.weights[pos] - mu.weight(nu.points[pos]))
    for point, weight in mu.items():
        if atom_key(point) not in keys:
            gap += weight
    return 0.5 * gap


def mixture(first: DiscreteDistribution, second: DiscreteDistribution, second_weight: float) -> DiscreteDistribution:
    """Convex combination ``(1 - a) * first + a * second`` on the union support."""
    if not 0.0 <= second_weight <= 1.0:
        raise DomainError("mixture weight must lie in [0, 1]")
    merged = {}
    order = []
    for point, weight in first.items():
        key = atom_key(point)
        merged[key] = [point, (1.0 - second_weight) * weight]
        order.append(key)
    for point, weight in second.items():
        key = atom_key(point)
        if key not in merged:
            merged[key] = [point, 0.0]
            order.append(key)
        merged[key][1] += second_weight * weight
    return DiscreteDistribution((merged[k][0], merged[k][1]) for k in order)


# ---------------------------------------------------------------------------
# measurable maps and partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasurableMap:
    """Total map between atom spaces: a finite table, an affine map, or a callable."""

    table: Mapping | None = None
    matrix: np.ndarray | None = None
    offset: np.ndarray | None = None
    func: Callable | None = None

    @classmethod
    def from_table(cls, mapping: Mapping) -> "MeasurableMap":
        return cls(table={atom_key(k): _canonical_point(v) for k, v in mapping.items()})

    @classmethod
    def affine(cls, matrix, offset) -> "MeasurableMap":
        return cls(matrix=np.asarray(matrix, dtype=float), offset=np.asarray(offset, dtype=float))

    @classmethod
    def from_callable(cls, func: Callable) -> "MeasurableMap":
        return cls(func=func)

    def __call__(self, point):
        if self.table is not None:
            key = atom_key(point)
            if key not in self.table:
                raise DomainError(f"map is not total: no image for atom {point!r}")
            return self.table[key]
        if self.matrix is not None:
            x = np.asarray(point, dtype=float)
            return _canonical_point(self.matrix @ x + self.offset)
        return _canonical_point(self.func(point))


@dataclass(frozen=True)
class Partition:
    """Finite partition of an atom universe into disjoint blocks."""

    blocks: tuple

    def __init__(self, blocks: Iterable[Iterable]):
        object.__setattr__(
            self,
            "blocks",
            tuple(tuple(_canonical_point(p) for p in block) for block in blocks),
        )

    @classmethod
    def singletons(cls, points) -> "Partition":
        return cls([[p] for p in points])

    @classmethod
    def trivial(cls, points) -> "Partition":
        return cls([list(points)])

    def validate_for(self, *distributions: DiscreteDistribution):
        seen = set()
        for block in self.blocks:
            for point in block:
                key = atom_key(point)
                if key in seen:
                    raise DomainError(f"partition blocks overlap at {point!r}")
                seen.add(key)
        universe = set()
        for dist in distributions:
            universe |= set(dist._index)
        if not universe <= seen:
            missing = universe - seen
            raise DomainError(f"partition does not cover the support ({len(missing)} atoms missing)")


# ---------------------------------------------------------------------------
# relative entropy and friends
# ---------------------------------------------------------------------------

def relative_entropy(nu: DiscreteDistribution, mu: DiscreteDistribution) -> float:
    """Relative entropy ``sum nu(x) log(nu(x)/mu(x))`` with 0 log 0 = 0.

    Returns ``math.inf`` as soon as ``nu`` charges an atom of ``mu``-mass zero.
    Raises :class:`DomainError` when the two atom universes are structurally
    incomparable (e.g. vectors of different lengths).
    """
    _check_comparable(nu, mu)
    total = 0.0
    for point, weight in nu.items():
        if weight == 0.0:
            continue
        ref = mu.weight(point)
        if ref == 0.0:
            return INF
        total += weight * math.log(weight / ref)
    return max(total, 0.0)


def partition_lower_bound(nu: DiscreteDistribution, mu: DiscreteDistribution, partition: Partition) -> float:
    """Finite-sum lower bound ``sum_A nu(A) log(nu(A)/mu(A))`` over partition blocks.

    Never exceeds :func:`relative_entropy`; equals it on the singleton
    partition.  Refining the partition can only increase the value.
    """
    _check_comparable(nu, mu)
    partition.validate_for(nu, mu)
    total = 0.0
    for block in partition.blocks:
        nu_mass = sum(nu.weight(p) for p in block)
        mu_mass = sum(mu.weight(p) for p in block)
        if nu_mass == 0.0:
            continue
        if mu_mass == 0.0:
            return INF
        total += nu_mass * math.log(nu_mass / mu_mass)
    return total


def donsker_varadhan_value(nu: DiscreteDistribution, mu: DiscreteDistribution, g) -> float:
    """Variational value ``int g dnu - log int exp(g) dmu`` for a test function.

    ``g`` may be a callable on atoms or a mapping keyed by atoms.  The value
    never exceeds ``relative_entropy(nu, mu)``, with equality at
    ``g = log(dnu/dmu)`` whenever the entropy is finite.
    """
    _check_comparable(nu, mu)
    evaluate = g if callable(g) else (lambda p, _table=g: _table[atom_key(p)])

    mean = 0.0
    for point, weight in nu.items():
        if weight == 0.0:
            continue
        value = float(evaluate(point))
        if not math.isfinite(value):
            raise DomainError(f"test function is not finite at {point!r}")
        mean += weight * value

    log_terms = []
    log_weights = []
    for point, weight in mu.items():
        if weight == 0.0:
            continue
        value = float(evaluate(point))
        if not math.isfinite(value):
            raise DomainError(f"test function is not finite at {point!r}")
        log_terms.append(value)
        log_weights.append(weight)
    return mean - float(logsumexp(log_terms, b=log_weights))


# ---------------------------------------------------------------------------
# pushforward, lifts, contraction oracle
# ---------------------------------------------------------------------------

def _finalize_merge(merged: dict, use_counts: bool, denominator) -> DiscreteDistribution:
    """Build a distribution from ``key -> [canonical, weight, count]`` (insertion order)."""
    points = [entry[0] for entry in merged.values()]
    if use_counts:
        counts = [entry[2] for entry in merged.values()]
        weights = [c / denominator for c in counts]
        return DiscreteDistribution._trusted(points, weights, counts, denominator, merged.keys())
    weights = [entry[1] for entry in merged.values()]
    return DiscreteDistribution._trusted(points, weights, None, None, merged.keys())


def pushforward(gamma: DiscreteDistribution, psi: MeasurableMap | Callable) -> DiscreteDistribution:
    """Image measure of ``gamma`` under ``psi`` (exact counts preserved)."""
    apply = psi if callable(psi) else psi.__call__
    merged: dict = {}
    use_counts = gamma.counts is not None
    for pos, point in enumerate(gamma.points):
        canonical, key = _canon_and_key(apply(point))
        entry = merged.get(key)
        if entry is None:
            merged[key] = entry = [canonical, 0.0, 0]
        entry[1] += gamma.weights[pos]
        if use_counts:
            entry[2] += gamma.counts[pos]
    return _finalize_merge(merged, use_counts, gamma.denominator)


def optimal_lift(eta: DiscreteDistribution, gamma0: DiscreteDistribution, psi: MeasurableMap | Callable) -> DiscreteDistribution:
    """The lift of ``eta`` through ``psi`` minimizing entropy relative to ``gamma0``.

    Writes ``f = d eta / d psi(gamma0)`` on the image atoms and reweights each
    source atom ``y`` by ``f(psi(y))``.  The result pushes forward to ``eta``
    exactly and its relative entropy w.r.t. ``gamma0`` equals
    ``relative_entropy(eta, pushforward(gamma0, psi))``.

    Raises
    ------
    AbsoluteContinuityError
        If ``eta`` is not absolutely continuous w.r.t. the image of
        ``gamma0``; the infimum over lifts is then +inf and no lift exists.
    """
    apply = psi if callable(psi) else psi.__call__
    image = pushforward(gamma0, psi)
    density = {}
    for point, weight in eta.items():
        if weight == 0.0:
            continue
        ref = image.weight(point)
        if ref == 0.0:
            raise AbsoluteContinuityError(
                f"target charges {point!r} which the image measure does not; infimum is +inf"
            )
        density[atom_key(point)] = weight / ref
    pairs = []
    for point, weight in gamma0.items():
        f = density.get(atom_key(_canonical_point(apply(point))), 0.0)
        pairs.append((point, f * weight))
    return DiscreteDistribution(pairs)


def brute_force_lift_infimum(
    eta: DiscreteDistribution,
    gamma0: DiscreteDistribution,
    psi: MeasurableMap | Callable,
    grid_resolution: int = 40,
) -> float:
    """Grid-search oracle for ``inf { R(gamma || gamma0) : pushforward(gamma, psi) = eta }``.

    The pushforward constraint is enforced structurally: within each fiber
    ``psi^{-1}(x)`` the candidate carries conditional weights on a simplex
    grid scaled by ``eta(x)``, so feasibility is never approximated.  Each
    fiber is minimized by exhaustive enumeration of grid compositions
    followed by a shrinking pairwise-transfer refinement (the per-fiber
    objective is convex, so the local polish cannot stall at a spurious
    minimum).  Returns ``math.inf`` when no lift exists ("inf over the empty
    set").

    Only supports source measures with at most 8 atoms.
    """
    if len(gamma0) > BRUTE_FORCE_SUPPORT_CAP:
        raise CapacityError(
            f"brute-force lift search supports at most {BRUTE_FORCE_SUPPORT_CAP} source atoms, got {len(gamma0)}"
        )
    if grid_resolution < 2:
        raise DomainError("grid_resolution must be at least 2")
    apply = psi if callable(psi) else psi.__call__

    fibers: dict = {}
    for point, weight in gamma0.items():
        key = atom_key(_canonical_point(apply(point)))
        fibers.setdefault(key, []).append(weight)

    total = 0.0
    for point, mass in eta.items():
        if mass == 0.0:
            continue
        key = atom_key(point)
        if key not in fibers:
            return INF  # no source atom maps onto this target: empty feasible set
        value = _fiber_minimum(mass, np.asarray(fibers[key]), grid_resolution)
        if value == INF:
            return INF
        total += value
    return total


def _fiber_objective(mass: float, conditional: np.ndarray, reference: np.ndarray) -> float:
    value = 0.0
    for c, g in zip(conditional, reference):
        w = mass * c
        if w == 0.0:
            continue
        if g == 0.0:
            return INF
        value += w * math.log(w / g)
    return value


def _compositions(total: int, parts: int):
    """All integer compositions of ``total`` into ``parts`` nonnegative parts."""
    if parts == 1:
        yield (total,)
        return
    for bars in combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 2 - prev)
        yield tuple(out)


def _fiber_minimum(mass: float, reference: np.ndarray, resolution: int) -> float:
    """Minimize ``sum_i mass*c_i*log(mass*c_i/g_i)`` over the conditional simplex."""
    m = len(reference)
    if m == 1:
        return _fiber_objective(mass, np.ones(1), reference)

    # keep the exhaustive stage below ~3e5 candidates for larger fibers
    r = resolution
    while r > 8 and math.comb(r + m - 1, m - 1) > 300_000:
        r -= 1

    grid = np.array(list(_compositions(r, m)), dtype=float) / r
    scaled = mass * grid
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ref = np.log(reference)
        terms = np.where(scaled > 0.0, scaled * (np.log(scaled) - log_ref), 0.0)
    values = terms.sum(axis=1)
    pos = int(np.argmin(values))
    best_value = float(values[pos])
    best = grid[pos].copy()
    if best_value == INF:
        return INF

    # pairwise-transfer polish with shrinking step; objective is convex on the
    # simplex so improvements can always be found until the step underflows
    step = 1.0 / r
    while step > 1e-9:
        improved = False
        for i in range(m):
            for j in range(m):
                if i == j or best[j] < step:
                    continue
                candidate = best.copy()
                candidate[i] += step
                candidate[j] -= step
                value = _fiber_objective(mass, candidate, reference)
                if value < best_value - 1e-15:
                    best_value = value
                    best = candidate
                    improved = True
        if not improved:
            step *= 0.5
    return best_value


# ---------------------------------------------------------------------------
# bounded-Lipschitz distance
# ---------------------------------------------------------------------------

def bounded_lipschitz_distance(nu: DiscreteDistribution, mu: DiscreteDistribution) -> float:
    """Bounded-Lipschitz distance between finite measures on real vectors.

    Solves the linear program maximizing ``int f dnu - int f dmu`` over
    functions ``f`` with ``sup|f| + Lip(f) <= 1``, encoded with auxiliary
    variables ``M`` (sup bound) and ``L`` (Lipschitz bound), constraints
    ``|f(x_i)| <= M``, ``|f(x_i) - f(x_j)| <= L |x_i - x_j|`` on all support
    pairs, and ``M + L <= 1``.
    """
    points, coeffs = _merged_vector_support(nu, mu)
    n = len(points)
    if n > BOUNDED_LIPSCHITZ_SUPPORT_CAP:
        raise CapacityError(
            f"bounded-Lipschitz LP supports at most {BOUNDED_LIPSCHITZ_SUPPORT_CAP} atoms, got {n}"
        )
    xs = np.asarray(points, dtype=float)

    # variables: f_0..f_{n-1}, M, L
    col_m = n
    col_l = n + 1
    rows, cols, data, rhs = [], [], [], []

    def add_row(entries, bound):
        row = len(rhs)
        for col, val in entries:
            rows.append(row)
            cols.append(col)
            data.append(val)
        rhs.append(bound)

    for i in range(n):
        add_row([(i, 1.0), (col_m, -1.0)], 0.0)
        add_row([(i, -1.0), (col_m, -1.0)], 0.0)
    for i in range(n):
        for j in range(i + 1, n):
            dist = float(np.linalg.norm(xs[i] - xs[j]))
            add_row([(i, 1.0), (j, -1.0), (col_l, -dist)], 0.0)
            add_row([(j, 1.0), (i, -1.0), (col_l, -dist)], 0.0)
    add_row([(col_m, 1.0), (col_l, 1.0)], 1.0)

    a_ub = sparse.coo_matrix((data, (rows, cols)), shape=(len(rhs), n + 2)).tocsr()
    objective = np.zeros(n + 2)
    objective[:n] = -np.asarray(coeffs)  # maximize sum f_i (nu_i - mu_i)
    bounds = [(None, None)] * n + [(0.0, None), (0.0, None)]
    result = linprog(objective, A_ub=a_ub, b_ub=rhs, bounds=bounds, method="highs")
    if not result.success:
        raise RuntimeError(f"bounded-Lipschitz LP failed: {result.message}")
    return max(0.0, -float(result.fun))


def _merged_vector_support(nu: DiscreteDistribution, mu: DiscreteDistribution):
    def as_vector(point):
        if isinstance(point, float):
            return (point,)
        if isinstance(point, tuple) and all(isinstance(c, float) for c in point):
            return point
        raise DomainError(f"bounded-Lipschitz distance needs real-vector atoms, got {point!r}")

    merged = {}
    order = []
    dim = None
    for dist, sign in ((nu, 1.0), (mu, -1.0)):
        for point, weight in dist.items():
            vec = as_vector(point)
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise DomainError(f"dimension mismatch: {len(vec)} vs {dim}")
            key = atom_key(vec)
            if key not in merged:
                merged[key] = [vec, 0.0]
                order.append(key)
            merged[key][1] += sign * weight
    points = [merged[k][0] for k in order]
    coeffs = [merged[k][1] for k in order]
    return points, coeffs


# ---------------------------------------------------------------------------
# Gaussian measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianMeasure:
    """Gaussian measure on R^n given by mean vector and symmetric PSD covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __init__(self, mean, covariance):
        mean = np.atleast_1d(np.asarray(mean, dtype=float)).copy()
        covariance = np.atleast_2d(np.asarray(covariance, dtype=float)).copy()
        if covariance.shape != (mean.size, mean.size):
            raise DomainError(
                f"covariance shape {covariance.shape} does not match mean length {mean.size}"
            )
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(covariance)):
            raise DomainError("non-finite entries in Gaussian parameters")
        asym = np.max(np.abs(covariance - covariance.T)) if covariance.size else 0.0
        if asym > 1e-12:
            raise DomainError(f"covariance not symmetric (max asymmetry {asym:.3e})")
        smallest = float(np.min(np.linalg.eigvalsh(covariance)))
        if smallest < -1e-10:
            raise DomainError(f"covariance has eigenvalue {smallest:.3e} < -1e-10")
        mean.setflags(write=False)
        covariance.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", covariance)

    @property
    def dim(self) -> int:
        return self.mean.size

    @classmethod
    def standard(cls, dim: int) -> "GaussianMeasure":
        return cls(np.zeros(dim), np.eye(dim))

    def to_text(self) -> str:
        lines = ["mean\t" + ",".join(f"{v:.17g}" for v in self.mean)]
        for row in self.covariance:
            lines.append("cov\t" + ",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GaussianMeasure":
        mean = None
        rows = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            tag, payload = line.split("\t")
            values = [float(v) for v in payload.split(",")]
            if tag == "mean":
                mean = values
            elif tag == "cov":
                rows.append(values)
            else:
                raise DomainError(f"unknown tag {tag!r} in Gaussian text")
        if mean is None:
            raise DomainError("missing mean line")
        return cls(mean, rows)


def gaussian_relative_entropy(theta1: GaussianMeasure, theta2: GaussianMeasure) -> float:
    """Closed-form relative entropy between Gaussian measures of equal dimension.

    ``0.5 * [tr(S2^-1 S1) + (m2-m1)' S2^-1 (m2-m1) - n - log det(S2^-1 S1)]``.
    The reference covariance must be strictly positive definite; a degenerate
    first argument yields ``math.inf`` (its log-determinant diverges).
    """
    if theta1.dim != theta2.dim:
        raise DomainError(f"dimension mismatch: {theta1.dim} vs {theta2.dim}")
    n = theta1.dim
    try:
        chol = np.linalg.cholesky(theta2.covariance)
    except np.linalg.LinAlgError:
        raise DomainError("reference covariance is singular") from None
    solved = np.linalg.solve(theta2.covariance, theta1.covariance)
    trace = float(np.trace(solved))
    delta = theta2.mean - theta1.mean
    quad = float(delta @ np.linalg.solve(theta2.covariance, delta))
    logdet2 = 2.0 * float(np.sum(np.log(np.diag(chol))))
    sign1, logdet1 = np.linalg.slogdet(theta1.covariance)
    if sign1 <= 0.0 or not math.isfinite(logdet1):
        return INF
    value = 0.5 * (trace + quad - n + logdet2 - logdet1)
    return max(value, 0.0)


def discretize_gaussian_1d(mean: float, variance: float, grid: np.ndarray) -> DiscreteDistribution:
    """Cell-mass discretization of a 1-D Gaussian onto sorted grid centers.

    Cell boundaries are the midpoints between neighboring grid values; the two
    end cells absorb the tails so the weights sum to one exactly.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be a strictly increasing 1-D array")
    sd = math.sqrt(variance)
    edges = np.concatenate(([-np.inf], (grid[:-1] + grid[1:]) / 2.0, [np.inf]))
    z = (edges - mean) / sd
    cdf = np.empty_like(z)
    cdf[0], cdf[-1] = 0.0, 1.0
    cdf[1:-1] = ndtr(z[1:-1])
    masses = np.diff(cdf)
    masses = masses / masses.sum()
    return DiscreteDistribution(zip(grid, masses))
