"""NSGA-II over binary sensor-selection masks.

Both objectives are minimized: an information gap ``f1`` (0 for the full
network, about 1 for the empty selection) and the fraction of active
sensors ``f2``. Objective functions take a boolean batch
of masks, shape (n, N), and return an (n, 2) array.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import infometrics
from ._kernels import nondominated_ranks


class ObjectiveScaleError(ValueError):
    """The information scale of a metric table cannot be normalized."""


class Objectives(NamedTuple):
    info_gap: float
    count_frac: float


@dataclass
class Individual:
    mask: np.ndarray
    objectives: Objectives
    rank: int = 0
    crowding: float = 0.0

    @property
    def cardinality(self):
        return int(np.count_nonzero(self.mask))


@dataclass
class NsgaConfig:
    pop_size: int = 100
    generations: int = 100
    mutation_rate: float = None  # None -> 1 / N
    seed_extremes: bool = True
    crossover_prob: float = 0.9

    def __post_init__(self):
        if self.pop_size < 4 or self.pop_size % 2:
            raise ValueError(f"pop_size must be even and >= 4, got {self.pop_size}")
        if self.generations < 0:
            raise ValueError(f"generations must be >= 0, got {self.generations}")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError(f"mutation_rate must lie in [0, 1], got {self.mutation_rate}")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError(f"crossover_prob must lie in [0, 1], got {self.crossover_prob}")


# -- objectives ----------------------------------------------------------------------

class FisherGap:
    """Relative log-det gap between full-network and selected-sensor Fisher information."""

    additive = False

    def __init__(self, table):
        self.table = table
        self.n = len(table)
        self.full = float(infometrics.logdet(infometrics.total_fi(np.ones(self.n), table)))
        # a negative prior log-det only lifts f1 of small selections above 1;
        # a non-positive denominator would invert the ranking
        if not self.full > 0:
            raise ObjectiveScaleError(f"full-network log-det must be > 0, got {self.full}")

    def __call__(self, masks):
        masks = np.atleast_2d(masks)
        ld = infometrics.logdet(infometrics.total_fi(masks, self.table))
        # the full network has no gap by definition, whatever the summation order
        f1 = np.where(masks.all(axis=1), 0.0, (self.full - ld) / self.full)
        return np.column_stack([f1, masks.sum(axis=1) / self.n])


class MiubGap:
    """Relative gap in the sum of individual sensor MI."""

    additive = True

    def __init__(self, table):
        self.table = table
        self.n = len(table)
        self.total = float(np.sum(table.per_sensor_mi))
        if not self.total > 0:
            raise ObjectiveScaleError("every sensor has zero mutual information")

    def __call__(self, masks):
        masks = np.atleast_2d(masks)
        # sum over the unselected sensors: exactly 0 for the all-one mask
        f1 = infometrics.miub(~masks.astype(bool), self.table) / self.total
        return np.column_stack([f1, masks.sum(axis=1) / self.n])

    @property
    def shares(self):
        return self.table.per_sensor_mi / self.total


def _single(objective, mask):
    f1, f2 = objective(np.asarray(mask, dtype=bool)[None, :])[0]
    return Objectives(float(f1), float(f2))


def objective_fi(mask, table):
    return _single(FisherGap(table), mask)


def objective_miub(mask, table):
    return _single(MiubGap(table), mask)


# -- ranking -------------------------------------------------------------------------

def dominates(a, b):
    """Pareto dominance for minimization."""
    a, b = np.asarray(a), np.asarray(b)
    return bool(np.all(a <= b) and np.any(a < b))


def fast_nondominated_sort(objs):
    """Front index of every objective vector (0 = non-dominated)."""
    return nondominated_ranks(np.asarray(objs, dtype=np.float64).reshape(len(objs), -1))


def crowding_distance(objs, ranks=None):
    """Crowding distance of every individual within its own front.

    Boundary points of each objective get ``inf``; interior points sum the
    range-normalized gap between their neighbours. Repeated objective
    vectors are scored once (at their lowest index); the copies get 0.
    """
    objs = np.asarray(objs, dtype=np.float64)
    n, m = objs.shape
    ranks = np.zeros(n, dtype=np.int64) if ranks is None else np.asarray(ranks)
    idx = np.arange(n)
    dist = np.zeros(n)
    if n == 0:
        return dist
    order = np.lexsort((idx,) + tuple(objs[:, k] for k in reversed(range(m))) + (ranks,))
    so, sr = objs[order], ranks[order]
    dup = np.zeros(n, dtype=bool)
    dup[1:] = (sr[1:] == sr[:-1]) & np.all(so[1:] == so[:-1], axis=1)
    uniq = order[~dup]
    boundary = np.zeros(n, dtype=bool)
    for k in range(m):
        o = uniq[np.lexsort((uniq, objs[uniq, k], ranks[uniq]))]
        r, v = ranks[o], objs[o, k]
        first = np.ones(len(o), dtype=bool)
        first[1:] = r[1:] != r[:-1]
        last = np.ones(len(o), dtype=bool)
        last[:-1] = r[:-1] != r[1:]
        front_id = np.cumsum(first) - 1
        span = v[last][front_id] - v[first][front_id]
        gap = np.zeros(len(o))
        gap[1:-1] = v[2:] - v[:-2]
        interior = ~(first | last) & (span > 0)
        dist[o] += np.where(interior, gap / np.where(span > 0, span, 1.0), 0.0)
        boundary[o[first | last]] = True
    dist[boundary] = np.inf
    return dist


# -- variation operators ------------------------------------------------------------------

def _wins(ranks, crowd, a, b):
    return (ranks[a] < ranks[b]) | ((ranks[a] == ranks[b]) & ((crowd[a] > crowd[b]) | ((crowd[a] == crowd[b]) & (a <= b))))


def tournament_picks(ranks, crowd, rng, count):
    """Winners of ``count`` independent binary tournaments (indices)."""
    n = len(ranks)
    pairs = rng.integers(0, n, size=(count, 2))
    a, b = pairs[:, 0], pairs[:, 1]
    return np.where(_wins(ranks, crowd, a, b), a, b)


def binary_tournament(ranks, crowd, rng):
    return int(tournament_picks(np.asarray(ranks), np.asarray(crowd), rng, 1)[0])


def uniform_crossover(p1, p2, rng):
    """Gene-wise swap with probability one half; works on single masks or batches."""
    p1, p2 = np.asarray(p1, dtype=bool), np.asarray(p2, dtype=bool)
    if p1.shape != p2.shape:
        raise ValueError("parents must have the same shape")
    xi = rng.random(p1.shape) <= 0.5
    return np.where(xi, p1, p2), np.where(xi, p2, p1)


def uniform_mutation(child, rate, rng):
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"mutation rate must lie in [0, 1], got {rate}")
    child = np.asarray(child, dtype=bool)
    return child ^ (rng.random(child.shape) < rate)


# -- main loop -----------------------------------------------------------------------------

def _survivors(objs, size):
    ranks = fast_nondominated_sort(objs)
    crowd = crowding_distance(objs, ranks)
    keep = np.lexsort((np.arange(len(objs)), -crowd, ranks))[:size]
    return keep, ranks[keep], crowd[keep]


def nsga2_run(objective_fn, n_genes, config, rng, on_generation=None):
    """Evolve ``config.pop_size`` masks for ``config.generations`` generations.

    Returns the non-dominated individuals of the final population, one per
    distinct objective vector (lexicographically smallest mask kept), sorted
    by ascending count fraction.
    """
    size = config.pop_size
    rate = config.mutation_rate if config.mutation_rate is not None else 1.0 / max(n_genes, 1)
    # each initial mask gets its own density so every cardinality is seeded
    pop = rng.random((size, n_genes)) < rng.random((size, 1))
    if config.seed_extremes:
        pop[0] = False
        pop[1] = True
    objs = objective_fn(pop)
    keep, ranks, crowd = _survivors(objs, size)
    pop, objs = pop[keep], objs[keep]

    for gen in range(config.generations):
        parents = tournament_picks(ranks, crowd, rng, size)
        p1, p2 = pop[parents[0::2]], pop[parents[1::2]]
        c1, c2 = uniform_crossover(p1, p2, rng)
        # uncrossed pairs pass on copies, so mutation alone refines good masks
        skip = rng.random(len(p1)) >= config.crossover_prob
        c1[skip], c2[skip] = p1[skip], p2[skip]
        kids = uniform_mutation(np.concatenate([c1, c2]), rate, rng)
        merged = np.concatenate([pop, kids])
        merged_objs = np.concatenate([objs, objective_fn(kids)])
        keep, ranks, crowd = _survivors(merged_objs, size)
        pop, objs = merged[keep], merged_objs[keep]
        if on_generation is not None:
            on_generation(gen, pop, objs, ranks)

    return _final_front(pop, objs, ranks, crowd)


def _final_front(pop, objs, ranks, crowd):
    best = {}
    for i in np.flatnonzero(ranks == 0):
        key = (float(objs[i, 0]), float(objs[i, 1]))
        genes = tuple(pop[i].astype(np.int8))
        if key not in best or genes < best[key][0]:
            best[key] = (genes, i)
    front = [
        Individual(pop[i].copy(), Objectives(*key), 0, float(crowd[i]))
        for key, (_, i) in best.items()
    ]
    front.sort(key=lambda ind: (ind.objectives.count_frac, ind.objectives.info_gap))
    return front


def pareto_set(objs):
    """Indices of the non-dominated rows of ``objs`` (brute force)."""
    objs = np.asarray(objs)
    le = np.all(objs[:, None, :] <= objs[None, :, :], axis=2)
    lt = np.any(objs[:, None, :] < objs[None, :, :], axis=2)
    dominated = np.any(le & lt, axis=0)
    return np.flatnonzero(~dominated)


def all_masks(n):
    """Every binary mask of length ``n`` as a (2**n, n) boolean array."""
    return ((np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)


def diversity_metric(points, extremes=((1.0, 0.0), (0.0, 1.0))):
    """Spread of a front sorted along the front (ascending count fraction).

    ``extremes`` are the ends of the ideal front that the first and last
    obtained points are measured against.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        return 1.0
    gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    mean = gaps.mean()
    d_first = np.linalg.norm(pts[0] - np.asarray(extremes[0]))
    d_last = np.linalg.norm(pts[-1] - np.asarray(extremes[1]))
    denom = d_first + d_last + len(gaps) * mean
    if denom == 0:
        return 1.0
    return float((d_first + d_last + np.abs(gaps - mean).sum()) / denom)
