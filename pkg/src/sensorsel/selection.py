"""Choosing one selection mask: from a Pareto front or by a baseline rule."""
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import infometrics

EXHAUSTIVE_LIMIT = 100_000


@dataclass(frozen=True)
class FrontPoint:
    mask: np.ndarray
    f1: float
    f2: float

    @classmethod
    def from_individual(cls, ind):
        return cls(ind.mask, float(ind.objectives.info_gap), float(ind.objectives.count_frac))


def as_points(front):
    return [p if isinstance(p, FrontPoint) else FrontPoint.from_individual(p) for p in front]


def _sorted_unique(points):
    seen, out = set(), []
    for p in sorted(points, key=lambda p: (p.f2, p.f1)):
        if (p.f1, p.f2) not in seen:
            seen.add((p.f1, p.f2))
            out.append(p)
    return out


def knee_slopes(points):
    """Slope angle (degrees) of each point against its left neighbour."""
    f1 = np.array([p.f1 for p in points])
    f2 = np.array([p.f2 for p in points])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (f1[:-1] - f1[1:]) / (f2[:-1] - f2[1:])
    return 180.0 - np.degrees(np.arctan(ratio))


def knee_point(front):
    """Front point with the largest slope angle to its left neighbour.

    The empty selection is defined to sit at ``(1, 0)`` and anchors the
    front; any evaluated point with ``f2 == 0`` is replaced by that anchor,
    which is never returned. Ties go to the smaller f2.
    """
    given = _sorted_unique(as_points(front))
    points = [p for p in given if p.f2 > 0]
    if not points or (len(given) < 2 and len(points) == len(given)):
        raise ValueError("knee point needs the empty-selection anchor plus a solution, or two solutions")
    points.insert(0, FrontPoint(None, 1.0, 0.0))
    slopes = knee_slopes(points)
    return points[1 + int(np.argmax(slopes))]


def compromise(front, utopia=(0.0, 0.0)):
    """Front point closest (Euclidean) to the utopia point; ties go to smaller f2."""
    points = as_points(front)
    if not points:
        raise ValueError("compromise needs a non-empty front")
    u1, u2 = utopia
    return min(points, key=lambda p: (math.hypot(p.f1 - u1, p.f2 - u2), p.f2, p.f1))


def weighted_sum_select(objective, w1, front=None):
    """Mask minimizing ``w1 * f1 + (1 - w1) * f2``.

    Additive objectives (MIUB) are solved exactly sensor by sensor; otherwise
    the candidates in ``front`` are scanned.
    """
    if not 0.0 <= w1 <= 1.0:
        raise ValueError(f"w1 must lie in [0, 1], got {w1}")
    if getattr(objective, "additive", False):
        return w1 * objective.shares >= (1.0 - w1) / objective.n
    if not front:
        raise ValueError("non-additive objectives need a candidate front to scan")
    points = as_points(front)
    best = min(points, key=lambda p: (w1 * p.f1 + (1.0 - w1) * p.f2, p.f1, p.f2))
    return np.asarray(best.mask, dtype=bool)


def threshold_prefilter(field, p_th):
    """Mark sensors with sensing probability below ``p_th`` unavailable."""
    if not 0.0 <= p_th <= 1.0:
        raise ValueError(f"p_th must lie in [0, 1], got {p_th}")
    available = field.available & (field.probs >= p_th)
    if not available.any():
        raise ValueError(f"no sensor has sensing probability >= {p_th}")
    return type(field)(field.positions, field.probs, available)


def _fi_logdets(masks, table):
    return infometrics.logdet(infometrics.total_fi(masks, table))


def top_a_select(table, count, metric):
    """Best fixed-size selection of ``count`` sensors.

    ``metric="miub"`` takes the largest individual MI values. ``metric="fi"``
    maximizes the log-det of the accumulated FI, exhaustively while
    C(N, count) <= 1e5 and by greedy forward selection beyond that.
    """
    n = len(table)
    if not 0 <= count <= n:
        raise ValueError(f"count must lie in [0, {n}], got {count}")
    mask = np.zeros(n, dtype=bool)
    if count == 0:
        return mask
    if metric == "miub":
        order = np.lexsort((np.arange(n), -table.per_sensor_mi))
        mask[order[:count]] = True
        return mask
    if metric != "fi":
        raise ValueError(f"metric must be 'fi' or 'miub', got {metric!r}")
    if math.comb(n, count) <= EXHAUSTIVE_LIMIT:
        best_val, best = -np.inf, None
        combos = itertools.combinations(range(n), count)
        while True:
            chunk = list(itertools.islice(combos, 4096))
            if not chunk:
                break
            idx = np.array(chunk)
            masks = np.zeros((len(idx), n), dtype=bool)
            masks[np.arange(len(idx))[:, None], idx] = True
            vals = _fi_logdets(masks, table)
            j = int(np.argmax(vals))
            if vals[j] > best_val:
                best_val, best = vals[j], masks[j]
        return best
    for _ in range(count):
        cand = np.flatnonzero(~mask)
        trial = np.repeat(mask[None, :], len(cand), axis=0)
        trial[np.arange(len(cand)), cand] = True
        mask[cand[int(np.argmax(_fi_logdets(trial, table)))]] = True
    return mask
