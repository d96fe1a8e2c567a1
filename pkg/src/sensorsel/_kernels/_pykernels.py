"""Pure numpy versions of the compiled kernels.

These are the reference semantics; ``_ckernels`` must agree with them.
"""
import numpy as np
from scipy import special


def nondominated_ranks(objs):
    """Front index (0 = non-dominated) of every row of ``objs``."""
    objs = np.asarray(objs, dtype=np.float64)
    n = objs.shape[0]
    le = np.all(objs[:, None, :] <= objs[None, :, :], axis=2)
    lt = np.any(objs[:, None, :] < objs[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    rank = np.full(n, -1, dtype=np.int64)
    current = np.flatnonzero(count == 0)
    level = 0
    while current.size:
        rank[current] = level
        count = count - dom[current].sum(axis=0)
        count[rank >= 0] = -1
        current = np.flatnonzero(count == 0)
        level += 1
    return rank


def spread_gaussians(centers, weights, z0, dz, nz, sigma, halfwidth):
    """Weighted sum of N(z; c_s, sigma^2) on the grid z_j = z0 + j*dz.

    Each Gaussian is truncated at ``halfwidth`` standard deviations.
    """
    centers = np.asarray(centers, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    keep = weights != 0.0
    centers, weights = centers[keep], weights[keep]
    reach = halfwidth * sigma
    j0 = np.ceil((centers - reach - z0) / dz).astype(np.int64)
    j1 = np.floor((centers + reach - z0) / dz).astype(np.int64)
    span = int((j1 - j0).max(initial=-1)) + 1
    if span <= 0:
        return np.zeros(nz)
    idx = j0[:, None] + np.arange(span)[None, :]
    valid = (idx <= j1[:, None]) & (idx >= 0) & (idx < nz)
    u = (z0 + idx * dz - centers[:, None]) / sigma
    contrib = weights[:, None] * np.exp(-0.5 * u * u) / (sigma * np.sqrt(2.0 * np.pi))
    return np.bincount(idx[valid], weights=contrib[valid], minlength=nz)[:nz]


def _cell_probs(t):
    tail = np.where(np.abs(t) > 40.0, 0.0, special.ndtr(-np.abs(t)))
    lo, hi = t[..., :-1], t[..., 1:]
    tl, th = tail[..., :-1], tail[..., 1:]
    return np.where(lo > 0, tl - th, np.where(hi <= 0, th - tl, 1.0 - tl - th))


def quantized_stats(h, weights, probs, sigma, thresholds, pmf_floor, chunk=256):
    """Per-(particle, sensor) quantized Fisher factor, weighted level pmf and conditional entropy.

    Returns ``(kappa (n, k), marginal (k, L), cond_bits (k,))``.
    """
    n, k = h.shape
    nl = len(thresholds) - 1
    noise = _cell_probs(thresholds / sigma)
    kappa = np.zeros((n, k))
    marg = np.zeros((k, nl))
    cond = np.zeros(k)
    for start in range(0, n, chunk):
        sl = slice(start, start + chunk)
        t = (thresholds - h[sl, :, None]) / sigma
        with np.errstate(invalid="ignore"):
            e = np.where(np.abs(t) > 40.0, 0.0, np.exp(-0.5 * t * t))
        pmf = probs[:, None] * _cell_probs(t) + (1.0 - probs[:, None]) * noise
        d = e[..., :-1] - e[..., 1:]
        ok = pmf > pmf_floor
        kappa[sl] = np.where(ok, d * d / np.where(ok, pmf, 1.0), 0.0).sum(axis=-1) / (2.0 * np.pi * sigma**2)
        w = weights[sl]
        marg += np.einsum("s,skl->kl", w, pmf)
        pos = pmf > 0
        ent = -np.where(pos, pmf * np.log2(np.where(pos, pmf, 1.0)), 0.0).sum(axis=-1)
        cond += w @ ent
    return kappa, marg, cond
