"""Fisher information and mutual information of sensor measurements.

All metrics are taken against a particle cloud that represents the current
(predicted) target density. Fisher matrices are 4x4 over ``[x, y, vx, vy]``;
a single sensor only informs the position block. Mutual information is
reported in bits.

The per-particle work for analog data goes through per-sensor lookup tables:
the Fisher factor ``kappa`` and the conditional measurement entropy depend
on the state only through the standardized amplitude ``r = h / sigma``, so
each is tabulated once per sensing probability on ``r in [0, R_MAX]`` and
splined. Beyond ``R_MAX`` the two mixture branches no longer overlap and
both quantities are flat to double precision.
"""
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, interpolate

from . import sensing
from ._kernels import quantized_stats, spread_gaussians

R_MAX = 20.0
R_STEP = 0.02
LOG2E = 1.0 / math.log(2.0)
PMF_FLOOR = 1e-300
DEFAULT_MI_BUDGET = 2**20


class QuadratureError(RuntimeError):
    pass


class CombinatorialBlowup(ValueError):
    """Raised when an exact joint sum over quantized levels is too large."""


def _gl_nodes(a, b, width, order=12):
    n = max(1, int(math.ceil((b - a) / width)))
    edges = np.linspace(a, b, n + 1)
    x, w = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _std_normal(u):
    return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class MixtureTable:
    """Standardized ``sigma^2 * kappa`` and conditional entropy (bits) versus ``r``."""

    sensing_prob: float
    kappa: interpolate.CubicSpline
    entropy: interpolate.CubicSpline

    def kappa_std(self, r):
        return self.kappa(np.minimum(r, R_MAX))

    def entropy_std(self, r):
        return self.entropy(np.minimum(r, R_MAX))


@lru_cache(maxsize=512)
def mixture_table(sensing_prob):
    p = float(sensing_prob)
    r = np.arange(0.0, R_MAX + R_STEP / 2, R_STEP)

    # kappa: integrate in u = (z - h) / sigma, signal branch centred at 0.
    u, w = _gl_nodes(-12.0, 12.0, 0.2)
    with np.errstate(over="ignore"):
        ratio = np.exp(-u[None, :] * r[:, None] - 0.5 * r[:, None] ** 2)
    if p > 0:
        kappa = (u * u * _std_normal(u) / (p + (1.0 - p) * ratio)) @ w
    else:
        kappa = np.zeros_like(r)

    # entropy of p N(r, 1) + (1 - p) N(0, 1), in bits
    v, wv = _gl_nodes(-12.0, R_MAX + 12.0, 0.2)
    with np.errstate(divide="ignore"):
        log_sig = math.log(p) if p > 0 else -np.inf
        log_noise = math.log1p(-p) if p < 1 else -np.inf
    lm = np.logaddexp(
        log_sig - 0.5 * (v[None, :] - r[:, None]) ** 2,
        log_noise - 0.5 * v[None, :] ** 2,
    ) - 0.5 * math.log(2.0 * math.pi)
    m = np.exp(lm)
    entropy = -(m * lm) @ wv * LOG2E
    return MixtureTable(p, interpolate.CubicSpline(r, kappa), interpolate.CubicSpline(r, entropy))


# -- single-state Fisher information -------------------------------------------

def amplitude_gradient(sensor, state, model):
    """Gradient of the received amplitude with respect to ``[x, y, vx, vy]``."""
    pos = np.array([[sensor.x, sensor.y]])
    return amplitude_gradients(pos, np.asarray(state, dtype=np.float64)[None, :], model)[0, 0]


def amplitude_gradients(positions, states, model):
    """Amplitude gradients, shape (n_states, n_sensors, 4)."""
    states = np.atleast_2d(states)
    rel = states[:, None, :2] - positions[None, :, :]
    d = np.hypot(rel[..., 0], rel[..., 1])
    a, n = model.atten_scale, model.decay_exponent
    h = sensing.amplitude_from_distance(d, model)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = -0.5 * a * n * h * d ** (n - 2.0) / (1.0 + a * d**n)
    # d = 0 is a stationary point of the radial field
    scale = np.where(d > 0, scale, 0.0)
    out = np.zeros(states.shape[:1] + positions.shape[:1] + (4,))
    out[..., :2] = scale[..., None] * rel
    return out


def kappa_analog(h, sensing_prob, sigma):
    """Fisher factor of the analog mixture by adaptive quadrature over z."""
    p = float(sensing_prob)
    if p == 0.0:
        return 0.0

    def integrand(z):
        # (d/dh f)^2 / f with f = [p phi(u) + (1-p) phi(z/sigma)] / sigma, divided through by phi(u)
        u = (z - h) / sigma
        expo = 0.5 * u * u - 0.5 * (z / sigma) ** 2
        if expo > 700.0:
            return 0.0
        return (u / sigma) ** 2 * _std_normal(u) / sigma / (p + (1.0 - p) * math.exp(expo))

    lo, hi = -8.0 * sigma, h + 8.0 * sigma
    # the integrand lives within a few sigma of h; help the adaptive scheme find it
    points = [p_ for p_ in (0.0, h - 4 * sigma, h, h + 4 * sigma) if lo < p_ < hi]
    val, err = integrate.quad(integrand, lo, hi, points=points, epsabs=0.0, epsrel=1e-10, limit=400)
    if not np.isfinite(val) or err > 1e-8 * abs(val) + 1e-300:
        raise QuadratureError(f"kappa quadrature did not converge (h={h}, p_s={p}, err={err})")
    return val


def kappa_quantized(h, sensing_prob, sigma, thresholds):
    """Fisher factor of the quantized mixture; ``h`` may be an array."""
    h = np.asarray(h, dtype=np.float64)
    pmf = sensing.level_pmf(h, sensing_prob, sigma, thresholds)
    t = (thresholds - h[..., None]) / sigma
    with np.errstate(invalid="ignore"):
        e = np.exp(-0.5 * t * t)  # exactly 0 at the infinite end points
    diff = e[..., :-1] - e[..., 1:]
    ok = pmf > PMF_FLOOR
    terms = np.where(ok, diff * diff / np.where(ok, pmf, 1.0), 0.0)
    return terms.sum(axis=-1) / (2.0 * math.pi * sigma**2)


def _outer(g):
    return g[..., :, None] * g[..., None, :]


def fi_analog_single(sensor, state, model):
    g = amplitude_gradient(sensor, state, model)
    if sensor.sensing_prob == 0.0:
        return np.zeros((4, 4))
    try:
        k = kappa_analog(sensing.received_amplitude(sensor, state, model), sensor.sensing_prob, model.noise_std)
    except QuadratureError as exc:
        raise QuadratureError(f"{exc} for sensor {sensor.id} at state {list(state)}") from None
    return sensor.sensing_prob**2 * k * _outer(g)


def fi_quantized_single(sensor, state, model, quantizer):
    g = amplitude_gradient(sensor, state, model)
    h = sensing.received_amplitude(sensor, state, model)
    k = float(kappa_quantized(h, sensor.sensing_prob, model.noise_std, quantizer.thresholds))
    return sensor.sensing_prob**2 * k * _outer(g)


# -- cloud-averaged metrics ----------------------------------------------------------

def _quantized_stats(scene, h, weights, ids):
    return quantized_stats(
        h, weights, scene.field.probs[ids], scene.signal.noise_std, scene.quantizer.thresholds, PMF_FLOOR
    )


def _kappa_matrix(h, probs, scene):
    """Fisher factor per (particle, sensor)."""
    sigma = scene.signal.noise_std
    if scene.quantized:
        return kappa_quantized(h, probs[None, :], sigma, scene.quantizer.thresholds)
    out = np.empty_like(h)
    for j, p in enumerate(probs):
        out[:, j] = mixture_table(float(p)).kappa_std(h[:, j] / sigma) / sigma**2
    return out


def sensor_fisher(scene, states, weights, ids=None, kappa=None):
    """Expected single-sensor Fisher matrices over the weighted states, shape (k, 4, 4).

    ``kappa`` optionally supplies the (particle, sensor) Fisher factors.
    """
    field = scene.field
    ids = np.arange(len(field)) if ids is None else np.asarray(ids)
    pos, probs = field.positions[ids], field.probs[ids]
    states = np.atleast_2d(states)
    h = sensing.amplitudes(pos, states, scene.signal)
    g = amplitude_gradients(pos, states, scene.signal)[..., :2]
    if kappa is None:
        kappa = _quantized_stats(scene, h, weights, ids)[0] if scene.quantized else _kappa_matrix(h, probs, scene)
    k = kappa * probs[None, :] ** 2
    block = np.einsum("s,sk,ska,skb->kab", weights, k, g, g)
    out = np.zeros((len(ids), 4, 4))
    out[:, :2, :2] = block
    return out


def expected_fi(sensor, cloud, scene):
    """Cloud average of one sensor's Fisher matrix."""
    return sensor_fisher(scene, cloud.states, cloud.weights, ids=[sensor.id])[0]


def prior_fisher(cloud):
    """Inverse weighted covariance of the cloud.

    Returns ``(matrix, regularized)``; a jitter of 1e-9 * trace / 4 is added to
    the covariance diagonal when it is not safely positive definite.
    """
    cov = cloud.covariance()
    cov = 0.5 * (cov + cov.T)
    regularized = False
    vals = np.linalg.eigvalsh(cov)
    if vals[0] <= 1e-12 * max(vals[-1], 0.0) or vals[0] <= 0:
        cov = cov + np.eye(4) * max(1e-9 * np.trace(cov) / 4.0, 1e-300)
        regularized = True
    inv = np.linalg.inv(cov)
    return 0.5 * (inv + inv.T), regularized


def logdet(mat):
    """Log-determinant of a symmetric PSD matrix (or a stack of them)."""
    mat = np.asarray(mat)
    sign, val = np.linalg.slogdet(mat)
    if np.any(sign <= 0):
        tr = np.trace(mat, axis1=-2, axis2=-1)
        jitter = np.eye(mat.shape[-1]) * (1e-9 * tr / mat.shape[-1])[..., None, None]
        sign, val = np.linalg.slogdet(mat + jitter)
    return val


# -- mutual information -----------------------------------------------------------------

def _entropy_bits(p):
    p = np.asarray(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.sum(np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0), axis=-1)


def conditional_entropy_analog(h, sensing_prob, sigma):
    """Differential entropy (bits) of one analog measurement given the amplitude ``h``."""
    return mixture_table(float(sensing_prob)).entropy_std(np.asarray(h) / sigma) + math.log2(sigma)


def marginal_entropy_analog(h, weights, sensing_prob, sigma, step_frac=0.25, halfwidth=8.0):
    """Differential entropy (bits) of the cloud-averaged analog measurement density.

    The density is a weighted Gaussian mixture; it is evaluated on a uniform
    grid with spacing ``step_frac * sigma`` and integrated by the trapezoid
    rule, which is spectrally accurate for sums of Gaussians.
    """
    h = np.asarray(h, dtype=np.float64)
    dz = step_frac * sigma
    z0 = min(0.0, h.min()) - halfwidth * sigma
    z1 = max(0.0, h.max()) + halfwidth * sigma
    nz = int(math.ceil((z1 - z0) / dz)) + 1
    sig = spread_gaussians(h, weights, z0, dz, nz, sigma, halfwidth)
    z = z0 + dz * np.arange(nz)
    noise = _std_normal(z / sigma) / sigma
    dens = sensing_prob * sig + (1.0 - sensing_prob) * noise
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(dens > 0, dens * np.log2(np.where(dens > 0, dens, 1.0)), 0.0)
    return -dz * integrand.sum()


def sensor_mi(scene, states, weights, ids=None, stats=None):
    """Per-sensor mutual information I(z_i; x) in bits.

    ``stats`` optionally supplies the quantized kernel output for ``ids``.
    """
    field = scene.field
    ids = np.arange(len(field)) if ids is None else np.asarray(ids)
    sigma = scene.signal.noise_std
    h = sensing.amplitudes(field.positions[ids], np.atleast_2d(states), scene.signal)
    if scene.quantized:
        _, marginal, cond = _quantized_stats(scene, h, weights, ids) if stats is None else stats
        mi = _entropy_bits(marginal) - cond
        return np.where(field.probs[ids] == 0.0, 0.0, np.maximum(mi, 0.0))
    out = np.zeros(len(ids))
    for j, p in enumerate(field.probs[ids]):
        if p == 0.0:
            continue
        h_z = marginal_entropy_analog(h[:, j], weights, p, sigma)
        out[j] = max(h_z - weights @ conditional_entropy_analog(h[:, j], p, sigma), 0.0)
    return out


def mi_quantized(subset, cloud, scene, budget=DEFAULT_MI_BUDGET):
    """Exact joint mutual information between the quantized data of ``subset`` and the state."""
    if not scene.quantized:
        raise ValueError("mi_quantized needs a scene with a quantizer")
    subset = [int(i) for i in subset]
    if not subset:
        return 0.0
    levels = scene.quantizer.levels
    n_tuples = levels ** len(subset)
    if n_tuples > budget:
        raise CombinatorialBlowup(
            f"{levels}^{len(subset)} = {n_tuples} level tuples exceeds budget {budget}; use the MI upper bound"
        )
    sigma = scene.signal.noise_std
    field = scene.field
    h = sensing.amplitudes(field.positions[subset], cloud.states, scene.signal)
    pmfs = [sensing.level_pmf(h[:, j], field.probs[i], sigma, scene.quantizer.thresholds) for j, i in enumerate(subset)]
    cond = sum(cloud.weights @ _entropy_bits(p) for p in pmfs)
    chunk = max(1, int(4_000_000 // n_tuples))
    marginal = np.zeros(n_tuples)
    for start in range(0, len(cloud), chunk):
        sl = slice(start, start + chunk)
        joint = pmfs[0][sl]
        for p in pmfs[1:]:
            joint = (joint[:, :, None] * p[sl][:, None, :]).reshape(joint.shape[0], -1)
        marginal += cloud.weights[sl] @ joint
    return max(float(_entropy_bits(marginal) - cond), 0.0)


def mi_analog(subset, cloud, scene, sample_count, rng):
    """Monte-Carlo joint MI (bits) of analog data from ``subset``.

    Returns ``(estimate, standard_error)``. The conditional entropy is exact
    (sum of per-sensor terms); only the marginal entropy is sampled.
    """
    if sample_count < 1000:
        raise ValueError(f"sample_count must be >= 1000, got {sample_count}")
    subset = [int(i) for i in subset]
    if not subset:
        return 0.0, 0.0
    field, sigma = scene.field, scene.signal.noise_std
    pos, probs = field.positions[subset], field.probs[subset]
    h_cloud = sensing.amplitudes(pos, cloud.states, scene.signal)  # (n, k)
    cond = sum(cloud.weights @ conditional_entropy_analog(h_cloud[:, j], p, sigma) for j, p in enumerate(probs))

    src = rng.choice(len(cloud), size=sample_count, p=cloud.weights)
    sensed = rng.random((sample_count, len(subset))) < probs[None, :]
    z = rng.normal(0.0, sigma, (sample_count, len(subset))) + sensed * h_cloud[src]

    logw = np.log(cloud.weights)
    log_marg = np.empty(sample_count)
    chunk = max(1, int(2_000_000 // len(cloud)))
    for start in range(0, sample_count, chunk):
        zc = z[start:start + chunk]
        ll = sensing.analog_loglik(zc[:, None, :], h_cloud[None, :, :], probs[None, None, :], sigma).sum(axis=2)
        top = ll.max(axis=1, keepdims=True)
        log_marg[start:start + chunk] = (top[:, 0] + np.log(np.exp(ll + logw[None, :] - top) .sum(axis=1)))
    samples = -log_marg * LOG2E
    value = samples.mean() - cond
    se = samples.std(ddof=1) / math.sqrt(sample_count)
    return float(value), float(se)


# -- tables over the whole field ------------------------------------------------------------

@dataclass
class MetricTable:
    per_sensor_fi: np.ndarray  # (N, 4, 4)
    per_sensor_mi: np.ndarray  # (N,)
    prior_fi: np.ndarray  # (4, 4)
    prior_regularized: bool = False

    def __len__(self):
        return len(self.per_sensor_mi)


def compute_metric_table(scene, cloud, fi=True, mi=True):
    """Per-sensor expected FI and MI plus the prior FI for the current cloud."""
    n = len(scene.field)
    prior, reg = prior_fisher(cloud)
    stats = None
    if scene.quantized and (fi or mi):
        h = sensing.amplitudes(scene.field.positions, cloud.states, scene.signal)
        stats = _quantized_stats(scene, h, cloud.weights, np.arange(n))
    kappa = None if stats is None else stats[0]
    per_fi = sensor_fisher(scene, cloud.states, cloud.weights, kappa=kappa) if fi else np.zeros((n, 4, 4))
    per_mi = sensor_mi(scene, cloud.states, cloud.weights, stats=stats) if mi else np.zeros(n)
    return MetricTable(per_fi, per_mi, prior, reg)


def _check_mask(mask, table):
    mask = np.asarray(mask)
    if mask.shape[-1] != len(table):
        raise ValueError(f"mask length {mask.shape[-1]} does not match {len(table)} sensors")
    return mask.astype(np.float64)


def total_fi(mask, table):
    """Prior FI plus the FI of every selected sensor; ``mask`` may be a batch."""
    m = _check_mask(mask, table)
    return np.tensordot(m, table.per_sensor_fi, axes=([-1], [0])) + table.prior_fi


def miub(mask, table):
    """Sum of the selected sensors' individual MI (bits)."""
    return _check_mask(mask, table) @ table.per_sensor_mi


def subsets_upto(n, k):
    for size in range(1, k + 1):
        yield from itertools.combinations(range(n), size)
