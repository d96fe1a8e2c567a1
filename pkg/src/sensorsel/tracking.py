"""SIR particle filter for the uncertain-sensor amplitude model."""
import logging
from dataclasses import dataclass

import numpy as np

from . import sensing
from .dynamics import STATE_DIM, propagate

log = logging.getLogger(__name__)


class WeightUnderflow(RuntimeWarning):
    pass


@dataclass
class Prior:
    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def isotropic(cls, mean=(-23.0, -24.0, 2.0, 2.0), sigma_pos=6.0, sigma_vel=0.1):
        """Diagonal prior with position std ``sigma_pos`` and velocity std ``sigma_vel``."""
        cov = np.diag([sigma_pos**2, sigma_pos**2, sigma_vel**2, sigma_vel**2])
        return cls(np.asarray(mean, dtype=np.float64), cov)


@dataclass
class ParticleCloud:
    states: np.ndarray  # (n, 4)
    weights: np.ndarray  # (n,), sums to one

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64).reshape(-1, STATE_DIM)
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if len(self.states) == 0 or len(self.states) != len(self.weights):
            raise ValueError("cloud needs matching, non-empty states and weights")

    def __len__(self):
        return len(self.weights)

    def covariance(self):
        diff = self.states - estimate(self)
        return (diff * self.weights[:, None]).T @ diff


@dataclass
class Scene:
    """Everything the fusion center knows about the sensors."""

    field: sensing.SensorField
    signal: sensing.SignalModel
    quantizer: sensing.Quantizer = None

    @property
    def quantized(self):
        return self.quantizer is not None


def init_particles(prior, count, rng):
    if count < 1:
        raise ValueError(f"particle count must be >= 1, got {count}")
    states = rng.multivariate_normal(prior.mean, prior.cov, size=count, method="cholesky")
    return ParticleCloud(states, np.full(count, 1.0 / count))


def estimate(cloud):
    """Weighted mean state."""
    return cloud.weights @ cloud.states


def systematic_resample(cloud, rng):
    n = len(cloud)
    cdf = np.cumsum(cloud.weights)
    cdf /= cdf[-1]
    points = (rng.random() + np.arange(n)) / n
    idx = np.minimum(np.searchsorted(cdf, points, side="right"), n - 1)
    return ParticleCloud(cloud.states[idx], np.full(n, 1.0 / n))


def log_likelihood(states, measurements, scene):
    """Summed log-likelihood of ``measurements`` for each particle state."""
    total = np.zeros(len(states))
    if not measurements:
        return total
    ids = np.array([m.sensor_id for m in measurements])
    h = sensing.amplitudes(scene.field.positions[ids], states, scene.signal)  # (n, k)
    p_s = scene.field.probs[ids]
    sigma = scene.signal.noise_std
    if scene.quantized:
        levels = np.array([m.level for m in measurements])
        ll = sensing.level_logpmf(levels[None, :], h, p_s[None, :], sigma, scene.quantizer.thresholds)
    else:
        z = np.array([m.value for m in measurements])
        ll = sensing.analog_loglik(z[None, :], h, p_s[None, :], sigma)
    return ll.sum(axis=1)


def reweight(cloud, measurements, scene):
    """Bayes update of the weights in log space.

    Returns the new cloud and whether every weight underflowed (in which case
    the weights are reset to uniform).
    """
    with np.errstate(divide="ignore"):  # zero-weight particles stay at -inf
        logw = np.log(cloud.weights) + log_likelihood(cloud.states, measurements, scene)
    top = np.max(logw)
    if not np.isfinite(top):
        n = len(cloud)
        return ParticleCloud(cloud.states, np.full(n, 1.0 / n)), True
    w = np.exp(logw - top)
    return ParticleCloud(cloud.states, w / w.sum()), False


def predict(cloud, model, rng):
    return ParticleCloud(propagate(cloud.states, model, rng), cloud.weights)


def pf_step(cloud, model, measurements, scene, rng, predicted=None):
    """One SIR cycle: propagate, weight, estimate, resample.

    ``predicted`` lets the caller supply an already propagated cloud (the
    selection step looks at it before measurements arrive).

    Returns ``(resampled_cloud, estimate, underflow)``.
    """
    if predicted is None:
        predicted = predict(cloud, model, rng)
    updated, underflow = reweight(predicted, measurements, scene)
    if underflow:
        log.warning("particle weights underflowed; reset to uniform")
    x_hat = estimate(updated)
    return systematic_resample(updated, rng), x_hat, underflow
