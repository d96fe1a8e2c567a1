"""Sensor field, uncertain amplitude measurements, and their likelihoods.

A sensor observes ``h(x) + v`` with its sensing probability and pure noise
``v`` otherwise, where ``h`` is the square root of the attenuated source
power and ``v ~ N(0, sigma^2)``. Measurements may be sent as analog values or
quantized to ``bits`` bits.
"""
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class SignalModel:
    source_power: float = 1000.0
    atten_scale: float = 1.0
    decay_exponent: float = 2.0
    noise_std: float = 0.2

    def __post_init__(self):
        if not self.source_power > 0:
            raise ValueError(f"source_power must be > 0, got {self.source_power}")
        if not self.noise_std > 0:
            raise ValueError(f"noise_std must be > 0, got {self.noise_std}")
        if not self.atten_scale >= 0:
            raise ValueError(f"atten_scale must be >= 0, got {self.atten_scale}")
        if not self.decay_exponent > 0:
            raise ValueError(f"decay_exponent must be > 0, got {self.decay_exponent}")


@dataclass(frozen=True)
class Sensor:
    id: int
    x: float
    y: float
    sensing_prob: float

    def __post_init__(self):
        if not 0.0 <= self.sensing_prob <= 1.0:
            raise ValueError(f"sensing_prob must lie in [0, 1], got {self.sensing_prob}")


@dataclass(frozen=True)
class SensorField:
    """Sensor positions (n, 2), sensing probabilities (n,), availability mask (n,)."""

    positions: np.ndarray
    probs: np.ndarray
    available: np.ndarray = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if pos.shape[0] != probs.shape[0]:
            raise ValueError("positions and probs must have the same length")
        if np.any((probs < 0) | (probs > 1)):
            raise ValueError("sensing probabilities must lie in [0, 1]")
        avail = np.ones(len(probs), dtype=bool) if self.available is None else np.asarray(self.available, dtype=bool)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "available", avail)

    def __len__(self):
        return len(self.probs)

    def sensor(self, i):
        return Sensor(int(i), float(self.positions[i, 0]), float(self.positions[i, 1]), float(self.probs[i]))

    def sensors(self):
        return [self.sensor(i) for i in range(len(self))]

    @property
    def active_ids(self):
        return np.flatnonzero(self.available)

    def subset(self, ids):
        """Field restricted to sensor ``ids`` (all marked available)."""
        ids = np.asarray(ids, dtype=np.int64)
        return SensorField(self.positions[ids], self.probs[ids])

    def with_probs(self, probs):
        return replace(self, probs=np.asarray(probs, dtype=np.float64))


@dataclass(frozen=True)
class Quantizer:
    bits: int
    thresholds: np.ndarray  # L + 1 entries, -inf and +inf at the ends

    @property
    def levels(self):
        return 2**self.bits


@dataclass
class Measurement:
    sensor_id: int
    value: float = None
    level: int = None
    kind: str = "analog"
    truth_sensed: bool = field(default=False, compare=False)

    @property
    def datum(self):
        return self.value if self.kind == "analog" else self.level


# -- field construction -----------------------------------------------------

def grid_positions(m=6, side=50.0):
    """m x m lattice spanning the square [-side/2, side/2]^2, row-major from the lower left."""
    ticks = np.linspace(-side / 2.0, side / 2.0, m)
    xs, ys = np.meshgrid(ticks, ticks)
    return np.column_stack([xs.ravel(), ys.ravel()])


def _distinct_jitter(n, scale=0.02):
    # Deterministic spread so no two sensors share a probability.
    return scale * ((np.arange(n) * 7) % n / max(n - 1, 1) - 0.5)


def track_distance(positions, start=(-23.0, -24.0), heading=(1.0, 1.0)):
    """Perpendicular distance from each position to the straight nominal track."""
    start = np.asarray(start, dtype=np.float64)
    u = np.asarray(heading, dtype=np.float64)
    u = u / np.linalg.norm(u)
    rel = np.asarray(positions) - start
    return np.abs(rel[:, 0] * u[1] - rel[:, 1] * u[0])


def track_low_probs(positions, p_low=0.05, p_high=0.95, length=8.0, start=(-23.0, -24.0), heading=(1.0, 1.0)):
    """Sensing probabilities that are low near the nominal track and high far from it."""
    d = track_distance(positions, start, heading)
    p = p_low + (p_high - p_low) * (1.0 - np.exp(-0.5 * (d / length) ** 2))
    return np.clip(p + _distinct_jitter(len(p)), 0.01, 0.99)


def track_high_probs(positions, p_low=0.05, p_high=0.95, **kw):
    """Mirror image of :func:`track_low_probs`: reliable sensors sit on the track."""
    return p_low + p_high - track_low_probs(positions, p_low, p_high, **kw)


LAYOUTS = ("track_low", "track_high", "uniform_random", "constant")


def make_field(m=6, side=50.0, layout="track_low", probs=None, constant=1.0, seed=0):
    """Build the m x m sensor field with a named probability layout.

    ``probs`` (explicit per-sensor values) overrides ``layout``.
    """
    pos = grid_positions(m, side)
    if probs is not None:
        p = np.asarray(probs, dtype=np.float64)
        if p.shape != (m * m,):
            raise ValueError(f"expected {m * m} sensing probabilities, got {p.shape}")
    elif layout == "track_low":
        p = track_low_probs(pos)
    elif layout == "track_high":
        p = track_high_probs(pos)
    elif layout == "uniform_random":
        p = np.random.default_rng(seed).uniform(0.0, 1.0, m * m)
    elif layout == "constant":
        p = np.full(m * m, float(constant))
    else:
        raise ValueError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    return SensorField(pos, p)


# -- signal model -----------------------------------------------------------

def distances(positions, states):
    """Sensor-target distances, shape (n_states, n_sensors)."""
    states = np.atleast_2d(states)
    dx = states[:, None, 0] - positions[None, :, 0]
    dy = states[:, None, 1] - positions[None, :, 1]
    return np.hypot(dx, dy)


def amplitude_from_distance(d, model):
    return np.sqrt(model.source_power / (1.0 + model.atten_scale * d**model.decay_exponent))


def amplitudes(positions, states, model):
    """Noise-free amplitudes, shape (n_states, n_sensors)."""
    return amplitude_from_distance(distances(positions, states), model)


def received_amplitude(sensor, state, model):
    d = np.hypot(state[0] - sensor.x, state[1] - sensor.y)
    return float(amplitude_from_distance(d, model))


def sample_measurement(sensor, state, model, rng, quantizer=None):
    """Draw one (possibly quantized) measurement from ``sensor``."""
    sensed = bool(rng.random() < sensor.sensing_prob)
    value = rng.normal(0.0, model.noise_std)
    if sensed:
        value += received_amplitude(sensor, state, model)
    if quantizer is None:
        return Measurement(sensor.id, value=float(value), kind="analog", truth_sensed=sensed)
    return Measurement(
        sensor.id, value=float(value), level=quantize(value, quantizer), kind="quantized", truth_sensed=sensed
    )


def _normal_logpdf(z, mean, sigma):
    u = (z - mean) / sigma
    return -0.5 * u * u - np.log(sigma) - LOG_SQRT_2PI


def analog_loglik(z, h, p_s, sigma):
    """Elementwise log of the two-branch Gaussian mixture density of ``z``."""
    z = np.asarray(z, dtype=np.float64)
    sig = _normal_logpdf(z, h, sigma)
    noise = _normal_logpdf(z, 0.0, sigma)
    with np.errstate(divide="ignore"):
        return np.logaddexp(np.log(p_s) + sig, np.log1p(-p_s) + noise)


def analog_likelihood(value, sensor, state, model):
    h = received_amplitude(sensor, state, model)
    return float(np.exp(analog_loglik(value, h, sensor.sensing_prob, model.noise_std)))


def gaussian_tail(x):
    """Standard normal complementary CDF."""
    return special.ndtr(-np.asarray(x, dtype=np.float64)) if np.ndim(x) else float(special.ndtr(-x))


# -- quantization ------------------------------------------------------------

def build_quantizer(bits, model):
    """Uniform thresholds splitting [-sigma, sigma + sqrt(P0)] into 2**bits cells."""
    bits = int(bits)
    if not 1 <= bits <= 16:
        raise ValueError(f"bits must lie in [1, 16], got {bits}")
    levels = 2**bits
    lo = -model.noise_std
    width = 2.0 * model.noise_std + np.sqrt(model.source_power)
    inner = lo + np.arange(1, levels) * (width / levels)
    thresholds = np.concatenate([[-np.inf], inner, [np.inf]])
    return Quantizer(bits=bits, thresholds=thresholds)


def quantize(value, quantizer):
    """Level ``l`` with ``eta_l <= value < eta_{l+1}``; ties go to the higher level."""
    inner = quantizer.thresholds[1:-1]
    out = np.searchsorted(inner, value, side="right")
    return int(out) if np.ndim(out) == 0 else out


def _interval_prob(lo, hi):
    """P(lo <= Z < hi) for standard normal Z, accurate in both tails."""
    flip = lo > 0
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    return special.ndtr(b) - special.ndtr(a)


def _log_interval_prob(lo, hi):
    flip = lo > 0
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    la, lb = special.log_ndtr(a), special.log_ndtr(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lb + np.log1p(-np.exp(la - lb))
    return np.where(b > a, out, -np.inf)


def _cell_probs(t):
    """Standard normal mass of each cell between consecutive points ``t`` (trailing axis).

    One tail evaluation per point; each cell is differenced on the side
    where both of its tails are small, so tiny probabilities keep their
    relative accuracy.
    """
    tail = special.ndtr(-np.abs(t))
    lo, hi = t[..., :-1], t[..., 1:]
    tl, th = tail[..., :-1], tail[..., 1:]
    return np.where(lo > 0, tl - th, np.where(hi <= 0, th - tl, 1.0 - tl - th))


def level_pmf(h, p_s, sigma, thresholds):
    """Level probabilities for amplitudes ``h``; trailing axis indexes the level."""
    h = np.asarray(h, dtype=np.float64)[..., None]
    p_s = np.asarray(p_s, dtype=np.float64)[..., None]
    signal = _cell_probs((thresholds - h) / sigma)
    noise = _cell_probs(thresholds / sigma)
    return p_s * signal + (1.0 - p_s) * noise


def level_logpmf(levels, h, p_s, sigma, thresholds):
    """Log-probability of the observed ``levels`` given amplitudes ``h`` (broadcast)."""
    levels = np.asarray(levels, dtype=np.int64)
    lo, hi = thresholds[levels], thresholds[levels + 1]
    sig = _log_interval_prob((lo - h) / sigma, (hi - h) / sigma)
    noise = _log_interval_prob(lo / sigma, hi / sigma)
    with np.errstate(divide="ignore"):
        return np.logaddexp(np.log(p_s) + sig, np.log1p(-p_s) + noise)


def quantized_pmf(level, sensor, state, model, quantizer):
    if not 0 <= level < quantizer.levels:
        raise ValueError(f"level must lie in [0, {quantizer.levels}), got {level}")
    h = received_amplitude(sensor, state, model)
    return float(level_pmf(h, sensor.sensing_prob, model.noise_std, quantizer.thresholds)[level])
