"""Constant-velocity target motion.

State vectors are ordered ``[x, y, vx, vy]`` everywhere in the package.
"""
from dataclasses import dataclass

import numpy as np

STATE_DIM = 4


def as_state(state):
    """Validate and return ``state`` as a float array of shape (4,)."""
    arr = np.asarray(state, dtype=np.float64)
    if arr.shape != (STATE_DIM,):
        raise ValueError(f"target state must have shape (4,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"target state must be finite, got {arr}")
    return arr


@dataclass(frozen=True)
class MotionModel:
    sample_interval: float
    noise_intensity: float
    transition: np.ndarray
    process_cov: np.ndarray

    def noise_factor(self):
        """Matrix ``L`` with ``L @ L.T == process_cov``."""
        return _cov_factor(self.process_cov)


def transition_matrix(sample_interval):
    d = float(sample_interval)
    return np.array(
        [
            [1.0, 0.0, d, 0.0],
            [0.0, 1.0, 0.0, d],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def process_covariance(sample_interval, noise_intensity):
    d = float(sample_interval)
    a, b = d**3 / 3.0, d**2 / 2.0
    return float(noise_intensity) * np.array(
        [
            [a, 0.0, b, 0.0],
            [0.0, a, 0.0, b],
            [b, 0.0, d, 0.0],
            [0.0, b, 0.0, d],
        ]
    )


def build_motion_model(sample_interval, noise_intensity):
    """Discrete white-noise-acceleration model for sampling period ``sample_interval``.

    Raises
    ------
    ValueError
        If ``sample_interval`` is not positive or ``noise_intensity`` is negative.
    """
    if not sample_interval > 0:
        raise ValueError(f"sample_interval must be > 0, got {sample_interval}")
    if not noise_intensity >= 0:
        raise ValueError(f"noise_intensity must be >= 0, got {noise_intensity}")
    return MotionModel(
        sample_interval=float(sample_interval),
        noise_intensity=float(noise_intensity),
        transition=transition_matrix(sample_interval),
        process_cov=process_covariance(sample_interval, noise_intensity),
    )


def _cov_factor(cov):
    # Q is exactly zero for q = 0 and poorly conditioned for tiny intervals.
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def propagate(state, model, rng):
    """One step ``F x + w`` with ``w ~ N(0, Q)``.

    ``state`` may also be a (n, 4) batch; each row gets independent noise.
    """
    x = np.asarray(state, dtype=np.float64)
    noise = rng.standard_normal(x.shape) @ model.noise_factor().T
    return x @ model.transition.T + noise


def generate_trajectory(initial, model, steps, rng):
    """Ground-truth states for ``steps`` consecutive propagations of ``initial``.

    Returns an array of shape (steps, 4); row ``t`` is the state after ``t + 1``
    transitions.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    x = as_state(initial)
    out = np.empty((steps, STATE_DIM))
    for t in range(steps):
        x = propagate(x, model, rng)
        out[t] = x
    return out
