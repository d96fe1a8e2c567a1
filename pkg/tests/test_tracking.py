import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sensorsel import dynamics, sensing, tracking

SIG = sensing.SignalModel()


def _scene(field, signal=SIG, bits=None):
    return tracking.Scene(field, signal, sensing.build_quantizer(bits, signal) if bits else None)


def test_single_particle_init():
    cloud = tracking.init_particles(tracking.Prior.isotropic(), 1, np.random.default_rng(0))
    assert len(cloud) == 1 and cloud.weights[0] == 1.0


def test_init_weights_exactly_uniform_and_mean_close():
    prior = tracking.Prior.isotropic()
    cloud = tracking.init_particles(prior, 5000, np.random.default_rng(1))
    assert np.all(cloud.weights == 1.0 / 5000)
    assert np.all(np.abs(cloud.states.mean(axis=0)[:2] - prior.mean[:2]) < 5 * 6 / math.sqrt(5000))


def test_init_rejects_empty():
    with pytest.raises(ValueError):
        tracking.init_particles(tracking.Prior.isotropic(), 0, np.random.default_rng())


def test_cloud_validation():
    with pytest.raises(ValueError):
        tracking.ParticleCloud(np.zeros((3, 4)), np.ones(2) / 2)


def test_estimate_examples():
    one = tracking.ParticleCloud([[1.0, 2, 3, 4]], [1.0])
    assert np.array_equal(tracking.estimate(one), [1.0, 2, 3, 4])
    two = tracking.ParticleCloud([[0.0, 0, 0, 0], [2.0, 2, 0, 0]], [0.5, 0.5])
    assert np.array_equal(tracking.estimate(two), [1.0, 1, 0, 0])


def test_estimate_matches_compensated_sum():
    rng = np.random.default_rng(4)
    states = rng.normal(100.0, 5.0, (5000, 4))
    w = rng.random(5000)
    w /= w.sum()
    got = tracking.estimate(tracking.ParticleCloud(states, w))
    exact = np.array([math.fsum(w * states[:, k]) for k in range(4)])
    assert np.allclose(got, exact, rtol=1e-12, atol=0)


def test_resample_degenerate_weights():
    states = np.arange(20, dtype=float).reshape(5, 4)
    cloud = tracking.ParticleCloud(states, [1.0, 0, 0, 0, 0])
    out = tracking.systematic_resample(cloud, np.random.default_rng(0))
    assert np.all(out.states == states[0]) and np.all(out.weights == 0.2)


def test_resample_copy_counts():
    states = np.arange(12, dtype=float).reshape(3, 4)
    cloud = tracking.ParticleCloud(states, [0.5, 0.3, 0.2])
    rng = np.random.default_rng(1)
    counts = np.zeros(3)
    reps = 100_000
    for _ in range(reps):
        out = tracking.systematic_resample(cloud, rng)
        counts += np.bincount((out.states[:, 0] / 4).astype(int), minlength=3)
    assert np.allclose(counts / (3 * reps), [0.5, 0.3, 0.2], rtol=0.01)


def test_resample_uniform_input_is_identity_multiset():
    states = np.random.default_rng(2).normal(size=(50, 4))
    cloud = tracking.ParticleCloud(states, np.full(50, 0.02))
    out = tracking.systematic_resample(cloud, np.random.default_rng(3))
    assert sorted(map(tuple, out.states)) == sorted(map(tuple, states))


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40).filter(lambda w: sum(w) > 0), st.integers(0, 2**32 - 1))
def test_resample_counts_within_one_of_expectation(w, seed):
    w = np.array(w) / sum(w)
    n = len(w)
    cloud = tracking.ParticleCloud(np.arange(n, dtype=float)[:, None] * np.ones(4), w)
    out = tracking.systematic_resample(cloud, np.random.default_rng(seed))
    counts = np.bincount(out.states[:, 0].astype(int), minlength=n)
    assert counts.sum() == n
    assert np.all(np.abs(counts - n * w) < 1 + 1e-9)


def test_empty_measurements_is_pure_prediction(small_field, model, small_cloud):
    rng_a, rng_b = np.random.default_rng(5), np.random.default_rng(5)
    new, est, underflow = tracking.pf_step(small_cloud, model, [], _scene(small_field), rng_a)
    pred = tracking.predict(small_cloud, model, rng_b)
    assert not underflow
    assert np.allclose(est, tracking.estimate(pred))
    assert np.allclose(new.weights, 1 / len(new))


def test_pf_step_is_deterministic(small_field, model, small_cloud):
    meas = [sensing.Measurement(0, value=1.3), sensing.Measurement(4, value=0.1)]
    outs = [tracking.pf_step(small_cloud, model, meas, _scene(small_field), np.random.default_rng(9)) for _ in range(2)]
    assert outs[0][0].states.tobytes() == outs[1][0].states.tobytes()
    assert outs[0][1].tobytes() == outs[1][1].tobytes()


def test_weights_normalized_and_order_invariant(small_field, small_cloud):
    meas = [sensing.Measurement(i, value=v) for i, v in [(0, 2.0), (3, 0.05), (4, 4.2)]]
    a, _ = tracking.reweight(small_cloud, meas, _scene(small_field))
    b, _ = tracking.reweight(small_cloud, meas[::-1], _scene(small_field))
    assert abs(a.weights.sum() - 1) < 1e-12
    assert np.allclose(a.weights, b.weights, rtol=1e-12, atol=0)


def test_quantized_weighting(small_field, small_cloud):
    scene = _scene(small_field, bits=3)
    meas = [sensing.Measurement(4, value=None, level=1, kind="quantized")]
    new, flag = tracking.reweight(small_cloud, meas, scene)
    assert not flag and abs(new.weights.sum() - 1) < 1e-12


def test_underflow_resets_to_uniform(small_cloud):
    field = sensing.SensorField([[0.0, 0.0]], [1.0])
    meas = [sensing.Measurement(0, value=1e6)]
    new, flag = tracking.reweight(small_cloud, meas, _scene(field, sensing.SignalModel(noise_std=1e-3)))
    # log-domain weights survive extremes that linear weights would not
    assert not flag and abs(new.weights.sum() - 1) < 1e-12
    zero = tracking.ParticleCloud(small_cloud.states, np.zeros(len(small_cloud)) + 1e-320)
    zero.weights[:] = 0.0
    new, flag = tracking.reweight(zero, meas, _scene(field))
    assert flag and np.all(new.weights == 1 / len(small_cloud))


def test_posterior_contracts_with_a_close_certain_sensor(model):
    field = sensing.SensorField([[0.0, 0.0]], [1.0])
    prior = tracking.Prior.isotropic(mean=(3.0, 0.0, 0.0, 0.0), sigma_pos=2.0, sigma_vel=1e-6)
    cloud = tracking.init_particles(prior, 20_000, np.random.default_rng(0))
    still = dynamics.build_motion_model(1.0, 0.0)
    truth = np.array([3.0, 0.0, 0.0, 0.0])
    m = sensing.sample_measurement(field.sensor(0), truth, SIG, np.random.default_rng(1))
    updated, _ = tracking.reweight(tracking.predict(cloud, still, np.random.default_rng(2)), [m], _scene(field))
    spread = lambda c: np.sqrt(np.diag(c.covariance())[:2].sum())
    assert spread(updated) < spread(cloud)


def test_posterior_mean_matches_grid_bayes_oracle():
    # one sensor, stationary target: a 2-D grid Bayes update is exact up to the cell size
    signal = sensing.SignalModel(noise_std=1.0)
    field = sensing.SensorField([[1.0, -1.0]], [0.9])
    mu, sd = np.array([2.0, 1.0]), 2.0
    z = 4.0
    prior = tracking.Prior.isotropic(mean=(mu[0], mu[1], 0.0, 0.0), sigma_pos=sd, sigma_vel=1e-9)
    cloud = tracking.init_particles(prior, 200_000, np.random.default_rng(3))
    still = dynamics.build_motion_model(1.0, 0.0)
    _, est, _ = tracking.pf_step(cloud, still, [sensing.Measurement(0, value=z)], _scene(field, signal),
                                 np.random.default_rng(4))

    cell = 0.05
    g = np.arange(-10, 14, cell)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    logp = -0.5 * np.sum((pts - mu) ** 2, axis=1) / sd**2
    h = sensing.amplitudes(field.positions, np.column_stack([pts, np.zeros((len(pts), 2))]), signal)[:, 0]
    logp += sensing.analog_loglik(z, h, 0.9, 1.0)
    w = np.exp(logp - logp.max())
    oracle = (w @ pts) / w.sum()
    assert np.all(np.abs(est[:2] - oracle) < cell * 2)
