import numpy as np
import pytest

from sensorsel import sensing
from sensorsel.harness import config as cfg
from sensorsel.harness import runner

SMALL = {"filter.particles": 300, "run.steps": 4, "run.trials": 3, "nsga.pop_size": 20, "nsga.generations": 8}


def small(**extra):
    return cfg.ExperimentConfig().replace(**{**SMALL, **{k.replace("__", "."): v for k, v in extra.items()}})


def _fake_trial(est, truth, masks=None, values=None, sensed=None):
    est, truth = np.asarray(est, float), np.asarray(truth, float)
    t, n = len(est), 3
    masks = np.ones((t, n), bool) if masks is None else np.asarray(masks, bool)
    return runner.TrialResult(
        estimates=est, truth=truth, masks=masks,
        values=np.zeros((t, n)) if values is None else np.asarray(values, float),
        sensed=np.zeros((t, n), bool) if sensed is None else np.asarray(sensed, bool),
        diversity=np.full(t, np.nan), underflow=np.zeros(t, bool),
    )


def test_mse_examples():
    truth = np.random.default_rng(0).normal(size=(5, 4))
    c = cfg.ExperimentConfig()
    perfect = runner.summarize({0: _fake_trial(truth, truth), 1: _fake_trial(truth, truth)}, c)
    assert np.all(perfect.mse == 0)
    shifted = truth + np.array([3.0, 4.0, 0, 0])
    assert np.allclose(runner.summarize({0: _fake_trial(shifted, truth)}, c).mse, 25.0)
    vel_only = truth + np.array([0, 0, 5.0, -2.0])
    assert np.all(runner.summarize({0: _fake_trial(vel_only, truth)}, c).mse == 0)


def test_summarize_needs_results():
    with pytest.raises(runner.RunFailed):
        runner.summarize({}, cfg.ExperimentConfig())


def test_reliable_fraction_examples():
    t = _fake_trial(np.zeros((2, 4)), np.zeros((2, 4)), values=np.zeros((2, 3)))
    assert np.all(runner.reliable_fraction(t, 0.2) == 0)
    t = _fake_trial(np.zeros((2, 4)), np.zeros((2, 4)), values=np.full((2, 3), 2.0))
    assert np.all(runner.reliable_fraction(t, 0.2) == 1)
    none = _fake_trial(np.zeros((1, 4)), np.zeros((1, 4)), masks=np.zeros((1, 3)))
    assert np.isnan(runner.reliable_fraction(none, 0.2)[0])


def test_reliable_fraction_matches_truth_flags():
    rng = np.random.default_rng(1)
    steps, n, sigma = 400, 50, 0.2
    sensed = rng.random((steps, n)) < 0.5
    h = rng.uniform(2.0, 30.0, (steps, n))
    values = rng.normal(0, sigma, (steps, n)) + sensed * h
    trial = runner.TrialResult(np.zeros((steps, 4)), np.zeros((steps, 4)), np.ones((steps, n), bool),
                               values, sensed, np.full(steps, np.nan), np.zeros(steps, bool))
    by_test = np.nanmean(runner.reliable_fraction(trial, sigma))
    by_truth = np.nanmean(runner.reliable_fraction(trial, sigma, use_truth=True))
    # noise-only values leave [-3 sigma, 3 sigma] with probability 0.0027
    assert abs(by_test - by_truth - 0.0027 * (1 - by_truth)) < 0.002


def test_trial_seeds_are_independent_and_stable():
    a, b = runner.trial_seed(5, 0), runner.trial_seed(5, 1)
    assert a.generate_state(4).tolist() == runner.trial_seed(5, 0).generate_state(4).tolist()
    assert a.generate_state(4).tolist() != b.generate_state(4).tolist()


def test_run_trial_shapes_and_determinism():
    c = small()
    r1 = runner.run_trial(c, runner.trial_seed(0, 2), keep_fronts=True)
    r2 = runner.run_trial(c, runner.trial_seed(0, 2))
    assert r1.estimates.shape == (4, 4) and r1.masks.shape == (4, 36)
    for name in ("estimates", "truth", "masks", "values", "sensed", "diversity", "underflow"):
        assert getattr(r1, name).tobytes() == getattr(r2, name).tobytes()
    assert len(r1.fronts) == 4 and r1.fronts[0].masks.shape[1] == 36
    # measurements exist exactly for the selected sensors
    assert np.array_equal(~np.isnan(r1.values), r1.masks)


def test_fixed_a_zero_is_pure_prediction():
    c = small(run__steps=10, selection__scheme="fixed_a", selection__count=0, run__trials=4)
    s = runner.run_monte_carlo(c, keep_fronts=False)
    assert np.all(s.mean_selected == 0)
    assert s.mse[-1] > s.mse[0]
    assert np.all(np.isnan(s.reliable_frac)) and np.all(np.isnan(s.diversity))


def test_certain_sensors_beat_no_sensors():
    base = dict(run__steps=12, run__trials=3, field__layout="constant", field__constant_p=1.0, filter__particles=500)
    informed = runner.run_monte_carlo(small(**base), keep_fronts=False)
    blind = runner.run_monte_carlo(small(selection__scheme="fixed_a", selection__count=0, **base), keep_fronts=False)
    assert informed.mse[-1] < blind.mse[-1]


@pytest.mark.parametrize("scheme,extra", [
    ("fiss", {}), ("miubss", {"selection__rule": "knee"}), ("weighted_sum", {"selection__metric": "fi"}),
    ("weighted_sum", {}), ("fixed_a", {"selection__count": 2, "selection__metric": "fi"}),
])
def test_every_scheme_runs(scheme, extra):
    r = runner.run_trial(small(selection__scheme=scheme, **extra), 3)
    assert np.all(np.isfinite(r.estimates))
    if scheme == "fixed_a":
        assert np.all(r.n_selected == 2)


def test_quantized_run():
    r = runner.run_trial(small(quant__kind="quantized", quant__bits=3), 4)
    # the simulator keeps the pre-quantization value for diagnostics
    assert np.all(np.isfinite(r.estimates)) and np.array_equal(~np.isnan(r.values), r.masks)


def test_prefilter_only_selects_available_sensors():
    c = small(selection__prefilter=0.5)
    setup = runner.build_setup(c)
    r = runner.run_trial(c, 1, setup)
    assert not r.masks[:, ~setup.field.available].any()


def test_monte_carlo_order_invariance():
    c = small(run__trials=4)
    a = runner.run_monte_carlo(c)
    b = runner.run_monte_carlo(c, order=[3, 1, 0, 2])
    for name in ("mse", "mean_selected", "reliable_frac", "diversity"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    with pytest.raises(ValueError):
        runner.run_monte_carlo(c, order=[0, 1])


def test_failed_trials_abort_the_run(monkeypatch):
    def boom(*a, **k):
        raise ValueError("synthetic failure")

    monkeypatch.setattr(runner.tracking, "pf_step", boom)
    with pytest.raises(runner.RunFailed, match="synthetic failure"):
        runner.run_monte_carlo(small())
    with pytest.raises(runner.TrialError, match="step 1"):
        runner.run_trial(small(), 0)


def test_selection_happens_before_measurement(monkeypatch):
    events = []
    real_select, real_sample = runner.select_sensors, sensing.sample_measurement
    monkeypatch.setattr(runner, "select_sensors", lambda *a: events.append("select") or real_select(*a))
    monkeypatch.setattr(runner.sensing, "sample_measurement", lambda *a: events.append("measure") or real_sample(*a))
    runner.run_trial(small(run__steps=2), 0)
    first = events.index("measure")
    assert events[0] == "select" and "select" not in events[first:events.index("select", 1)]
