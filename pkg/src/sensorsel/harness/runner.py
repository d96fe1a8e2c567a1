"""Monte-Carlo trials of the select -> measure -> filter loop."""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .. import dynamics, infometrics, moo, selection, sensing, tracking

log = logging.getLogger(__name__)

MAX_FAILED_FRACTION = 0.10

# stream ids under a trial's seed
_TRUTH, _FILTER, _NSGA, _MEASURE = 0, 1, 2, 3


class TrialError(RuntimeError):
    def __init__(self, trial, step, cause):
        super().__init__(f"trial {trial}, step {step}: {type(cause).__name__}: {cause}")
        self.trial, self.step = trial, step


class RunFailed(RuntimeError):
    pass


# -- seeding ------------------------------------------------------------------------------

def trial_seed(master_seed, trial):
    """Independent seed of trial ``trial``; a pure function of (master seed, index)."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(trial),))


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + key))


# -- scene -------------------------------------------------------------------------------

@dataclass
class Setup:
    """Objects derived once from a config."""

    config: object
    model: dynamics.MotionModel
    signal: sensing.SignalModel
    quantizer: Optional[sensing.Quantizer]
    field: sensing.SensorField  # availability reflects the prefilter
    scene: tracking.Scene  # full field, used by the filter
    select_scene: tracking.Scene  # available sensors only
    prior: tracking.Prior

    @property
    def active(self):
        return self.field.active_ids


def build_setup(config):
    c = config
    signal = sensing.SignalModel(c.signal.p0, c.signal.alpha, c.signal.n, c.signal.sigma)
    quantizer = sensing.build_quantizer(c.quant.bits, signal) if c.quant.kind == "quantized" else None
    field_ = sensing.make_field(
        c.field.grid,
        c.field.side,
        c.field.layout,
        probs=c.field.probabilities or None,
        constant=c.field.constant_p,
        seed=c.field.layout_seed,
    )
    if c.selection.prefilter > 0:
        field_ = selection.threshold_prefilter(field_, c.selection.prefilter)
    scene = tracking.Scene(field_, signal, quantizer)
    select_scene = tracking.Scene(field_.subset(field_.active_ids), signal, quantizer)
    prior = tracking.Prior.isotropic(c.prior.mean, c.prior.sigma_x, c.prior.sigma_v)
    model = dynamics.build_motion_model(c.motion.interval, c.motion.q)
    return Setup(c, model, signal, quantizer, field_, scene, select_scene, prior)


def nsga_config(config):
    n = config.nsga
    rate = None if n.mutation_rate < 0 else n.mutation_rate
    return moo.NsgaConfig(n.pop_size, n.generations, rate, n.seed_extremes, n.crossover_prob)


# -- one selection decision ----------------------------------------------------------------

def _needs(config):
    sel = config.selection
    metric = {"fiss": "fi", "miubss": "miub"}.get(sel.scheme, sel.metric)
    return metric == "fi", metric == "miub"


def select_sensors(table, config, rng):
    """Mask over the available sensors plus the Pareto front used (or ``None``)."""
    sel = config.selection
    metric = {"fiss": "fi", "miubss": "miub"}.get(sel.scheme, sel.metric)
    if sel.scheme == "fixed_a":
        return selection.top_a_select(table, min(sel.count, len(table)), metric), None
    objective = moo.FisherGap(table) if metric == "fi" else moo.MiubGap(table)
    if sel.scheme == "weighted_sum" and objective.additive:
        return selection.weighted_sum_select(objective, sel.w1), None
    front = selection.as_points(moo.nsga2_run(objective, len(table), nsga_config(config), rng))
    if sel.scheme == "weighted_sum":
        return selection.weighted_sum_select(objective, sel.w1, front), front
    pick = selection.knee_point(front) if sel.rule == "knee" else selection.compromise(front)
    return np.asarray(pick.mask, dtype=bool), front


# -- trials ----------------------------------------------------------------------------------

@dataclass
class Front:
    """A Pareto front snapshot: objective vectors (k, 2) and full-field masks (k, N)."""

    objectives: np.ndarray
    masks: np.ndarray


@dataclass
class TrialResult:
    estimates: np.ndarray  # (T, 4)
    truth: np.ndarray  # (T, 4)
    masks: np.ndarray  # (T, N) bool
    values: np.ndarray  # (T, N) analog values of the selected sensors, nan elsewhere
    sensed: np.ndarray  # (T, N) bool, simulator truth for the selected sensors
    diversity: np.ndarray  # (T,), nan when no front was built
    underflow: np.ndarray  # (T,) bool
    fronts: Optional[List[Front]] = None

    @property
    def steps(self):
        return len(self.estimates)

    @property
    def n_selected(self):
        return self.masks.sum(axis=1)

    def squared_error(self):
        """Per-step squared position error."""
        d = self.estimates[:, :2] - self.truth[:, :2]
        return np.sum(d * d, axis=1)


def reliable_fraction(trial, sigma, use_truth=False):
    """Per-step fraction of selected sensors judged reliable.

    By default a measurement outside [-3 sigma, 3 sigma] counts as reliable;
    ``use_truth`` uses the simulator's sensed flags instead. Steps with no
    selected sensor give nan.
    """
    if use_truth:
        good = trial.sensed & trial.masks
    else:
        with np.errstate(invalid="ignore"):
            good = trial.masks & (np.abs(np.nan_to_num(trial.values, nan=0.0)) > 3.0 * sigma)
    n = trial.masks.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, good.sum(axis=1) / np.maximum(n, 1), np.nan)


def nsga_rng(seed, step):
    """Generator used by the optimizer at ``step`` of the trial seeded by ``seed``."""
    return _stream(seed, _NSGA, step)


def front_snapshot(front, active, n):
    objs = np.array([[p.f1, p.f2] for p in front], dtype=np.float64).reshape(-1, 2)
    full = np.zeros((len(front), n), dtype=bool)
    full[:, active] = np.array([p.mask for p in front], dtype=bool).reshape(len(front), -1)
    return Front(objs, full)


def run_trial(config, seed, setup=None, keep_fronts=False, trial_index=0, on_step=None):
    """Track one target for ``config.run.steps`` steps.

    ``seed`` is a ``SeedSequence`` (see :func:`trial_seed`) or an int. The
    result depends only on (config, seed). ``on_step(step, predicted, table,
    front)`` is called after each selection decision.
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    setup = setup or build_setup(config)
    steps = config.run.steps
    n = len(setup.field)
    active = setup.active
    need_fi, need_mi = _needs(config)

    truth_rng = _stream(seed, _TRUTH)
    filter_rng = _stream(seed, _FILTER)

    out = TrialResult(
        estimates=np.zeros((steps, 4)),
        truth=np.zeros((steps, 4)),
        masks=np.zeros((steps, n), dtype=bool),
        values=np.full((steps, n), np.nan),
        sensed=np.zeros((steps, n), dtype=bool),
        diversity=np.full(steps, np.nan),
        underflow=np.zeros(steps, dtype=bool),
        fronts=[] if keep_fronts else None,
    )
    cloud = tracking.init_particles(setup.prior, config.filter.particles, filter_rng)
    state = np.asarray(setup.prior.mean, dtype=np.float64)

    for t in range(steps):
        step = t + 1
        try:
            state = dynamics.propagate(state, setup.model, truth_rng)
            predicted = tracking.predict(cloud, setup.model, filter_rng)
            table = infometrics.compute_metric_table(setup.select_scene, predicted, fi=need_fi, mi=need_mi)
            local_mask, front = select_sensors(table, config, nsga_rng(seed, step))
            mask = np.zeros(n, dtype=bool)
            mask[active[local_mask]] = True

            # measurements are drawn only once the mask is fixed
            measurements = []
            for i in np.flatnonzero(mask):
                rng = _stream(seed, _MEASURE, step, int(i))
                m = sensing.sample_measurement(setup.field.sensor(i), state, setup.signal, rng, setup.quantizer)
                measurements.append(m)
                out.values[t, i] = m.value
                out.sensed[t, i] = m.truth_sensed

            cloud, x_hat, underflow = tracking.pf_step(
                cloud, setup.model, measurements, setup.scene, filter_rng, predicted=predicted
            )
        except Exception as exc:
            raise TrialError(trial_index, step, exc) from exc

        out.estimates[t], out.truth[t], out.masks[t], out.underflow[t] = x_hat, state, mask, underflow
        if on_step is not None:
            on_step(step, predicted, table, front)
        if front is not None:
            snap = front_snapshot(front, active, n)
            out.diversity[t] = moo.diversity_metric(snap.objectives)
            if keep_fronts:
                out.fronts.append(snap)
        elif keep_fronts:
            out.fronts.append(None)
    return out


# -- Monte Carlo -------------------------------------------------------------------------------

@dataclass
class RunSummary:
    mse: np.ndarray
    mean_selected: np.ndarray
    reliable_frac: np.ndarray
    reliable_truth_frac: np.ndarray
    diversity: np.ndarray
    underflow_events: np.ndarray
    trials: int
    failures: list = field(default_factory=list)
    fronts: Optional[List[Front]] = None  # snapshots from the first successful trial
    wall_clock: float = 0.0

    @property
    def steps(self):
        return len(self.mse)


def _nanmean_rows(rows):
    rows = np.asarray(rows, dtype=np.float64)
    ok = ~np.isnan(rows)
    count = ok.sum(axis=0)
    total = np.where(ok, rows, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), np.nan)


def summarize(results, config, failures=(), wall_clock=0.0):
    """Aggregate ``{trial_index: TrialResult}``; sums run in index order, so the
    outcome does not depend on the order trials finished in."""
    order = sorted(results)
    if not order:
        raise RunFailed("no trial finished")
    trials = [results[i] for i in order]
    sigma = config.signal.sigma
    use_truth = config.quant.kind == "quantized"
    reliable = [reliable_fraction(r, sigma, use_truth=use_truth) for r in trials]
    return RunSummary(
        mse=np.mean([r.squared_error() for r in trials], axis=0),
        mean_selected=np.mean([r.n_selected for r in trials], axis=0),
        reliable_frac=_nanmean_rows(reliable),
        reliable_truth_frac=_nanmean_rows([reliable_fraction(r, sigma, use_truth=True) for r in trials]),
        diversity=_nanmean_rows([r.diversity for r in trials]),
        underflow_events=np.sum([r.underflow for r in trials], axis=0),
        trials=len(trials),
        failures=sorted(failures),
        fronts=trials[0].fronts,
        wall_clock=wall_clock,
    )


_WORKER_SETUP = {}


def _trial_job(args):
    config, index, keep_fronts = args
    setup = _WORKER_SETUP.get(config)
    if setup is None:
        setup = _WORKER_SETUP.setdefault(config, build_setup(config))
    try:
        result = run_trial(config, trial_seed(config.run.seed, index), setup, keep_fronts, index)
        return index, result, None
    except TrialError as exc:
        return index, None, str(exc)


def run_monte_carlo(config, workers=None, order=None, keep_fronts=True):
    """Run every trial and aggregate per-step statistics.

    ``order`` permutes the submission order (results do not depend on it).
    Raises :class:`RunFailed` when more than 10% of the trials fail.
    """
    workers = config.run.workers if workers is None else workers
    indices = list(range(config.run.trials)) if order is None else [int(i) for i in order]
    if sorted(indices) != list(range(config.run.trials)):
        raise ValueError("order must be a permutation of the trial indices")
    jobs = [(config, i, keep_fronts and i == 0) for i in indices]
    start = time.perf_counter()
    if workers <= 1:
        outcomes = map(_trial_job, jobs)
        results, failures = _collect(outcomes)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results, failures = _collect(pool.map(_trial_job, jobs, chunksize=1))
    wall = time.perf_counter() - start
    if len(failures) > MAX_FAILED_FRACTION * config.run.trials:
        raise RunFailed(
            f"{len(failures)} of {config.run.trials} trials failed (limit 10%); first: {sorted(failures)[0][1]}"
        )
    for idx, msg in sorted(failures):
        log.warning("dropped %s", msg)
    summary = summarize(results, config, failures, wall)
    if keep_fronts and 0 not in results:
        summary.fronts = None
    return summary


def _collect(outcomes):
    results, failures = {}, []
    for index, result, error in outcomes:
        if error is None:
            results[index] = result
        else:
            failures.append((index, error))
    return results, failures
