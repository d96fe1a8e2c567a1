import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from sensorsel import _kernels, sensing
from sensorsel._kernels import _pykernels

needs_cython = pytest.mark.skipif("cython" not in _kernels.BACKENDS, reason="compiled kernels not built")


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")


def test_env_var_forces_fallback():
    code = "import sensorsel; print(sensorsel.KERNEL_BACKEND)"
    env = dict(os.environ, SENSORSEL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_python_ranks_small_cases():
    assert list(_pykernels.nondominated_ranks(np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))) == [0, 2, 1]
    assert _pykernels.nondominated_ranks(np.zeros((0, 2))).shape == (0,)


def test_python_spread_matches_direct_sum():
    centers = np.array([0.0, 1.3, 4.0])
    w = np.array([0.2, 0.5, 0.3])
    z = -2.0 + 0.05 * np.arange(200)
    got = _pykernels.spread_gaussians(centers, w, -2.0, 0.05, 200, 0.4, 8.0)
    ref = (w[None, :] * np.exp(-0.5 * ((z[:, None] - centers) / 0.4) ** 2)).sum(1) / (0.4 * np.sqrt(2 * np.pi))
    # truncation at 8 sigma drops terms below exp(-32) of the peak
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-13 * ref.max())


@needs_cython
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 60), st.just(2)), elements=st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]) | st.floats(0, 1)))
def test_ranks_backends_agree(objs):
    c = _kernels.get_backend("cython").nondominated_ranks(np.ascontiguousarray(objs))
    p = _pykernels.nondominated_ranks(objs)
    assert np.array_equal(c, p)


@needs_cython
def test_spread_backends_agree():
    rng = np.random.default_rng(0)
    centers = rng.uniform(0, 30, 2000)
    w = rng.random(2000)
    w /= w.sum()
    args = (centers, w, -3.0, 0.05, 700, 0.2, 8.0)
    c = _kernels.get_backend("cython").spread_gaussians(*args)
    p = _pykernels.spread_gaussians(*args)
    assert np.allclose(c, p, rtol=1e-12, atol=1e-15 * p.max())


@needs_cython
@pytest.mark.parametrize("bits", [1, 2, 5])
def test_quantized_stats_backends_agree(bits):
    rng = np.random.default_rng(bits)
    sig = sensing.SignalModel()
    q = sensing.build_quantizer(bits, sig)
    h = np.ascontiguousarray(rng.uniform(0, 32, (500, 7)))
    w = rng.random(500)
    w /= w.sum()
    probs = np.array([0.0, 0.05, 0.3, 0.5, 0.8, 0.99, 1.0])
    c = _kernels.get_backend("cython").quantized_stats(h, w, probs, 0.2, q.thresholds, 1e-300)
    p = _pykernels.quantized_stats(h, w, probs, 0.2, q.thresholds, 1e-300)
    for a, b in zip(c, p):
        assert np.allclose(a, b, rtol=1e-11, atol=1e-13)


def test_quantized_stats_marginal_is_a_pmf():
    rng = np.random.default_rng(4)
    q = sensing.build_quantizer(4, sensing.SignalModel())
    h = rng.uniform(0, 32, (300, 3))
    w = np.full(300, 1 / 300)
    kappa, marginal, cond = _kernels.quantized_stats(h, w, np.array([0.2, 0.6, 1.0]), 0.2, q.thresholds)
    assert np.allclose(marginal.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(kappa >= 0) and np.all(cond >= 0) and np.all(cond <= 4 + 1e-12)


def test_benchmark_script_runs(capsys):
    import runpy
    from pathlib import Path

    bench = runpy.run_path(str(Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"))
    bench["main"](["--repeat", "1"])
    assert "quantized_stats" in capsys.readouterr().out
