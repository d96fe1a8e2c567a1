"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on inputs sized like one step of the reference scenario
(2000 particles, 36 sensors, a 100 + 100 NSGA-II population). Outputs of
both backends are checked for agreement before timing.
"""
import argparse
import timeit

import numpy as np

from sensorsel import _kernels, sensing


def workloads(rng):
    sig = sensing.SignalModel()
    q5 = sensing.build_quantizer(5, sig)
    h = np.ascontiguousarray(rng.uniform(0.0, 32.0, (2000, 36)))
    w = rng.random(2000)
    w /= w.sum()
    probs = rng.uniform(0.05, 0.95, 36)
    objs = np.ascontiguousarray(np.column_stack([rng.random(200), rng.integers(0, 37, 200) / 36]))
    centers = np.ascontiguousarray(h[:, 0])
    return {
        "nondominated_ranks (200 x 2)": ("nondominated_ranks", (objs,)),
        "spread_gaussians (2000 -> grid)": ("spread_gaussians", (centers, w, -1.6, 0.05, 700, 0.2, 8.0)),
        "quantized_stats (2000 x 36, 5 bits)": ("quantized_stats", (h, w, probs, 0.2, q5.thresholds, 1e-300)),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-10, atol=1e-13)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = {name: _kernels.get_backend(name) for name in sorted(_kernels.BACKENDS)}
    if "cython" not in backends:
        print("compiled kernels are not built; run `python setup.py build_ext --inplace` first")
    print(f"{'kernel':38s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for label, (fn, inputs) in workloads(np.random.default_rng(0)).items():
        outs = {b: getattr(m, fn)(*inputs) for b, m in backends.items()}
        if len(outs) > 1 and not same(outs["cython"], outs["python"]):
            raise SystemExit(f"{label}: backends disagree")
        times = {}
        for b, m in backends.items():
            f = getattr(m, fn)
            number = 3
            times[b] = min(timeit.repeat(lambda: f(*inputs), number=number, repeat=args.repeat)) / number
        row = f"{label:38s}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in backends)
        if len(times) > 1:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
