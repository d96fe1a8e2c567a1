"""CSV and manifest writers. Floats carry 17 significant digits so files
round-trip exactly and identical runs give identical bytes."""
import csv
import json
import math
from pathlib import Path

import numpy as np

from .. import KERNEL_BACKEND, __version__
from . import config as cfg

MSE_COLUMNS = ("step", "mse", "mean_selected", "reliable_frac", "diversity")
FRONT_COLUMNS = ("f1", "f2", "cardinality", "mask_hex")
METRICS_COLUMNS = ("sensor_id", "dist", "p_s", "fi_logdet_gain", "mi_bits")
DIAG_COLUMNS = ("step", "reliable_truth_frac", "underflow_events")


def fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def mask_hex(mask):
    """Hex string of a mask with sensor 0 as the least significant bit."""
    mask = np.asarray(mask, dtype=bool)
    value = sum(1 << int(i) for i in np.flatnonzero(mask))
    return format(value, "0{}x".format(max(1, math.ceil(len(mask) / 4))))


def mask_from_hex(text, n):
    value = int(text, 16)
    return np.array([(value >> i) & 1 for i in range(n)], dtype=bool)


def write_rows(path, header, rows):
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"{path}: cannot write ({exc.strerror})") from exc
    return path


def write_mse(summary, path):
    rows = [
        (t + 1, fmt_float(summary.mse[t]), fmt_float(summary.mean_selected[t]),
         fmt_float(summary.reliable_frac[t]), fmt_float(summary.diversity[t]))
        for t in range(summary.steps)
    ]
    return write_rows(path, MSE_COLUMNS, rows)


def write_diagnostics(summary, path):
    rows = [
        (t + 1, fmt_float(summary.reliable_truth_frac[t]), int(summary.underflow_events[t]))
        for t in range(summary.steps)
    ]
    return write_rows(path, DIAG_COLUMNS, rows)


def front_rows(front):
    """Rows of a front snapshot, sorted by ascending f2 (then f1, then mask)."""
    rows = []
    for (f1, f2), m in zip(front.objectives, front.masks):
        rows.append((float(f2), float(f1), mask_hex(m), int(np.count_nonzero(m))))
    rows.sort()
    return [(fmt_float(f1), fmt_float(f2), card, hx) for f2, f1, hx, card in rows]


def write_front(front, path):
    return write_rows(path, FRONT_COLUMNS, front_rows(front))


def write_metrics(rows, path):
    """``rows``: iterable of (sensor_id, dist, p_s, fi_logdet_gain, mi_bits), written by sensor id."""
    out = [(int(r[0]),) + tuple(fmt_float(v) for v in r[1:]) for r in sorted(rows, key=lambda r: r[0])]
    return write_rows(path, METRICS_COLUMNS, out)


def write_manifest(path, config, files, extra=None):
    """Everything needed to replay the run: canonical config, seeding rule and files written.

    The worker count is left out because it does not influence results.
    """
    manifest = {
        "package_version": __version__,
        "kernel_backend": KERNEL_BACKEND,
        "config": cfg.as_dict(config, include_workers=False),
        "master_seed": config.run.seed,
        "trial_seeding": "numpy SeedSequence(master_seed, spawn_key=(trial_index,))",
        "files": sorted(Path(f).name for f in files),
    }
    if extra:
        manifest.update(extra)
    path = Path(path)
    try:
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"{path}: cannot write ({exc.strerror})") from exc
    return path


def write_results(summary, out_dir, config, fronts=None):
    """Write mse.csv, diagnostics.csv, one front_<t>.csv per snapshot, config.txt and manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = [write_mse(summary, out / "mse.csv"), write_diagnostics(summary, out / "diagnostics.csv")]
    fronts = summary.fronts if fronts is None else fronts
    for t, front in enumerate(fronts or [], 1):
        if front is not None:
            files.append(write_front(front, out / f"front_{t}.csv"))
    conf = out / "config.txt"
    conf.write_text(cfg.dumps(config, include_workers=False))
    files.append(conf)
    failures = [{"trial": i, "error": msg} for i, msg in summary.failures]
    files.append(
        write_manifest(out / "manifest.json", config, files + [out / "manifest.json"],
                       {"trials_completed": summary.trials, "failures": failures})
    )
    return files
