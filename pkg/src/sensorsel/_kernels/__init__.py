"""Hot-loop kernels with a compiled implementation and a numpy fallback.

The compiled module is used when it was built and ``SENSORSEL_PURE_PYTHON``
is unset or ``0``. Both backends implement::

    nondominated_ranks(objs) -> int64 ranks
    spread_gaussians(centers, weights, z0, dz, nz, sigma, halfwidth) -> density grid
    quantized_stats(h, weights, probs, sigma, thresholds, pmf_floor) -> (kappa, marginal, cond_bits)
"""
import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_FORCE_PURE = os.environ.get("SENSORSEL_PURE_PYTHON", "0") not in ("", "0")

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

BACKEND = "cython" if (_ckernels is not None and not _FORCE_PURE) else "python"
_impl = BACKENDS[BACKEND]


def nondominated_ranks(objs):
    return _impl.nondominated_ranks(np.ascontiguousarray(objs, dtype=np.float64))


def spread_gaussians(centers, weights, z0, dz, nz, sigma, halfwidth=8.0):
    return _impl.spread_gaussians(
        np.ascontiguousarray(centers, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
        float(z0), float(dz), int(nz), float(sigma), float(halfwidth),
    )


def quantized_stats(h, weights, probs, sigma, thresholds, pmf_floor=1e-300):
    return _impl.quantized_stats(
        np.ascontiguousarray(h, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(probs, dtype=np.float64),
        float(sigma),
        np.ascontiguousarray(thresholds, dtype=np.float64),
        float(pmf_floor),
    )


def get_backend(name):
    """Return the kernel module registered under ``name``."""
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None
