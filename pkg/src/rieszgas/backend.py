"""Backend dispatch for the hot kernels.

The compiled extension (rieszgas._accel, Cython) is preferred; the numpy
fallback (rieszgas._accel_np) has identical contracts.  Set
RIESZGAS_BACKEND=python to force the fallback, e.g. for benchmarking.
Floating-point results may differ between backends in the last ulp because
summation orders differ; each backend on its own is deterministic.
"""

from __future__ import annotations

import os

from . import _accel_np

if os.environ.get("RIESZGAS_BACKEND", "").lower() == "python":
    _impl = _accel_np
else:
    try:
        from . import _accel as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _accel_np

pair_energy = _impl.pair_energy
pair_gradient = _impl.pair_gradient
min_separation = _impl.min_separation
field_sum_trunc = _impl.field_sum_trunc


def backend_name() -> str:
    return _impl.BACKEND_NAME
