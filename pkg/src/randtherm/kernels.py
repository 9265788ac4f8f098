"""Backend selection for the hot numerical kernels.

The compiled extension ``randtherm._ckernels`` is used when it imports.
Otherwise, or when the environment variable ``RANDTHERM_PURE=1`` is set,
the numpy implementations in ``randtherm._pykernels`` are used.  The chosen
backend is exposed as :data:`BACKEND`.
"""
from __future__ import annotations

import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)

_impl = _pykernels
BACKEND = "python"

if os.environ.get("RANDTHERM_PURE", "") != "1":
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on the build
        logger.debug("compiled kernels unavailable; using the numpy fallback")
    else:
        _impl = _ckernels
        BACKEND = "cython"

holder_local = _impl.holder_local
theta_bounds = _impl.theta_bounds
hyperbolic_times = _impl.hyperbolic_times
greedy_separated = _impl.greedy_separated

__all__ = [
    "BACKEND",
    "holder_local",
    "theta_bounds",
    "hyperbolic_times",
    "greedy_separated",
]
