"""Replicate-generation kernels with a compiled core and a pure fallback.

The hot loop of every Monte Carlo study is: draw a balanced allocation
from the design, draw the Bernoulli responses, and reduce to the per-arm
success counts.  Two interchangeable implementations exist:

* ``compiled`` -- a Cython extension (:mod:`pairdesign._ckernel`);
* ``python``   -- a vectorized NumPy fallback (:mod:`._kernel_py`).

Both consume the documented counter-based stream identically, so their
outputs are bit-for-bit equal; the test suite asserts this.  The compiled
backend is picked at import when available.  Set the environment variable
``PAIRDESIGN_BACKEND`` to ``python`` or ``compiled`` to force one.

Kernel contract
---------------
``simulate_batch(seeds, order, block_sizes, p_t, p_c, pm_random, need_wy)``

Per replicate ``r`` with stream seed ``seeds[r]`` the ticks are consumed
in this order:

1. if ``pm_random``: a Fisher-Yates shuffle of the identity permutation
   (``2n - 1`` ticks); consecutive entries then form the pair blocks;
2. per block, in block order: a Fisher-Yates shuffle of the balanced sign
   template ``(+1...,-1...)`` (``size - 1`` ticks per block);
3. one tick per subject, in subject-index order, for the response draws.
"""

from __future__ import annotations

import os

from ._kernel_py import simulate_batch as _simulate_batch_python

BACKENDS = {"python": _simulate_batch_python}

try:
    from pairdesign._ckernel import simulate_batch as _simulate_batch_compiled
    BACKENDS["compiled"] = _simulate_batch_compiled
except ImportError:
    _simulate_batch_compiled = None

_requested = os.environ.get("PAIRDESIGN_BACKEND", "").strip().lower()
if _requested:
    if _requested not in BACKENDS:
        raise ImportError(
            f"PAIRDESIGN_BACKEND={_requested!r} is not available; "
            f"choose from {sorted(BACKENDS)}")
    BACKEND = _requested
else:
    BACKEND = "compiled" if "compiled" in BACKENDS else "python"

simulate_batch = BACKENDS[BACKEND]


def available_backends() -> list[str]:
    return sorted(BACKENDS)


def get_backend(name: str):
    """The ``simulate_batch`` implementation of a named backend."""
    return BACKENDS[name]
