"""Walk-kernel backend selection.

The compiled Cython kernel is preferred when its extension module was
built; otherwise the numpy fallback is used.  Both produce bit-identical
output.  Set ``RESET_SDE_KERNEL=python`` (or ``compiled``) to force a
backend; forcing ``compiled`` raises if the extension is missing.
"""

import os

import numpy as np


def _select():
    forced = os.environ.get("RESET_SDE_KERNEL", "").strip().lower()
    if forced not in ("", "compiled", "python"):
        raise ValueError(
            f"RESET_SDE_KERNEL must be 'compiled' or 'python', got {forced!r}")
    if forced == "python":
        from . import _walk_py
        return _walk_py, "python"
    try:
        from . import _walk
        return _walk, "compiled"
    except ImportError:
        if forced == "compiled":
            raise
        from . import _walk_py
        return _walk_py, "python"


_impl, BACKEND = _select()


def walk(x0, x_reset, increments, reset_flags):
    """Positions of a walk that jumps to ``x_reset`` at flagged steps.

    ``increments[j]`` is the step taken into grid point j+1 and is
    discarded when ``reset_flags[j]`` is set.  Returns an array one
    longer than ``increments`` whose first entry is ``x0``.
    """
    increments = np.ascontiguousarray(increments, dtype=np.float64)
    reset_flags = np.ascontiguousarray(reset_flags, dtype=np.uint8)
    out = np.empty(increments.shape[0] + 1, dtype=np.float64)
    _impl.resetting_walk(float(x0), float(x_reset), increments, reset_flags, out)
    return out


def walk_batch(x0, x_reset, increments, reset_flags):
    """Row-wise :func:`walk` for a (n_paths, n_steps) batch."""
    increments = np.ascontiguousarray(increments, dtype=np.float64)
    reset_flags = np.ascontiguousarray(reset_flags, dtype=np.uint8)
    n, m = increments.shape
    out = np.empty((n, m + 1), dtype=np.float64)
    _impl.resetting_walk_batch(float(x0), float(x_reset), increments, reset_flags, out)
    return out
