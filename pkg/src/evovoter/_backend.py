"""Kernel backend selection.

Hot loops are written once and either compiled with numba or run as plain
Python over numpy arrays. The env var EVOVOTER_JIT picks the path:

  EVOVOTER_JIT=1 (default)  use numba @njit if numba imports
  EVOVOTER_JIT=0            pure-Python fallback

Both paths consume the same np.random.Generator streams and produce
bit-identical results (numba reimplements the Generator bit-exactly), so the
fallback doubles as a correctness oracle for the compiled kernels.
"""

import os

_flag = os.environ.get("EVOVOTER_JIT", "1").strip().lower()
_want_jit = _flag not in ("0", "false", "no", "off")

NUMBA_AVAILABLE = False
if _want_jit:
    try:
        from numba import njit as _njit

        NUMBA_AVAILABLE = True
    except ImportError:
        NUMBA_AVAILABLE = False

USING_JIT = NUMBA_AVAILABLE


def maybe_njit(func):
    """Decorate with @njit(cache=True) or return the function unchanged."""
    if USING_JIT:
        return _njit(cache=True)(func)
    return func


def maybe_inline(func):
    """Like maybe_njit but inlined at the numba typing level. Small helpers
    called per event must be inlined: a plain nested call reference-counts
    every array argument, which costs more than the work itself."""
    if USING_JIT:
        return _njit(inline="always")(func)
    return func


def backend_name():
    return "numba" if USING_JIT else "python"
