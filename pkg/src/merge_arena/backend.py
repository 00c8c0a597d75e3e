"""Numeric backend selection.

The hot kernels (network forward/backward passes and the fused update step)
are written once, in the numba-compatible subset of numpy. With the numba
backend they are jit-compiled; with the numpy backend the same source runs
uncompiled. Selection happens at import time via the MERGE_ARENA_BACKEND
environment variable:

    MERGE_ARENA_BACKEND=numba   jit-compile (default when numba is importable)
    MERGE_ARENA_BACKEND=numpy   plain numpy, no compilation

Both paths produce the same numbers; the numba path is just faster.
"""

import os

_requested = os.environ.get("MERGE_ARENA_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        import numba  # noqa: F401

        ACTIVE = "numba"
    except ImportError:
        ACTIVE = "numpy"
elif _requested == "numba":
    import numba  # noqa: F401  # fail loudly if explicitly requested but absent

    ACTIVE = "numba"
elif _requested == "numpy":
    ACTIVE = "numpy"
else:
    raise ValueError(
        f"MERGE_ARENA_BACKEND must be 'numba', 'numpy' or 'auto', got {_requested!r}"
    )


def jit(func):
    """Compile ``func`` under the numba backend, return it unchanged otherwise."""
    if ACTIVE == "numba":
        from numba import njit

        return njit(cache=True, fastmath=False)(func)
    return func
