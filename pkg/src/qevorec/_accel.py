"""Backend selection for the hot numerical kernels.

Set ``QEVOREC_BACKEND=numpy`` to force the pure-numpy kernels; the default is
``numba`` when it can be imported.
"""
import os

_requested = os.environ.get("QEVOREC_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"QEVOREC_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

BACKEND = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"
