"""Backend selection for the coalition-table kernels.

The compiled extension is used when it imports; set ``SHAPVAL_PURE_PYTHON=1``
to force the Python implementation.
"""

import os

from shapval import _kernels_py

if os.environ.get("SHAPVAL_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from shapval import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

upward_closure = _impl.upward_closure
minimal_masks = _impl.minimal_masks
count_by_size = _impl.count_by_size
pivotal_counts = _impl.pivotal_counts
pivotal_counts_all = _impl.pivotal_counts_all


def backends():
    """Every importable implementation, keyed by name (for tests and benchmarks)."""
    found = {"python": _kernels_py}
    try:
        from shapval import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
