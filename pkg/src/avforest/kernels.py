"""Backend selection for the hot kernels.

The compiled extension is preferred when importable; set AVF_PURE_PYTHON=1
to force the pure-Python twin (useful for debugging and for the benchmark).
Both backends expose the same functions with bit-identical behaviour.
"""

from __future__ import annotations

import os

if os.environ.get("AVF_PURE_PYTHON"):
    from . import _kernels_py as impl
else:
    try:
        from . import _speedups as impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as impl

BACKEND: str = impl.BACKEND

OK = impl.OK
WAVE_VIOLATION = impl.WAVE_VIOLATION
RELABELED = impl.RELABELED

relax = impl.relax
burn = impl.burn
forest_depths = impl.forest_depths
forest_roots = impl.forest_roots
forest_heights = impl.forest_heights
wilson_forest = impl.wilson_forest
permutation_labels = impl.permutation_labels
