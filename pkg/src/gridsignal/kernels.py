"""Kernel selection: compiled extension when available, pure Python otherwise.

``update_lane`` is re-exported from whichever implementation loaded;
``KERNEL_IMPL`` names it ("cython" or "python"). Set the environment
variable ``GRIDSIGNAL_FORCE_PY_KERNEL=1`` to force the fallback (used by the
equivalence tests and the benchmark).
"""

from __future__ import annotations

import os

if os.environ.get("GRIDSIGNAL_FORCE_PY_KERNEL") == "1":
    from gridsignal._lane_kernel_py import update_lane

    KERNEL_IMPL = "python"
else:
    try:
        from gridsignal._lane_kernel import update_lane  # type: ignore[no-redef]

        KERNEL_IMPL = "cython"
    except ImportError:  # pragma: no cover - depends on build toolchain
        from gridsignal._lane_kernel_py import update_lane  # type: ignore[no-redef]

        KERNEL_IMPL = "python"

__all__ = ["update_lane", "KERNEL_IMPL"]
