"""Kernel backend selection.

The compiled extension ``slequad._kernels`` is preferred; the pure
Python twin ``slequad._ref`` is used when the extension is missing
(source checkout without a build step). Set ``SLEQUAD_BACKEND=python``
to force the fallback, e.g. to cross-check the two.
"""

import os

if os.environ.get("SLEQUAD_BACKEND", "") == "python":
    from . import _ref as impl
else:
    try:
        from . import _kernels as impl  # type: ignore[no-redef]
    except ImportError:
        from . import _ref as impl  # type: ignore[no-redef]


def backend_name() -> str:
    """Name of the active kernel backend: "compiled" or "python"."""
    return impl.BACKEND_NAME
