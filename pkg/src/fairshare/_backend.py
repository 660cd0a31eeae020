"""Selects the numerical kernel backend at import time.

The compiled extension is preferred when present; `FAIRSHARE_BACKEND=py`
forces the pure-numpy fallback and `FAIRSHARE_BACKEND=ext` makes a missing
extension a hard error (useful in CI and benchmarks).
"""

import os

_requested = os.environ.get("FAIRSHARE_BACKEND", "auto").lower()

if _requested not in ("auto", "ext", "py"):
    raise ImportError(f"FAIRSHARE_BACKEND must be auto, ext or py, got {_requested!r}")

if _requested == "py":
    from fairshare import _kernels_py as kernels

    BACKEND = "py"
else:
    try:
        from fairshare import _kernels as kernels  # type: ignore[no-redef]

        BACKEND = "ext"
    except ImportError:
        if _requested == "ext":
            raise
        from fairshare import _kernels_py as kernels  # type: ignore[no-redef]

        BACKEND = "py"


def backend_name() -> str:
    """Name of the kernel backend in use: 'ext' (compiled) or 'py' (numpy)."""
    return BACKEND
