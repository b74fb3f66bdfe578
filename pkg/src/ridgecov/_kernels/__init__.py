"""Backend selection for the hot batched tridiagonal kernel.

RIDGECOV_KERNELS environment variable:
  auto (default)  use the compiled extension when importable, else numpy
  compiled        require the extension, ImportError otherwise
  python          force the numpy fallback
"""

from __future__ import annotations

import os

from . import _fallback

_choice = os.environ.get("RIDGECOV_KERNELS", "auto").strip().lower()

if _choice not in ("auto", "compiled", "python"):
    raise ImportError(f"RIDGECOV_KERNELS must be auto|compiled|python, got {_choice!r}")

if _choice == "python":
    tridiag_solve_batch = _fallback.tridiag_solve_batch
    backend_name = "python"
else:
    try:
        from . import _tridiag

        tridiag_solve_batch = _tridiag.tridiag_solve_batch
        backend_name = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        tridiag_solve_batch = _fallback.tridiag_solve_batch
        backend_name = "python"

__all__ = ["tridiag_solve_batch", "backend_name"]
