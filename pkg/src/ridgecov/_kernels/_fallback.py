"""Pure-numpy batched symmetric tridiagonal solver.

Thomas algorithm without pivoting; valid because every system solved here is
(T + lam I) with T positive semidefinite and lam > 0, hence diagonally
dominant enough to be stable.
"""

from __future__ import annotations

import numpy as np


def tridiag_solve_batch(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve (batch of) symmetric tridiagonal systems.

    diag: (B, m) main diagonals; off: (B, m-1) sub/super diagonals;
    rhs: (B, m, k) right-hand sides.  Returns (B, m, k).
    """
    B, m = diag.shape
    if off.shape != (B, m - 1):
        raise ValueError("off-diagonal shape mismatch")
    if rhs.shape[:2] != (B, m):
        raise ValueError("rhs shape mismatch")
    dp = diag.copy()
    rp = rhs.astype(np.float64, copy=True)
    for i in range(1, m):
        w = off[:, i - 1] / dp[:, i - 1]
        dp[:, i] = dp[:, i] - w * off[:, i - 1]
        rp[:, i, :] -= w[:, None] * rp[:, i - 1, :]
    x = np.empty_like(rp)
    x[:, m - 1, :] = rp[:, m - 1, :] / dp[:, m - 1, None]
    for i in range(m - 2, -1, -1):
        x[:, i, :] = (rp[:, i, :] - off[:, i, None] * x[:, i + 1, :]) / dp[:, i, None]
    return x
