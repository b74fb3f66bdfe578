"""Compare the compiled tridiagonal kernel with the pure-Python fallback.

Run: python3 benchmarks/bench_kernels.py

The shapes mirror the sampler's hot path: one batched solve per penalty per
draw batch, with m ~ min(n, p) rows and a handful of right-hand sides.
"""

import time

import numpy as np

from ridgecov._kernels import backend_name
from ridgecov._kernels._fallback import tridiag_solve_batch as fallback_solve
from ridgecov import ExactSampler
from ridgecov.seeding import substream


def best_time(solver, diag, off, rhs, repeats=5):
    solver(diag, off, rhs)  # warm up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        solver(diag, off, rhs)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    print(f"active backend: {backend_name}")
    compiled = None
    if backend_name == "compiled":
        from ridgecov._kernels import _tridiag

        compiled = _tridiag.tridiag_solve_batch
    rng = np.random.default_rng(0)
    cases = [(2048, 500, 4), (2048, 1000, 4), (8192, 500, 6)]
    print(f"{'B x m x k':>18} {'fallback':>12} {'compiled':>12} {'speedup':>9}")
    for B, m, k in cases:
        diag = rng.uniform(2.0, 4.0, (B, m))
        off = rng.uniform(-0.4, 0.4, (B, m - 1))
        rhs = rng.standard_normal((B, m, k))
        t_py = best_time(fallback_solve, diag, off, rhs)
        if compiled is not None:
            t_c = best_time(compiled, diag, off, rhs)
            err = np.max(np.abs(compiled(diag, off, rhs)
                                - fallback_solve(diag, off, rhs)))
            print(f"{B:>6} x {m:>4} x {k}  {t_py * 1e3:>10.2f}ms"
                  f" {t_c * 1e3:>10.2f}ms {t_py / t_c:>8.1f}x"
                  f"  (max |diff| {err:.2e})")
        else:
            print(f"{B:>6} x {m:>4} x {k}  {t_py * 1e3:>10.2f}ms {'n/a':>12}")

    # end to end: sampler throughput (solves + RNG + moment assembly)
    sampler = ExactSampler(n=500, p=1000, split=2, lambda1=1.0, lambda2=1.0,
                           u=1.0, v=1.0, varrho=0.75, rho=0.5)
    rng_s = substream(1, "bench")
    sampler.sample(512, rng_s)  # warm up
    t0 = time.perf_counter()
    sampler.sample(4096, rng_s)
    dt = time.perf_counter() - t0
    print(f"sampler: 4096 draws (n=500, p=1000, 2-split) in {dt:.3f}s"
          f" ({dt / 4096 * 1e6:.1f} us/draw)")


if __name__ == "__main__":
    main()
