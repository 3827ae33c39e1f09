"""Timing comparison of the compiled and pure-numpy step kernels.

Run:  python3 benchmarks/bench_kernels.py [R] [n]
Times the three hot kernels and a full composite propagation step for a
batch of R realizations on an n-point grid, with each backend.
"""

import sys
import time

import numpy as np

from qsdvib import morse, qsd, qstate
from qsdvib.kernels import _numpy

try:
    from qsdvib.kernels import _core
except ImportError:
    _core = None


def _timeit(fn, repeats=20):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench_kernels(backend, psi, x, dx, xbar, dxi, phase):
    rows = {}
    work = psi.copy()
    rows["expectation_x_batch"] = _timeit(
        lambda: backend.expectation_x_batch(work, x, dx))
    rows["apply_phase"] = _timeit(lambda: backend.apply_phase(work, phase))
    rows["diffusive_update"] = _timeit(
        lambda: backend.diffusive_update(work, x, xbar, 1e-4, 4.0, dxi,
                                         phase, dx, True))
    return rows


def bench_full_step(r, n, pure):
    import os
    import subprocess
    env = dict(os.environ, QSDVIB_PURE="1" if pure else "0")
    code = f"""
import time
import numpy as np
from qsdvib import morse, qsd, qstate
spec = morse.MorseSpec.iodine()
grid = qstate.Grid.from_angstrom(1.6, 6.4, {n})
basis = morse.diagonalize(spec, grid.x, 30)
init = qstate.superposition(basis, 0, 3, 0.4, 0.6)
cfg = qsd.PropagatorConfig(dt_fs=0.1, t_final_fs=10.0, lam=1e-4)
psis = np.ascontiguousarray(np.broadcast_to(init.psi, ({r}, {n})))
prop = qsd.BatchPropagator(grid, spec, cfg)
rngs = [qsd.realization_rng(0, i) for i in range({r})]
t0 = time.perf_counter()
prop.run(psis, rngs)
print((time.perf_counter() - t0) / cfg.n_steps * 1e3)
"""
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    r = int(sys.argv[1]) if len(sys.argv) > 1 else 100
    n = int(sys.argv[2]) if len(sys.argv) > 2 else 1024
    rng = np.random.default_rng(0)
    psi = rng.standard_normal((r, n)) + 1j * rng.standard_normal((r, n))
    psi = np.ascontiguousarray(psi)
    x = np.linspace(3.0, 12.0, n)
    dx = x[1] - x[0]
    xbar = np.full(r, 7.5)
    dxi = 1e-3 * (rng.standard_normal(r) + 1j * rng.standard_normal(r))
    phase = np.exp(-1j * np.linspace(0.0, 1.0, n))

    print(f"batch {r} x {n}")
    numpy_rows = bench_kernels(_numpy, psi, x, dx, xbar, dxi, phase)
    core_rows = (bench_kernels(_core, psi, x, dx, xbar, dxi, phase)
                 if _core is not None else None)
    header = f"{'kernel':24s} {'numpy':>10s} {'cython':>10s} {'speedup':>8s}"
    print(header)
    for name, t_np in numpy_rows.items():
        if core_rows is None:
            print(f"{name:24s} {t_np * 1e6:9.1f}us {'n/a':>10s}")
        else:
            t_cy = core_rows[name]
            print(f"{name:24s} {t_np * 1e6:9.1f}us {t_cy * 1e6:9.1f}us "
                  f"{t_np / t_cy:7.2f}x")

    t_np = bench_full_step(r, n, pure=True)
    print(f"{'full composite step':24s} {t_np:9.2f}ms", end="")
    if _core is not None:
        t_cy = bench_full_step(r, n, pure=False)
        print(f" {t_cy:9.2f}ms {t_np / t_cy:7.2f}x")
    else:
        print()


if __name__ == "__main__":
    main()
