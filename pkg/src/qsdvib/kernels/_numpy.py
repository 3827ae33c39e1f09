"""Pure-numpy implementations of the per-step kernels.

Same contracts as the compiled extension in ``_core``; used as the
fallback when the extension is unavailable (or forced via QSDVIB_PURE=1).
All arrays are C-contiguous; ``psi`` has shape (R, n) for a batch of R
realizations on an n-point grid and is updated in place.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def expectation_x_batch(psi: np.ndarray, x: np.ndarray, dx: float) -> np.ndarray:
    """Per-row position expectation value of a unit-norm batch."""
    p2 = psi.real**2 + psi.imag**2
    return (p2 @ x) * dx


def apply_phase(psi: np.ndarray, phase: np.ndarray) -> None:
    """psi[r] *= phase for every row (in place)."""
    psi *= phase


def diffusive_update(psi: np.ndarray, x: np.ndarray, xbar: np.ndarray,
                     lam: float, dt: float, dxi: np.ndarray,
                     pot_phase: np.ndarray | None, dx: float,
                     renormalize: bool) -> np.ndarray:
    """Heun update of the dephasing drift/diffusion terms, fused with an
    optional diagonal potential phase; renormalizes each row in place.

    The elementwise factor is 1 + k + k^2/2 with
    k = -lam*(x - xbar)^2*dt + sqrt(lam)*(x - xbar)*dxi,
    the exact Heun (trapezoidal RK2) result for a diagonal generator.
    Returns the pre-renormalization norms.
    """
    d = x[None, :] - xbar[:, None]
    k = (-lam * dt) * (d * d) + (np.sqrt(lam) * dxi)[:, None] * d
    factor = 1.0 + k + 0.5 * (k * k)
    if pot_phase is not None:
        factor *= pot_phase
    psi *= factor
    norms = np.sqrt((psi.real**2 + psi.imag**2).sum(axis=1) * dx)
    if renormalize:
        psi /= norms[:, None]
    return norms
