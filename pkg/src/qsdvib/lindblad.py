"""Deterministic master-equation integration in the truncated eigenbasis.

Serves as the convergence oracle for the stochastic ensemble:
drho/dt = -i[H, rho] + lam*(2 X rho X - X^2 rho - rho X^2), integrated
with fixed-step classic RK4.  X^2 is the square of the truncated X so
the generator stays in exact Lindblad form within the truncation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import units
from .morse import MorseBasis


class LindbladError(RuntimeError):
    pass


@dataclass(frozen=True)
class BasisOperators:
    """Energy and position operators in the truncated eigenbasis."""

    energies: np.ndarray     # (K,) diagonal of H
    x_op: np.ndarray         # (K, K) real symmetric
    x_sq: np.ndarray         # x_op @ x_op
    x_sq_truncation_error: float   # max |quadrature x^2 - x_op @ x_op|


def build_operators(basis: MorseBasis) -> BasisOperators:
    f = basis.functions
    x_op = (f * basis.x) @ f.T * basis.dx
    x_op = 0.5 * (x_op + x_op.T)
    x_sq = x_op @ x_op
    x_sq_quad = (f * basis.x**2) @ f.T * basis.dx
    return BasisOperators(
        energies=basis.energies.copy(),
        x_op=x_op,
        x_sq=x_sq,
        x_sq_truncation_error=float(np.abs(x_sq_quad - x_sq).max()),
    )


def _rhs(rho: np.ndarray, omega_ij: np.ndarray, x: np.ndarray,
         x2: np.ndarray, lam: float) -> np.ndarray:
    out = -1j * omega_ij * rho
    if lam != 0.0:
        xr = x @ rho
        out += lam * (2.0 * (xr @ x) - x @ xr - rho @ x2)
    return out


def evolve_master(rho0: np.ndarray, ops: BasisOperators, lam: float,
                  dt_fs: float, t_final_fs: float,
                  record_every: int = 1,
                  trace_tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """RK4 integration; returns (times_fs, rho_series).

    Recording matches the ensemble cadence: every record_every steps plus
    the final step.
    """
    if lam < 0.0:
        raise LindbladError("decoherence rate must be nonnegative")
    dt = units.fs_to_au(dt_fs)
    n_steps = int(round(t_final_fs / dt_fs))
    steps = list(range(0, n_steps + 1, record_every))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    record = set(steps)

    e = ops.energies
    omega_ij = e[:, None] - e[None, :]
    x, x2 = ops.x_op, ops.x_sq
    rho = np.array(rho0, dtype=complex)
    out = [rho.copy()]
    for step in range(1, n_steps + 1):
        k1 = _rhs(rho, omega_ij, x, x2, lam)
        k2 = _rhs(rho + 0.5 * dt * k1, omega_ij, x, x2, lam)
        k3 = _rhs(rho + 0.5 * dt * k2, omega_ij, x, x2, lam)
        k4 = _rhs(rho + dt * k3, omega_ij, x, x2, lam)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step in record:
            drift = abs(rho.trace().real - rho0.trace().real)
            if drift > trace_tol:
                raise LindbladError(
                    f"trace drift {drift:.2e} at step {step}; reduce dt")
            out.append(rho.copy())
    times_fs = np.asarray(steps, dtype=float) * dt_fs
    return times_fs, np.array(out)


def asymptotic_purity(rho: np.ndarray,
                      coherence_threshold: float = 1e-4) -> tuple[float, bool]:
    """sum_i P_i^2 and whether the coherence norm is below threshold."""
    off = np.abs(rho) ** 2
    np.fill_diagonal(off, 0.0)
    asymptotic = bool(off.sum() < coherence_threshold)
    p = rho.diagonal().real
    return float(p @ p), asymptotic
