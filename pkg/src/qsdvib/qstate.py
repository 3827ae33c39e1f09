"""Complex wavefunctions on a uniform position grid.

Quadrature is the uniform-grid rectangle rule (sum * dx), consistent
with discrete-Fourier propagation; the kinetic part of <H> is evaluated
spectrally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import units
from .morse import MorseBasis, MorseSpec, potential


class StateError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform position grid; n_points a power of two for FFT propagation."""

    x_min: float    # bohr
    x_max: float    # bohr
    n_points: int

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise StateError("x_max must exceed x_min")
        n = self.n_points
        if n < 64 or n & (n - 1):
            raise StateError(f"n_points must be a power of two >= 64, got {n}")

    @classmethod
    def from_angstrom(cls, x_min: float, x_max: float, n_points: int) -> "Grid":
        return cls(units.angstrom_to_bohr(x_min),
                   units.angstrom_to_bohr(x_max), n_points)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        """FFT-ordered wavenumbers."""
        return 2.0 * math.pi * sfft.fftfreq(self.n_points, d=self.dx)


@dataclass
class GridState:
    """Wavefunction samples on a grid, with time stamp in fs."""

    grid: Grid
    psi: np.ndarray = field(repr=False)
    t_fs: float = 0.0

    def copy(self) -> "GridState":
        return GridState(self.grid, self.psi.copy(), self.t_fs)

    def density(self) -> np.ndarray:
        return self.psi.real**2 + self.psi.imag**2


def norm(state: GridState) -> float:
    """sqrt of the quadrature norm integral."""
    return math.sqrt(float(state.density().sum()) * state.grid.dx)


def renormalize(state: GridState) -> GridState:
    state.psi /= norm(state)
    return state


def gaussian(grid: Grid, x0: float, p0: float, sigma0: float) -> GridState:
    """Minimum-uncertainty packet centered at x0 with momentum p0 (a.u.)."""
    if not (grid.x_min + 5 * sigma0 <= x0 <= grid.x_max - 5 * sigma0):
        raise StateError("packet center closer than 5 sigma to a grid edge")
    x = grid.x
    psi = (2.0 * math.pi * sigma0**2) ** (-0.25) * np.exp(
        -((x - x0) ** 2) / (4.0 * sigma0**2) + 1j * p0 * (x - x0))
    return renormalize(GridState(grid, psi))


def superposition(basis: MorseBasis, m: int, n: int,
                  weight_m: float, weight_n: float) -> GridState:
    """c_m*Phi_m + c_n*Phi_n with real positive c_i = sqrt(weight_i)."""
    if n <= m:
        raise StateError("require n > m")
    if abs(weight_m + weight_n - 1.0) > 1e-12:
        raise StateError(f"weights must sum to 1, got {weight_m + weight_n}")
    psi = (math.sqrt(weight_m) * basis.functions[m]
           + math.sqrt(weight_n) * basis.functions[n]).astype(complex)
    grid = Grid(basis.x[0], basis.x[0] + basis.dx * basis.x.size, basis.x.size)
    return renormalize(GridState(grid, psi))


def expectation_x(state: GridState) -> float:
    return float(state.density() @ state.grid.x) * state.grid.dx


def expectation_p(state: GridState) -> float:
    psi_k = sfft.fft(state.psi)
    w = psi_k.real**2 + psi_k.imag**2
    return float(w @ state.grid.k) * state.grid.dx / state.grid.n_points


def expectation_H(state: GridState, spec: MorseSpec) -> float:
    """<T> spectrally + <V> by quadrature."""
    grid = state.grid
    psi_k = sfft.fft(state.psi)
    w = psi_k.real**2 + psi_k.imag**2
    kin = float(w @ (grid.k**2)) / (2.0 * spec.m) * grid.dx / grid.n_points
    pot = float(state.density() @ potential(spec, grid.x)) * grid.dx
    return kin + pot


def project(state: GridState, basis: MorseBasis) -> tuple[np.ndarray, float]:
    """Eigenbasis coefficients c_i = <Phi_i|Psi> and residual 1 - sum|c_i|^2."""
    if basis.x.size != state.grid.n_points or not np.allclose(
            basis.x, state.grid.x, rtol=0.0, atol=1e-12):
        raise StateError("basis and state grids differ")
    coeffs = (basis.functions @ state.psi) * basis.dx
    residual = norm(state) ** 2 - float(np.vdot(coeffs, coeffs).real)
    return coeffs, residual


def reconstruct(basis: MorseBasis, coeffs: np.ndarray, t_fs: float = 0.0) -> GridState:
    psi = coeffs @ basis.functions.astype(complex)
    grid = Grid(basis.x[0], basis.x[0] + basis.dx * basis.x.size, basis.x.size)
    return GridState(grid, psi, t_fs)


def edge_amplitude(state: GridState) -> float:
    return float(max(abs(state.psi[0]), abs(state.psi[-1])))
