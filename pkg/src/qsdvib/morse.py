"""Morse potential, analytic spectrum and grid-diagonalized eigenbasis.

The truncated eigenbasis is obtained by dense diagonalization of the
Fourier-grid (sinc-DVR) Hamiltonian, which is spectrally accurate on a
uniform grid and avoids the overflow problems of generalized-Laguerre
evaluation at high quantum numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, toeplitz

from . import units


class MorseError(ValueError):
    pass


@dataclass(frozen=True)
class MorseSpec:
    """Morse potential D*(1 - exp(-alpha*(x - x_e)))**2 in atomic units."""

    D: float        # dissociation energy, hartree
    alpha: float    # range parameter, bohr^-1
    x_e: float      # equilibrium bond length, bohr
    m: float        # reduced mass, electron masses

    def __post_init__(self):
        if min(self.D, self.alpha, self.x_e, self.m) <= 0.0:
            raise MorseError("D, alpha, x_e and m must all be positive")
        if self.lambda_morse <= 0.5:
            raise MorseError("potential supports no bound state (lambda <= 1/2)")

    @classmethod
    def from_spectroscopic(cls, D_wavenumber: float, alpha_per_angstrom: float,
                           x_e_angstrom: float, m_gram: float) -> "MorseSpec":
        """Build from the I/O unit system (cm^-1, Angstrom^-1, Angstrom, gram)."""
        return cls(
            D=units.wavenumber_to_hartree(D_wavenumber),
            alpha=alpha_per_angstrom * units.BOHR_ANGSTROM,
            x_e=units.angstrom_to_bohr(x_e_angstrom),
            m=units.gram_to_electron_mass(m_gram),
        )

    @classmethod
    def iodine(cls) -> "MorseSpec":
        """I2 ground-surface parameters; reduced mass m0/4 with m0 = 4.22e-22 g."""
        return cls.from_spectroscopic(1.2547e4, 1.8576, 2.6663, 4.22e-22 / 4.0)

    @property
    def lambda_morse(self) -> float:
        """Well-depth parameter sqrt(2 m D)/alpha; > 1/2 means bound states exist."""
        return math.sqrt(2.0 * self.m * self.D) / self.alpha

    @property
    def n_max(self) -> int:
        return int(math.floor(self.lambda_morse - 0.5))

    @property
    def bound_state_count(self) -> int:
        return self.n_max + 1


def potential(spec: MorseSpec, x):
    """V(x) = D*(1 - exp(-alpha*(x - x_e)))**2, x in bohr."""
    e = np.exp(-spec.alpha * (np.asarray(x, dtype=float) - spec.x_e))
    return spec.D * (1.0 - e) ** 2


def harmonic_frequency(spec: MorseSpec) -> float:
    """omega0 = sqrt(2 alpha^2 D / m), a.u. angular frequency."""
    return math.sqrt(2.0 * spec.alpha**2 * spec.D / spec.m)


def anharmonic_frequency(spec: MorseSpec, energy: float) -> float:
    """Turning-point oscillation frequency omega0*sqrt(1 - E/D) at energy E."""
    if not 0.0 <= energy < spec.D:
        raise MorseError(f"energy must lie in [0, D), got {energy}")
    return harmonic_frequency(spec) * math.sqrt(1.0 - energy / spec.D)


def analytic_energy(spec: MorseSpec, n: int) -> float:
    """Closed-form Morse level E_n = w0(n+1/2) - [w0(n+1/2)]^2/(4D)."""
    if n < 0 or n > spec.n_max:
        raise MorseError(f"level {n} is unbound (n_max = {spec.n_max})")
    w = harmonic_frequency(spec) * (n + 0.5)
    return w - w * w / (4.0 * spec.D)


def recurrence_time(e_m: float, e_n: float) -> float:
    """tau = 2*pi*hbar/|E_n - E_m| (a.u.); inf for degenerate energies."""
    diff = abs(e_n - e_m)
    if diff == 0.0:
        return math.inf
    return 2.0 * math.pi / diff


def relative_difference(e_m: float, e_n: float) -> float:
    """Level spacing relative to the upper level, (E_n - E_m)/E_n * 100."""
    if e_n == 0.0:
        raise MorseError("E_n must be nonzero")
    return (e_n - e_m) / e_n * 100.0


@dataclass(frozen=True)
class MorseBasis:
    """K lowest eigenpairs on a grid; functions orthonormal under sum*dx."""

    x: np.ndarray           # grid points, bohr
    dx: float
    energies: np.ndarray    # (K,), hartree, strictly increasing
    functions: np.ndarray   # (K, n) real, rows orthonormal

    @property
    def size(self) -> int:
        return self.energies.shape[0]


def _kinetic_matrix(n: int, dx: float, m: float) -> np.ndarray:
    """Sinc-DVR kinetic matrix for a uniform grid (exact in the band limit)."""
    kmax = math.pi / dx
    col = np.empty(n)
    col[0] = kmax**2 / 3.0
    j = np.arange(1, n)
    col[1:] = (2.0 * kmax**2 / math.pi**2) * ((-1.0) ** j) / j.astype(float) ** 2
    return toeplitz(col) / (2.0 * m)


def _fix_sign(phi: np.ndarray, tol_frac: float = 1e-3) -> np.ndarray:
    """Make the outermost antinode positive so coherences are reproducible."""
    a = np.abs(phi)
    floor = tol_frac * a.max()
    # outermost interior local maximum of |phi| above the noise floor
    interior = (a[1:-1] >= a[:-2]) & (a[1:-1] >= a[2:]) & (a[1:-1] > floor)
    idx = np.nonzero(interior)[0]
    i = idx[-1] + 1 if idx.size else int(np.argmax(a))
    return phi if phi[i] > 0 else -phi


def diagonalize(spec: MorseSpec, x: np.ndarray, k: int,
                edge_tol: float = 1e-6) -> MorseBasis:
    """K lowest eigenpairs of the Fourier-grid Hamiltonian on grid x (bohr)."""
    x = np.asarray(x, dtype=float)
    if k < 1 or k > spec.bound_state_count:
        raise MorseError(
            f"requested {k} states; potential supports {spec.bound_state_count}")
    dx = x[1] - x[0]
    h = _kinetic_matrix(x.size, dx, spec.m)
    h[np.diag_indices_from(h)] += potential(spec, x)
    energies, vecs = eigh(h, subset_by_index=[0, k - 1])
    funcs = (vecs / math.sqrt(dx)).T.copy()   # orthonormal under sum*dx
    edge = max(np.abs(funcs[:, 0]).max(), np.abs(funcs[:, -1]).max()) * dx**0.5
    if edge > edge_tol:
        raise MorseError(
            f"grid too small: eigenfunction edge amplitude {edge:.2e} > {edge_tol:g}")
    funcs = np.array([_fix_sign(f) for f in funcs])
    if np.any(np.diff(energies) <= 0.0):
        raise MorseError("eigenvalues not strictly increasing")
    return MorseBasis(x=x, dx=dx, energies=energies, functions=funcs)
