"""Unit conversions and bath-parameter algebra.

All internal computation is carried out in Hartree atomic units
(hbar = 1, lengths in bohr, times in hbar/Hartree, masses in electron
masses).  User-facing I/O uses Angstrom, femtoseconds, cm^-1, Kelvin
and gram.  Constants are CODATA values via scipy.constants; rounded
literature values are never used internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import scipy.constants as _sc

# --- fundamental conversion constants (CODATA, full double precision) ---

BOHR_ANGSTROM = _sc.value("Bohr radius") / 1e-10          # Angstrom per bohr
AU_TIME_S = _sc.value("atomic unit of time")              # seconds per a.u. time
AU_TIME_FS = AU_TIME_S * 1e15                             # fs per a.u. time
HARTREE_WAVENUMBER = _sc.value("hartree-inverse meter relationship") / 100.0
KB_HARTREE_PER_K = _sc.k / _sc.value("hartree-joule relationship")
ELECTRON_MASS_G = _sc.m_e * 1e3                           # gram per electron mass

# decoherence rate: 1 a.u. (bohr^-2 per a.u. time) expressed in the two
# external unit systems used at I/O time
RATE_AU_TO_ANG2FS = (1.0 / BOHR_ANGSTROM**2) / AU_TIME_FS       # Angstrom^-2 fs^-1
RATE_AU_TO_CM2S = (1.0 / (BOHR_ANGSTROM * 1e-8)) ** 2 / AU_TIME_S  # cm^-2 s^-1

_RATE_FACTORS = {
    "au": 1.0,
    "ang^-2 fs^-1": RATE_AU_TO_ANG2FS,
    "cm^-2 s^-1": RATE_AU_TO_CM2S,
}

_RATE_ALIASES = {
    "au": "au",
    "a.u.": "au",
    "ang^-2 fs^-1": "ang^-2 fs^-1",
    "ang-2fs-1": "ang^-2 fs^-1",
    "angstrom^-2 fs^-1": "ang^-2 fs^-1",
    "a^-2fs^-1": "ang^-2 fs^-1",
    "cm^-2 s^-1": "cm^-2 s^-1",
    "cm-2s-1": "cm^-2 s^-1",
}


class UnitError(ValueError):
    """Raised for unsupported unit tags or out-of-domain inputs."""


def angstrom_to_bohr(x):
    return x / BOHR_ANGSTROM


def bohr_to_angstrom(x):
    return x * BOHR_ANGSTROM


def fs_to_au(t):
    return t / AU_TIME_FS


def au_to_fs(t):
    return t * AU_TIME_FS


def wavenumber_to_hartree(e):
    return e / HARTREE_WAVENUMBER


def hartree_to_wavenumber(e):
    return e * HARTREE_WAVENUMBER


def kelvin_to_hartree(t):
    return t * KB_HARTREE_PER_K


def gram_to_electron_mass(m):
    return m / ELECTRON_MASS_G


def _canonical_rate_unit(unit: str) -> str:
    key = unit.strip().lower().replace(" ", "")
    for alias, canon in _RATE_ALIASES.items():
        if key == alias.replace(" ", ""):
            return canon
    raise UnitError(f"unsupported rate unit {unit!r}; "
                    f"expected one of {sorted(set(_RATE_ALIASES.values()))}")


def convert_rate(value: float, from_unit: str, to_unit: str) -> float:
    """Convert a decoherence rate between a.u., Angstrom^-2 fs^-1 and cm^-2 s^-1."""
    f = _RATE_FACTORS[_canonical_rate_unit(from_unit)]
    t = _RATE_FACTORS[_canonical_rate_unit(to_unit)]
    return value * (t / f)


def decoherence_rate(eta: float, temperature: float, mass: float) -> float:
    """Position-dephasing rate 2*m*eta*kB*T (a.u., hbar = 1).

    eta is the friction coefficient (mass/time), temperature in Kelvin,
    mass in electron masses.  Result in bohr^-2 per a.u. time.
    """
    for name, v in (("eta", eta), ("temperature", temperature), ("mass", mass)):
        if not math.isfinite(v) or v < 0.0:
            raise UnitError(f"{name} must be finite and nonnegative, got {v}")
    return 2.0 * mass * eta * KB_HARTREE_PER_K * temperature


def xi(eta_e: float, temperature: float) -> float:
    """Friction-temperature product xi = eta_e * T (Kelvin)."""
    if eta_e < 0.0 or temperature < 0.0:
        raise UnitError("eta_e and temperature must be nonnegative")
    return eta_e * temperature


def markov_validity(temperature: float, omega: float,
                    threshold: float = 10.0) -> tuple[float, bool]:
    """Markovianity ratio 4*kB*T/(hbar*omega) and whether it exceeds threshold.

    omega in a.u. angular frequency, temperature in Kelvin.
    """
    if omega <= 0.0:
        raise UnitError(f"omega must be positive, got {omega}")
    if temperature < 0.0:
        raise UnitError(f"temperature must be nonnegative, got {temperature}")
    ratio = 4.0 * KB_HARTREE_PER_K * temperature / omega
    return ratio, ratio > threshold


@dataclass(frozen=True)
class BathSpec:
    """Bath parameters reduced to a single decoherence rate.

    lam is the rate in a.u. (bohr^-2 per a.u. time).  When built from
    (eta_e, T, m, omega0) the friction eta = eta_e*m*omega0 and
    lam = 2*m*eta*kB*T are stored alongside the inputs.
    """

    lam: float
    eta: float | None = None
    eta_e: float | None = None
    temperature: float | None = None
    mass: float | None = None

    def __post_init__(self):
        if self.lam < 0.0:
            raise UnitError(f"decoherence rate must be nonnegative, got {self.lam}")

    @classmethod
    def from_rate(cls, lam: float, unit: str = "au") -> "BathSpec":
        return cls(lam=convert_rate(lam, unit, "au"))

    @classmethod
    def from_friction(cls, eta_e: float, temperature: float,
                      mass: float, omega0: float) -> "BathSpec":
        eta = eta_e * mass * omega0
        return cls(
            lam=decoherence_rate(eta, temperature, mass),
            eta=eta,
            eta_e=eta_e,
            temperature=temperature,
            mass=mass,
        )

    @property
    def xi(self) -> float | None:
        if self.eta_e is None or self.temperature is None:
            return None
        return xi(self.eta_e, self.temperature)
