"""Quantum-state-diffusion simulator for Markovian vibrational decoherence
of a Morse oscillator, with a deterministic master-equation oracle."""

__version__ = "0.1.0"

from . import (ensemble, kernels, lindblad, morse,  # noqa: F401,E402
               observables, qsd, qstate, units)
from .ensemble import EnsembleConfig, run_ensemble              # noqa: F401
from .lindblad import build_operators, evolve_master            # noqa: F401
from .morse import MorseBasis, MorseSpec, diagonalize           # noqa: F401
from .qsd import PropagatorConfig, propagate_realization        # noqa: F401
from .qstate import Grid, GridState, gaussian, superposition    # noqa: F401
from .units import BathSpec, convert_rate, decoherence_rate     # noqa: F401
