"""Single-realization stochastic propagator.

One composite step per dt: a Strang split-operator unitary step followed
by a Heun (trapezoidal RK2) update of the position-dephasing drift and
diffusion terms, driven by a complex Wiener increment, then
renormalization.  The batch loop merges adjacent potential half-phases
with the (diagonal) diffusive factor, so it costs two FFTs per step;
the recorded states are re-synchronized exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import kernels, units
from .morse import MorseSpec, potential
from .qstate import Grid, GridState, expectation_x

# steps per pre-generated noise block; fixed so the per-realization noise
# stream is independent of batching and recording choices
NOISE_BLOCK = 512


class PropagatorError(RuntimeError):
    pass


@dataclass(frozen=True)
class PropagatorConfig:
    """Time stepping and bath strength for one run."""

    dt_fs: float = 0.1
    t_final_fs: float = 1000.0
    lam: float = 0.0                      # decoherence rate, a.u.
    snapshot_times_fs: tuple[float, ...] = ()
    renormalize: bool = True

    def __post_init__(self):
        if self.dt_fs <= 0.0 or self.t_final_fs <= 0.0:
            raise ValueError("dt and t_final must be positive")
        if self.lam < 0.0:
            raise ValueError("decoherence rate must be nonnegative")
        for t in self.snapshot_times_fs:
            if not 0.0 <= t <= self.t_final_fs + 1e-9:
                raise ValueError(f"snapshot time {t} fs outside [0, t_final]")

    @property
    def dt_au(self) -> float:
        return units.fs_to_au(self.dt_fs)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final_fs / self.dt_fs))

    def snapshot_steps(self) -> dict[int, float]:
        return {int(round(t / self.dt_fs)): t for t in self.snapshot_times_fs}

    def validate_stability(self, grid: Grid) -> None:
        """Keep the drift term perturbative: lam*(x_span/2)^2*dt < 0.1."""
        bound = self.lam * ((grid.x_max - grid.x_min) / 2.0) ** 2 * self.dt_au
        if bound >= 0.1:
            raise ValueError(
                f"stability guard violated: lam*(x_span/2)^2*dt = {bound:.3g} >= 0.1")


def wiener_increment(rng: np.random.Generator, dt: float) -> complex:
    """Complex increment sqrt(dt)*(g1 + i*g2): E=0, E(d2)=0, E(|d|^2)=2dt."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    g = rng.standard_normal(2)
    return math.sqrt(dt) * complex(g[0], g[1])


def _noise_block(rng: np.random.Generator, n: int, dt: float) -> np.ndarray:
    """n Wiener increments drawn in the same stream order as wiener_increment."""
    g = rng.standard_normal(2 * n)
    return math.sqrt(dt) * (g[0::2] + 1j * g[1::2])


def realization_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible substream for one realization."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(index,)))


class SplitOperator:
    """Cached split-operator phase factors for a (grid, spec, dt) triple."""

    def __init__(self, grid: Grid, spec: MorseSpec, dt_au: float):
        self.grid = grid
        self.spec = spec
        self.dt_au = dt_au
        k = grid.k
        self.kin_half = np.exp(-0.5j * dt_au * k * k / (2.0 * spec.m))
        self.kin_full = self.kin_half * self.kin_half
        v = potential(spec, grid.x)
        self.pot_half = np.exp(-0.5j * dt_au * v)
        self.pot_full = self.pot_half * self.pot_half

    def unitary_step(self, state: GridState) -> GridState:
        """Strang step exp(-iT dt/2) exp(-iV dt) exp(-iT dt/2)."""
        psi = sfft.ifft(self.kin_half * sfft.fft(state.psi))
        psi *= self.pot_full
        psi = sfft.ifft(self.kin_half * sfft.fft(psi))
        return GridState(state.grid, psi, state.t_fs + units.au_to_fs(self.dt_au))


def unitary_step(state: GridState, spec: MorseSpec, dt_au: float) -> GridState:
    return SplitOperator(state.grid, spec, dt_au).unitary_step(state)


def diffusive_step(state: GridState, lam: float, xbar: float,
                   dxi: complex, dt_au: float) -> GridState:
    """Heun update of the dephasing terms about xbar, then renormalization.

    xbar must be the position expectation of the state entering the step.
    """
    out = state.copy()
    if lam == 0.0:
        return out
    psi2 = out.psi.reshape(1, -1)
    norms = kernels.diffusive_update(
        psi2, out.grid.x, np.array([xbar]), lam, dt_au,
        np.array([dxi], dtype=complex), None, out.grid.dx, True)
    if not 0.5 < norms[0] < 2.0:
        raise PropagatorError(
            f"diffusive step unstable: pre-renormalization norm {norms[0]:.3g}")
    return out


@dataclass
class RealizationRecord:
    """Per-step trajectory and requested snapshots of one realization."""

    times_fs: np.ndarray
    x_series: np.ndarray                       # <x>_i(t), bohr
    snapshots: dict[float, GridState] = field(default_factory=dict)
    final_state: GridState | None = None
    edge_warning: bool = False


class BatchPropagator:
    """Propagates a batch of realizations with merged potential phases.

    The working array is the true state times a potential half-phase;
    densities (hence norms, <x> and <H> diagnostics) are unaffected and
    ``sync`` recovers the true state exactly when recording.
    """

    def __init__(self, grid: Grid, spec: MorseSpec, config: PropagatorConfig):
        config.validate_stability(grid)
        self.grid = grid
        self.config = config
        self.ops = SplitOperator(grid, spec, config.dt_au)
        self._conj_pot_half = np.conj(self.ops.pot_half)

    def sync(self, work: np.ndarray) -> np.ndarray:
        """True states for a staggered working batch (new array)."""
        return work * self._conj_pot_half

    def run(self, psis: np.ndarray, rngs: list[np.random.Generator],
            step_callback=None) -> None:
        """Advance the staggered batch in place over all steps.

        psis: (R, n) complex, unit-norm true states at t = 0 (modified in
        place; staggered during the run, synchronized on return).
        step_callback(step, work, xbar_pre) is invoked after each
        composite step with the staggered working array and the position
        expectations used in the diffusive update.
        """
        cfg = self.config
        grid, ops = self.grid, self.ops
        lam, dt = cfg.lam, cfg.dt_au
        n_steps = cfg.n_steps
        R = psis.shape[0]
        kernels.apply_phase(psis, ops.pot_half)
        dxi_blocks = None
        for step in range(1, n_steps + 1):
            off = (step - 1) % NOISE_BLOCK
            if off == 0:
                nblk = min(NOISE_BLOCK, n_steps - step + 1)
                dxi_blocks = np.stack(
                    [_noise_block(rng, nblk, dt) for rng in rngs])
            buf = sfft.fft(psis, axis=1, overwrite_x=True)
            buf *= ops.kin_full
            psis[...] = sfft.ifft(buf, axis=1, overwrite_x=True)
            xbar = kernels.expectation_x_batch(psis, grid.x, grid.dx)
            # diffusive factor fused with the next step's full potential
            # phase; the trailing surplus is removed by sync()
            norms = kernels.diffusive_update(
                psis, grid.x, xbar, lam, dt, np.ascontiguousarray(
                    dxi_blocks[:, off]), ops.pot_full, grid.dx, cfg.renormalize)
            if np.any(norms <= 0.5) or np.any(norms >= 2.0):
                bad = int(np.argmax((norms <= 0.5) | (norms >= 2.0)))
                raise PropagatorError(
                    f"diffusive step unstable at step {step} (row {bad}): "
                    f"pre-renormalization norm {norms[bad]:.3g}")
            if step_callback is not None:
                step_callback(step, psis, xbar)
        psis *= self._conj_pot_half


def propagate_realization(initial: GridState, spec: MorseSpec,
                          config: PropagatorConfig, realization_index: int,
                          master_seed: int) -> RealizationRecord:
    """One stochastic trajectory; deterministic in (initial, config, seed, index)."""
    grid = initial.grid
    prop = BatchPropagator(grid, spec, config)
    n_steps = config.n_steps
    times = np.arange(n_steps + 1) * config.dt_fs
    x_series = np.empty(n_steps + 1)
    x_series[0] = expectation_x(initial)
    snap_steps = config.snapshot_steps()
    record = RealizationRecord(times_fs=times, x_series=x_series)
    if 0 in snap_steps:
        record.snapshots[snap_steps[0]] = initial.copy()

    psis = initial.psi[np.newaxis, :].copy()
    rng = realization_rng(master_seed, realization_index)

    def on_step(step, work, xbar_pre):
        x_series[step] = kernels.expectation_x_batch(work, grid.x, grid.dx)[0]
        if step in snap_steps:
            t = snap_steps[step]
            record.snapshots[t] = GridState(grid, prop.sync(work)[0], t)

    prop.run(psis, [rng], on_step)
    final = GridState(grid, psis[0], times[-1])
    record.final_state = final
    record.edge_warning = bool(
        max(abs(final.psi[0]), abs(final.psi[-1])) > 1e-6)
    return record
