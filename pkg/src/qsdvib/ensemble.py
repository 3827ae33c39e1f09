"""Ensemble propagation and reduction to the averaged density matrix.

Realizations are propagated in fixed index-order chunks (one chunk per
statistics block); chunk partials are folded in chunk order, so results
are bitwise independent of the worker-pool size.  The coefficient-space
density matrix is accumulated at every recording cadence, the
configuration-space matrix only at requested snapshot times on a
downsampled grid.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .morse import MorseBasis, MorseSpec
from .qsd import BatchPropagator, PropagatorConfig, realization_rng
from .qstate import Grid, GridState


class EnsembleError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnsembleConfig:
    """Realization count, seeding and recording cadence."""

    n_realizations: int
    master_seed: int = 0
    record_every: int = 100          # steps between coefficient recordings
    snapshot_stride: int = 4         # grid downsampling for rho(x, x')
    n_blocks: int = 10               # statistics blocks (jackknife errors)
    track_trajectories: int = 0      # keep <x>_i(t) for the first i realizations
    workers: int = 1

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("need at least one realization")
        if self.record_every < 1 or self.snapshot_stride < 1:
            raise ValueError("record_every and snapshot_stride must be >= 1")
        if not 1 <= self.n_blocks <= self.n_realizations:
            raise ValueError("n_blocks must lie in [1, n_realizations]")

    def chunk_ranges(self) -> list[tuple[int, int, int]]:
        """(block, start, stop) index ranges; fixed by N and n_blocks only."""
        n, b = self.n_realizations, self.n_blocks
        edges = [n * i // b for i in range(b + 1)]
        return [(i, edges[i], edges[i + 1]) for i in range(b)
                if edges[i + 1] > edges[i]]


def record_steps(prop_cfg: PropagatorConfig, record_every: int) -> np.ndarray:
    steps = list(range(0, prop_cfg.n_steps + 1, record_every))
    if steps[-1] != prop_cfg.n_steps:
        steps.append(prop_cfg.n_steps)
    return np.asarray(steps)


@dataclass
class EnsembleAccumulator:
    """Running per-block sums over realizations."""

    times_fs: np.ndarray             # (T,)
    steps: np.ndarray                # (T,) recording steps
    counts: np.ndarray               # (B,)
    rho_sums: np.ndarray             # (B, T, K, K) complex
    dens_sums: np.ndarray            # (B, T, n)
    x_sums: np.ndarray               # (B, T)
    snap_sums: dict[float, np.ndarray]
    snapshot_stride: int
    tracked: list[np.ndarray] = field(default_factory=list)

    @property
    def n_total(self) -> int:
        return int(self.counts.sum())

    def merge_chunk(self, block: int, partial: "ChunkPartial") -> None:
        self.counts[block] += partial.count
        self.rho_sums[block] += partial.rho_sums
        self.dens_sums[block] += partial.dens_sums
        self.x_sums[block] += partial.x_sums
        for t, m in partial.snap_sums.items():
            self.snap_sums[t] += m
        self.tracked.extend(partial.tracked)

    def finalize(self) -> "FinalizedEnsemble":
        n = self.n_total
        rho = self.rho_sums.sum(axis=0) / n
        return FinalizedEnsemble(
            times_fs=self.times_fs,
            n_realizations=n,
            rho=rho,
            density=self.dens_sums.sum(axis=0) / n,
            x_mean=self.x_sums.sum(axis=0) / n,
            snapshots={t: m / n for t, m in self.snap_sums.items()},
            snapshot_stride=self.snapshot_stride,
            block_counts=self.counts.copy(),
            block_rho_sums=self.rho_sums.copy(),
            tracked=list(self.tracked),
        )


@dataclass
class FinalizedEnsemble:
    """Ensemble averages; block sums retained for jackknife errors."""

    times_fs: np.ndarray
    n_realizations: int
    rho: np.ndarray                  # (T, K, K) coefficient-space density matrix
    density: np.ndarray              # (T, n) mean |psi(x)|^2
    x_mean: np.ndarray               # (T,)
    snapshots: dict[float, np.ndarray]
    snapshot_stride: int
    block_counts: np.ndarray
    block_rho_sums: np.ndarray
    tracked: list[np.ndarray]

    def leave_one_out_rhos(self) -> np.ndarray:
        """(B, T, K, K) density matrices, each omitting one block."""
        total = self.block_rho_sums.sum(axis=0)
        n = self.block_counts.sum()
        out = np.empty_like(self.block_rho_sums)
        for b in range(self.block_counts.size):
            out[b] = (total - self.block_rho_sums[b]) / (n - self.block_counts[b])
        return out


@dataclass(frozen=True)
class ChunkPartial:
    count: int
    rho_sums: np.ndarray
    dens_sums: np.ndarray
    x_sums: np.ndarray
    snap_sums: dict[float, np.ndarray]
    tracked: list[np.ndarray]


def _run_chunk(initial_psi: np.ndarray, grid: Grid, spec: MorseSpec,
               basis_functions: np.ndarray, prop_cfg: PropagatorConfig,
               ens_cfg: EnsembleConfig, start: int, stop: int) -> ChunkPartial:
    """Propagate realizations [start, stop) as one batch and reduce them."""
    R = stop - start
    n = grid.n_points
    steps = record_steps(prop_cfg, ens_cfg.record_every)
    step_index = {int(s): i for i, s in enumerate(steps)}
    snap_steps = prop_cfg.snapshot_steps()
    k_states = basis_functions.shape[0]
    proj = (basis_functions * grid.dx).T.astype(complex)   # (n, K)

    rho_sums = np.zeros((steps.size, k_states, k_states), dtype=complex)
    dens_sums = np.zeros((steps.size, n))
    x_sums = np.zeros(steps.size)
    snap_sums = {t: np.zeros((len(range(0, n, ens_cfg.snapshot_stride)),) * 2,
                             dtype=complex) for t in snap_steps.values()}
    n_tracked = max(0, min(ens_cfg.track_trajectories, stop) - start)
    tracked = [np.empty(prop_cfg.n_steps + 1) for _ in range(n_tracked)]

    psis = np.ascontiguousarray(
        np.broadcast_to(initial_psi.astype(complex), (R, n)))
    prop = BatchPropagator(grid, spec, prop_cfg)
    rngs = [realization_rng(ens_cfg.master_seed, i) for i in range(start, stop)]

    def reduce_states(ti: int, states: np.ndarray) -> None:
        coeffs = states @ proj                            # (R, K)
        rho_sums[ti] += coeffs.T @ coeffs.conj()
        dens_sums[ti] += (states.real**2 + states.imag**2).sum(axis=0)
        x_sums[ti] += kernels.expectation_x_batch(states, grid.x, grid.dx).sum()

    reduce_states(0, psis)
    if 0 in snap_steps:
        ds = psis[:, ::ens_cfg.snapshot_stride]
        snap_sums[snap_steps[0]] += ds.T @ ds.conj()
    if n_tracked:
        xb0 = kernels.expectation_x_batch(psis[:n_tracked], grid.x, grid.dx)
        for i in range(n_tracked):
            tracked[i][0] = xb0[i]

    def on_step(step: int, work: np.ndarray, xbar_pre: np.ndarray) -> None:
        need_sync = step in step_index or step in snap_steps
        if n_tracked:
            xb = kernels.expectation_x_batch(work[:n_tracked], grid.x, grid.dx)
            for i in range(n_tracked):
                tracked[i][step] = xb[i]
        if not need_sync:
            return
        states = prop.sync(work)
        if step in step_index:
            reduce_states(step_index[step], states)
        if step in snap_steps:
            ds = states[:, ::ens_cfg.snapshot_stride]
            snap_sums[snap_steps[step]] += ds.T @ ds.conj()

    prop.run(psis, rngs, on_step)
    return ChunkPartial(R, rho_sums, dens_sums, x_sums, snap_sums, tracked)


def run_ensemble(initial: GridState, spec: MorseSpec, basis: MorseBasis,
                 prop_cfg: PropagatorConfig,
                 ens_cfg: EnsembleConfig) -> FinalizedEnsemble:
    """Run N realizations and return finalized ensemble averages."""
    grid = initial.grid
    steps = record_steps(prop_cfg, ens_cfg.record_every)
    k_states = basis.size
    n_ds = len(range(0, grid.n_points, ens_cfg.snapshot_stride))
    acc = EnsembleAccumulator(
        times_fs=steps * prop_cfg.dt_fs,
        steps=steps,
        counts=np.zeros(ens_cfg.n_blocks, dtype=int),
        rho_sums=np.zeros((ens_cfg.n_blocks, steps.size, k_states, k_states),
                          dtype=complex),
        dens_sums=np.zeros((ens_cfg.n_blocks, steps.size, grid.n_points)),
        x_sums=np.zeros((ens_cfg.n_blocks, steps.size)),
        snap_sums={t: np.zeros((n_ds, n_ds), dtype=complex)
                   for t in prop_cfg.snapshot_times_fs},
        snapshot_stride=ens_cfg.snapshot_stride,
    )
    chunks = ens_cfg.chunk_ranges()
    args = [(initial.psi, grid, spec, basis.functions, prop_cfg, ens_cfg,
             start, stop) for _, start, stop in chunks]
    if ens_cfg.workers <= 1:
        partials = (_run_chunk(*a) for a in args)
    else:
        pool = ProcessPoolExecutor(max_workers=ens_cfg.workers)
        partials = pool.map(_run_chunk_star, args)
    try:
        for (block, _, _), partial in zip(chunks, partials):
            acc.merge_chunk(block, partial)
    finally:
        if ens_cfg.workers > 1:
            pool.shutdown()
    return acc.finalize()


def _run_chunk_star(a):
    return _run_chunk(*a)


def averaged_density(result: FinalizedEnsemble, grid: Grid) -> np.ndarray:
    """Mean |psi(x)|^2 series, (T, n); each row integrates to 1."""
    return result.density


def density_matrix_xx(result: FinalizedEnsemble, t_fs: float) -> np.ndarray:
    """Configuration-space rho(x, x') on the downsampled grid at snapshot t."""
    if t_fs not in result.snapshots:
        raise EnsembleError(f"no snapshot recorded at t = {t_fs} fs; "
                            f"available: {sorted(result.snapshots)}")
    return result.snapshots[t_fs]
