"""Batch front-end: config parsing, run execution and artifact output.

Config files are TOML; CLI flags override file keys.  CSV is the
primary output format, JSON is used for the run manifest and fit
reports.  Exit codes: 0 success, 2 config error, 3 numerical failure,
4 acceptance-threshold failure in compare mode.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__, ensemble, kernels, lindblad, morse, observables
from . import qsd, qstate, units

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


_KNOWN_KEYS = {
    "": {"mode"},
    "system": {"D_wavenumber", "alpha_per_angstrom", "x_e_angstrom",
               "mass_gram", "x_min_angstrom", "x_max_angstrom", "n_points",
               "n_states"},
    "initial": {"kind", "x0_angstrom", "p0_au", "sigma0_angstrom",
                "level_m", "level_n", "weight_m", "weight_n"},
    "bath": {"lam", "lam_unit", "eta_e", "temperature_K"},
    "propagation": {"dt_fs", "t_final_fs", "snapshot_times_fs", "record_every"},
    "ensemble": {"n_realizations", "master_seed", "n_blocks",
                 "track_trajectories", "snapshot_stride", "workers"},
    "output": {"directory", "coherence_pairs"},
}


@dataclass
class RunConfig:
    """Fully resolved run configuration (all defaults materialized)."""

    mode: str = "qsd"
    # system
    D_wavenumber: float = 1.2547e4
    alpha_per_angstrom: float = 1.8576
    x_e_angstrom: float = 2.6663
    mass_gram: float = 4.22e-22 / 4.0
    x_min_angstrom: float = 1.6
    x_max_angstrom: float = 6.4
    n_points: int = 1024
    n_states: int = 60
    # initial state
    kind: str = "gaussian"
    x0_angstrom: float = 2.4
    p0_au: float = 0.0
    sigma0_angstrom: float | None = None     # default: sqrt(hbar/2 m omega0)
    level_m: int = 0
    level_n: int = 3
    weight_m: float = 0.4
    weight_n: float = 0.6
    # bath
    lam: float | None = None
    lam_unit: str | None = None
    eta_e: float | None = None
    temperature_K: float | None = None
    # propagation
    dt_fs: float = 0.1
    t_final_fs: float = 1000.0
    snapshot_times_fs: list[float] = field(default_factory=list)
    record_every: int = 100
    # ensemble
    n_realizations: int = 100
    master_seed: int = 0
    n_blocks: int = 10
    track_trajectories: int = 0
    snapshot_stride: int = 4
    workers: int = 1
    # output
    directory: str = "out"
    coherence_pairs: list[list[int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.mode not in ("qsd", "oracle", "both", "compare"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.kind not in ("gaussian", "superposition"):
            raise ConfigError(f"unknown initial-state kind {self.kind!r}")
        has_lam = self.lam is not None
        has_bath = self.eta_e is not None or self.temperature_K is not None
        if has_lam and has_bath:
            raise ConfigError(
                "give either bath.lam or bath.(eta_e, temperature_K), not both")
        if not has_lam and (self.eta_e is None or self.temperature_K is None):
            raise ConfigError(
                "bath requires lam (+ lam_unit) or both eta_e and temperature_K")
        if has_lam and self.lam_unit is None:
            raise ConfigError("bath.lam requires an explicit lam_unit "
                              "(au, ang^-2 fs^-1 or cm^-2 s^-1)")
        if self.kind == "superposition" and self.level_n <= self.level_m:
            raise ConfigError("superposition requires level_n > level_m")
        pairs = self.coherence_pairs
        if self.kind == "superposition" and not pairs:
            self.coherence_pairs = [[self.level_m, self.level_n]]

    # --- resolved physical objects -------------------------------------

    def morse_spec(self) -> morse.MorseSpec:
        return morse.MorseSpec.from_spectroscopic(
            self.D_wavenumber, self.alpha_per_angstrom,
            self.x_e_angstrom, self.mass_gram)

    def grid(self) -> qstate.Grid:
        return qstate.Grid.from_angstrom(
            self.x_min_angstrom, self.x_max_angstrom, self.n_points)

    def bath(self) -> units.BathSpec:
        if self.lam is not None:
            return units.BathSpec.from_rate(self.lam, self.lam_unit)
        spec = self.morse_spec()
        return units.BathSpec.from_friction(
            self.eta_e, self.temperature_K, spec.m,
            morse.harmonic_frequency(spec))

    def initial_state(self, basis: morse.MorseBasis,
                      grid: qstate.Grid) -> qstate.GridState:
        if self.kind == "superposition":
            return qstate.superposition(basis, self.level_m, self.level_n,
                                        self.weight_m, self.weight_n)
        spec = self.morse_spec()
        if self.sigma0_angstrom is not None:
            sigma0 = units.angstrom_to_bohr(self.sigma0_angstrom)
        else:
            sigma0 = math.sqrt(1.0 / (2.0 * spec.m *
                                      morse.harmonic_frequency(spec)))
        return qstate.gaussian(grid, units.angstrom_to_bohr(self.x0_angstrom),
                               self.p0_au, sigma0)

    def propagator_config(self) -> qsd.PropagatorConfig:
        return qsd.PropagatorConfig(
            dt_fs=self.dt_fs, t_final_fs=self.t_final_fs,
            lam=self.bath().lam,
            snapshot_times_fs=tuple(self.snapshot_times_fs))

    def ensemble_config(self) -> ensemble.EnsembleConfig:
        return ensemble.EnsembleConfig(
            n_realizations=self.n_realizations, master_seed=self.master_seed,
            record_every=self.record_every,
            snapshot_stride=self.snapshot_stride, n_blocks=self.n_blocks,
            track_trajectories=self.track_trajectories, workers=self.workers)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    unknown = []
    flat: dict = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            known = _KNOWN_KEYS.get(key)
            if known is None:
                unknown.append(key)
                continue
            for sub, v in value.items():
                if sub not in known:
                    unknown.append(f"{key}.{sub}")
                else:
                    flat[sub] = v
        elif key in _KNOWN_KEYS[""]:
            flat[key] = value
        else:
            unknown.append(key)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        return RunConfig.from_dict({**RunConfig().to_dict(), **flat})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# --- artifact writing ----------------------------------------------------

def _fmt(v: float) -> str:
    return format(v, ".17g")


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = len(columns[0])
    with open(path, "w", newline="") as fh:
        fh.write("# schema_version=%d\n" % SCHEMA_VERSION)
        fh.write(",".join(header) + "\n")
        for r in range(rows):
            fh.write(",".join(_fmt(float(c[r])) for c in columns) + "\n")


def _observable_columns(series: observables.ObservableSeries,
                        pairs: list[tuple[int, int]]):
    header = ["t_fs", "x_mean_angstrom", "purity", "purity_se", "residual"]
    k = series.populations.shape[1]
    xmean = series.x_mean if series.x_mean is not None else np.zeros_like(
        series.purity)
    chi_se = series.purity_se if series.purity_se is not None \
        else np.zeros_like(series.purity)
    cols = [series.times_fs, units.bohr_to_angstrom(xmean), series.purity,
            chi_se, series.residual]
    for i in range(k):
        header.append(f"P_{i}")
        cols.append(series.populations[:, i])
    pop_se = series.population_se
    for i in range(k):
        header.append(f"P_{i}_se")
        cols.append(pop_se[:, i] if pop_se is not None
                    else np.zeros_like(series.purity))
    for i, j in pairs:
        header.append(f"zeta_{i}_{j}")
        cols.append(series.coherence_pairs[(i, j)])
        header.append(f"zeta_{i}_{j}_se")
        se = series.coherence_se
        cols.append(se[(i, j)] if se is not None
                    else np.zeros_like(series.purity))
    return header, cols


def write_observables_csv(path: Path, series: observables.ObservableSeries,
                          pairs: list[tuple[int, int]]) -> None:
    header, cols = _observable_columns(series, pairs)
    _write_csv(path, header, cols)


def read_observables_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    names = lines[0].strip().split(",")
    data = np.array([[float(v) for v in ln.strip().split(",")]
                     for ln in lines[1:]])
    return {name: data[:, i] for i, name in enumerate(names)}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --- run execution --------------------------------------------------------

def execute(cfg: RunConfig, outdir: Path) -> int:
    """Run the configured mode; returns the process exit code."""
    t_start = time.time()
    outdir.mkdir(parents=True, exist_ok=True)
    spec = cfg.morse_spec()
    grid = cfg.grid()
    basis = morse.diagonalize(spec, grid.x, cfg.n_states)
    initial = cfg.initial_state(basis, grid)
    bath = cfg.bath()
    prop_cfg = cfg.propagator_config()
    prop_cfg.validate_stability(grid)
    pairs = [tuple(p) for p in cfg.coherence_pairs]
    artifacts: list[Path] = []
    compare_ok = True

    qsd_series = oracle_series = None
    if cfg.mode in ("qsd", "both", "compare"):
        result = ensemble.run_ensemble(initial, spec, basis, prop_cfg,
                                       cfg.ensemble_config())
        qsd_series = observables.series_from_rho(
            result.times_fs, result.rho, tuple(pairs), x_mean=result.x_mean)
        if cfg.n_blocks > 1:
            observables.attach_errors(qsd_series, result.block_rho_sums,
                                      result.block_counts)
        path = outdir / "observables.csv"
        write_observables_csv(path, qsd_series, pairs)
        artifacts.append(path)
        for t in sorted(result.snapshots):
            mat = result.snapshots[t]
            for part, name in ((mat.real, "re"), (mat.imag, "im")):
                p = outdir / f"rho_{name}_t{t:g}fs.csv"
                np.savetxt(p, part, delimiter=",", fmt="%.17g")
                artifacts.append(p)
        dens_path = outdir / "density.csv"
        header = ["x_angstrom"] + [f"t{t:g}fs" for t in result.times_fs]
        cols = [units.bohr_to_angstrom(grid.x)] + list(result.density)
        _write_csv(dens_path, header, cols)
        artifacts.append(dens_path)
        if result.tracked:
            p = outdir / "trajectories.csv"
            n_rec = len(result.tracked[0])
            tt = np.arange(n_rec) * prop_cfg.dt_fs
            _write_csv(p, ["t_fs"] + [f"x_{i}_angstrom" for i in
                                      range(len(result.tracked))],
                       [tt] + [units.bohr_to_angstrom(x)
                               for x in result.tracked])
            artifacts.append(p)

    if cfg.mode in ("oracle", "both", "compare"):
        coeffs, _ = qstate.project(initial, basis)
        rho0 = np.outer(coeffs, coeffs.conj())
        rho0 /= rho0.trace().real
        ops = lindblad.build_operators(basis)
        times, rhos = lindblad.evolve_master(
            rho0, ops, bath.lam, cfg.dt_fs, cfg.t_final_fs, cfg.record_every)
        x_means = np.array([(r @ ops.x_op).trace().real for r in rhos])
        oracle_series = observables.series_from_rho(
            times, rhos, tuple(pairs), x_mean=x_means)
        path = outdir / "observables_oracle.csv"
        write_observables_csv(path, oracle_series, pairs)
        artifacts.append(path)

    if cfg.mode == "compare":
        path = outdir / "compare.csv"
        compare_ok = write_compare_csv(path, qsd_series, oracle_series, pairs)
        artifacts.append(path)

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "config": cfg.to_dict(),
        "master_seed": cfg.master_seed,
        "lam_au": bath.lam,
        "xi": bath.xi,
        "wall_clock_s": time.time() - t_start,
        "artifacts": {p.name: _sha256(p) for p in artifacts},
    }
    if bath.temperature is not None:
        ratio, valid = units.markov_validity(
            bath.temperature, morse.harmonic_frequency(spec))
        manifest["markov_ratio"] = ratio
        manifest["markov_valid"] = valid
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return 0 if compare_ok else 4


def write_compare_csv(path: Path, qsd_series, oracle_series,
                      pairs: list[tuple[int, int]]) -> bool:
    """Per-time discrepancy table; True when every compared quantity stays
    within 3 standard errors at >= 95% of recorded times."""
    t = qsd_series.times_fs
    if t.size != oracle_series.times_fs.size or not np.allclose(
            t, oracle_series.times_fs):
        raise ValueError("qsd and oracle series have different time grids")
    quantities = {"purity": (qsd_series.purity, oracle_series.purity,
                             qsd_series.purity_se)}
    levels = sorted({i for p in pairs for i in p})
    for i in levels:
        se = qsd_series.population_se
        quantities[f"P_{i}"] = (qsd_series.populations[:, i],
                                oracle_series.populations[:, i],
                                se[:, i] if se is not None else None)
    for pair in pairs:
        se = qsd_series.coherence_se
        quantities[f"zeta_{pair[0]}_{pair[1]}"] = (
            qsd_series.coherence_pairs[pair],
            oracle_series.coherence_pairs[pair],
            se[pair] if se is not None else None)
    header, cols = ["t_fs"], [t]
    ok = True
    for name, (a, b, se) in quantities.items():
        if se is None:
            se = np.zeros_like(a)
        diff = a - b
        header += [f"{name}_qsd", f"{name}_oracle", f"{name}_diff", f"{name}_se"]
        cols += [a, b, diff, se]
        within = np.abs(diff) <= 3.0 * se + 1e-12
        if within.mean() < 0.95:
            ok = False
    _write_csv(path, header, cols)
    return ok


# --- command-line interface ------------------------------------------------

@click.group()
def main():
    """Stochastic simulator for Markovian vibrational decoherence."""


def _load_config(config_path: str | None, overrides: dict) -> RunConfig:
    text = Path(config_path).read_text() if config_path else ""
    cfg = parse_config(text)
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def _run_command(config, output, mode, seed, workers, n_realizations):
    try:
        cfg = _load_config(config, {
            "mode": mode, "master_seed": seed, "workers": workers,
            "n_realizations": n_realizations,
            "directory": output,
        })
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    outdir = Path(cfg.directory)
    try:
        code = execute(cfg, outdir)
    except (ConfigError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        _write_error(outdir, 2, exc)
        sys.exit(2)
    except Exception as exc:   # numerical failure
        click.echo(f"numerical failure: {exc}", err=True)
        _write_error(outdir, 3, exc)
        sys.exit(3)
    if code:
        click.echo("compare: acceptance threshold failed", err=True)
    sys.exit(code)


def _write_error(outdir: Path, code: int, exc: Exception) -> None:
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "error.json", "w") as fh:
            json.dump({"exit_code": code, "error": type(exc).__name__,
                       "message": str(exc)}, fh, indent=2)
    except OSError:
        pass


@main.command()
@click.option("--config", "-c", type=click.Path(exists=True), default=None)
@click.option("--output", "-o", default=None, help="output directory",
              envvar="QSDVIB_OUTPUT")
@click.option("--mode", default=None,
              type=click.Choice(["qsd", "oracle", "both", "compare"]))
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--n-realizations", "-N", type=int, default=None)
def run(config, output, mode, seed, workers, n_realizations):
    """Execute a configured simulation."""
    _run_command(config, output, mode, seed, workers, n_realizations)


@main.command()
@click.option("--config", "-c", type=click.Path(exists=True), default=None)
@click.option("--output", "-o", default=None, envvar="QSDVIB_OUTPUT")
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--n-realizations", "-N", type=int, default=None)
def compare(config, output, seed, workers, n_realizations):
    """Run ensemble and oracle and write a discrepancy table."""
    _run_command(config, output, "compare", seed, workers, n_realizations)


@main.command()
@click.option("--output", "-o", default=None, help="optional CSV path")
def table1(output):
    """Coherence lengths for the reference decoherence rates and times."""
    rows = []
    for lam_au in (1e-4, 1e-3):
        for t_fs in (192.0, 640.0, 1600.0):
            ell = observables.coherence_length(lam_au, units.fs_to_au(t_fs))
            rows.append((lam_au, t_fs, units.bohr_to_angstrom(ell)))
    lines = ["lam_au,t_fs,coherence_length_angstrom"]
    lines += [f"{lam:g},{t:g},{_fmt(ell)}" for lam, t, ell in rows]
    text = "\n".join(lines) + "\n"
    if output:
        Path(output).write_text(text)
    click.echo(text, nl=False)


@main.command()
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--column", default="purity")
@click.option("--model", default="single",
              type=click.Choice(["single", "double"]))
@click.option("--t-min", type=float, default=None)
@click.option("--t-max", type=float, default=None)
@click.option("--output", "-o", default=None, help="JSON report path")
def fit(csv_path, column, model, t_min, t_max, output):
    """Fit exponential decay to a column of an observables CSV."""
    data = read_observables_csv(Path(csv_path))
    if column not in data:
        click.echo(f"config error: no column {column!r}", err=True)
        sys.exit(2)
    window = None
    if t_min is not None or t_max is not None:
        window = (t_min if t_min is not None else 0.0,
                  t_max if t_max is not None else float(data["t_fs"][-1]))
    try:
        result = observables.fit_decay(data["t_fs"], data[column],
                                       model=model, window=window)
    except observables.ObservableError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(3)
    report = {
        "model": result.model,
        "amplitudes": list(result.amplitudes),
        "decay_times_fs": list(result.decay_times_fs),
        "offset": result.offset,
        "correlation": result.correlation,
        "converged": result.converged,
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    if output:
        Path(output).write_text(text + "\n")
    click.echo(text)


if __name__ == "__main__":
    main()
