"""Derived quantities: purity, populations, coherences, coherence length
and exponential decay-time fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares


class ObservableError(ValueError):
    pass


def _check_hermitian(rho: np.ndarray, tol: float = 1e-8) -> None:
    dev = np.abs(rho - rho.conj().T).max()
    if dev > tol:
        raise ObservableError(f"density matrix not Hermitian (deviation {dev:.2e})")


def purity(rho: np.ndarray) -> float:
    """Tr(rho^2) = sum_i rho_ii^2 + sum_{i!=j} |rho_ij|^2."""
    _check_hermitian(rho)
    return float(np.vdot(rho, rho).real)


def populations(rho: np.ndarray) -> np.ndarray:
    _check_hermitian(rho)
    return rho.diagonal().real.copy()


def coherences(rho: np.ndarray) -> np.ndarray:
    """Squared off-diagonal magnitudes |rho_ij|^2 (diagonal zeroed)."""
    _check_hermitian(rho)
    z = np.abs(rho) ** 2
    np.fill_diagonal(z, 0.0)
    return z


def residual_weight(rho: np.ndarray) -> float:
    """Probability outside the truncated basis, 1 - Tr(rho)."""
    return 1.0 - float(rho.diagonal().real.sum())


def coherence_length(lam: float, t: float) -> float:
    """l = (8*lam*t)**-0.5 (a.u.); inf when lam*t = 0."""
    if lam < 0.0 or t < 0.0:
        raise ObservableError("lam and t must be nonnegative")
    if lam * t == 0.0:
        return math.inf
    return 1.0 / math.sqrt(8.0 * lam * t)


def fringe_visibility(x: np.ndarray, density: np.ndarray,
                      window: tuple[float, float],
                      prominence_frac: float = 0.05) -> float:
    """Interference-fringe visibility (max - min)/(max + min) of a density.

    Fringe maxima are interior peaks inside the window with prominence
    above prominence_frac of the window maximum; minima are the troughs
    between them.  A profile without at least two qualifying peaks has
    no fringes and returns 0, so the metric ignores the packet envelope
    and small Monte Carlo wiggles.
    """
    from scipy.signal import find_peaks

    x = np.asarray(x, dtype=float)
    d = np.asarray(density, dtype=float)
    mask = (x >= window[0]) & (x <= window[1])
    if mask.sum() < 5:
        raise ObservableError("window contains too few grid points")
    dw = d[mask]
    if dw.max() <= 0.0:
        raise ObservableError("density vanishes over the window")
    floor = prominence_frac * dw.max()
    peaks, _ = find_peaks(dw, prominence=floor)
    if peaks.size < 2:
        return 0.0
    troughs = [int(np.argmin(dw[a:b])) + a
               for a, b in zip(peaks[:-1], peaks[1:])]
    hi = dw[peaks].mean()
    lo = dw[troughs].mean()
    return float((hi - lo) / (hi + lo))


@dataclass
class ObservableSeries:
    """Time series extracted from a coefficient-space density-matrix series."""

    times_fs: np.ndarray
    purity: np.ndarray               # (T,)
    populations: np.ndarray          # (T, K)
    coherence_pairs: dict[tuple[int, int], np.ndarray]
    x_mean: np.ndarray | None = None
    residual: np.ndarray | None = None
    purity_se: np.ndarray | None = None
    population_se: np.ndarray | None = None     # (T, K)
    coherence_se: dict[tuple[int, int], np.ndarray] | None = None


def series_from_rho(times_fs: np.ndarray, rho_series: np.ndarray,
                    pairs: tuple[tuple[int, int], ...] = (),
                    x_mean: np.ndarray | None = None) -> ObservableSeries:
    chi = np.array([purity(r) for r in rho_series])
    pops = np.array([r.diagonal().real for r in rho_series])
    coh = {(i, j): np.array([abs(r[i, j]) ** 2 for r in rho_series])
           for i, j in pairs}
    resid = 1.0 - pops.sum(axis=1)
    return ObservableSeries(times_fs=times_fs, purity=chi, populations=pops,
                            coherence_pairs=coh, x_mean=x_mean, residual=resid)


def jackknife_se(block_rho_sums: np.ndarray, block_counts: np.ndarray,
                 stat) -> np.ndarray:
    """Delete-one-block jackknife standard error of stat(rho) per time.

    stat maps a (K, K) density matrix to a scalar or vector; block sums
    have shape (B, T, K, K).
    """
    total = block_rho_sums.sum(axis=0)
    n = block_counts.sum()
    b_count = block_counts.size
    loo = []
    for b in range(b_count):
        rho_loo = (total - block_rho_sums[b]) / (n - block_counts[b])
        loo.append(np.array([stat(r) for r in rho_loo]))
    loo = np.array(loo)                     # (B, T, ...)
    mean = loo.mean(axis=0)
    var = ((loo - mean) ** 2).sum(axis=0) * (b_count - 1) / b_count
    return np.sqrt(var)


def attach_errors(series: ObservableSeries, block_rho_sums: np.ndarray,
                  block_counts: np.ndarray) -> ObservableSeries:
    series.purity_se = jackknife_se(block_rho_sums, block_counts, purity)
    series.population_se = jackknife_se(
        block_rho_sums, block_counts, lambda r: r.diagonal().real)
    series.coherence_se = {
        pair: jackknife_se(block_rho_sums, block_counts,
                           lambda r, p=pair: abs(r[p[0], p[1]]) ** 2)
        for pair in series.coherence_pairs
    }
    return series


@dataclass
class DecayFit:
    """Result of fitting a*exp(-t/tau) (+ b*exp(-t/tau2)) + c to a series."""

    model: str                       # "single" | "double"
    amplitudes: tuple[float, ...]
    decay_times_fs: tuple[float, ...]
    offset: float
    correlation: float
    converged: bool
    residual_norm: float

    @property
    def tau_fs(self) -> float:
        return self.decay_times_fs[0]


def _correlation(y: np.ndarray, yfit: np.ndarray) -> float:
    ry = y - y.mean()
    rf = yfit - yfit.mean()
    denom = math.sqrt(float(ry @ ry) * float(rf @ rf))
    return float(ry @ rf) / denom if denom > 0 else 0.0


def _loglinear_seed(t: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Log-linear least squares for a*exp(-t/tau) + c, c from the series tail."""
    n_tail = max(1, t.size // 20)
    c = float(y[-n_tail:].mean())
    z = y - c
    amp0 = z[0] if z[0] > 0 else (y.max() - c)
    keep = z > max(1e-12, 0.02 * amp0)
    keep[-n_tail:] = False
    if keep.sum() < 3:
        c = float(y.min()) - 1e-9
        z = y - c
        keep = z > 0
    slope, intercept = np.polyfit(t[keep], np.log(z[keep]), 1)
    tau = -1.0 / slope if slope < 0 else t[-1]
    return math.exp(intercept), tau, c


def fit_decay(times_fs: np.ndarray, values: np.ndarray, model: str = "single",
              window: tuple[float, float] | None = None,
              skip_initial_fs: float = 20.0) -> DecayFit:
    """Least-squares exponential-decay fit of a purity-like series.

    A log-linear fit seeds a damped Gauss-Newton refinement; the double
    model is seeded from the single fit with a split timescale.
    """
    t = np.asarray(times_fs, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
    else:
        keep = t >= skip_initial_fs
    t, y = t[keep], y[keep]
    if t.size < 10:
        raise ObservableError("need at least 10 points in the fit window")
    if np.any(y <= 0.0) or np.any(y > 1.0 + 1e-8):
        raise ObservableError("series values must lie in (0, 1]")

    a0, tau0, c0 = _loglinear_seed(t, y)
    scale = t[-1]

    if model == "single":
        def resid(p):
            a, tau, c = p
            return a * np.exp(-t / (abs(tau) * scale)) + c - y
        p0 = [a0, max(tau0, 1e-3 * scale) / scale, c0]
    elif model == "double":
        def resid(p):
            a, tau1, b, tau2, c = p
            return (a * np.exp(-t / (abs(tau1) * scale))
                    + b * np.exp(-t / (abs(tau2) * scale)) + c - y)
        p0 = [a0 / 2, max(tau0 / 4, 1e-3 * scale) / scale,
              a0 / 2, max(tau0, 1e-3 * scale) / scale * 2, c0]
    else:
        raise ObservableError(f"unknown model {model!r}")

    sol = least_squares(resid, p0, method="lm", max_nfev=2000)
    yfit = resid(sol.x) + y
    corr = _correlation(y, yfit)
    if model == "single":
        a, tau, c = sol.x
        amps, taus = (float(a),), (abs(float(tau)) * scale,)
    else:
        a, tau1, b, tau2, c = sol.x
        pairs = sorted(((abs(float(tau1)) * scale, float(a)),
                        (abs(float(tau2)) * scale, float(b))))
        taus = (pairs[0][0], pairs[1][0])
        amps = (pairs[0][1], pairs[1][1])
    return DecayFit(model=model, amplitudes=amps, decay_times_fs=taus,
                    offset=float(c), correlation=corr,
                    converged=bool(sol.success),
                    residual_norm=float(np.linalg.norm(sol.fun)))
