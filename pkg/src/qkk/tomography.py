"""
Single-photon spectral tomography with a KK phase retrieval.

A photon with wavefunction ``psi = A e^{i theta} alpha_env + chi`` is
detected repeatedly; the click-time histogram estimates ``|psi|^2`` and the
KK Hilbert transform of its logarithm yields the phase.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal.windows import hann

from .dsp import hilbert_kk_fft
from .errors import PreconditionError
from .grid import ComplexSignal, TimeGrid, rms_duration
from .states import SinglePhotonState, make_single_photon_state

__all__ = [
    "ClickSample",
    "DensityEstimate",
    "ReconstructionReport",
    "default_tomography_grid",
    "default_tomography_state",
    "default_window",
    "sample_clicks",
    "estimate_density",
    "reconstruct_wavefunction",
    "phase_psd",
    "noise_floor",
    "fidelity_study",
]

DEFAULT_SAMPLES = 3072


def default_tomography_grid(n_samples: int = DEFAULT_SAMPLES, duration: float = 1.0) -> TimeGrid:
    return TimeGrid.centered(duration, n_samples)


def default_tomography_state(grid: TimeGrid | None = None, lo_ratio: float = 5.0,
                             lo_phase: float = 0.0) -> SinglePhotonState:
    """Gaussian-spectrum ``chi`` (carrier at 6 widths, duration ``T/40``) on a ``T/2`` flat top."""
    return make_single_photon_state(grid or default_tomography_grid(), lo_ratio=lo_ratio,
                                    lo_phase=lo_phase)


def default_window(state: SinglePhotonState, multiple: float = 10.0) -> tuple[float, float]:
    """Window of ``multiple`` chi durations centred on the peak of ``|chi|``."""
    centre = state.grid.t[int(np.argmax(np.abs(state.chi.samples)))]
    half = 0.5 * multiple * rms_duration(state.chi)
    return centre - half, centre + half


@dataclass(frozen=True, eq=False)
class ClickSample:
    times: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        lo, hi = self.grid.t_start, self.grid.t_start + self.grid.duration
        if t.size and (t.min() < lo or t.max() >= hi):
            raise PreconditionError("click times must lie within the grid span")
        object.__setattr__(self, "times", t)

    @property
    def n_clicks(self) -> int:
        return int(self.times.size)


def sample_clicks(state: SinglePhotonState, n_clicks: int, rng_seed=0) -> ClickSample:
    """I.i.d. click times from ``|psi|^2``: inverse CDF over bins plus uniform jitter."""
    if n_clicks < 1:
        raise PreconditionError("need at least one click")
    grid = state.grid
    w = np.abs(state.psi.samples) ** 2
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    rng = np.random.default_rng(rng_seed)
    idx = np.searchsorted(cdf, rng.random(n_clicks), side="right")
    idx = np.minimum(idx, grid.n - 1)
    times = grid.t_start + (idx + rng.random(n_clicks)) * grid.dt
    # guard the open upper edge against rounding
    times = np.minimum(times, np.nextafter(grid.t_start + grid.n * grid.dt, -np.inf))
    return ClickSample(times, grid)


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    """Normalized density on the grid; ``n_clicks=None`` marks an injected density."""

    grid: TimeGrid
    p_hat: np.ndarray
    bin_counts: np.ndarray | None = None
    n_clicks: int | None = None

    def __post_init__(self):
        p = np.asarray(self.p_hat, dtype=float)
        if p.shape != (self.grid.n,) or np.any(p < 0) or not np.all(np.isfinite(p)):
            raise PreconditionError("density must be finite, non-negative, one value per sample")
        if abs(p.sum() * self.grid.dt - 1) > 1e-6:
            raise PreconditionError("density must integrate to 1")
        object.__setattr__(self, "p_hat", p)

    @classmethod
    def from_density(cls, grid: TimeGrid, p) -> "DensityEstimate":
        p = np.asarray(p, dtype=float)
        return cls(grid, p / (p.sum() * grid.dt))

    @property
    def floor(self) -> float:
        """Level substituted for empty bins before taking a logarithm."""
        if self.n_clicks is None:
            return np.finfo(float).tiny
        return 1.0 / (10 * self.n_clicks * self.grid.duration)


def estimate_density(clicks: ClickSample, grid: TimeGrid | None = None,
                     smoothing_bandwidth: float | None = None) -> DensityEstimate:
    """Histogram on the grid bins, normalized, then Gaussian-smoothed.

    ``smoothing_bandwidth`` is the kernel's standard deviation in time units
    (default two bins; zero disables smoothing).
    """
    grid = grid or clicks.grid
    if clicks.n_clicks == 0:
        raise PreconditionError("empty click sample")
    if clicks.n_clicks < 1000:
        raise PreconditionError("density estimation needs at least 1000 clicks")
    if smoothing_bandwidth is None:
        smoothing_bandwidth = 2 * grid.dt
    if smoothing_bandwidth < 0:
        raise PreconditionError("smoothing bandwidth must be non-negative")
    k = np.floor((clicks.times - grid.t_start) / grid.dt).astype(np.int64)
    inside = (k >= 0) & (k < grid.n)
    counts = np.bincount(k[inside], minlength=grid.n)
    p = counts / (clicks.n_clicks * grid.dt)
    if smoothing_bandwidth > 0:
        p = gaussian_filter1d(p, smoothing_bandwidth / grid.dt, mode="constant")
    p = np.clip(p, 0.0, None)
    p = p / (p.sum() * grid.dt)
    return DensityEstimate(grid, p, counts, clicks.n_clicks)


def phase_psd(phase, reference=None, grid: TimeGrid | None = None, taper=None):
    """Periodogram of a mean-removed, optionally tapered phase trace.

    Normalized so that the peak of ``reference``'s periodogram (or of the
    trace's own when no reference is given) is 1.  ``taper`` multiplies the
    trace after the taper-weighted mean is removed.  Returns
    ``(omega, psd)`` with ascending angular frequency when ``grid`` is given,
    else just ``psd`` in the same ordering.
    """
    def periodogram(x):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise PreconditionError("phase must be finite")
        if taper is None:
            y = x - x.mean()
        else:
            y = (x - np.sum(taper * x) / np.sum(taper)) * taper
        return np.fft.fftshift(np.abs(np.fft.ifft(y)) ** 2)

    psd = periodogram(phase)
    ref = psd if reference is None else periodogram(reference)
    peak = ref.max()
    psd = psd / peak if peak > 0 else psd
    if grid is None:
        return psd
    omega = grid.omega
    return omega, psd


def noise_floor(psd_reconstructed, psd_true, omega, band: float, threshold: float = 1e-6) -> float:
    """Median reconstructed PSD over ``|omega| <= band`` where the true PSD is below ``threshold``."""
    sel = (np.abs(omega) <= band) & (psd_true < threshold)
    if not np.any(sel):
        raise PreconditionError("no off-signal bins in the band")
    return float(np.median(psd_reconstructed[sel]))


@dataclass(frozen=True, eq=False)
class ReconstructionReport:
    psi_tilde: ComplexSignal
    chi_tilde: ComplexSignal
    fidelity_total: float
    fidelity_chi: float
    phase: np.ndarray = field(repr=False)
    true_phase: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    psd_true: np.ndarray = field(repr=False)
    psd_reconstructed: np.ndarray = field(repr=False)
    noise_floor: float = math.nan
    window: tuple = (math.nan, math.nan)

    def __post_init__(self):
        for f in (self.fidelity_total, self.fidelity_chi):
            if not 0 <= f <= 1:
                raise PreconditionError("fidelities must lie in [0, 1]")

    @property
    def phase_psd(self) -> np.ndarray:
        return self.psd_reconstructed

    def to_dict(self) -> dict:
        return {"fidelity_total": self.fidelity_total, "fidelity_chi": self.fidelity_chi,
                "noise_floor": None if math.isnan(self.noise_floor) else self.noise_floor}


def _overlap(x: np.ndarray, y: np.ndarray, dt: float) -> complex:
    return complex(np.vdot(x, y) * dt)


def reconstruct_wavefunction(est: DensityEstimate, A_eff: float, analysis_window: tuple[float, float],
                             state: SinglePhotonState, psd_band: float | None = None
                             ) -> ReconstructionReport:
    """KK reconstruction of ``psi`` from an estimated click density.

    The phase is retrieved on the analysis window with ``ln A_eff^2`` as the
    level outside it, shifted by the known LO phase and set to the LO phase
    elsewhere.  ``state`` supplies the LO envelope and the true wavefunction
    used for the fidelities.
    """
    grid = est.grid
    if grid != state.grid:
        raise PreconditionError("density and state live on different grids")
    if not A_eff > 0:
        raise PreconditionError("A_eff must be positive")
    t_lo, t_hi = analysis_window
    width = t_hi - t_lo
    d_chi, d_env = rms_duration(state.chi), rms_duration(state.envelope)
    tol = 1e-9 * grid.duration
    if width < 5 * d_chi - tol or width > 0.5 * d_env + tol:
        raise PreconditionError(
            f"analysis window {width:.4g} must lie in [5 x chi duration, 0.5 x envelope duration]"
            f" = [{5 * d_chi:.4g}, {0.5 * d_env:.4g}]")
    win = (grid.t >= t_lo) & (grid.t < t_hi)
    if est.bin_counts is not None and est.bin_counts[win].sum() == 0:
        raise PreconditionError("no clicks inside the analysis window")

    theta = state.lo_phase
    logp = np.log(np.maximum(est.p_hat[win], est.floor))
    phase = np.full(grid.n, theta)
    phase[win] += hilbert_kk_fft(logp, baseline=math.log(A_eff ** 2))
    psi_t = np.sqrt(est.p_hat) * np.exp(1j * phase)
    chi_t = np.where(win, psi_t - state.lo_component.samples, 0.0)

    psi, chi = state.psi.samples, state.chi.samples
    f_total = min(1.0, abs(_overlap(psi_t, psi, grid.dt)) ** 2)
    chi_norm2 = np.sum(np.abs(chi) ** 2) * grid.dt
    f_chi = min(1.0, abs(_overlap(chi_t, chi, grid.dt)) ** 2 / chi_norm2 ** 2)

    true_phase = np.angle(psi * np.exp(-1j * theta))
    rec_phase = phase - theta
    # Hann taper over the window: the phase is only retrieved there
    taper = np.zeros(grid.n)
    taper[win] = hann(int(win.sum()), sym=True)
    omega, psd_true = phase_psd(true_phase, grid=grid, taper=taper)
    _, psd_rec = phase_psd(rec_phase, reference=true_phase, grid=grid, taper=taper)
    if psd_band is None:
        psd_band = _default_psd_band(state)
    floor = noise_floor(psd_rec, psd_true, omega, psd_band)
    return ReconstructionReport(ComplexSignal(grid, psi_t), ComplexSignal(grid, chi_t),
                                float(f_total), float(f_chi), rec_phase, true_phase,
                                omega, psd_true, psd_rec, floor, (t_lo, t_hi))


def _default_psd_band(state: SinglePhotonState) -> float:
    # twice the upper edge (carrier + 4 widths) of the chi spectrum
    spec = np.abs(np.fft.fftshift(np.fft.ifft(state.chi.samples))) ** 2
    w = state.grid.omega
    centre = np.sum(w * spec) / spec.sum()
    width = math.sqrt(np.sum((w - centre) ** 2 * spec) / spec.sum())
    return 2 * (abs(centre) + 4 * width)


def _one_seed(state, n_clicks, seed, bandwidth, window):
    clicks = sample_clicks(state, n_clicks, seed)
    est = estimate_density(clicks, smoothing_bandwidth=bandwidth)
    rep = reconstruct_wavefunction(est, state.lo_amplitude, window, state)
    out = {"seed": int(seed), "n_clicks": int(n_clicks)}
    out.update(rep.to_dict())
    return out


def fidelity_study(state: SinglePhotonState, n_clicks: int, seeds, bandwidth: float | None = None,
                   window: tuple[float, float] | None = None, threads: int = 1) -> dict:
    """Per-seed reports and their medians."""
    window = window or default_window(state)
    seeds = list(seeds)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(lambda s: _one_seed(state, n_clicks, s, bandwidth, window), seeds))
    else:
        runs = [_one_seed(state, n_clicks, s, bandwidth, window) for s in seeds]
    med = {k: float(np.median([r[k] for r in runs]))
           for k in ("fidelity_total", "fidelity_chi", "noise_floor")}
    return {"n_clicks": int(n_clicks), "runs": runs, "median": med}
