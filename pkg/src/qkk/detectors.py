"""
Homodyne (HD), double-homodyne (DHD) and Kramers-Kronig (KK) receivers.

Analytic moments come from the mode overlap with
``xi(t) = A e^{i theta} H(t) f(t)``.  The Monte Carlo receivers are
semiclassical: for coherent inputs photon counts in each time bin are
exactly Poissonian with mean ``|field|^2 dt``, so vacuum noise appears
without being added by hand.

Every shot draws from its own stream ``default_rng([seed, shot])``; results
do not depend on how shots are grouped or how many threads run them.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from .dsp import (BeamsplitterParams, KKRetrievalConfig, kk_field_reconstruct,
                  kk_phase_from_intensity, kk_quadratures, min_phase_holds)
from .errors import MinimumPhaseError, PreconditionError, WeakLocalOscillatorError
from .grid import ComplexSignal, TimeGrid, inner_product, is_single_sideband
from .states import CoherentField

__all__ = [
    "PhotodiodeResponse",
    "LocalOscillator",
    "DetectionStats",
    "ShotNoiseCalibration",
    "STRONG_LO_COUNTS",
    "hd_analytic",
    "dhd_analytic",
    "sample_photocurrent",
    "hd_monte_carlo",
    "dhd_monte_carlo",
    "kk_receive",
    "kk_phase_samples",
    "calibrate",
]

STRONG_LO_COUNTS = 1e3
_BLOCK = 256


@dataclass(frozen=True, eq=False)
class PhotodiodeResponse:
    """Photodiode response.

    For the integrating receivers (HD, DHD) ``H`` is the real time weight
    applied to the photocurrent before integration; for sampled intensity
    traces it is the impulse response, centred on the middle sample and
    applied as a discrete convolution (unit DC gain when ``sum(H) = 1``).
    """

    kind: str = "ideal_delta"
    H: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("ideal_delta", "kernel"):
            raise PreconditionError("kind must be 'ideal_delta' or 'kernel'")
        if self.kind == "ideal_delta":
            if self.H is not None:
                raise PreconditionError("ideal_delta response carries no kernel")
            return
        if self.H is None:
            raise PreconditionError("kernel response needs H")
        H = np.array(self.H, dtype=float)
        if H.ndim != 1 or not np.all(np.isfinite(H)):
            raise PreconditionError("H must be a finite real 1-D array")
        H.flags.writeable = False
        object.__setattr__(self, "H", H)

    @classmethod
    def ideal(cls) -> "PhotodiodeResponse":
        return cls()

    @classmethod
    def gaussian_kernel(cls, grid: TimeGrid, rms_width: float) -> "PhotodiodeResponse":
        """Unit-gain Gaussian impulse response of the given rms width."""
        u = grid.t - grid.t[grid.n // 2]
        h = np.exp(-0.5 * (u / rms_width) ** 2)
        return cls("kernel", h / h.sum())

    def weight(self, grid: TimeGrid) -> np.ndarray:
        if self.kind == "ideal_delta":
            return np.ones(grid.n)
        if len(self.H) != grid.n:
            raise PreconditionError("time weight must have one value per grid sample")
        return self.H

    def filter(self, trace: np.ndarray) -> np.ndarray:
        if self.kind == "ideal_delta":
            return trace
        return fftconvolve(trace, self.H[None, :] if trace.ndim == 2 else self.H,
                           mode="same", axes=-1)

    def support(self, grid: TimeGrid) -> float:
        """``sqrt(12)`` times the rms width of ``|H|``; zero for the ideal diode."""
        if self.kind == "ideal_delta":
            return 0.0
        w = np.abs(self.H)
        t = grid.t
        m = np.sum(w * t) / w.sum()
        return math.sqrt(12 * np.sum(w * (t - m) ** 2) / w.sum())


@dataclass(frozen=True, eq=False)
class LocalOscillator:
    """LO of amplitude ``A`` and phase ``theta``; ``mode=None`` is monochromatic."""

    amplitude: float
    phase: float = 0.0
    mode: ComplexSignal | None = None

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise PreconditionError("LO amplitude must be non-negative")
        if self.mode is not None and abs(self.mode.norm2() - 1) > 1e-6:
            raise PreconditionError("shaped LO mode must be normalized")

    def field(self, grid: TimeGrid) -> np.ndarray:
        env = np.ones(grid.n) if self.mode is None else self.mode.samples
        return self.amplitude * np.exp(1j * self.phase) * env

    def peak_counts(self, grid: TimeGrid) -> float:
        return float(np.max(np.abs(self.field(grid)) ** 2) * grid.dt)

    def scaled_power(self, factor: float) -> "LocalOscillator":
        return replace(self, amplitude=self.amplitude * math.sqrt(factor))


def _nan_to_none(x):
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


@dataclass(frozen=True, eq=False)
class DetectionStats:
    """First two moments of the quadrature estimates.

    ``snr = mean^2 / (4 var)``, which for an HD estimator equals
    ``Re{alpha <xi|g>}^2 / <xi|xi>``.  Quadratures a receiver does not
    measure are NaN.  ``shots=None`` marks exact (analytic) values.
    """

    mean_q: float
    mean_p: float
    var_q: float
    var_p: float
    shots: int | None = None
    stderr_mean_q: float = 0.0
    stderr_mean_p: float = 0.0
    stderr_var_q: float = 0.0
    stderr_var_p: float = 0.0
    receiver: str = ""
    q_samples: np.ndarray | None = field(default=None, repr=False)
    p_samples: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        for v in (self.var_q, self.var_p):
            if v < 0:
                raise PreconditionError("variances must be non-negative")

    @staticmethod
    def _snr(mean, var):
        if math.isnan(mean) or math.isnan(var):
            return math.nan
        return mean * mean / (4 * var) if var > 0 else math.inf

    @property
    def snr_q(self) -> float:
        return self._snr(self.mean_q, self.var_q)

    @property
    def snr_p(self) -> float:
        return self._snr(self.mean_p, self.var_p)

    @classmethod
    def from_samples(cls, q, p=None, receiver: str = "") -> "DetectionStats":
        q = np.asarray(q, dtype=float)
        n = len(q)
        if n < 2:
            raise PreconditionError("need at least two shots")

        def moments(x):
            if x is None:
                return math.nan, math.nan, math.nan, math.nan
            m, v = float(np.mean(x)), float(np.var(x, ddof=1))
            return m, v, math.sqrt(v / n), v * math.sqrt(2 / (n - 1))

        mq, vq, smq, svq = moments(q)
        p = None if p is None else np.asarray(p, dtype=float)
        mp, vp, smp, svp = moments(p)
        return cls(mq, mp, vq, vp if p is not None else math.nan, n, smq, smp, svq, svp,
                   receiver, q, p)

    def scaled(self, scale: float, rel_scale_err: float = 0.0) -> "DetectionStats":
        """Rescale the estimator; a relative scale uncertainty is propagated."""
        def se_mean(m, se):
            return math.hypot(scale * se, scale * m * rel_scale_err)

        def se_var(v, se):
            return math.hypot(scale ** 2 * se, 2 * scale ** 2 * v * rel_scale_err)

        return DetectionStats(
            scale * self.mean_q, scale * self.mean_p,
            scale ** 2 * self.var_q, scale ** 2 * self.var_p, self.shots,
            se_mean(self.mean_q, self.stderr_mean_q), se_mean(self.mean_p, self.stderr_mean_p),
            se_var(self.var_q, self.stderr_var_q), se_var(self.var_p, self.stderr_var_p),
            self.receiver,
            None if self.q_samples is None else scale * self.q_samples,
            None if self.p_samples is None else scale * self.p_samples)

    def to_dict(self) -> dict:
        keys = ("mean_q", "mean_p", "var_q", "var_p", "snr_q", "snr_p",
                "stderr_mean_q", "stderr_mean_p", "stderr_var_q", "stderr_var_p")
        out = {"receiver": self.receiver, "shots": self.shots}
        out.update({k: _nan_to_none(getattr(self, k)) for k in keys})
        return out

    def samples_to_csv(self, path) -> None:
        if self.q_samples is None:
            raise PreconditionError("no per-shot samples recorded")
        p = self.p_samples if self.p_samples is not None else [math.nan] * len(self.q_samples)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["shot", "q", "p"])
            for i, (a, b) in enumerate(zip(self.q_samples, p)):
                w.writerow([i, repr(float(a)), repr(float(b))])


@dataclass(frozen=True)
class ShotNoiseCalibration:
    """Scale fixed by the raw HD variance with vacuum at the signal port.

    ``reference_shots=None`` means the reference is exact.
    """

    reference_variance: float
    reference_shots: int | None = None

    def __post_init__(self):
        if not self.reference_variance > 0:
            raise PreconditionError("reference variance must be positive")

    @property
    def hd_scale(self) -> float:
        return 1.0 / (2.0 * math.sqrt(self.reference_variance))

    @property
    def dhd_scale(self) -> float:
        return 1.0 / math.sqrt(2.0 * self.reference_variance)

    @property
    def relative_scale_error(self) -> float:
        # scale ~ v^{-1/2}; sample variance has relative error sqrt(2/(N-1))
        if self.reference_shots is None:
            return 0.0
        return 0.5 * math.sqrt(2.0 / (self.reference_shots - 1))

    def apply_hd(self, stats: DetectionStats) -> DetectionStats:
        return stats.scaled(self.hd_scale, self.relative_scale_error)

    def apply_dhd(self, stats: DetectionStats) -> DetectionStats:
        return stats.scaled(self.dhd_scale, self.relative_scale_error)


def calibrate(vacuum_stats: DetectionStats, min_shots: int = 10_000) -> ShotNoiseCalibration:
    """Calibration from a vacuum-input HD run (q quadrature)."""
    if vacuum_stats.shots is not None and vacuum_stats.shots < min_shots:
        raise PreconditionError(f"calibration needs at least {min_shots} vacuum shots")
    if not vacuum_stats.var_q > 0:
        raise PreconditionError("zero reference variance")
    return ShotNoiseCalibration(vacuum_stats.var_q, vacuum_stats.shots)


# -- analytic moments ------------------------------------------------------

def _xi(grid: TimeGrid, lo: LocalOscillator, H: PhotodiodeResponse) -> ComplexSignal:
    xi = ComplexSignal(grid, H.weight(grid) * lo.field(grid))
    if xi.norm2() == 0:
        raise PreconditionError("detection mode xi has zero norm")
    return xi


def hd_analytic(state: CoherentField, lo: LocalOscillator,
                H: PhotodiodeResponse | None = None) -> DetectionStats:
    """Raw HD moments: mean ``2 Re <xi|psi>``, variance ``<xi|xi>``."""
    H = H or PhotodiodeResponse()
    xi = _xi(state.grid, lo, H)
    ov = inner_product(xi, state.psi)
    return DetectionStats(2 * ov.real, math.nan, xi.norm2(), math.nan, receiver="hd")


def dhd_analytic(state: CoherentField, lo: LocalOscillator,
                 H: PhotodiodeResponse | None = None) -> DetectionStats:
    """Raw DHD moments: means ``sqrt2 Re/Im <xi|psi>``, variances ``<xi|xi>``."""
    H = H or PhotodiodeResponse()
    xi = _xi(state.grid, lo, H)
    ov = inner_product(xi, state.psi)
    v = xi.norm2()
    return DetectionStats(math.sqrt(2) * ov.real, math.sqrt(2) * ov.imag, v, v, receiver="dhd")


# -- sampling ---------------------------------------------------------------

def sample_photocurrent(envelope: ComplexSignal, H: PhotodiodeResponse | None = None,
                        model: str = "poisson", rng_seed=0) -> np.ndarray:
    """One photocurrent trace ``counts/dt`` filtered by ``H``.

    ``rng_seed`` may be an int, a seed sequence, or a ``Generator``.
    """
    H = H or PhotodiodeResponse()
    dt = envelope.grid.dt
    lam = np.abs(envelope.samples) ** 2 * dt
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    if model == "poisson":
        counts = rng.poisson(lam).astype(float)
    elif model == "gaussian":
        if lam.min() < 100:
            raise PreconditionError("gaussian photocount model needs at least 100 counts per bin")
        counts = rng.normal(lam, np.sqrt(lam))
    else:
        raise PreconditionError("model must be 'poisson' or 'gaussian'")
    return H.filter(counts / dt)


def _shot_rng(seed: int, shot: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(shot)])


def _run_blocks(work: Callable[[int, int], np.ndarray], shots: int, threads: int) -> np.ndarray:
    edges = list(range(0, shots, _BLOCK)) + [shots]
    spans = list(zip(edges[:-1], edges[1:]))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: work(*s), spans))
    else:
        parts = [work(a, b) for a, b in spans]
    return np.concatenate(parts, axis=0)


def _check_shots(shots: int):
    if shots < 100:
        raise PreconditionError("Monte Carlo needs at least 100 shots")


def _check_strong_lo(counts: float):
    if counts < STRONG_LO_COUNTS:
        raise WeakLocalOscillatorError(
            f"LO gives {counts:.3g} counts per bin; need at least {STRONG_LO_COUNTS:g}")


def _balanced_difference(rng, sig, lo_field, weight, dt):
    c = (sig + lo_field) / math.sqrt(2)
    d = (sig - lo_field) / math.sqrt(2)
    nc = rng.poisson(np.abs(c) ** 2 * dt)
    nd = rng.poisson(np.abs(d) ** 2 * dt)
    return float(np.dot(weight, nc - nd))


def hd_monte_carlo(state: CoherentField, lo: LocalOscillator, H: PhotodiodeResponse | None = None,
                   shots: int = 10_000, rng_seed: int = 0, threads: int = 1) -> DetectionStats:
    """Raw HD estimator ``sum_k H_k (n_c - n_d)`` over balanced output ports."""
    H = H or PhotodiodeResponse()
    _check_shots(shots)
    grid = state.grid
    _check_strong_lo(lo.peak_counts(grid))
    sig, b, w = state.psi.samples, lo.field(grid), H.weight(grid)

    def work(s0, s1):
        return np.array([_balanced_difference(_shot_rng(rng_seed, s), sig, b, w, grid.dt)
                         for s in range(s0, s1)])

    return DetectionStats.from_samples(_run_blocks(work, shots, threads), receiver="hd")


def dhd_monte_carlo(state: CoherentField, lo: LocalOscillator, H: PhotodiodeResponse | None = None,
                    shots: int = 10_000, rng_seed: int = 0, threads: int = 1) -> DetectionStats:
    """Signal split 50/50 into two HD arms with LO phases ``theta`` and ``theta + pi/2``."""
    H = H or PhotodiodeResponse()
    _check_shots(shots)
    grid = state.grid
    _check_strong_lo(lo.peak_counts(grid))
    half = state.psi.samples / math.sqrt(2)
    b = lo.field(grid)
    w = H.weight(grid)

    def work(s0, s1):
        out = np.empty((s1 - s0, 2))
        for i, s in enumerate(range(s0, s1)):
            rng = _shot_rng(rng_seed, s)
            out[i, 0] = _balanced_difference(rng, half, b, w, grid.dt)
            out[i, 1] = _balanced_difference(rng, half, 1j * b, w, grid.dt)
        return out

    qp = _run_blocks(work, shots, threads)
    return DetectionStats.from_samples(qp[:, 0], qp[:, 1], receiver="dhd")


def _kk_preconditions(state, lo, bs, cfg, f, H):
    if lo.mode is not None:
        raise PreconditionError("KK receiver uses a monochromatic LO")
    if not math.isclose(cfg.lo_amplitude, lo.amplitude, rel_tol=1e-12):
        raise PreconditionError("retrieval config and LO disagree on the amplitude")
    if not is_single_sideband(f, 1e-3):
        raise PreconditionError("analysis mode must be single-sideband")
    ok, margin = min_phase_holds(state.psi, bs, lo.amplitude)
    if not ok or margin < 0.5 * bs.r * lo.amplitude:
        raise MinimumPhaseError(
            f"minimum-phase margin {margin:.3g} below half the LO level {0.5 * bs.r * lo.amplitude:.3g}")
    if cfg.expansion == "full_log":
        _check_strong_lo((bs.r * lo.amplitude) ** 2 * state.grid.dt)


def _kk_intensity_block(state, lo, bs, H, rng_seed, s0, s1):
    grid = state.grid
    c = bs.r * lo.field(grid) + bs.t * state.psi.samples
    lam = np.abs(c) ** 2 * grid.dt
    I = np.empty((s1 - s0, grid.n))
    for i, s in enumerate(range(s0, s1)):
        I[i] = _shot_rng(rng_seed, s).poisson(lam)
    return H.filter(I / grid.dt)


def kk_receive(state: CoherentField, lo: LocalOscillator, bs: BeamsplitterParams,
               cfg: KKRetrievalConfig, f: ComplexSignal, H: PhotodiodeResponse | None = None,
               shots: int = 10_000, rng_seed: int = 0, threads: int = 1) -> DetectionStats:
    """KK receiver: detect one beamsplitter output, retrieve phase, project on ``f``.

    The estimates are in field units (``q -> Re alpha``), so no shot-noise
    rescaling is applied.  Per-shot samples are attached to the result.
    """
    H = H or PhotodiodeResponse()
    _check_shots(shots)
    _kk_preconditions(state, lo, bs, cfg, f, H)
    grid = state.grid

    def work(s0, s1):
        I = _kk_intensity_block(state, lo, bs, H, rng_seed, s0, s1)
        phase = kk_phase_from_intensity(I, cfg, bs).phase
        a = kk_field_reconstruct(I, phase, cfg, bs)
        q, p = kk_quadratures(a, f)
        return np.stack([q, p], axis=1)

    qp = _run_blocks(work, shots, threads)
    return DetectionStats.from_samples(qp[:, 0], qp[:, 1], receiver="kk")


def kk_phase_samples(state: CoherentField, lo: LocalOscillator, bs: BeamsplitterParams,
                     cfg: KKRetrievalConfig, sample_index: int, shots: int = 4000,
                     rng_seed: int = 0, H: PhotodiodeResponse | None = None,
                     threads: int = 1) -> np.ndarray:
    """Per-shot retrieved phase at one sample of the grid."""
    H = H or PhotodiodeResponse()
    _check_shots(shots)
    ok, margin = min_phase_holds(state.psi, bs, lo.amplitude)
    if not ok or margin < 0.5 * bs.r * lo.amplitude:
        raise MinimumPhaseError("minimum-phase margin too small")
    if cfg.expansion == "full_log":
        _check_strong_lo((bs.r * lo.amplitude) ** 2 * state.grid.dt)

    def work(s0, s1):
        I = _kk_intensity_block(state, lo, bs, H, rng_seed, s0, s1)
        return kk_phase_from_intensity(I, cfg, bs).phase[:, sample_index]

    return _run_blocks(work, shots, threads)
