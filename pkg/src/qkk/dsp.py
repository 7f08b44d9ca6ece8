"""
Kramers-Kronig signal processing.

The KK Hilbert kernel is ``h(t) = -PV int f(t') / (2 pi (t - t')) dt'``.
Under the positive-exponent Fourier convention of :mod:`qkk.grid` it acts as
the spectral multiplier ``-(i/2) sign(w)``, so that
``cos(w0 t) -> -sin(w0 t)/2`` and ``sin(w0 t) -> +cos(w0 t)/2``.

Both implementations act along the last axis and first subtract a baseline
(the mean by default) which stands for the value of ``f`` outside the grid:
the PV integral of a constant is zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import PreconditionError
from .grid import ComplexSignal, TimeGrid, inner_product, is_single_sideband

__all__ = [
    "BeamsplitterParams",
    "KKRetrievalConfig",
    "hilbert_kk_direct",
    "hilbert_kk_fft",
    "min_phase_holds",
    "PhaseTrace",
    "kk_phase_from_intensity",
    "kk_field_reconstruct",
    "kk_quadratures",
]


@dataclass(frozen=True)
class BeamsplitterParams:
    r: float
    t: float

    def __post_init__(self):
        if not (0 <= self.r <= 1 and 0 <= self.t <= 1):
            raise PreconditionError("r and t must lie in [0, 1]")
        if abs(self.r ** 2 + self.t ** 2 - 1) > 1e-12:
            raise PreconditionError(f"r^2 + t^2 must equal 1 (got {self.r**2 + self.t**2!r})")

    @classmethod
    def from_reflection(cls, r: float) -> "BeamsplitterParams":
        return cls(float(r), float(np.sqrt(1 - r * r)))

    @classmethod
    def balanced(cls) -> "BeamsplitterParams":
        return cls(np.sqrt(0.5), np.sqrt(0.5))


EXPANSIONS = ("full_log", "first_order")


@dataclass(frozen=True)
class KKRetrievalConfig:
    """Retrieval settings.

    ``intensity_floor`` defaults to ``1e-12 * r^2 A^2`` when left as None.
    """

    lo_amplitude: float
    lo_phase: float = 0.0
    expansion: str = "full_log"
    intensity_floor: float | None = None

    def __post_init__(self):
        if not self.lo_amplitude > 0:
            raise PreconditionError("lo_amplitude must be positive")
        if self.expansion not in EXPANSIONS:
            raise PreconditionError(f"expansion must be one of {EXPANSIONS}")
        if self.intensity_floor is not None and not self.intensity_floor > 0:
            raise PreconditionError("intensity_floor must be positive")

    def floor(self, bs: BeamsplitterParams) -> float:
        if self.intensity_floor is not None:
            return self.intensity_floor
        return 1e-12 * (bs.r * self.lo_amplitude) ** 2


def _remove_baseline(f, baseline):
    f = np.asarray(f, dtype=float)
    if baseline is None:
        baseline = f.mean(axis=-1, keepdims=True)
    return f - baseline


def _direct_kernel(n: int) -> np.ndarray:
    # midpoint PV rule on the 2*dt sub-lattice centred on the singular sample:
    # only odd offsets m contribute, with weight 1/(pi m)
    m = np.arange(-(n - 1), n)
    k = np.zeros(2 * n - 1)
    odd = (m % 2) != 0
    k[odd] = 1.0 / (np.pi * m[odd])
    return k


def hilbert_kk_direct(f, baseline=None) -> np.ndarray:
    """Direct O(n^2) principal-value quadrature of the KK kernel.

    The singular sample is excluded and the remaining lattice is summed with
    the midpoint rule of step ``2 dt``; the ``dt`` factors cancel so the
    grid spacing is not needed.

    Parameters
    ----------
    f : array_like
        Real samples, 1-D or batched along the last axis.
    baseline : float or array_like, optional
        Level subtracted before summation (default: the mean).
    """
    g = _remove_baseline(f, baseline)
    n = g.shape[-1]
    kern = _direct_kernel(n)
    flat = g.reshape(-1, n)
    out = np.empty_like(flat)
    for i, row in enumerate(flat):
        out[i] = -np.convolve(row, kern)[n - 1:2 * n - 1]
    return out.reshape(g.shape)


def hilbert_kk_fft(f, baseline=None, pad_factor: int = 4) -> np.ndarray:
    """Spectral KK Hilbert transform with zero padding.

    After baseline removal the record is zero-padded to ``pad_factor`` times
    its length to suppress circular wrap-around, multiplied by
    ``-(i/2) sign(w)`` (zero at DC and Nyquist) and cropped back.
    """
    g = _remove_baseline(f, baseline)
    n = g.shape[-1]
    npad = pad_factor * n
    spec = np.fft.rfft(g, n=npad, axis=-1)
    # rfft uses exp(-i...), i.e. numpy frequency nu = -w; -(i/2)sign(w) -> +(i/2)
    mult = np.full(spec.shape[-1], 0.5j)
    mult[0] = 0.0
    if npad % 2 == 0:
        mult[-1] = 0.0
    return np.fft.irfft(spec * mult, n=npad, axis=-1)[..., :n]


def min_phase_holds(a: ComplexSignal, bs: BeamsplitterParams, A: float) -> tuple[bool, float]:
    """Sufficient minimum-phase test ``max|t a(t)| < r A``; returns (ok, margin)."""
    if A < 0:
        raise PreconditionError("A must be non-negative")
    margin = bs.r * A - bs.t * float(np.max(np.abs(a.samples)))
    return margin > 0, margin


class PhaseTrace(NamedTuple):
    phase: np.ndarray
    n_clamped: int


def kk_phase_from_intensity(I, cfg: KKRetrievalConfig, bs: BeamsplitterParams,
                            method: str = "fft") -> PhaseTrace:
    """Phase of ``r A + t a(t) e^{-i theta}`` from the detected intensity.

    ``full_log`` applies the KK kernel to ``ln max(I, floor)``; ``first_order``
    to the linearized ``(I - r^2 A^2) / (r^2 A^2)``.  The LO level is used as
    the out-of-grid baseline.  Works on batches along the last axis.
    """
    I = np.asarray(I, dtype=float)
    lo2 = (bs.r * cfg.lo_amplitude) ** 2
    hilbert = hilbert_kk_fft if method == "fft" else hilbert_kk_direct
    if cfg.expansion == "first_order":
        return PhaseTrace(hilbert((I - lo2) / lo2, baseline=0.0), 0)
    floor = cfg.floor(bs)
    clamped = I <= floor
    logI = np.log(np.where(clamped, floor, I))
    return PhaseTrace(hilbert(logI, baseline=np.log(lo2)), int(clamped.sum()))


def kk_field_reconstruct(I, phase, cfg: KKRetrievalConfig, bs: BeamsplitterParams,
                         grid: TimeGrid | None = None):
    """Input-port field ``a = e^{i theta} (e^{i phi} sqrt(I) - r A) / t``.

    With ``first_order`` the polar form is linearized consistently:
    ``e^{i phi} sqrt(I) ~ r A (1 + i phi + x/2)``.  Returns a
    :class:`ComplexSignal` when ``grid`` is given, else a complex array.
    """
    I = np.asarray(I, dtype=float)
    phase = np.asarray(phase, dtype=float)
    if bs.t == 0:
        raise PreconditionError("t = 0 blocks the signal port")
    rA = bs.r * cfg.lo_amplitude
    if cfg.expansion == "first_order":
        x = (I - rA ** 2) / rA ** 2
        field = rA * (1j * phase + 0.5 * x)
    else:
        field = np.exp(1j * phase) * np.sqrt(np.clip(I, 0.0, None)) - rA
    a = np.exp(1j * cfg.lo_phase) * field / bs.t
    if grid is None:
        return a
    return ComplexSignal(grid, a)


def kk_quadratures(a_rec, f: ComplexSignal, check_norm: bool = True) -> tuple:
    """Project onto an SSB mode: ``q = Re<f|a>``, ``p = Im<f|a>``.

    ``a_rec`` may be a :class:`ComplexSignal` or a batch of sample arrays
    on ``f``'s grid; batches return arrays.
    """
    if not is_single_sideband(f, 1e-3):
        raise PreconditionError("KK quadratures are only defined for single-sideband modes")
    if check_norm and abs(f.norm2() - 1) > 1e-6:
        raise PreconditionError("analysis mode must be normalized")
    if isinstance(a_rec, ComplexSignal):
        alpha = inner_product(f, a_rec)
        return alpha.real, alpha.imag
    alpha = np.asarray(a_rec) @ np.conj(f.samples) * f.grid.dt
    return alpha.real, alpha.imag
