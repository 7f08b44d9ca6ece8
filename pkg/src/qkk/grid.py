"""
Uniform time/frequency grids and the mode algebra built on them.

Conventions
-----------
Field envelopes are sampled on a uniform grid ``t_k = t_start + k*dt`` and
are dimensionless with ``|s(t)|**2`` read as a photon flux (photons/s).

The Fourier transform uses the *positive* exponent::

    F(a)(w) = int a(t) exp(+i w t) dt
    a(t)    = int F(a)(w) exp(-i w t) dw / (2 pi)

so ``exp(-i w0 t)`` with ``w0 > 0`` lives at ``+w0``, and a single-sideband
(SSB) envelope is one whose spectrum vanishes for ``w < 0``.  Spectra are
stored in ascending frequency order on ``[-pi/dt, pi/dt)``.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import GridMismatchError, PreconditionError

__all__ = [
    "TimeGrid",
    "ComplexSignal",
    "SpectralSignal",
    "forward_transform",
    "inverse_transform",
    "inner_product",
    "is_single_sideband",
    "negative_frequency_fraction",
    "conjugate_mode",
    "encode_symbols",
    "decode_symbols",
    "make_rrc_pulse",
    "rms_duration",
    "signal_to_csv",
    "signal_from_csv",
    "signal_to_json",
    "signal_from_json",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid.

    Parameters
    ----------
    t_start : float
        Time of the first sample (s).
    dt : float
        Sample spacing (s).
    n_samples : int
        Number of samples; powers of two keep the transforms fast.
    """

    t_start: float
    dt: float
    n_samples: int

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise PreconditionError(f"dt must be positive and finite, got {self.dt}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise PreconditionError(f"n_samples must be an integer >= 2, got {self.n_samples}")
        object.__setattr__(self, "n_samples", int(self.n_samples))
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def centered(cls, duration: float, n_samples: int) -> "TimeGrid":
        """Grid of total length ``duration`` whose middle sample sits at t=0."""
        dt = duration / n_samples
        return cls(-(n_samples // 2) * dt, dt, n_samples)

    @property
    def n(self) -> int:
        return self.n_samples

    @property
    def duration(self) -> float:
        return self.n_samples * self.dt

    @property
    def t(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_samples)

    @property
    def domega(self) -> float:
        return 2 * np.pi / self.duration

    @property
    def omega(self) -> np.ndarray:
        """Ascending angular frequencies on ``[-pi/dt, pi/dt)``."""
        return 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(self.n_samples, self.dt))

    def index_of(self, time: float) -> int:
        """Index of the sample at ``time``; it must lie on the grid."""
        k = (time - self.t_start) / self.dt
        i = int(round(k))
        if abs(k - i) > 1e-6 or not 0 <= i < self.n_samples:
            raise PreconditionError(f"time {time} is not a grid point")
        return i

    def to_dict(self) -> dict:
        return {"t_start": self.t_start, "dt": self.dt, "n": self.n_samples}

    @classmethod
    def from_dict(cls, d: Mapping) -> "TimeGrid":
        return cls(float(d["t_start"]), float(d["dt"]), int(d["n"]))


def _check_finite(samples: np.ndarray, what: str):
    if not np.all(np.isfinite(samples)):
        raise PreconditionError(f"{what} contains NaN or Inf")


@dataclass(frozen=True, eq=False)
class ComplexSignal:
    """Complex envelope sampled on a :class:`TimeGrid`.

    ``meta`` carries diagnostic flags (e.g. from :func:`encode_symbols`)
    and takes no part in the arithmetic.
    """

    grid: TimeGrid
    samples: np.ndarray
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex)
        if s.shape != (self.grid.n_samples,):
            raise PreconditionError(
                f"expected {self.grid.n_samples} samples, got shape {s.shape}")
        _check_finite(s, "signal")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dt)

    def normalized(self) -> "ComplexSignal":
        nrm = np.sqrt(self.norm2())
        if nrm == 0:
            raise PreconditionError("cannot normalize a zero signal")
        return ComplexSignal(self.grid, self.samples / nrm)

    def scaled(self, factor: complex) -> "ComplexSignal":
        return ComplexSignal(self.grid, self.samples * factor)

    def __add__(self, other: "ComplexSignal") -> "ComplexSignal":
        _same_grid(self, other)
        return ComplexSignal(self.grid, self.samples + other.samples)

    def __sub__(self, other: "ComplexSignal") -> "ComplexSignal":
        _same_grid(self, other)
        return ComplexSignal(self.grid, self.samples - other.samples)

    def __mul__(self, factor: complex) -> "ComplexSignal":
        return self.scaled(factor)

    __rmul__ = __mul__

    def __len__(self) -> int:
        return self.grid.n_samples


@dataclass(frozen=True, eq=False)
class SpectralSignal:
    """Spectral amplitudes on the conjugate grid, ascending in frequency."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex)
        if s.shape != (self.grid.n_samples,):
            raise PreconditionError("spectral length does not match the grid")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def omega(self) -> np.ndarray:
        return self.grid.omega


def _same_grid(f, g):
    if f.grid != g.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {g.grid}")


def forward_transform(sig: ComplexSignal) -> SpectralSignal:
    """Riemann-sum approximation of ``int a(t) exp(+i w t) dt``."""
    g = sig.grid
    w = 2 * np.pi * np.fft.fftfreq(g.n, g.dt)
    # ifft carries the +i exponent; undo its 1/n and add the t_start phase
    spec = np.fft.ifft(sig.samples) * g.n * g.dt * np.exp(1j * w * g.t_start)
    return SpectralSignal(g, np.fft.fftshift(spec))


def inverse_transform(spec: SpectralSignal) -> ComplexSignal:
    """Riemann-sum approximation of ``int F(w) exp(-i w t) dw / 2pi``."""
    g = spec.grid
    w = 2 * np.pi * np.fft.fftfreq(g.n, g.dt)
    s = np.fft.fft(np.fft.ifftshift(spec.samples) * np.exp(-1j * w * g.t_start))
    return ComplexSignal(g, s / (g.n * g.dt))


def inner_product(f: ComplexSignal, g: ComplexSignal) -> complex:
    """``<f|g> = int conj(f) g dt``."""
    _same_grid(f, g)
    return complex(np.vdot(f.samples, g.samples) * f.grid.dt)


def negative_frequency_fraction(sig: ComplexSignal) -> float:
    """Fraction of spectral energy at ``w < 0`` (0 for a zero signal)."""
    spec = forward_transform(sig)
    power = np.abs(spec.samples) ** 2
    total = power.sum()
    if total == 0:
        return 0.0
    return float(power[spec.omega < 0].sum() / total)


def is_single_sideband(sig: ComplexSignal, tol: float = 1e-3) -> bool:
    if not 0 < tol < 1:
        raise PreconditionError("tol must lie in (0, 1)")
    return negative_frequency_fraction(sig) <= tol


def conjugate_mode(f: ComplexSignal) -> ComplexSignal:
    """The image mode ``f*``; its spectrum is ``conj(F(f)(-w))``."""
    return ComplexSignal(f.grid, np.conj(f.samples))


def _shift_steps(grid: TimeGrid, symbol_period: float) -> int:
    steps = symbol_period / grid.dt
    m = int(round(steps))
    if m < 1 or abs(steps - m) > 1e-9 * max(1.0, steps):
        raise PreconditionError("symbol_period must be a positive multiple of dt")
    return m


def _shifted_pulses(pulse: ComplexSignal, symbol_period: float, n_symbols: int) -> np.ndarray:
    m = _shift_steps(pulse.grid, symbol_period)
    if m * n_symbols > pulse.grid.n:
        raise PreconditionError("shifted pulses do not fit in the grid")
    # circular shifts: the transform grid is periodic anyway
    return np.stack([np.roll(pulse.samples, k * m) for k in range(n_symbols)])


def encode_symbols(symbols: Sequence[complex], pulse: ComplexSignal,
                   symbol_period: float) -> ComplexSignal:
    """Superpose ``sum_k alpha_k g(t - k T_S)``.

    Pulses are shifted circularly by whole samples.  If the shifted pulses
    are not orthonormal to 1e-8 a warning is issued and
    ``meta["nonorthogonal"]`` is set on the result.
    """
    symbols = np.asarray(symbols, dtype=complex)
    basis = _shifted_pulses(pulse, symbol_period, len(symbols))
    gram = basis.conj() @ basis.T * pulse.grid.dt
    off = np.max(np.abs(gram - np.eye(len(symbols)))) if len(symbols) else 0.0
    meta = {"max_gram_error": float(off), "nonorthogonal": bool(off > 1e-8)}
    if meta["nonorthogonal"]:
        warnings.warn(f"shifted pulses are not orthonormal (max Gram error {off:.2e})",
                      stacklevel=2)
    return ComplexSignal(pulse.grid, symbols @ basis, meta=meta)


def decode_symbols(a: ComplexSignal, pulse: ComplexSignal, symbol_period: float,
                   n_symbols: int) -> np.ndarray:
    """Matched filter ``alpha_l = <g_l|a>``."""
    _same_grid(a, pulse)
    basis = _shifted_pulses(pulse, symbol_period, n_symbols)
    return basis.conj() @ a.samples * a.grid.dt


def make_rrc_pulse(grid: TimeGrid, symbol_period: float, rolloff: float = 0.25,
                   t_center: float | None = None) -> ComplexSignal:
    """Unit-energy root-raised-cosine pulse designed on the grid's spectrum.

    Because the folded power spectrum is exactly flat, circular shifts by
    multiples of ``symbol_period`` are orthonormal to machine precision
    when ``n_samples`` is a multiple of the symbol length.
    """
    if not 0 <= rolloff <= 1:
        raise PreconditionError("rolloff must lie in [0, 1]")
    m = _shift_steps(grid, symbol_period)
    if grid.n % m:
        raise PreconditionError("n_samples must be a multiple of the symbol length")
    f = np.abs(np.fft.fftfreq(grid.n, grid.dt)) * symbol_period
    lo, hi = (1 - rolloff) / 2, (1 + rolloff) / 2
    rc = np.where(f <= lo, 1.0, 0.0)
    if rolloff > 0:
        band = (f > lo) & (f < hi)
        rc[band] = 0.5 * (1 + np.cos(np.pi / rolloff * (f[band] - lo)))
    if t_center is None:
        t_center = grid.t[grid.n // 2]
    shift = int(round((t_center - grid.t_start) / grid.dt))
    g = np.roll(np.fft.ifft(np.sqrt(rc)).real, shift)
    return ComplexSignal(grid, g).normalized()


def rms_duration(sig: ComplexSignal) -> float:
    """``sqrt(12)`` times the RMS width of ``|s|**2`` (full width of a box)."""
    w = np.abs(sig.samples) ** 2
    total = w.sum()
    if total == 0:
        return 0.0
    t = sig.grid.t
    mean = np.sum(t * w) / total
    var = np.sum((t - mean) ** 2 * w) / total
    return float(np.sqrt(12 * var))


# -- serialization ---------------------------------------------------------

def signal_to_csv(sig: ComplexSignal) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "re", "im"])
    for t, s in zip(sig.grid.t, sig.samples):
        writer.writerow([repr(float(t)), repr(float(s.real)), repr(float(s.imag))])
    return buf.getvalue()


def signal_from_csv(text_or_path: str | Path) -> ComplexSignal:
    """Read a ``t,re,im`` table; the grid is inferred from the time column."""
    p = Path(text_or_path) if not str(text_or_path).lstrip().startswith("t,") else None
    text = p.read_text() if p is not None else str(text_or_path)
    rows = list(csv.DictReader(io.StringIO(text)))
    t = np.array([float(r["t"]) for r in rows])
    s = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    if len(t) < 2:
        raise PreconditionError("CSV signal needs at least two rows")
    dt = (t[-1] - t[0]) / (len(t) - 1)
    if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=0):
        raise PreconditionError("CSV time column is not uniform")
    return ComplexSignal(TimeGrid(t[0], dt, len(t)), s)


def signal_to_json(sig: ComplexSignal) -> str:
    doc = {"grid": sig.grid.to_dict(),
           "samples": [[float(s.real), float(s.imag)] for s in sig.samples]}
    return json.dumps(doc)


def signal_from_json(text: str) -> ComplexSignal:
    doc = json.loads(text)
    grid = TimeGrid.from_dict(doc["grid"])
    arr = np.asarray(doc["samples"], dtype=float)
    return ComplexSignal(grid, arr[:, 0] + 1j * arr[:, 1])
