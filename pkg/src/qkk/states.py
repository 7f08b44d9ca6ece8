"""
Quantum states analysed by the KK receiver.

* :class:`CoherentField` -- multimode coherent state fixed by its eigenvalue
  function ``psi(t)``, optionally decomposed as ``A + chi(t)``.
* :class:`FockVector` -- truncated number-basis coefficients of one mode.
* :class:`SinglePhotonState` -- normalized wavepacket
  ``psi = A e^{i theta} alpha_env(t) + chi(t)`` for the tomography protocol.
* :class:`CoherentMixture` -- finite convex combination of coherent fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gamma

from .dsp import BeamsplitterParams
from .errors import PhaseUndefinedError, PreconditionError
from .grid import ComplexSignal, TimeGrid, is_single_sideband, rms_duration, signal_from_csv

__all__ = [
    "CoherentField",
    "FockVector",
    "SinglePhotonState",
    "CoherentMixture",
    "make_ssb_gaussian_chi",
    "make_flat_top",
    "make_single_photon_state",
    "make_phase_eigenstate",
    "make_cat_state",
    "make_coherent_fock",
    "number_statistics_phase",
    "statistics_phase_angle",
    "interference_term",
    "direct_detection_mean",
    "total_phase",
    "state_from_config",
]


# -- continuous-mode states ------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoherentField:
    """Coherent state with ``a(t)|psi> = psi(t)|psi>``."""

    psi: ComplexSignal
    lo_amplitude: float | None = None
    chi: ComplexSignal | None = None

    def __post_init__(self):
        if (self.lo_amplitude is None) != (self.chi is None):
            raise PreconditionError("decomposition needs both lo_amplitude and chi")
        if self.chi is not None:
            A = self.lo_amplitude
            if not np.max(np.abs(self.chi.samples)) < A:
                raise PreconditionError("decomposition violates max|chi| < A")
            if not is_single_sideband(self.chi, 1e-3):
                raise PreconditionError("chi must be single-sideband (tol 1e-3)")
            expected = A + self.chi.samples
            if not np.allclose(self.psi.samples, expected, rtol=0, atol=1e-12 * max(A, 1.0)):
                raise PreconditionError("psi must equal A + chi")

    @classmethod
    def from_decomposition(cls, A: float, chi: ComplexSignal) -> "CoherentField":
        return cls(ComplexSignal(chi.grid, A + chi.samples), float(A), chi)

    @classmethod
    def in_mode(cls, alpha: complex, g: ComplexSignal) -> "CoherentField":
        """Coherent state ``|alpha_g>`` in the normalized mode ``g``."""
        return cls(g.scaled(alpha))

    @property
    def grid(self) -> TimeGrid:
        return self.psi.grid

    def mean_photon_number(self) -> float:
        return self.psi.norm2()


@dataclass(frozen=True, eq=False)
class CoherentMixture:
    """``rho = sum_i p_i |psi_i><psi_i|``."""

    weights: tuple
    components: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.components) or len(w) == 0:
            raise PreconditionError("need one weight per component")
        if np.any(w <= 0) or np.any(w > 1):
            raise PreconditionError("weights must lie in (0, 1]")
        if abs(w.sum() - 1) > 1e-12:
            raise PreconditionError("weights must sum to 1")
        grids = {c.grid for c in self.components}
        if len(grids) != 1:
            raise PreconditionError("all components must share a grid")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def pure(cls, state: CoherentField) -> "CoherentMixture":
        return cls((1.0,), (state,))

    @property
    def grid(self) -> TimeGrid:
        return self.components[0].grid


def make_ssb_gaussian_chi(grid: TimeGrid, center_freq: float, spectral_width: float,
                          peak_amplitude: float, t_center: float | None = None) -> ComplexSignal:
    """Envelope with a Gaussian spectrum centred at ``+center_freq``.

    ``chi(t) = peak * exp(-(sw (t - tc))^2 / 2) * exp(-i w0 (t - tc))``.
    """
    if center_freq < 4 * spectral_width:
        raise PreconditionError("center_freq < 4*spectral_width: chi would not be single-sideband")
    if spectral_width < 10 * grid.domega:
        raise PreconditionError("spectral_width must be at least 10 frequency bins")
    if t_center is None:
        t_center = grid.t[grid.n // 2]
    u = grid.t - t_center
    chi = peak_amplitude * np.exp(-0.5 * (spectral_width * u) ** 2 - 1j * center_freq * u)
    return ComplexSignal(grid, chi)


_FLAT_TOP_ORDER = 8


def make_flat_top(grid: TimeGrid, duration: float, t_center: float | None = None) -> ComplexSignal:
    """Super-Gaussian (order 8) envelope of unit peak and given rms duration."""
    p = 2 * _FLAT_TOP_ORDER  # exponent of |env|^2
    # sqrt(12)*rms of exp(-(t/w)^p) is sqrt(12 G(3/p)/G(1/p)) * w
    w = duration / math.sqrt(12 * gamma(3 / p) / gamma(1 / p))
    if t_center is None:
        t_center = grid.t[grid.n // 2]
    u = (grid.t - t_center) / w
    return ComplexSignal(grid, np.exp(-0.5 * u ** p))


@dataclass(frozen=True, eq=False)
class SinglePhotonState:
    """Single-photon wavepacket ``psi = A e^{i theta} alpha_env + chi``.

    ``lo_amplitude`` and ``chi`` are stored after normalization of ``psi``.
    """

    psi: ComplexSignal
    lo_amplitude: float
    envelope: ComplexSignal
    chi: ComplexSignal
    lo_phase: float = 0.0

    def __post_init__(self):
        if abs(self.psi.norm2() - 1) > 1e-8:
            raise PreconditionError("single-photon wavefunction must be normalized")
        d_env, d_chi = rms_duration(self.envelope), rms_duration(self.chi)
        if d_env < 20 * d_chi * (1 - 1e-6):
            raise PreconditionError("envelope must last at least 20x the chi duration")
        lo_peak = self.lo_amplitude * np.max(np.abs(self.envelope.samples))
        if lo_peak < 3 * np.max(np.abs(self.chi.samples)):
            raise PreconditionError("LO component must be at least 3x max|chi|")

    @property
    def grid(self) -> TimeGrid:
        return self.psi.grid

    @property
    def lo_component(self) -> ComplexSignal:
        return self.envelope.scaled(self.lo_amplitude * np.exp(1j * self.lo_phase))

    def with_global_phase(self, phase: float) -> "SinglePhotonState":
        u = np.exp(1j * phase)
        return SinglePhotonState(self.psi.scaled(u), self.lo_amplitude, self.envelope,
                                 self.chi.scaled(u), self.lo_phase + phase)


def make_single_photon_state(grid: TimeGrid, lo_ratio: float = 5.0,
                             chi_duration: float | None = None,
                             envelope_duration: float | None = None,
                             center_ratio: float = 6.0, lo_phase: float = 0.0
                             ) -> SinglePhotonState:
    """Wavepacket with a Gaussian-spectrum ``chi`` riding on a flat-top LO.

    Defaults: ``chi`` lasts ``T/40``, the envelope ``T/2``, the carrier sits
    at ``center_ratio`` spectral widths and the LO peak is ``lo_ratio``
    times ``max|chi|``.  Durations are rms-based (see ``rms_duration``).
    """
    T = grid.duration
    chi_duration = T / 40 if chi_duration is None else chi_duration
    envelope_duration = T / 2 if envelope_duration is None else envelope_duration
    # |chi|^2 is Gaussian with rms 1/(sqrt2 sw) -> duration sqrt(6)/sw
    sw = math.sqrt(6) / chi_duration
    chi = make_ssb_gaussian_chi(grid, center_ratio * sw, sw, 1.0)
    env = make_flat_top(grid, envelope_duration)
    A = lo_ratio
    psi = A * np.exp(1j * lo_phase) * env.samples + chi.samples
    norm = math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dt)
    return SinglePhotonState(ComplexSignal(grid, psi / norm), A / norm, env,
                             chi.scaled(1 / norm), lo_phase)


# -- single-mode number-basis states ---------------------------------------

@dataclass(frozen=True, eq=False)
class FockVector:
    """Truncated coefficients ``c_0 .. c_N`` of ``sum_n c_n |n>_f``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 1 or len(c) < 2:
            raise PreconditionError("need at least c_0 and c_1")
        if abs(np.sum(np.abs(c) ** 2) - 1) > 1e-10:
            raise PreconditionError("Fock coefficients must be normalized")
        if abs(c[-1]) ** 2 >= 1e-8:
            raise PreconditionError("truncation too tight: |c_N|^2 >= 1e-8")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return len(self.coeffs) - 1

    def mean_photon_number(self) -> float:
        return float(np.sum(np.arange(self.N + 1) * np.abs(self.coeffs) ** 2))

    @classmethod
    def from_unnormalized(cls, c) -> "FockVector":
        c = np.asarray(c, dtype=complex)
        return cls(c / np.linalg.norm(c))


def make_phase_eigenstate(z: complex, N: int | None = None) -> FockVector:
    """Normalizable eigenstate of the lowering phase operator.

    ``c_n = sqrt(1 - |z|^2) z^n``; by default ``N`` is the smallest order
    with ``|z|^(2N) < 1e-10``.
    """
    r = abs(z)
    if r >= 1:
        raise PreconditionError("phase eigenstates need |z| < 1")
    if N is None:
        N = 1 if r == 0 else max(1, math.ceil(math.log(1e-10) / (2 * math.log(r))) + 1)
    if r > 0 and r ** (2 * N) >= 1e-10:
        raise PreconditionError(f"N={N} too small for |z|={r}")
    n = np.arange(N + 1)
    return FockVector(math.sqrt(1 - r * r) * complex(z) ** n)


def _coherent_amplitudes(alpha: complex, N: int) -> np.ndarray:
    c = np.empty(N + 1, dtype=complex)
    c[0] = 1.0
    for n in range(1, N + 1):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    return c


def make_cat_state(alpha: complex, N: int | None = None) -> FockVector:
    """Even cat ``c_n ~ alpha^n / sqrt(n!) (1 + (-1)^n)``, normalized."""
    a = abs(alpha)
    need = math.ceil(a * a + 6 * a + 10)
    if N is None:
        N = need
    elif N < need:
        raise PreconditionError(f"cat state with |alpha|={a} needs N >= {need}")
    c = _coherent_amplitudes(alpha, N)
    c[1::2] = 0.0
    return FockVector.from_unnormalized(c)


def make_coherent_fock(alpha: complex, N: int | None = None) -> FockVector:
    """Single-mode coherent state in the number basis."""
    a = abs(alpha)
    if N is None:
        N = math.ceil(a * a + 8 * a + 12)
    return FockVector(math.exp(-a * a / 2) * _coherent_amplitudes(alpha, N))


def number_statistics_phase(v: FockVector) -> complex:
    """``S = sum_n c_n conj(c_{n+1}) sqrt(n+1)``, i.e. ``conj(<a>)``."""
    c = v.coeffs
    n = np.arange(v.N)
    return complex(np.sum(c[:-1] * np.conj(c[1:]) * np.sqrt(n + 1)))


def statistics_phase_angle(v: FockVector) -> float:
    """``arg S``; raises :class:`PhaseUndefinedError` when ``|S| < 1e-14``.

    Even cat states land here: every product ``c_n c_{n+1}`` vanishes.
    """
    S = number_statistics_phase(v)
    if abs(S) < 1e-14:
        raise PhaseUndefinedError("number-statistics sum vanishes; phase undefined")
    return float(np.angle(S))


def _sample_at(sig: ComplexSignal | None, time: float) -> complex:
    if sig is None:
        return 1.0 + 0j
    return complex(sig.samples[sig.grid.index_of(time)])


def interference_term(v: FockVector, A: complex, f: ComplexSignal, g: ComplexSignal | None,
                      bs: BeamsplitterParams, time: float) -> complex:
    """Cross term of ``<c^dag(t) c(t)>`` for ``|psi>_f`` mixed with ``|A_g>``.

    With ``c = t a + r b`` the term is ``r t f(t) conj(g(t)) conj(A) <a>``
    with ``<a> = conj(S)``; the detected mean adds twice its real part.
    ``g=None`` stands for a monochromatic LO (``g = 1``).
    """
    S = number_statistics_phase(v)
    return bs.r * bs.t * _sample_at(f, time) * np.conj(_sample_at(g, time)) * np.conj(A) * np.conj(S)


def direct_detection_mean(v: FockVector, A: complex, f: ComplexSignal, g: ComplexSignal | None,
                          bs: BeamsplitterParams, time: float) -> float:
    fv, gv = _sample_at(f, time), _sample_at(g, time)
    return float(bs.t ** 2 * abs(fv) ** 2 * v.mean_photon_number()
                 + bs.r ** 2 * abs(A) ** 2 * abs(gv) ** 2
                 + 2 * np.real(interference_term(v, A, f, g, bs, time)))


def total_phase(v: FockVector, A: complex, f: ComplexSignal, time: float) -> float:
    """Measured phase ``zeta = theta - phi + arg f(t)`` for a flat LO.

    ``phi = -arg S`` is the phase of the number statistics (``arg z`` for a
    phase eigenstate), so ``zeta = arg(A f(t) S)``.
    """
    S = number_statistics_phase(v)
    if abs(S) < 1e-14:
        raise PhaseUndefinedError("number-statistics sum vanishes; phase undefined")
    return float(np.angle(A * _sample_at(f, time) * S))


# -- JSON configuration ----------------------------------------------------

def _cplx(x) -> complex:
    if isinstance(x, (list, tuple)):
        return complex(float(x[0]), float(x[1]))
    return complex(x)


def _mode_from_config(spec: Mapping, grid: TimeGrid, base: Path) -> ComplexSignal:
    kind = spec.get("kind", "ssb_gaussian")
    if kind == "ssb_gaussian":
        sw = float(spec["spectral_width"])
        w0 = float(spec.get("center_freq", 6 * sw))
        return make_ssb_gaussian_chi(grid, w0, sw, 1.0, spec.get("t_center")).normalized()
    if kind == "csv":
        sig = signal_from_csv(base / spec["path"])
        if sig.grid.n != grid.n or not np.isclose(sig.grid.dt, grid.dt):
            raise PreconditionError("CSV mode does not match the configured grid")
        return ComplexSignal(grid, sig.samples)
    raise PreconditionError(f"unknown mode kind {kind!r}")


def state_from_config(spec: Mapping, grid: TimeGrid | None = None, base_dir: str | Path = "."):
    """Build a state from a JSON-style mapping keyed by ``type``.

    ``coherent``: ``alpha`` + ``mode`` or ``lo_amplitude`` + ``chi`` (a mode
    spec scaled by ``chi_peak``); ``fock``: ``kind`` in
    {phase_eigenstate, cat, coherent, coeffs}; ``single_photon``: keyword
    arguments of :func:`make_single_photon_state`; ``mixture``: list of
    ``{weight, state}``.
    """
    base = Path(base_dir)
    typ = spec.get("type")
    if typ == "coherent":
        if "lo_amplitude" in spec:
            chi_spec = spec["chi"]
            if chi_spec.get("kind", "ssb_gaussian") == "ssb_gaussian":
                sw = float(chi_spec["spectral_width"])
                chi = make_ssb_gaussian_chi(grid, float(chi_spec.get("center_freq", 6 * sw)), sw,
                                            float(chi_spec.get("peak_amplitude", 1.0)),
                                            chi_spec.get("t_center"))
            else:
                chi = _mode_from_config(chi_spec, grid, base)
            return CoherentField.from_decomposition(float(spec["lo_amplitude"]), chi)
        return CoherentField.in_mode(_cplx(spec.get("alpha", 0)),
                                     _mode_from_config(spec["mode"], grid, base))
    if typ == "fock":
        kind = spec.get("kind")
        N = spec.get("N")
        if kind == "phase_eigenstate":
            return make_phase_eigenstate(_cplx(spec["z"]), N)
        if kind == "cat":
            return make_cat_state(_cplx(spec["alpha"]), N)
        if kind == "coherent":
            return make_coherent_fock(_cplx(spec["alpha"]), N)
        if kind == "coeffs":
            return FockVector([_cplx(c) for c in spec["coeffs"]])
        raise PreconditionError(f"unknown fock kind {kind!r}")
    if typ == "single_photon":
        kw = {k: v for k, v in spec.items() if k != "type"}
        return make_single_photon_state(grid, **kw)
    if typ == "mixture":
        comps = spec["components"]
        return CoherentMixture(tuple(float(c["weight"]) for c in comps),
                               tuple(state_from_config(c["state"], grid, base) for c in comps))
    raise PreconditionError(f"unknown state type {typ!r}")
