"""Slow reference evaluations used to cross-check the fast paths."""

from __future__ import annotations

import numpy as np

from .dsp import BeamsplitterParams
from .states import FockVector, make_coherent_fock

__all__ = ["two_mode_intensity", "random_bandpass_signal"]


def _lowering(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def two_mode_intensity(v: FockVector, A: complex, f_val: complex, g_val: complex,
                       bs: BeamsplitterParams, lo_cutoff: int = 60) -> tuple[float, complex]:
    """``<c^dag c>`` and its cross term from explicit two-mode matrices.

    The signal mode holds ``v``; the LO mode holds a coherent state of
    amplitude ``A`` truncated at ``lo_cutoff``.  The output field at one
    instant is ``c = t f a + r g b``.  Returns ``(mean, r t f conj(g) <b^dag a>)``.
    """
    da, db = v.N + 1, lo_cutoff + 1
    lo = make_coherent_fock(A, lo_cutoff).coeffs
    psi = np.kron(v.coeffs, lo)
    a = np.kron(_lowering(da), np.eye(db))
    b = np.kron(np.eye(da), _lowering(db))
    c = bs.t * f_val * a + bs.r * g_val * b
    mean = np.vdot(psi, c.conj().T @ (c @ psi)).real
    cross = bs.r * bs.t * f_val * np.conj(g_val) * np.vdot(psi, b.conj().T @ (a @ psi))
    return float(mean), complex(cross)


def random_bandpass_signal(n: int, rng: np.random.Generator, n_tones: int = 4) -> np.ndarray:
    """Sum of Gaussian-windowed tones, clear of DC and Nyquist, centred on the record."""
    t = np.arange(n) - n / 2
    out = np.zeros(n)
    for _ in range(n_tones):
        w = rng.uniform(0.1, 0.6) * np.pi
        width = rng.uniform(n / 40, n / 16)
        shift = rng.uniform(-n / 16, n / 16)
        out += rng.normal() * np.exp(-0.5 * ((t - shift) / width) ** 2) * np.cos(w * t + rng.uniform(0, 2 * np.pi))
    return out
