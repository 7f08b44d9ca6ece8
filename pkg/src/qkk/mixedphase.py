"""
Series evaluation of the averaged KK phase for coherent states and their
discrete mixtures.

The averaged log-intensity ``E[ln(I / A^2)]`` is expanded as
``ln(1 + x)`` with ``x = I/A^2 - 1``; powers of ``I`` are then replaced by
photocount moments ``E[I^k] = sum_l S(k, l) |psi|^(2l) dt^(l-k)`` where
``S`` are Stirling numbers of the second kind.  The phase is the KK Hilbert
transform of that average.  Everything is linear in the mixture weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .dsp import hilbert_kk_direct
from .errors import ConvergenceError, PreconditionError
from .grid import TimeGrid
from .states import CoherentField, CoherentMixture

__all__ = [
    "SeriesConfig",
    "stirling2",
    "series_coefficients",
    "intensity_moments_mixture",
    "mean_log_intensity",
    "kk_phase_series",
]


@dataclass(frozen=True)
class SeriesConfig:
    n_max: int = 8
    convergence_tol: float = 1e-6

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise PreconditionError("n_max must be an integer >= 1")
        if not self.convergence_tol > 0:
            raise PreconditionError("convergence_tol must be positive")


@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind as an exact Python integer."""
    if n < 0 or k < 0:
        raise PreconditionError("stirling2 needs n, k >= 0")
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


@lru_cache(maxsize=None)
def series_coefficients(n_max: int) -> tuple:
    """``((k, l, c_kl), ...)`` with ``c_kl = sum_{n=k}^{n_max} (-1)^(k+1)/n C(n,k) S(k,l)``.

    The outer index is summed exactly in rational arithmetic.
    """
    out = []
    for k in range(1, n_max + 1):
        head = sum(Fraction(math.comb(n, k), n) for n in range(k, n_max + 1))
        if k % 2 == 0:
            head = -head
        for l in range(1, k + 1):
            out.append((k, l, float(head * stirling2(k, l))))
    return tuple(out)


def _neumaier(terms: np.ndarray) -> np.ndarray:
    """Compensated sum along axis 0."""
    s = np.zeros(terms.shape[1:])
    comp = np.zeros_like(s)
    for x in terms:
        t = s + x
        big = np.abs(s) >= np.abs(x)
        comp += np.where(big, (s - t) + x, (x - t) + s)
        s = t
    return s + comp


def _components(m) -> tuple:
    if isinstance(m, CoherentField):
        return (1.0,), (m,)
    if isinstance(m, CoherentMixture):
        return m.weights, m.components
    raise PreconditionError("expected a CoherentField or CoherentMixture")


def intensity_moments_mixture(m, time: float, dt: float = 1.0) -> tuple[float, float]:
    """``(E[I], E[I^2])`` at one instant; ``dt`` sets the count normalization.

    With ``dt = 1``: ``m1 = sum p |psi|^2``, ``m2 = sum p (|psi|^4 + |psi|^2)``.
    """
    weights, comps = _components(m)
    m1 = m2 = 0.0
    for p, c in zip(weights, comps):
        u = abs(c.psi.samples[c.grid.index_of(time)]) ** 2
        m1 += p * u
        m2 += p * (u * u + u / dt)
    return m1, m2


def _convergence_ratio(flux: np.ndarray, A: float) -> float:
    return float(np.max(np.abs(flux / A ** 2 - 1)))


def mean_log_intensity(psi: np.ndarray, A: float, cfg: SeriesConfig, dt: float) -> np.ndarray:
    """Truncated series for ``E[ln(I/A^2)]`` up to an additive constant."""
    flux = np.abs(np.asarray(psi)) ** 2
    rho = _convergence_ratio(flux, A)
    if rho >= 1:
        raise ConvergenceError(f"convergence ratio {rho:.3g} >= 1: LO too weak for the series")
    N = cfg.n_max
    tail = rho ** (N + 1) / ((N + 1) * (1 - rho))
    if tail >= cfg.convergence_tol:
        raise ConvergenceError(
            f"tail bound {tail:.3g} >= tolerance {cfg.convergence_tol:.3g} at n_max={N}")
    lam_lo = A * A * dt
    y = flux * dt / lam_lo
    terms = np.array([c * y ** l * lam_lo ** (l - k) for k, l, c in series_coefficients(N)])
    order = np.argsort(-np.max(np.abs(terms), axis=1), kind="stable")
    return _neumaier(terms[order])


def kk_phase_series(m, A: float, cfg: SeriesConfig | None = None,
                    grid: TimeGrid | None = None) -> np.ndarray:
    """Averaged KK phase of a coherent state or a discrete coherent mixture.

    Each component's log-intensity series is weighted and summed, then the
    KK Hilbert kernel is applied once with the average of the two end
    values as the out-of-grid level.
    """
    cfg = cfg or SeriesConfig()
    if not A > 0:
        raise PreconditionError("A must be positive")
    weights, comps = _components(m)
    grid = grid or comps[0].grid
    if comps[0].grid != grid:
        raise PreconditionError("state lives on a different grid")
    g = np.zeros(grid.n)
    for p, c in zip(weights, comps):
        g += p * mean_log_intensity(c.psi.samples, A, cfg, grid.dt)
    return hilbert_kk_direct(g, baseline=0.5 * (g[0] + g[-1]))
