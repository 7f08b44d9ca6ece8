"""
``qkk`` command-line front end.

    qkk run CONFIG.json [--seed N] [--out DIR] [--threads K]
    qkk describe NAME
    qkk --version

Configs are JSON objects with a required ``version`` (currently 1) and an
``experiment`` name.  Outputs are written atomically and stamped with the
SHA-256 of the effective config; a one-line JSON summary goes to stdout.
Exit codes: 0 success, 2 invalid config, 3 precondition failure at run time.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .detectors import (LocalOscillator, calibrate, dhd_monte_carlo, hd_analytic, hd_monte_carlo,
                        kk_phase_samples, kk_receive)
from .dsp import (BeamsplitterParams, KKRetrievalConfig, hilbert_kk_direct, hilbert_kk_fft,
                  kk_phase_from_intensity)
from .errors import PreconditionError
from .grid import ComplexSignal, TimeGrid
from .mixedphase import SeriesConfig, kk_phase_series
from .reference import random_bandpass_signal, two_mode_intensity
from .states import (CoherentField, CoherentMixture, FockVector, make_phase_eigenstate,
                     make_ssb_gaussian_chi, interference_term, total_phase)
from .tomography import (default_tomography_state, default_window, estimate_density,
                         fidelity_study, reconstruct_wavefunction, sample_clicks)

CONFIG_VERSION = 1


class ConfigError(Exception):
    """Invalid or incomplete experiment configuration."""


# -- config helpers ----------------------------------------------------------

def _get(cfg: dict, key: str, kind=None, default=...):
    if key not in cfg:
        if default is ...:
            raise ConfigError(f"missing field {key!r}")
        return default
    val = cfg[key]
    if kind is not None:
        ok = isinstance(val, kind) and not (kind in (int, (int, float)) and isinstance(val, bool))
        if not ok:
            raise ConfigError(f"field {key!r} has the wrong type")
    return val


def _num(cfg, key, default=...):
    return _get(cfg, key, (int, float), default)


def _int(cfg, key, default=...):
    return _get(cfg, key, int, default)


def _complex(cfg, key, default=...):
    val = _get(cfg, key, None, default)
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return complex(val)
    if isinstance(val, list) and len(val) == 2 and all(isinstance(x, (int, float)) for x in val):
        return complex(val[0], val[1])
    raise ConfigError(f"field {key!r} must be a number or [re, im]")


def _grid(cfg) -> TimeGrid:
    g = _get(cfg, "grid", dict)
    try:
        if "duration" in g:
            return TimeGrid.centered(float(_num(g, "duration")), int(_int(g, "n")))
        return TimeGrid(float(_num(g, "t_start", 0.0)), float(_num(g, "dt")), int(_int(g, "n")))
    except PreconditionError as exc:
        raise ConfigError(f"field 'grid': {exc}") from exc


def _mode(cfg, grid: TimeGrid, key="mode") -> ComplexSignal:
    m = _get(cfg, key, dict)
    sw = _num(m, "spectral_width_bins") * grid.domega
    ratio = _num(m, "center_ratio", 6.0)
    return make_ssb_gaussian_chi(grid, ratio * sw, sw, 1.0).normalized()


def _subseed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(k,)).generate_state(1)[0])


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# -- output helpers ----------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _json_text(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class Outputs:
    def __init__(self, out_dir: Path, stamp: str):
        self.dir = out_dir
        self.stamp = stamp
        self.files: dict[str, str] = {}

    def json(self, name: str, obj: dict):
        self.files[name] = _json_text({"config_hash": self.stamp, **obj})

    def csv(self, name: str, header, rows):
        self.files[name] = _csv_text(header, rows)

    def commit(self) -> list[str]:
        for name, text in self.files.items():
            _atomic_write(self.dir / name, text)
        return [str(self.dir / n) for n in self.files]


# -- experiments ---------------------------------------------------------------

def _lo_for_counts(f: ComplexSignal, counts: float, phase: float = 0.0) -> LocalOscillator:
    peak = float(np.max(np.abs(f.samples)) ** 2 * f.grid.dt)
    return LocalOscillator(math.sqrt(counts / peak), phase, f)


def _hd_calibration(f, lo, shots, seed, threads):
    vac = hd_monte_carlo(CoherentField.in_mode(0, f), lo, shots=shots, rng_seed=seed,
                         threads=threads)
    return calibrate(vac), vac


def _shots_rows(stats):
    p = stats.p_samples if stats.p_samples is not None else np.full(len(stats.q_samples), np.nan)
    return ([i, float(q), float(pp)] for i, (q, pp) in enumerate(zip(stats.q_samples, p)))


def run_hd(cfg, seed, threads, out):
    grid = _grid(cfg)
    f = _mode(cfg, grid)
    alpha = _complex(cfg, "alpha")
    lo = _lo_for_counts(f, _num(cfg, "lo_counts_per_bin", 2000.0), _num(cfg, "lo_phase", 0.0))
    shots = _int(cfg, "shots")
    cal, vac = _hd_calibration(f, lo, _int(cfg, "calibration_shots", 10_000), _subseed(seed, 0),
                               threads)
    state = CoherentField.in_mode(alpha, f)
    sig = cal.apply_hd(hd_monte_carlo(state, lo, shots=shots, rng_seed=_subseed(seed, 1),
                                      threads=threads))
    exact = hd_analytic(state, lo)
    exact_cal = calibrate(hd_analytic(CoherentField.in_mode(0, f), lo)).apply_hd(exact)
    out.json("hd.json", {"experiment": "hd", "seed": seed,
                         "calibration": {"reference_variance": cal.reference_variance,
                                         "reference_shots": cal.reference_shots},
                         "vacuum": cal.apply_hd(vac).to_dict(), "signal": sig.to_dict(),
                         "analytic": exact_cal.to_dict()})
    out.csv("hd_shots.csv", ["shot", "q", "p"], _shots_rows(sig))
    return {"mean_q": sig.mean_q, "stderr_mean_q": sig.stderr_mean_q, "var_q": sig.var_q,
            "snr_q": sig.snr_q, "vacuum_var_q": cal.apply_hd(vac).var_q}


def run_dhd(cfg, seed, threads, out):
    grid = _grid(cfg)
    f = _mode(cfg, grid)
    alpha = _complex(cfg, "alpha")
    lo = _lo_for_counts(f, _num(cfg, "lo_counts_per_bin", 2000.0))
    cal, _ = _hd_calibration(f, lo, _int(cfg, "calibration_shots", 10_000), _subseed(seed, 0),
                             threads)
    sig = cal.apply_dhd(dhd_monte_carlo(CoherentField.in_mode(alpha, f), lo,
                                        shots=_int(cfg, "shots"), rng_seed=_subseed(seed, 1),
                                        threads=threads))
    out.json("dhd.json", {"experiment": "dhd", "seed": seed, "signal": sig.to_dict()})
    out.csv("dhd_shots.csv", ["shot", "q", "p"], _shots_rows(sig))
    return {k: getattr(sig, k) for k in ("mean_q", "mean_p", "var_q", "var_p", "snr_q", "snr_p")}


def _kk_setup(cfg, grid, f, alpha):
    bs = BeamsplitterParams.from_reflection(_num(cfg, "r", 0.1))
    state = CoherentField.in_mode(alpha, f)
    ratio = _num(cfg, "lo_to_signal", 10.0)
    A = ratio * bs.t * float(np.max(np.abs(state.psi.samples))) / bs.r
    expansion = _get(cfg, "expansion", str, "first_order")
    try:
        kcfg = KKRetrievalConfig(A, expansion=expansion)
    except PreconditionError as exc:
        raise ConfigError(f"field 'expansion': {exc}") from exc
    return bs, state, LocalOscillator(A), kcfg


def run_kk(cfg, seed, threads, out):
    grid = _grid(cfg)
    f = _mode(cfg, grid)
    alpha = _complex(cfg, "alpha")
    shots = _int(cfg, "shots")
    bs, state, lo, kcfg = _kk_setup(cfg, grid, f, alpha)
    hd_lo = _lo_for_counts(f, _num(cfg, "lo_counts_per_bin", 2000.0))
    cal, _ = _hd_calibration(f, hd_lo, _int(cfg, "calibration_shots", 10_000), _subseed(seed, 0),
                             threads)
    hd_q = cal.apply_hd(hd_monte_carlo(state, hd_lo, shots=shots, rng_seed=_subseed(seed, 1),
                                       threads=threads))
    hd_lo_p = LocalOscillator(hd_lo.amplitude, math.pi / 2, f)
    hd_p = cal.apply_hd(hd_monte_carlo(state, hd_lo_p, shots=shots, rng_seed=_subseed(seed, 2),
                                       threads=threads))
    kk = kk_receive(state, lo, bs, kcfg, f, shots=shots, rng_seed=_subseed(seed, 3),
                    threads=threads)
    summary = {"mean_q": kk.mean_q, "mean_p": kk.mean_p,
               "stderr_mean_q": kk.stderr_mean_q, "stderr_mean_p": kk.stderr_mean_p,
               "var_q": kk.var_q, "var_p": kk.var_p,
               "ratio_var_q": kk.var_q / hd_q.var_q, "ratio_var_p": kk.var_p / hd_p.var_q,
               "alpha": [alpha.real, alpha.imag]}
    out.json("kk.json", {"experiment": "kk", "seed": seed, "kk": kk.to_dict(),
                         "hd_q": hd_q.to_dict(), "hd_p": hd_p.to_dict(),
                         "lo_amplitude": lo.amplitude, "r": bs.r,
                         "expansion": kcfg.expansion, **summary})
    out.csv("kk_shots.csv", ["shot", "q", "p"], _shots_rows(kk))
    return summary


def run_snr_compare(cfg, seed, threads, out):
    grid = _grid(cfg)
    f = _mode(cfg, grid)
    alpha = _complex(cfg, "alpha")
    shots = _int(cfg, "shots")
    lo = _lo_for_counts(f, _num(cfg, "lo_counts_per_bin", 2000.0))
    cal, _ = _hd_calibration(f, lo, _int(cfg, "calibration_shots", 10_000), _subseed(seed, 0),
                             threads)
    state = CoherentField.in_mode(alpha, f)
    hd = cal.apply_hd(hd_monte_carlo(state, lo, shots=shots, rng_seed=_subseed(seed, 1),
                                     threads=threads))
    dhd = cal.apply_dhd(dhd_monte_carlo(state, lo, shots=shots, rng_seed=_subseed(seed, 2),
                                        threads=threads))
    bs, _, kk_lo, kcfg = _kk_setup(cfg, grid, f, alpha)
    kk = kk_receive(state, kk_lo, bs, kcfg, f, shots=shots, rng_seed=_subseed(seed, 3),
                    threads=threads)
    summary = {"snr_hd": hd.snr_q, "snr_dhd": dhd.snr_q, "snr_kk": kk.snr_q,
               "ratio_hd_dhd": hd.snr_q / dhd.snr_q, "ratio_hd_kk": hd.snr_q / kk.snr_q,
               "dhd_var_q": dhd.var_q, "dhd_var_p": dhd.var_p,
               "dhd_stderr_var_q": dhd.stderr_var_q, "dhd_stderr_var_p": dhd.stderr_var_p}
    out.json("snr_compare.json", {"experiment": "snr_compare", "seed": seed, "hd": hd.to_dict(),
                                  "dhd": dhd.to_dict(), "kk": kk.to_dict(), **summary})
    return summary


def run_variance_scaling(cfg, seed, threads, out):
    grid = _grid(cfg)
    f = _mode(cfg, grid)
    alpha = _complex(cfg, "alpha", 0.0)
    bs = BeamsplitterParams.from_reflection(_num(cfg, "r", 0.1))
    A0 = _num(cfg, "lo_amplitude")
    steps = _int(cfg, "doublings", 3) + 1
    shots = _int(cfg, "shots")
    idx = _int(cfg, "sample_index", grid.n // 2)
    state = CoherentField.in_mode(alpha, f)
    amps, variances = [], []
    for k in range(steps):
        A = A0 * 2 ** k
        kcfg = KKRetrievalConfig(A, expansion=_get(cfg, "expansion", str, "full_log"))
        ph = kk_phase_samples(state, LocalOscillator(A), bs, kcfg, idx, shots=shots,
                              rng_seed=_subseed(seed, k), threads=threads)
        amps.append(A)
        variances.append(float(np.var(ph, ddof=1)))
    slope, intercept = np.polyfit(np.log(amps), np.log(variances), 1)
    out.json("variance_scaling.json", {"experiment": "variance_scaling", "seed": seed,
                                       "lo_amplitude": amps, "phase_variance": variances,
                                       "slope": float(slope), "intercept": float(intercept)})
    out.csv("variance_scaling.csv", ["lo_amplitude", "phase_variance"], zip(amps, variances))
    return {"slope": float(slope)}


def run_tomography(cfg, seed, threads, out):
    g = cfg.get("grid", {"duration": 1.0, "n": 3072})
    grid = _grid({"grid": g})
    state = default_tomography_state(grid, lo_ratio=_num(cfg, "lo_ratio", 5.0),
                                     lo_phase=_num(cfg, "lo_phase", 0.0))
    n_clicks = _int(cfg, "n_clicks")
    n_seeds = _int(cfg, "n_seeds", 10)
    seeds = [_subseed(seed, k) for k in range(n_seeds)]
    bw = _num(cfg, "smoothing_bins", 2) * grid.dt
    window = default_window(state, _num(cfg, "window_multiple", 10.0))
    study = fidelity_study(state, n_clicks, seeds, bandwidth=bw, window=window, threads=threads)
    est = estimate_density(sample_clicks(state, n_clicks, seeds[0]), smoothing_bandwidth=bw)
    rep = reconstruct_wavefunction(est, state.lo_amplitude, window, state)
    out.json("tomography.json", {"experiment": "tomography", "seed": seed, "window": window,
                                 **study})
    psi_t, psi = rep.psi_tilde.samples, state.psi.samples
    out.csv("reconstruction.csv", ["t", "re_psi_tilde", "im_psi_tilde", "re_psi", "im_psi"],
            zip(grid.t, psi_t.real, psi_t.imag, psi.real, psi.imag))
    out.csv("psd.csv", ["omega", "psd_true", "psd_reconstructed"],
            zip(rep.omega, rep.psd_true, rep.psd_reconstructed))
    return {"n_clicks": n_clicks, **study["median"]}


def run_mixed_phase(cfg, seed, threads, out):
    grid = _grid(cfg)
    c = _get(cfg, "chi", dict)
    sw = _num(c, "spectral_width_bins") * grid.domega
    chi0 = make_ssb_gaussian_chi(grid, _num(c, "center_ratio", 6.0) * sw, sw, 1.0)
    contrast = _num(cfg, "contrast", 0.05)
    A0 = _num(cfg, "lo_amplitude")
    steps = _int(cfg, "doublings", 3) + 1
    scfg = SeriesConfig(_int(cfg, "n_max", 12), _num(cfg, "convergence_tol", 1e-10))
    bs_direct = BeamsplitterParams(1.0, 0.0)
    amps, err_exact, err_dsp, budget = [], [], [], []
    for k in range(steps):
        A = A0 * 2 ** k
        state = CoherentField.from_decomposition(A, chi0.scaled(contrast * A))
        phi = kk_phase_series(state, A, scfg)
        exact = np.angle(state.psi.samples)
        dsp = kk_phase_from_intensity(np.abs(state.psi.samples) ** 2, KKRetrievalConfig(A),
                                      bs_direct, method="direct").phase
        amps.append(A)
        err_exact.append(float(np.max(np.abs(phi - exact))))
        err_dsp.append(float(np.max(np.abs(phi - dsp))))
        budget.append(1.0 / A ** 2)
        if k == 0:
            rows = list(zip(grid.t, phi, exact))
    slope = float(np.polyfit(np.log(amps), np.log(err_exact), 1)[0])

    # mixture of +chi and -chi at the base amplitude
    chi = chi0.scaled(contrast * A0)
    plus = CoherentField.from_decomposition(A0, chi)
    minus = CoherentField.from_decomposition(A0, chi.scaled(-1))
    w = _num(cfg, "mixture_weight", 0.5)
    mix = CoherentMixture((w, 1 - w), (plus, minus))
    phi_mix = kk_phase_series(mix, A0, scfg)
    convex = w * kk_phase_series(plus, A0, scfg) + (1 - w) * kk_phase_series(minus, A0, scfg)
    second_order = np.angle((A0 + chi.samples) ** w * (A0 - chi.samples) ** (1 - w))
    summary = {"slope": slope, "max_error_exact": err_exact, "max_error_dsp": err_dsp,
               "dsp_budget": [max(1e-3, b) for b in budget],
               "convexity_error": float(np.max(np.abs(phi_mix - convex))),
               "mixture_max_phase": float(np.max(np.abs(phi_mix))),
               "mixture_error_vs_weighted_args": float(np.max(np.abs(phi_mix - second_order)))}
    out.json("mixed_phase.json", {"experiment": "mixed_phase", "lo_amplitude": amps, **summary})
    out.csv("mixed_phase.csv", ["t", "phi_series", "phi_exact"], rows)
    return summary


def run_hilbert_oracle(cfg, seed, threads, out):
    n = _int(cfg, "n", 4096)
    count = _int(cfg, "n_signals", 20)
    rng = np.random.default_rng(seed)
    mid = slice(n // 4, 3 * n // 4)
    errors = []
    for _ in range(count):
        x = random_bandpass_signal(n, rng)
        a, b = hilbert_kk_fft(x), hilbert_kk_direct(x)
        errors.append(float(np.linalg.norm(a[mid] - b[mid]) / np.linalg.norm(b[mid])))
    cycles = _num(cfg, "sentinel_cycles", 40)
    w0 = 2 * np.pi * cycles / n
    t = np.arange(n)
    target = -0.5 * np.sin(w0 * t)
    sentinel = {}
    for name, fn in (("fft", hilbert_kk_fft), ("direct", hilbert_kk_direct)):
        h = fn(np.cos(w0 * t))
        sentinel[name] = float(np.max(np.abs(h[mid] - target[mid])) / 0.5)
    summary = {"max_relative_error": max(errors), "sentinel_error": sentinel}
    out.json("hilbert_oracle.json", {"experiment": "hilbert_oracle", "seed": seed,
                                     "relative_errors": errors, **summary})
    return summary


def _random_fock(rng, N):
    c = rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1)
    c[-1] *= 1e-5
    return FockVector.from_unnormalized(c)


def run_interference(cfg, seed, threads, out):
    grid = _grid(cfg)
    f = _mode(cfg, grid)
    g = _mode(cfg, grid, "lo_mode") if "lo_mode" in cfg else None
    count = _int(cfg, "n_states", 50)
    n_max = _int(cfg, "max_N", 12)
    lo_abs = _num(cfg, "lo_amplitude", 1.5)
    bs = BeamsplitterParams.from_reflection(_num(cfg, "r", 0.5))
    rng = np.random.default_rng(seed)
    centre = grid.n // 2
    span = max(1, grid.n // 16)
    err_term = err_mean = 0.0
    for _ in range(count):
        v = _random_fock(rng, int(rng.integers(1, n_max + 1)))
        A = lo_abs * np.exp(1j * rng.uniform(0, 2 * np.pi))
        when = float(grid.t[centre + int(rng.integers(-span, span + 1))])
        fv = complex(f.samples[grid.index_of(when)])
        gv = 1.0 + 0j if g is None else complex(g.samples[grid.index_of(when)])
        mean, cross = two_mode_intensity(v, A, fv, gv, bs)
        term = interference_term(v, A, f, g, bs, when)
        full = (bs.t ** 2 * abs(fv) ** 2 * v.mean_photon_number()
                + bs.r ** 2 * abs(A) ** 2 * abs(gv) ** 2 + 2 * term.real)
        err_term = max(err_term, abs(term - cross))
        err_mean = max(err_mean, abs(full - mean))
    err_zeta = 0.0
    for _ in range(count):
        phi0 = rng.uniform(-np.pi, np.pi)
        theta = rng.uniform(-np.pi, np.pi)
        v = make_phase_eigenstate(rng.uniform(0.1, 0.8) * np.exp(1j * phi0))
        when = float(grid.t[centre + int(rng.integers(-span, span + 1))])
        expected = theta - phi0 + np.angle(f.samples[grid.index_of(when)])
        got = total_phase(v, lo_abs * np.exp(1j * theta), f, when)
        err_zeta = max(err_zeta, abs(np.angle(np.exp(1j * (got - expected)))))
    summary = {"max_error_term": err_term, "max_error_mean": err_mean, "max_error_zeta": err_zeta}
    out.json("interference.json", {"experiment": "interference", "seed": seed, **summary})
    return summary


# -- dispatch -------------------------------------------------------------------

EXPERIMENTS = {
    "hd": (run_hd, True,
           "Homodyne receiver: vacuum calibration run, then a matched coherent state.",
           "grid{dt,n[,t_start]} mode{spectral_width_bins[,center_ratio]} alpha shots "
           "[calibration_shots lo_counts_per_bin lo_phase]",
           "Calibrated mean of the q quadrature equals Re(alpha); vacuum variance 1/4; "
           "SNR = mean^2/(4 var) reduces to Re(alpha)^2."),
    "dhd": (run_dhd, True,
            "Double homodyne: signal split 50/50, LO phases 0 and pi/2.",
            "grid mode alpha shots [calibration_shots lo_counts_per_bin]",
            "Means (Re alpha, Im alpha); calibrated variance 1/2 per quadrature; SNR halved."),
    "kk": (run_kk, True,
           "KK receiver against an HD reference calibrated in the same run.",
           "grid mode alpha shots [r lo_to_signal expansion calibration_shots lo_counts_per_bin]",
           "Quadratures are the real and imaginary parts of the projection <f|a> of the "
           "reconstructed field on the SSB mode f; variances are twice the HD ones because "
           "the image mode f* adds vacuum noise."),
    "snr_compare": (run_snr_compare, True,
                    "HD, DHD and KK on the same coherent state.",
                    "grid mode alpha shots [r lo_to_signal expansion calibration_shots "
                    "lo_counts_per_bin]",
                    "SNR_HD / SNR_DHD = 2 and SNR_HD / SNR_KK = 2."),
    "variance_scaling": (run_variance_scaling, True,
                         "Variance of the retrieved phase at one sample versus LO amplitude.",
                         "grid mode lo_amplitude shots [alpha r doublings sample_index expansion]",
                         "log-variance against log-amplitude has slope -2."),
    "tomography": (run_tomography, True,
                   "Single-photon click tomography with KK phase retrieval.",
                   "n_clicks [grid{duration,n} lo_ratio lo_phase n_seeds smoothing_bins "
                   "window_multiple]",
                   "Window constraint: 5 x chi duration <= analysis window <= 0.5 x envelope "
                   "duration.  Reports median total and chi fidelities and the phase-PSD "
                   "noise floor."),
    "mixed_phase": (run_mixed_phase, False,
                    "Stirling-series phase for coherent states and a +chi/-chi mixture.",
                    "grid chi{spectral_width_bins[,center_ratio]} lo_amplitude [contrast doublings "
                    "n_max convergence_tol mixture_weight]",
                    "Error against arg psi falls as 1/A^2 at fixed contrast; the mixture is the "
                    "weighted sum of its components."),
    "hilbert_oracle": (run_hilbert_oracle, True,
                       "FFT versus direct principal-value KK Hilbert transform.",
                       "[n n_signals sentinel_cycles]",
                       "Relative error on the central half; cos -> -sin/2 sentinel."),
    "interference": (run_interference, True,
                     "Interference term of a number-basis state with a coherent LO.",
                     "grid mode [lo_mode n_states max_N lo_amplitude r]",
                     "Compared with explicit two-mode matrices; phase-eigenstate total phase "
                     "theta - phi + arg f(t)."),
}


def load_config(path: str | Path, seed_override: int | None = None) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    version = _get(cfg, "version", int)
    if version != CONFIG_VERSION:
        raise ConfigError(f"field 'version': unsupported version {version}")
    name = _get(cfg, "experiment", str)
    if name not in EXPERIMENTS:
        raise ConfigError(f"field 'experiment': unknown experiment {name!r}")
    if seed_override is not None:
        cfg["seed"] = seed_override
    if EXPERIMENTS[name][1]:
        _int(cfg, "seed")
    return cfg


def run(config_path, seed: int | None = None, out_dir=None, threads: int | None = None) -> dict:
    cfg = load_config(config_path, seed)
    name = cfg["experiment"]
    fn = EXPERIMENTS[name][0]
    stamp = config_hash(cfg)
    out = Outputs(Path(out_dir or cfg.get("output_dir", f"out/{name}")), stamp)
    n_threads = threads if threads is not None else _int(cfg, "threads", 1)
    summary = fn(cfg, cfg.get("seed", 0), n_threads, out)
    files = out.commit()
    return _clean({"experiment": name, "config_hash": stamp, **summary, "outputs": files})


def describe(name: str) -> str:
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    _, stochastic, what, schema, checks = EXPERIMENTS[name]
    lines = [f"{name}: {what}",
             f"  fields: version experiment{' seed' if stochastic else ''} {schema} "
             "[output_dir threads]",
             f"  reproduces: {checks}"]
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qkk", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"qkk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out")
    p_run.add_argument("--threads", type=int)
    p_desc = sub.add_parser("describe", help="print an experiment's config fields")
    p_desc.add_argument("name")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "describe":
            print(describe(args.name))
            return 0
        summary = run(args.config, args.seed, args.out, args.threads)
    except ConfigError as exc:
        print(f"qkk: config error: {exc}", file=sys.stderr)
        return 2
    except PreconditionError as exc:
        print(f"qkk: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
