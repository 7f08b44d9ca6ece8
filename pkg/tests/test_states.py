import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qkk.dsp import BeamsplitterParams
from qkk.errors import PhaseUndefinedError, PreconditionError
from qkk.grid import ComplexSignal, TimeGrid, is_single_sideband, rms_duration, signal_to_csv
from qkk.reference import two_mode_intensity
from qkk.states import (CoherentField, CoherentMixture, FockVector, SinglePhotonState,
                        direct_detection_mean, interference_term, make_cat_state,
                        make_coherent_fock, make_flat_top, make_phase_eigenstate,
                        make_single_photon_state, make_ssb_gaussian_chi,
                        number_statistics_phase, state_from_config, statistics_phase_angle,
                        total_phase)

GRID = TimeGrid(0.0, 1.0, 512)
# |S| of the phase eigenstate at |z| = 1/2, from 200 terms of the closed series
PHASE_EIGENSTATE_HALF_S = 0.5643989901727156
# <n> of the even cat at alpha = 2: |alpha|^2 tanh |alpha|^2
CAT_TWO_MEAN_N = 3.997317198956268


def mode(grid=GRID, bins=12):
    sw = bins * grid.domega
    return make_ssb_gaussian_chi(grid, 6 * sw, sw, 1.0).normalized()


def test_ssb_gaussian_chi_preconditions():
    sw = 12 * GRID.domega
    chi = make_ssb_gaussian_chi(GRID, 6 * sw, sw, 0.3)
    assert np.max(np.abs(chi.samples)) == pytest.approx(0.3, rel=1e-3)
    assert is_single_sideband(chi, 1e-3)
    with pytest.raises(PreconditionError):
        make_ssb_gaussian_chi(GRID, 3 * sw, sw, 1.0)
    with pytest.raises(PreconditionError):
        make_ssb_gaussian_chi(GRID, 60 * GRID.domega, 5 * GRID.domega, 1.0)


def test_flat_top_duration():
    g = TimeGrid.centered(1.0, 4096)
    env = make_flat_top(g, 0.5, 0.0)
    assert np.max(np.abs(env.samples)) == pytest.approx(1.0, abs=1e-6)
    # rms duration of a box of length d is d / sqrt(12), scaled to d here
    assert rms_duration(env) == pytest.approx(0.5, rel=0.02)


def test_coherent_field_decomposition():
    chi = make_ssb_gaussian_chi(GRID, 72 * GRID.domega, 12 * GRID.domega, 0.5)
    s = CoherentField.from_decomposition(2.0, chi)
    assert np.allclose(s.psi.samples, 2.0 + chi.samples)
    with pytest.raises(PreconditionError):
        CoherentField.from_decomposition(0.4, chi)
    with pytest.raises(PreconditionError):
        CoherentField(s.psi, 2.0, None)
    with pytest.raises(PreconditionError):
        CoherentField(ComplexSignal(GRID, s.psi.samples + 1e-3), 2.0, chi)
    f = mode()
    assert CoherentField.in_mode(3.0, f).mean_photon_number() == pytest.approx(9.0)


def test_mixture_validation():
    a = CoherentField.in_mode(1.0, mode())
    b = CoherentField.in_mode(2.0, mode())
    m = CoherentMixture((0.25, 0.75), (a, b))
    assert m.grid == GRID
    assert CoherentMixture.pure(a).weights == (1.0,)
    for w in [(0.5, 0.4), (0.0, 1.0), (1.0,)]:
        with pytest.raises(PreconditionError):
            CoherentMixture(w, (a, b))
    other = CoherentField.in_mode(1.0, mode(TimeGrid(0.0, 1.0, 1024)))
    with pytest.raises(PreconditionError):
        CoherentMixture((0.5, 0.5), (a, other))


def test_single_photon_defaults():
    g = TimeGrid.centered(1.0, 3072)
    s = make_single_photon_state(g)
    assert isinstance(s, SinglePhotonState)
    assert s.lo_amplitude == pytest.approx(5 * np.max(np.abs(s.chi.samples)))
    assert s.psi.norm2() == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(s.psi.samples, s.lo_component.samples + s.chi.samples)
    rotated = s.with_global_phase(0.3)
    assert np.allclose(rotated.psi.samples, np.exp(0.3j) * s.psi.samples)
    with pytest.raises(PreconditionError):
        make_single_photon_state(g, lo_ratio=2.0)
    with pytest.raises(PreconditionError):
        make_single_photon_state(g, envelope_duration=10 / 40)


def test_fock_vector_validation():
    with pytest.raises(PreconditionError):
        FockVector([1.0])
    with pytest.raises(PreconditionError):
        FockVector([0.6, 0.6])
    with pytest.raises(PreconditionError):
        FockVector([np.sqrt(0.5), np.sqrt(0.5)])
    v = FockVector.from_unnormalized([3, 4, 0])
    assert v.N == 2 and v.coeffs[1] == pytest.approx(0.8)


def test_phase_eigenstate_examples():
    v = make_phase_eigenstate(0.5j)
    assert abs(v.coeffs[-1]) ** 2 < 1e-8
    assert abs(number_statistics_phase(v)) == pytest.approx(PHASE_EIGENSTATE_HALF_S, rel=1e-9)
    assert statistics_phase_angle(v) == pytest.approx(-np.pi / 2)
    assert make_phase_eigenstate(0).N == 1
    with pytest.raises(PreconditionError):
        make_phase_eigenstate(1.0)
    with pytest.raises(PreconditionError):
        make_phase_eigenstate(0.9, N=5)


def test_coherent_fock_statistics():
    alpha = 1.5 * np.exp(0.4j)
    v = make_coherent_fock(alpha)
    assert number_statistics_phase(v) == pytest.approx(np.conj(alpha), abs=1e-10)
    assert statistics_phase_angle(make_coherent_fock(2.0)) == pytest.approx(0.0, abs=1e-14)
    assert v.mean_photon_number() == pytest.approx(abs(alpha) ** 2, rel=1e-10)


def test_cat_and_vacuum_have_no_phase():
    cat = make_cat_state(2.0)
    assert cat.mean_photon_number() == pytest.approx(CAT_TWO_MEAN_N, rel=1e-10)
    with pytest.raises(PhaseUndefinedError):
        statistics_phase_angle(cat)
    with pytest.raises(PhaseUndefinedError):
        total_phase(cat, 10.0, mode(), 256.0)
    with pytest.raises(PhaseUndefinedError):
        statistics_phase_angle(FockVector([1.0, 0.0]))
    with pytest.raises(PreconditionError):
        make_cat_state(2.0, N=10)


def test_single_photon_has_no_interference():
    one = FockVector([0.0, 1.0, 0.0])
    bs = BeamsplitterParams.balanced()
    assert interference_term(one, 10.0, mode(), None, bs, 256.0) == 0
    mean = direct_detection_mean(one, 10.0, mode(), None, bs, 256.0)
    f_val = mode().samples[256]
    assert mean == pytest.approx(0.5 * abs(f_val) ** 2 + 0.5 * 100.0)


def test_total_phase_of_phase_eigenstate():
    z = 0.6 * np.exp(1.1j)
    f = mode()
    v = make_phase_eigenstate(z)
    A = 4.0 * np.exp(0.3j)
    expected = np.angle(A * f.samples[300] * np.exp(-1.1j))
    assert total_phase(v, A, f, 300.0) == pytest.approx(expected, abs=1e-12)


def _random_fock(rng, n):
    c = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
    c[-1] = 0.0
    return FockVector.from_unnormalized(c)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2 ** 32 - 1), st.floats(0.05, 0.95))
def test_interference_matches_two_mode_calculation(n, seed, refl):
    rng = np.random.default_rng(seed)
    v = _random_fock(rng, n)
    bs = BeamsplitterParams.from_reflection(refl)
    A = complex(*rng.uniform(-1.5, 1.5, 2))
    f, g = mode(), mode(bins=10)
    time = float(rng.integers(200, 312))
    mean, cross = two_mode_intensity(v, A, f.samples[int(time)], g.samples[int(time)], bs)
    assert interference_term(v, A, f, g, bs, time) == pytest.approx(cross, abs=1e-12)
    assert direct_detection_mean(v, A, f, g, bs, time) == pytest.approx(mean, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.95), st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi))
def test_interference_follows_lo_phase(r, arg, shift):
    v = make_phase_eigenstate(r * np.exp(1j * arg)) if r > 0 else FockVector([1.0, 0.0])
    bs = BeamsplitterParams.balanced()
    f = mode()
    base = interference_term(v, 2.0, f, None, bs, 256.0)
    rotated = interference_term(v, 2.0 * np.exp(1j * shift), f, None, bs, 256.0)
    assert rotated == pytest.approx(base * np.exp(-1j * shift), abs=1e-12)


def test_state_from_config(tmp_path):
    s = state_from_config({"type": "coherent", "alpha": [3, 0], "mode": {"spectral_width": 12 * GRID.domega}}, GRID)
    assert s.mean_photon_number() == pytest.approx(9.0)
    d = state_from_config({"type": "coherent", "lo_amplitude": 2.0,
                           "chi": {"spectral_width": 12 * GRID.domega, "peak_amplitude": 0.5}}, GRID)
    assert d.lo_amplitude == 2.0
    assert state_from_config({"type": "fock", "kind": "phase_eigenstate", "z": 0.5}).N > 1
    assert state_from_config({"type": "fock", "kind": "coeffs", "coeffs": [0.6, 0.8, 0]}).N == 2
    m = state_from_config({"type": "mixture", "components": [
        {"weight": 0.5, "state": {"type": "coherent", "alpha": 1, "mode": {"spectral_width": 12 * GRID.domega}}},
        {"weight": 0.5, "state": {"type": "coherent", "alpha": 2, "mode": {"spectral_width": 12 * GRID.domega}}}]}, GRID)
    assert m.weights == (0.5, 0.5)

    (tmp_path / "m.csv").write_text(signal_to_csv(mode()))
    c = state_from_config(json.loads('{"type": "coherent", "alpha": 1, "mode": {"kind": "csv", "path": "m.csv"}}'),
                          GRID, tmp_path)
    assert np.allclose(c.psi.samples, mode().samples)
    for bad in [{"type": "squeezed"}, {"type": "fock", "kind": "nope"},
                {"type": "coherent", "alpha": 1, "mode": {"kind": "nope"}}]:
        with pytest.raises(PreconditionError):
            state_from_config(bad, GRID)
