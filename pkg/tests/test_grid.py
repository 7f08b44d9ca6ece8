import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from qkk.errors import GridMismatchError, PreconditionError
from qkk.grid import (ComplexSignal, TimeGrid, conjugate_mode, decode_symbols, encode_symbols,
                      forward_transform, inner_product, inverse_transform, is_single_sideband,
                      make_rrc_pulse, negative_frequency_fraction, rms_duration, signal_from_csv,
                      signal_from_json, signal_to_csv, signal_to_json)
from qkk.states import make_ssb_gaussian_chi

GRID = TimeGrid(0.0, 1e-3, 1024)


def tone(grid, w0):
    return ComplexSignal(grid, np.exp(-1j * w0 * grid.t))


def test_grid_invariants():
    g = TimeGrid(-0.5, 0.01, 100)
    assert g.duration == pytest.approx(1.0)
    assert g.domega == pytest.approx(2 * np.pi)
    assert g.omega[0] == pytest.approx(-np.pi / g.dt)
    assert g.omega[-1] < np.pi / g.dt
    assert TimeGrid.from_dict(g.to_dict()) == g
    for bad in [(0, 0.0, 10), (0, -1.0, 10), (0, 1.0, 1)]:
        with pytest.raises(PreconditionError):
            TimeGrid(*bad)


def test_signal_rejects_nonfinite():
    s = np.zeros(GRID.n, dtype=complex)
    s[3] = np.nan
    with pytest.raises(PreconditionError):
        ComplexSignal(GRID, s)
    with pytest.raises(PreconditionError):
        ComplexSignal(GRID, np.zeros(GRID.n - 1))


def test_constant_transform_is_dc_spike():
    spec = forward_transform(ComplexSignal(GRID, np.ones(GRID.n)))
    k0 = np.argmin(np.abs(spec.omega))
    assert spec.samples[k0] == pytest.approx(GRID.duration)
    rest = np.delete(np.abs(spec.samples), k0)
    assert rest.max() < 1e-9


def test_negative_exponent_tone_sits_at_positive_frequency():
    w0 = 37 * GRID.domega
    spec = forward_transform(tone(GRID, w0))
    mag = np.abs(spec.samples)
    k = np.argmax(mag)
    assert spec.omega[k] == pytest.approx(w0)
    assert np.sort(mag)[-2] < 1e-9 * mag[k]


def test_gaussian_transform_matches_closed_form():
    g = TimeGrid.centered(2.0, 2048)
    sigma = 0.05
    s = ComplexSignal(g, np.exp(-g.t ** 2 / (2 * sigma ** 2)))
    spec = forward_transform(s)
    expected = sigma * np.sqrt(2 * np.pi) * np.exp(-(sigma * spec.omega) ** 2 / 2)
    assert np.max(np.abs(spec.samples - expected)) < 1e-10


def test_inner_product_examples():
    f = make_ssb_gaussian_chi(GRID, 60 * GRID.domega, 10 * GRID.domega, 1.0).normalized()
    assert inner_product(f, f) == pytest.approx(1, abs=1e-10)
    assert abs(inner_product(f, conjugate_mode(f))) < 1e-8
    with pytest.raises(GridMismatchError):
        inner_product(f, ComplexSignal(TimeGrid(0, 1e-3, 512), np.ones(512)))


def test_single_sideband_examples():
    w0 = 40 * GRID.domega
    assert is_single_sideband(tone(GRID, w0))
    assert not is_single_sideband(ComplexSignal(GRID, np.cos(w0 * GRID.t)), 0.01)
    # carrier at 3 widths, built by hand: the constructor insists on 4
    sw = 10 * GRID.domega
    u = GRID.t - GRID.t[GRID.n // 2]
    near = ComplexSignal(GRID, np.exp(-0.5 * (sw * u) ** 2 - 3j * sw * u))
    assert is_single_sideband(near, 1e-3)
    assert is_single_sideband(ComplexSignal(GRID, np.zeros(GRID.n)))
    with pytest.raises(PreconditionError):
        is_single_sideband(tone(GRID, w0), 0.0)


def test_conjugate_mode():
    real = ComplexSignal(GRID, np.cos(GRID.t * 30))
    assert np.array_equal(conjugate_mode(real).samples, real.samples)
    f = make_ssb_gaussian_chi(GRID, 60 * GRID.domega, 10 * GRID.domega, 1.0)
    fc = conjugate_mode(f)
    assert not is_single_sideband(fc)
    assert negative_frequency_fraction(fc) > 1 - 1e-3
    direct = np.sum(np.conj(f.samples) ** 2) * GRID.dt
    assert inner_product(f, fc) == pytest.approx(direct, abs=1e-14)


def test_symbol_round_trips():
    g = TimeGrid(0.0, 1.0, 1024)
    pulse = make_rrc_pulse(g, 16.0, 0.25)
    single = encode_symbols([1.0], pulse, 16.0)
    assert np.allclose(single.samples, pulse.samples)
    syms = [1, 1j, -1]
    out = decode_symbols(encode_symbols(syms, pulse, 16.0), pulse, 16.0, 3)
    assert np.max(np.abs(out - syms)) < 1e-10
    rng = np.random.default_rng(3)
    qam = rng.choice([-3, -1, 1, 3], 16) + 1j * rng.choice([-3, -1, 1, 3], 16)
    a = encode_symbols(qam, pulse, 16.0)
    assert not a.meta["nonorthogonal"]
    # oracle: matched filter by explicit quadrature
    direct = [np.sum(np.conj(np.roll(pulse.samples, 16 * k)) * a.samples) for k in range(16)]
    assert np.max(np.abs(np.array(direct) - qam)) < 1e-8
    assert np.max(np.abs(decode_symbols(a, pulse, 16.0, 16) - qam)) < 1e-8


def test_nonorthogonal_pulses_warn():
    g = TimeGrid(0.0, 1.0, 256)
    wide = ComplexSignal(g, np.exp(-((g.t - 128) / 20.0) ** 2)).normalized()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        a = encode_symbols([1, 1], wide, 4.0)
    assert a.meta["nonorthogonal"]
    assert caught


def test_rms_duration_of_box():
    g = TimeGrid(0.0, 1.0, 1000)
    box = np.zeros(g.n)
    box[100:300] = 1
    assert rms_duration(ComplexSignal(g, box)) == pytest.approx(200, rel=1e-3)


def test_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    s = ComplexSignal(TimeGrid(0.25, 0.125, 16), rng.normal(size=16) + 1j * rng.normal(size=16))
    back = signal_from_json(signal_to_json(s))
    assert back.grid == s.grid and np.array_equal(back.samples, s.samples)
    path = tmp_path / "s.csv"
    path.write_text(signal_to_csv(s))
    back = signal_from_csv(path)
    assert np.array_equal(back.samples, s.samples)
    assert back.grid.n == 16 and back.grid.dt == pytest.approx(0.125)
    assert json.loads(signal_to_json(s))["grid"] == {"t_start": 0.25, "dt": 0.125, "n": 16}


# -- properties ----------------------------------------------------------------

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
samples = st.integers(2, 256).flatmap(
    lambda n: st.tuples(arrays(float, n, elements=finite), arrays(float, n, elements=finite)))
dts = st.floats(1e-4, 10.0)


@settings(max_examples=60, deadline=None)
@given(samples, dts)
def test_parseval(pair, dt):
    re, im = pair
    s = ComplexSignal(TimeGrid(0.0, dt, len(re)), re + 1j * im)
    spec = forward_transform(s)
    lhs = s.norm2()
    rhs = np.sum(np.abs(spec.samples) ** 2) * s.grid.domega / (2 * np.pi)
    assert rhs == pytest.approx(lhs, rel=1e-10, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(samples, dts, st.floats(-100, 100))
def test_transform_round_trip(pair, dt, t0):
    re, im = pair
    s = ComplexSignal(TimeGrid(t0, dt, len(re)), re + 1j * im)
    back = inverse_transform(forward_transform(s))
    scale = max(np.max(np.abs(s.samples)), 1e-300)
    assert np.max(np.abs(back.samples - s.samples)) <= 1e-12 * scale * np.sqrt(len(re))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 128).flatmap(lambda n: st.tuples(*[arrays(float, n, elements=finite)] * 4)))
def test_inner_product_matches_spectral_sum(arrs):
    a, b, c, d = arrs
    g = TimeGrid(0.0, 0.5, len(a))
    f1, f2 = ComplexSignal(g, a + 1j * b), ComplexSignal(g, c + 1j * d)
    direct = inner_product(f1, f2)
    S1, S2 = forward_transform(f1), forward_transform(f2)
    spectral = np.vdot(S1.samples, S2.samples) * g.domega / (2 * np.pi)
    norm = np.sqrt(f1.norm2() * f2.norm2())
    assert abs(direct - spectral) <= 1e-10 * max(norm, 1e-300)


@settings(max_examples=30, deadline=None)
@given(st.integers(10, 40), st.floats(0.5, 3.0), st.floats(1e-4, 0.49))
def test_conjugate_of_ssb_is_not_ssb(bins, amp, tol):
    sw = bins * GRID.domega
    f = make_ssb_gaussian_chi(GRID, 6 * sw, sw, amp)
    assert is_single_sideband(f, tol)
    assert not is_single_sideband(conjugate_mode(f), tol)
