"""Acceptance criteria, each run from its shipped config under configs/acceptance/.

Every criterion prints one ``PASS``/``FAIL`` line; run with ``pytest -v`` (or
``-s``) to see them.
"""

from pathlib import Path

import pytest

from qkk.cli import run

CONFIGS = Path(__file__).resolve().parent.parent / "configs" / "acceptance"
NAMES = sorted(p.stem for p in CONFIGS.glob("*.json"))


@pytest.fixture(scope="module")
def out_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="module")
def results(out_root):
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run(CONFIGS / f"{name}.json", out_dir=out_root / name)
        return cache[name]

    return get


def report(capsys, number, title, checks):
    ok = all(passed for passed, _ in checks)
    detail = "; ".join(text for _, text in checks)
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {title}: {detail}")
    assert ok, detail


def within(value, target, tol):
    return abs(value - target) <= tol


def test_criterion_1_hilbert_oracle(results, capsys):
    s = results("c1_hilbert_oracle")
    sent = s["sentinel_error"]
    report(capsys, 1, "FFT vs direct Hilbert", [
        (s["max_relative_error"] <= 1e-6, f"max relative error {s['max_relative_error']:.3g} <= 1e-6"),
        (sent["fft"] < 0.02, f"fft sentinel {sent['fft']:.3g} < 2%"),
        (sent["direct"] < 0.02, f"direct sentinel {sent['direct']:.3g} < 2%"),
    ])


def test_criterion_2_hd_calibration(results, capsys):
    s = results("c2_hd_calibration")
    se = s["stderr_mean_q"]
    report(capsys, 2, "HD calibration", [
        (within(s["vacuum_var_q"], 0.25, 1e-12), f"vacuum variance {s['vacuum_var_q']:.12g} = 1/4"),
        (within(s["mean_q"], 3.0, 3 * se), f"mean_q {s['mean_q']:.4f} = 3 +- {3 * se:.4f}"),
        (within(s["snr_q"], 9.0, 0.9), f"SNR {s['snr_q']:.3f} = 9 +- 10%"),
    ])


def test_criterion_3_dhd_snr(results, capsys):
    s = results("c3_dhd_snr")
    report(capsys, 3, "DHD 3 dB law", [
        (within(s["ratio_hd_dhd"], 2.0, 0.2), f"SNR_HD/SNR_DHD {s['ratio_hd_dhd']:.3f} = 2 +- 10%"),
        (within(s["dhd_var_q"], 0.5, 5 * s["dhd_stderr_var_q"]),
         f"var_q {s['dhd_var_q']:.4f} = 1/2 +- {5 * s['dhd_stderr_var_q']:.4f}"),
        (within(s["dhd_var_p"], 0.5, 5 * s["dhd_stderr_var_p"]),
         f"var_p {s['dhd_var_p']:.4f} = 1/2 +- {5 * s['dhd_stderr_var_p']:.4f}"),
    ])


def test_criterion_4_kk_noise(results, capsys):
    s = results("c4_kk_noise")
    re_a, im_a = s["alpha"]
    tol_q = max(3 * s["stderr_mean_q"], 0.02 * abs(re_a))
    tol_p = max(3 * s["stderr_mean_p"], 0.02 * abs(im_a))
    report(capsys, 4, "KK noise equals DHD", [
        (within(s["ratio_var_q"], 2.0, 0.3), f"Var_KK/Var_HD (q) {s['ratio_var_q']:.3f} = 2 +- 15%"),
        (within(s["ratio_var_p"], 2.0, 0.3), f"Var_KK/Var_HD (p) {s['ratio_var_p']:.3f} = 2 +- 15%"),
        (within(s["mean_q"], re_a, tol_q), f"mean_q {s['mean_q']:.4f} = {re_a} +- {tol_q:.4f}"),
        (within(s["mean_p"], im_a, tol_p), f"mean_p {s['mean_p']:.4f} = {im_a} +- {tol_p:.4f}"),
    ])


def test_criterion_5_variance_scaling(results, capsys):
    s = results("c5_variance_scaling")
    report(capsys, 5, "phase variance vs LO amplitude", [
        (within(s["slope"], -2.0, 0.1), f"slope {s['slope']:.4f} = -2 +- 0.1"),
    ])


def test_criterion_6_tomography(results, capsys):
    s = results("c6_tomography")
    report(capsys, 6, "single-photon tomography, median of 10 seeds at 1e6 clicks", [
        (s["fidelity_total"] >= 0.98, f"fidelity_total {s['fidelity_total']:.5f} >= 0.98"),
        (0.75 <= s["fidelity_chi"] <= 0.92, f"fidelity_chi {s['fidelity_chi']:.4f} in [0.75, 0.92]"),
        (3e-4 <= s["noise_floor"] <= 3e-3, f"noise floor {s['noise_floor']:.3g} in [3e-4, 3e-3]"),
    ])


def test_criterion_7_interference(results, capsys):
    s = results("c7_interference")
    report(capsys, 7, "interference term vs two-mode matrices", [
        (s["max_error_term"] <= 1e-10, f"term error {s['max_error_term']:.3g} <= 1e-10"),
        (s["max_error_zeta"] <= 1e-10, f"total phase error {s['max_error_zeta']:.3g} <= 1e-10"),
    ])


def test_criterion_8_mixed_phase(results, capsys):
    s = results("c8_mixed_phase")
    dsp_ok = all(e <= b for e, b in zip(s["max_error_dsp"], s["dsp_budget"]))
    report(capsys, 8, "Stirling series consistency", [
        (within(s["slope"], -2.0, 0.2), f"slope {s['slope']:.4f} = -2 +- 0.2"),
        (dsp_ok, f"series vs DSP {max(s['max_error_dsp']):.3g} within max(1e-3, 1/A^2)"),
        (s["convexity_error"] <= 1e-10, f"convexity error {s['convexity_error']:.3g} <= 1e-10"),
    ])


def test_criterion_9_determinism(results, out_root, tmp_path, capsys):
    checks = []
    for name in NAMES:
        results(name)
        again = tmp_path / name
        run(CONFIGS / f"{name}.json", out_dir=again, threads=3)
        first = {p.name: p.read_bytes() for p in (out_root / name).iterdir()}
        second = {p.name: p.read_bytes() for p in again.iterdir()}
        checks.append((bool(first) and first == second, f"{name} {'identical' if first == second else 'differs'}"))
    report(capsys, 9, "byte-identical reruns (second run with 3 threads)", checks)
