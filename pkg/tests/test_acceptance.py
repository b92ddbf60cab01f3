"""Acceptance gate: one PASS/FAIL line per criterion in the terminal summary."""

import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from rmtde.channel_models import FadingSpec, build_scenario
from rmtde.covariance_opt import optimize_covariance
from rmtde.det_equiv import (
    SolverOptions,
    det_shannon,
    det_stieltjes,
    moment_identity,
    shannon_via_integral,
    solve_fixed_point,
    uniqueness_diagnostic,
)
from rmtde.monte_carlo import distribution_gap, run_ensemble
from rmtde.scenarios import FIGURE_TEMPLATE, default_scenarios, figure_scenario

SNR_DB = np.arange(0, 31, 5)
FIGURE_FADINGS = {
    "gaussian": FadingSpec.gaussian(),
    "lognormal_cv1": FadingSpec.lognormal_cv(1.0),
    "nakagami_m0.6": FadingSpec.nakagami(0.6),
}


@pytest.fixture(scope="module")
def shipped():
    return default_scenarios()


def mp_closed_form(beta, z):
    # root of beta z m^2 + (z + beta - 1) m + 1 = 0 that is positive for z < 0
    a, b = beta * z, z + beta - 1
    roots = [(-b + s * math.sqrt(b * b - 4 * a)) / (2 * a) for s in (1, -1)]
    return next(r for r in roots if r > 0)


def test_ac1_marchenko_pastur(report):
    t0 = time.perf_counter()
    errs = {}
    for beta, (N, n) in {0.5: (8, 16), 1.0: (8, 8), 2.0: (16, 8)}.items():
        errs[beta] = abs(det_stieltjes(build_scenario(N, [n]), -1.0) - mp_closed_form(beta, -1.0))
    golden = abs(det_stieltjes(build_scenario(8, [8]), -1.0) - (math.sqrt(5) - 1) / 2)
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-6 and golden <= 1e-6 and elapsed < 1.0
    report("AC-1", ok, f"max |error| {max(errs.values()):.2e}, golden-ratio error {golden:.2e}, {elapsed:.2f}s")


@pytest.mark.parametrize("family", list(FIGURE_FADINGS))
def test_ac2_figure_sweep(report, family):
    t0 = time.perf_counter()
    sp = figure_scenario(16, FIGURE_FADINGS[family])
    sigma2 = 10.0 ** (-SNR_DB / 10)
    de = np.array([det_shannon(sp, s2) for s2 in sigma2])
    ens = run_ensemble(sp, "mutual_info", sigma2, 2000, 1)
    tol = np.maximum(3 * ens.std / math.sqrt(2000), 0.02 * de)
    ratio = np.abs(ens.mean - de) / tol
    elapsed = time.perf_counter() - t0
    bad = [int(s) for s, r in zip(SNR_DB, ratio) if r > 1]
    ok = not bad and elapsed < 120
    worst = int(np.argmax(ratio))
    detail = (
        f"{family}: worst |mc-de|/tol {ratio[worst]:.2f} at {SNR_DB[worst]} dB "
        f"(rel. deviation {(ens.mean[worst] - de[worst]) / de[worst]:+.2%}), "
        f"failing points {bad or 'none'}, {elapsed:.1f}s"
    )
    report("AC-2", ok, detail)


def test_ac3_moment_identity(report, shipped):
    worst_trace, worst_probe = 0.0, 0.0
    for sp in shipped.values():
        want = 2 * sp.K if sp.has_los else sp.K
        mi = moment_identity(sp)
        worst_trace = max(worst_trace, abs(mi["trace_formula"] - want))
        worst_probe = max(worst_probe, abs(mi["probe"] - want) / want)
    ok = worst_trace <= 1e-10 and worst_probe <= 1e-3
    report("AC-3", ok, f"trace formula max error {worst_trace:.1e}, probe max rel. error {worst_probe:.1e}")


def test_ac4_derivative_identity(report, shipped):
    opts = SolverOptions(tol=1e-13)
    worst = math.inf
    for sp in shipped.values():
        for s2 in (0.5, 1.0, 2.0, 5.0):
            target = det_stieltjes(sp, -s2, opts).real - 1 / s2
            errs = []
            for h in (1e-2, 5e-3):
                fd = (det_shannon(sp, s2 + h, opts) - det_shannon(sp, s2 - h, opts)) / (2 * h)
                errs.append(abs(fd - target))
            worst = min(worst, errs[0] / errs[1])
    report("AC-4", worst >= 3.5, f"smallest error ratio on halving h: {worst:.3f}")


def test_ac5_integral_consistency(report, shipped):
    worst = 0.0
    for sp in shipped.values():
        for s2 in (0.01, 0.1, 1.0, 10.0):
            a, b = det_shannon(sp, s2), shannon_via_integral(sp, s2)
            worst = max(worst, abs(a - b) / a)
    report("AC-5", worst <= 1e-3, f"max relative difference {worst:.2e}")


def test_ac6_uniqueness(report, shipped):
    rho_max, margin_min, solves = 0.0, math.inf, 0
    points = [-s2 for s2 in (1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0)] + [-1 + 0.5j, 0.5 + 0.5j, 2 + 0.1j]
    for sp in shipped.values():
        for z in points:
            res = solve_fixed_point(sp, z)
            assert res.state.converged
            d = uniqueness_diagnostic(res)
            rho_max = max(rho_max, d.spectral_radius)
            margin_min = min(margin_min, d.margins.min())
            solves += 1
    ok = rho_max < 1 and margin_min > 0
    report("AC-6", ok, f"{solves} solves, max spectral radius {rho_max:.4f}, min margin {margin_min:.4f}")


def test_ac7_distribution_invariance(report):
    f = FadingSpec.lognormal_cv(1.0)
    g8 = distribution_gap(figure_scenario(8, f), -1.0, 5000, 7)
    g32 = distribution_gap(figure_scenario(32, f), -1.0, 5000, 7)
    bound = 3 * g32["stderr"] + 0.01
    ok = g32["gap"] < g8["gap"] and g32["gap"] <= bound
    report("AC-7", ok, f"gap(8) {g8['gap']:.5f}, gap(32) {g32['gap']:.5f} (bound {bound:.5f})")


def test_ac8_variance_shrinks(report):
    s2 = 10.0 ** (-30 / 10)
    parts, ok = [], True
    for name, f in FIGURE_FADINGS.items():
        v4 = run_ensemble(figure_scenario(4, f), "mutual_info", [s2], 2000, 3).variance[0]
        v16 = run_ensemble(figure_scenario(16, f), "mutual_info", [s2], 2000, 3).variance[0]
        ok &= v16 < v4
        parts.append(f"{name} {v4:.4f}->{v16:.4f}")
    report("AC-8", ok, "variance N=4 -> N=16: " + ", ".join(parts))


def test_ac9_waterfilling(report):
    sp = build_scenario(2, [2], T=[np.diag([1.5, 0.5])])
    sol = optimize_covariance(sp, 1.0)
    grid = np.round(np.arange(0, 2.0 + 1e-12, 1e-3), 12)
    rates = np.array([det_shannon(sp.with_transmit([np.diag([1.5 * p, 0.5 * (2 - p)])]), 1.0) for p in grid])
    best = grid[int(np.argmax(rates))]
    p_big = sol.powers[0][int(np.argmax(sol.eigvals[0]))]
    grid_ok = abs(p_big - best) <= 1e-3 and sol.rate >= rates.max() - 1e-9 and sol.rate >= sol.uniform_rate - 1e-9

    ident = optimize_covariance(build_scenario(3, [3, 2], R="random", seed=4), 0.5)
    uniform_ok = all(np.array_equal(Q, np.eye(Q.shape[0])) for Q in ident.Q)

    swapped = optimize_covariance(sp.with_fading(FadingSpec.lognormal_cv(1.0)), 1.0)
    swap_ok = swapped.rate == sol.rate and all(np.array_equal(a, b) for a, b in zip(swapped.Q, sol.Q))

    ok = grid_ok and uniform_ok and swap_ok
    report(
        "AC-9",
        ok,
        f"power on strong mode {p_big:.6f} vs grid {best:.3f}, rate {sol.rate:.9f} vs grid max {rates.max():.9f}; "
        f"identity-T uniform {uniform_ok}; fading swap unchanged {swap_ok}",
    )


def _cli(args, cwd):
    proc = subprocess.run([sys.executable, "-m", "rmtde.cli", *args], cwd=cwd, capture_output=True)
    return proc.returncode, proc.stdout


def _snapshot(out_dir: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(out_dir.glob("*.csv"))}


def test_ac10_reproducibility(report, tmp_path):
    small = {
        "N": 4,
        "seed": 3,
        "users": [
            {"n": 4, "R": "random", "T": {"ula": {"mean_angle": 0, "rms_spread": 10}}},
            {"n": 4, "R": "random", "T": {"ula": {"mean_angle": 30, "rms_spread": 10}}},
        ],
    }
    configs = {
        "solve": {"scenario": small, "solve": {"z": [-0.5, 0.25]}},
        "sweep-snr": {
            "scenario": small,
            "master_seed": 17,
            "sweep": {"snr_db": [0, 10, 20], "trials": 200, "fadings": [{"family": "gaussian"}, {"family": "lognormal", "cv": 1}]},
        },
        "variance-vs-cv": {
            "scenario": FIGURE_TEMPLATE,
            "master_seed": 17,
            "variance": {"snr_db": 30, "N": [2, 4], "trials": 200, "fadings": [{"family": "nakagami", "m": 0.6}]},
        },
        "optimize-covariance": {"scenario": small, "optimize": {"snr_db": [0, 10]}},
        "validate": {"scenarios": {"small": small}},
    }
    failures = []
    for command, cfg in configs.items():
        cfg_path = tmp_path / f"{command}.json"
        cfg_path.write_text(json.dumps(cfg))
        per_thread = []
        for threads in ("1", "2"):
            outputs = []
            for rep in range(2):
                out = tmp_path / f"{command}_{threads}_{rep}"
                code, stdout = _cli(
                    [command, "--config", str(cfg_path), "--out", str(out), "--threads", threads], tmp_path
                )
                outputs.append((code, stdout, _snapshot(out) if out.exists() else {}))
            if outputs[0][0] != 0 or outputs[0] != outputs[1]:
                failures.append(f"{command} threads={threads}")
            per_thread.append(outputs[0])
        if per_thread[0] != per_thread[1]:
            failures.append(f"{command} differs between thread counts")
    report("AC-10", not failures, f"non-deterministic or failing: {failures or 'none'} across {len(configs)} commands")
