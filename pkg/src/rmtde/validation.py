"""Invariant suite behind ``rmtde validate``.

Each check raises :class:`ValidationFailure` with a message naming the
scenario and grid point at fault.  :func:`run_validation` stops at the first
failure.
"""

from __future__ import annotations

import math
from typing import Callable, Iterator

import numpy as np

from . import channel_models as cm
from . import covariance_opt as co
from . import det_equiv as de
from . import monte_carlo as mc
from ._seeding import trial_seed
from .errors import ValidationFailure
from .scenarios import default_scenarios, figure_scenario

__all__ = ["checks", "run_validation"]

SIGMA2_GRID = (1e-2, 0.1, 1.0, 10.0)
FD_GRID = (0.5, 1.0, 2.0, 5.0)
TIGHT = de.SolverOptions(tol=1e-13)


def _require(cond, msg: str) -> None:
    if not cond:
        raise ValidationFailure(msg)


# -- channel models ---------------------------------------------------------


def _check_ula():
    for n, mean, spread in [(1, 0, 0), (4, 0, 0), (8, 20, 10), (16, -30, 5), (32, 0, 5)]:
        A = cm.ula_correlation(n, mean, spread)
        where = f"ula(n={n}, mean={mean}, spread={spread})"
        _require(np.allclose(A, A.conj().T, atol=1e-14, rtol=0), f"{where}: not Hermitian")
        _require(np.allclose(A[1:, 1:], A[:-1, :-1], atol=1e-14, rtol=0), f"{where}: not Toeplitz")
        _require(np.all(np.diag(A) == 1.0), f"{where}: diagonal not 1")
        _require(np.linalg.eigvalsh(A)[0] >= -1e-10, f"{where}: not PSD")


def _check_normalization(scenarios):
    for name, sp in scenarios.items():
        _require(sp.is_normalized(), f"{name}: trace normalization violated")


FADINGS = (
    cm.FadingSpec.gaussian(),
    cm.FadingSpec.nakagami(0.6),
    cm.FadingSpec.nakagami(1.0),
    cm.FadingSpec.lognormal_cv(1.0),
)


def _check_fading():
    for f in FADINGS:
        a = cm.sample_fading(f, 8, 8, 1234)
        b = cm.sample_fading(f, 8, 8, 1234)
        _require(np.array_equal(a, b), f"{f.label}: sample_fading not reproducible")
        x = cm.sample_fading(f, 1000, 1000, 99) * math.sqrt(1000)
        p = float(np.mean(np.abs(x) ** 2))
        _require(abs(p - 1.0) <= 0.01, f"{f.label}: second moment {p:.4f} not within 1% of 1")
    cvs = [cm.cv_of(cm.FadingSpec.nakagami(m)) for m in (0.5, 1, 2, 5, 20)]
    _require(all(a > b for a, b in zip(cvs, cvs[1:])), f"Nakagami CV not decreasing in m: {cvs}")


def _check_assemble(scenarios):
    for name, sp in scenarios.items():
        a, b = cm.assemble_channel(sp, 5), cm.assemble_channel(sp, 5)
        _require(np.array_equal(a.B, b.B), f"{name}: assemble_channel not reproducible")
        _require(np.linalg.eigvalsh(a.B)[0] >= -1e-10 * max(1.0, np.linalg.norm(a.B, 2)), f"{name}: B not PSD")


# -- deterministic equivalents ---------------------------------------------


def _check_solutions(scenarios):
    for name, sp in scenarios.items():
        for s2 in SIGMA2_GRID:
            where = f"{name} at sigma2={s2}"
            res = de.solve_fixed_point(sp, -s2)
            st = res.state
            _require(st.converged, f"{where}: fixed point not converged")
            _require(np.all(st.e.real > 0) and np.all(st.e_tilde.real > 0), f"{where}: e or e_tilde not positive")
            m = res.stieltjes.real
            _require(0 < m < 1 / s2, f"{where}: stieltjes {m} outside (0, 1/sigma2)")
            e_re = np.array([np.trace(u.R @ res.Psi).real / sp.N for u in sp.users])
            _require(np.max(np.abs(e_re - st.e.real)) <= 2 * de.DEFAULT_OPTIONS.tol, f"{where}: not self-consistent")
            try:
                diag = de.uniqueness_diagnostic(res)
            except ValueError as exc:
                raise ValidationFailure(f"{where}: {exc}") from exc
            _require(np.all(diag.margins > 0), f"{where}: 1 - u2_ii or 1 - v2_ii not positive")
            _require(diag.spectral_radius < 1, f"{where}: spectral radius {diag.spectral_radius:.6f} >= 1")


def _check_permutation(scenarios):
    tol = de.DEFAULT_OPTIONS.tol
    for name, sp in scenarios.items():
        if sp.K < 2:
            continue
        order = list(range(sp.K))[::-1]
        a = de.solve_fixed_point(sp, -1.0).state
        b = de.solve_fixed_point(sp.permuted(order), -1.0).state
        ok = np.max(np.abs(a.e[order] - b.e)) <= 10 * tol and np.max(np.abs(a.e_tilde[order] - b.e_tilde)) <= 10 * tol
        _require(ok, f"{name}: solution not invariant under user permutation")


def _check_shannon(scenarios):
    for name, sp in scenarios.items():
        if sp.has_interference:
            continue
        for s2 in (0.1, 1.0):
            a = de.det_shannon(sp, s2)
            b = de.shannon_via_integral(sp, s2)
            _require(abs(a - b) <= 1e-3 * max(abs(a), 1e-300), f"{name} at sigma2={s2}: closed form {a} vs integral {b}")


def _check_derivative(scenarios):
    for name, sp in scenarios.items():
        if sp.has_interference:
            continue
        for s2 in FD_GRID:
            target = de.det_stieltjes(sp, -s2, TIGHT).real - 1 / s2
            errs = []
            for h in (1e-2, 5e-3):
                fd = (de.det_shannon(sp, s2 + h, TIGHT) - de.det_shannon(sp, s2 - h, TIGHT)) / (2 * h)
                errs.append(abs(fd - target))
            _require(errs[1] * 3.5 <= errs[0], f"{name} at sigma2={s2}: finite-difference error ratio {errs[0] / errs[1]:.2f} < 3.5")


def _check_mp():
    for beta, (N, n) in {0.5: (8, 16), 1.0: (8, 8), 2.0: (16, 8)}.items():
        sp = cm.build_scenario(N, [n])
        for s2 in SIGMA2_GRID:
            got = de.det_stieltjes(sp, -s2)
            ref = de.marchenko_pastur_stieltjes(beta, -s2)
            _require(abs(got - ref) <= 1e-6, f"MP beta={beta} at sigma2={s2}: {got} vs {ref}")


def _check_moments(scenarios):
    for name, sp in scenarios.items():
        mi = de.moment_identity(sp)
        want = 2 * sp.K if sp.has_los else sp.K
        _require(abs(mi["trace_formula"] - want) <= 1e-10 * want, f"{name}: trace formula {mi['trace_formula']} != {want}")
        _require(abs(mi["probe"] - want) <= 1e-3 * want, f"{name}: probe {mi['probe']} not within 1e-3 of {want}")


# -- Monte Carlo -------------------------------------------------------------


def _check_draw_properties(scenarios):
    z = np.array([-1.0 + 0.5j, 0.3 + 1j, 5.0 + 0.01j])
    s2 = np.logspace(-3, 2, 12)
    for name, sp in scenarios.items():
        draw = cm.assemble_channel(sp, 17)
        m = mc.empirical_stieltjes(draw.B, z)
        _require(np.all(m.imag > 0), f"{name}: empirical Stieltjes has Im <= 0 above the real axis")
        if not sp.has_interference:
            v = [mc.empirical_mutual_info(draw, s) for s in s2]
            _require(all(a >= b for a, b in zip(v, v[1:])), f"{name}: mutual information increases with sigma2")


def _check_trace_mean(scenarios):
    for name, sp in scenarios.items():
        if sp.has_interference:
            continue
        seeds = (trial_seed(3, t) for t in range(2000))
        vals = np.array([np.trace(cm.assemble_channel(sp, s).B).real / sp.N for s in seeds])
        want = 2 * sp.K if sp.has_los else sp.K
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        _require(abs(vals.mean() - want) <= 3 * se, f"{name}: mean (1/N)tr B = {vals.mean():.4f}, expected {want}")


def _check_ensembles():
    sp = default_scenarios()["mp_beta_1"]
    a = mc.run_ensemble(sp, "mutual_info", [0.1, 1.0], 50, 9)
    b = mc.run_ensemble(sp, "mutual_info", [0.1, 1.0], 50, 9)
    _require(np.array_equal(a.mean, b.mean) and np.array_equal(a.variance, b.variance), "run_ensemble not reproducible")
    _require(np.all(a.variance >= 0), "negative ensemble variance")
    s2 = 10 ** (-30 / 10)
    for f in (cm.FadingSpec.gaussian(), cm.FadingSpec.lognormal_cv(1.0), cm.FadingSpec.nakagami(0.6)):
        var = [mc.run_ensemble(figure_scenario(N, f), "mutual_info", [s2], 2000, 21).variance[0] for N in (4, 16)]
        _require(var[1] < var[0], f"{f.label}: variance at N=16 ({var[1]:.4g}) not below N=4 ({var[0]:.4g})")


# -- covariance --------------------------------------------------------------


def _check_covariance(scenarios):
    for name, sp in scenarios.items():
        if sp.has_los or sp.has_interference:
            continue
        sol = co.optimize_covariance(sp, 1.0)
        traj = np.array(sol.rate_trajectory)
        _require(np.all(np.diff(traj) >= -1e-12), f"{name}: rate trajectory decreases")
        _require(sol.rate >= sol.uniform_rate - 1e-12, f"{name}: optimized rate below uniform")
        for k, (Q, u) in enumerate(zip(sol.Q, sp.users)):
            c = np.linalg.norm(Q @ u.T - u.T @ Q)
            _require(c <= 1e-10 * np.linalg.norm(u.T, 2) * np.linalg.norm(Q, 2), f"{name} user {k}: Q does not commute with T")
            _require(abs(np.trace(Q).real - u.n) <= 1e-10 * u.n, f"{name} user {k}: tr Q != n")
        other = co.optimize_covariance(sp.with_fading(cm.FadingSpec.lognormal_cv(2.0)), 1.0)
        same = other.rate == sol.rate and all(np.array_equal(a, b) for a, b in zip(other.Q, sol.Q))
        _require(same, f"{name}: covariance depends on the fading family")


def checks(scenarios=None) -> Iterator[tuple[str, Callable[[], None]]]:
    sc = default_scenarios() if scenarios is None else scenarios
    yield "ula correlation structure", _check_ula
    yield "scenario normalization", lambda: _check_normalization(sc)
    yield "fading samplers", _check_fading
    yield "channel assembly", lambda: _check_assemble(sc)
    yield "fixed-point solutions and uniqueness", lambda: _check_solutions(sc)
    yield "user permutation invariance", lambda: _check_permutation(sc)
    yield "Marchenko-Pastur oracle", _check_mp
    yield "Shannon closed form vs integral", lambda: _check_shannon(sc)
    yield "Shannon derivative identity", lambda: _check_derivative(sc)
    yield "first-moment identity", lambda: _check_moments(sc)
    yield "per-draw spectral properties", lambda: _check_draw_properties(sc)
    yield "mean trace of B", lambda: _check_trace_mean(sc)
    yield "ensemble reproducibility and variance trend", _check_ensembles
    yield "covariance optimization", lambda: _check_covariance(sc)


def run_validation(scenarios=None, log: Callable[[str], None] = lambda s: None) -> int:
    """Run every check; returns the number passed or raises on the first failure."""
    count = 0
    for name, fn in checks(scenarios):
        try:
            fn()
        except ValidationFailure as exc:
            raise ValidationFailure(f"{name}: {exc}") from exc
        log(f"ok  {name}")
        count += 1
    return count
