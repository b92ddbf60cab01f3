import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from rmtde.channel_models import (
    FadingSpec,
    ScenarioSpec,
    UserChannel,
    assemble_channel,
    build_scenario,
    cv_of,
    power_check,
    sample_fading,
    ula_correlation,
)
from rmtde.errors import ScenarioError


def ula_entry_oracle(lag, mean_deg, spread_deg):
    """E exp(j pi lag sin theta), theta ~ Normal, by adaptive quadrature over +-10 sigma."""
    mu, s = math.radians(mean_deg), math.radians(spread_deg)
    pdf = lambda t: math.exp(-0.5 * ((t - mu) / s) ** 2) / (s * math.sqrt(2 * math.pi))
    lo, hi = mu - 10 * s, mu + 10 * s
    re = integrate.quad(lambda t: math.cos(math.pi * lag * math.sin(t)) * pdf(t), lo, hi, epsabs=1e-13, limit=400)[0]
    im = integrate.quad(lambda t: math.sin(math.pi * lag * math.sin(t)) * pdf(t), lo, hi, epsabs=1e-13, limit=400)[0]
    return complex(re, im)


# -- ula_correlation ---------------------------------------------------------


def test_ula_scalar_is_one():
    assert np.array_equal(ula_correlation(1, 37.0, 12.0), np.ones((1, 1)))


def test_ula_zero_spread_is_rank_one_steering():
    A = ula_correlation(4, 0.0, 0.0)
    assert np.allclose(np.abs(A), 1.0)
    assert np.linalg.matrix_rank(A, tol=1e-10) == 1


@pytest.mark.parametrize("mean,spread", [(0.0, 10.0), (25.0, 4.0), (-40.0, 15.0)])
def test_ula_matches_quadrature_oracle(mean, spread):
    A = ula_correlation(4 if spread < 15 else 2, mean, spread)
    for lag in range(1, A.shape[0]):
        assert abs(A[lag, 0] - ula_entry_oracle(lag, mean, spread)) <= 1e-6


def test_ula_two_element_example():
    A = ula_correlation(2, 0.0, 10.0)
    assert abs(abs(A[0, 1]) - abs(ula_entry_oracle(1, 0.0, 10.0))) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 12), mean=st.floats(-60, 60), spread=st.floats(0, 8))
def test_ula_structure(n, mean, spread):
    A = ula_correlation(n, mean, spread)
    assert np.allclose(A, A.conj().T, atol=1e-14)
    assert np.allclose(A[1:, 1:], A[:-1, :-1], atol=1e-14)
    assert np.all(np.diag(A) == 1.0)
    assert abs(np.trace(A).real - n) <= 1e-12 * n
    assert np.linalg.eigvalsh(A)[0] >= -1e-10


def test_ula_rejects_bad_arguments():
    with pytest.raises(ValueError):
        ula_correlation(0, 0.0, 5.0)
    with pytest.raises(ValueError):
        ula_correlation(4, 0.0, -1.0)


def test_ula_unresolved_spread_raises():
    with pytest.raises(ValueError, match="quadrature"):
        ula_correlation(32, 0.0, 30.0)


# -- fading ------------------------------------------------------------------


ALL_FADINGS = [
    FadingSpec.gaussian(),
    FadingSpec.nakagami(0.5),
    FadingSpec.nakagami(0.6),
    FadingSpec.nakagami(3.0),
    FadingSpec.nakagami(math.inf),
    FadingSpec.lognormal_cv(0.5),
    FadingSpec.lognormal_cv(1.0),
]


@pytest.mark.parametrize("spec", ALL_FADINGS, ids=lambda f: f.label)
def test_second_moment_is_one(spec):
    x = sample_fading(spec, 1000, 1000, 42) * math.sqrt(1000)
    assert abs(np.mean(np.abs(x) ** 2) - 1.0) <= 0.01
    assert abs(np.mean(x)) <= 0.01


@pytest.mark.parametrize("spec", ALL_FADINGS, ids=lambda f: f.label)
def test_sample_fading_is_pure(spec):
    assert np.array_equal(sample_fading(spec, 5, 7, 3), sample_fading(spec, 5, 7, 3))
    assert not np.array_equal(sample_fading(spec, 5, 7, 3), sample_fading(spec, 5, 7, 4))


def test_sample_fading_scaling():
    x = sample_fading(FadingSpec.gaussian(), 3, 50, 0)
    assert x.shape == (3, 50)
    y = sample_fading(FadingSpec.gaussian(), 2000, 2000, 7) * math.sqrt(2000)
    assert abs(np.mean(np.abs(y) ** 2) - 1.0) <= 3 / math.sqrt(4e6)


def test_nakagami_one_is_rayleigh():
    w = np.abs(sample_fading(FadingSpec.nakagami(1.0), 1, 20000, 5)[0]) * math.sqrt(20000)
    ref = np.sqrt(np.random.default_rng(77).exponential(1.0, 20000))
    d = stats.ks_2samp(w, ref).statistic
    crit = 1.628 * math.sqrt(2 / 20000)
    assert d < crit


def test_lognormal_empirical_cv():
    for sigma in (0.3, 0.8):
        w = np.abs(sample_fading(FadingSpec.lognormal(sigma), 1, 100000, 8)[0])
        emp = w.std() / w.mean()
        assert abs(emp / math.sqrt(math.expm1(sigma**2)) - 1) <= 0.05


def test_phase_is_uniform():
    x = sample_fading(FadingSpec.lognormal_cv(1.0), 1, 50000, 2)[0]
    assert stats.kstest((np.angle(x) + math.pi) / (2 * math.pi), "uniform").pvalue > 0.001


@pytest.mark.parametrize(
    "kwargs",
    [dict(family="nakagami", m=0.4), dict(family="nakagami"), dict(family="lognormal", sigma=0.0), dict(family="rician")],
)
def test_invalid_fading_parameters(kwargs):
    with pytest.raises(ValueError):
        FadingSpec(**kwargs)


def test_fading_dict_round_trip():
    for f in ALL_FADINGS:
        assert FadingSpec.from_dict(f.to_dict()) == f
    assert FadingSpec.from_dict({"family": "lognormal", "cv": 1.0}) == FadingSpec.lognormal_cv(1.0)


# -- cv_of -------------------------------------------------------------------


def test_cv_rayleigh():
    assert cv_of(FadingSpec.gaussian()) == pytest.approx(math.sqrt(4 / math.pi - 1), abs=1e-15)
    assert cv_of(FadingSpec.gaussian()) == pytest.approx(0.5227, abs=1e-4)


def test_cv_nakagami_half():
    assert cv_of(FadingSpec.nakagami(0.5)) == pytest.approx(0.7555, abs=5e-5)


@pytest.mark.parametrize("m", [0.5, 0.6, 1.0, 2.5, 10.0])
def test_cv_nakagami_matches_scipy(m):
    d = stats.nakagami(m)
    assert cv_of(FadingSpec.nakagami(m)) == pytest.approx(d.std() / d.mean(), rel=1e-10)


def test_cv_nakagami_limits_and_monotone():
    assert cv_of(FadingSpec.nakagami(math.inf)) == 0.0
    cvs = [cv_of(FadingSpec.nakagami(m)) for m in (0.5, 1, 2, 5, 20)]
    assert all(a > b for a, b in zip(cvs, cvs[1:]))
    assert cv_of(FadingSpec.nakagami(1.0)) == pytest.approx(cv_of(FadingSpec.gaussian()), rel=1e-12)


def test_cv_lognormal():
    assert cv_of(FadingSpec.lognormal(0.7)) == pytest.approx(math.sqrt(math.expm1(0.49)), rel=1e-14)
    for cv in (0.5, 1.0, 2.0):
        assert cv_of(FadingSpec.lognormal_cv(cv)) == pytest.approx(cv, rel=1e-12)


def test_cv_zero_family_undefined():
    with pytest.raises(ValueError):
        cv_of(FadingSpec.zero())


# -- build_scenario ------------------------------------------------------------


def test_scaling_to_trace():
    sp = build_scenario(4, [3], R=[2 * np.eye(4)], T=[5 * np.eye(3)])
    assert np.allclose(sp.users[0].R, np.eye(4))
    assert np.allclose(sp.users[0].T, np.eye(3))
    assert sp.is_normalized()


def test_zero_hbar_accepted_without_los():
    sp = build_scenario(4, [2], Hbar=[np.zeros((4, 2))])
    assert not sp.has_los


def test_los_with_nondiagonal_r_rejected_for_two_users():
    R = ula_correlation(4, 0, 10)
    with pytest.raises(ScenarioError):
        build_scenario(4, [2, 2], R=[R, None], Hbar=["random", None], seed=1)
    # one user is fine
    assert build_scenario(4, [2], R=[R], Hbar=["random"], seed=1).has_los


def test_zero_trace_rejected():
    with pytest.raises(ScenarioError, match="zero trace"):
        build_scenario(3, [2], R=[np.zeros((3, 3))])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(R=[np.eye(3)]),
        dict(T=[np.eye(4)]),
        dict(Hbar=[np.ones((2, 4))]),
        dict(R=[np.array([[1, 1], [0, 1]])]),
        dict(R=[np.diag([1.0, -1.0])]),
        dict(R=["smooth"]),
    ],
)
def test_invalid_inputs_rejected(kwargs):
    with pytest.raises(ScenarioError):
        build_scenario(2, [2], **kwargs)


def test_random_generators_are_seeded():
    a = build_scenario(5, [3, 2], R=["random", "random"], Hbar=["random", "random"], seed=9)
    b = build_scenario(5, [3, 2], R=["random", "random"], Hbar=["random", "random"], seed=9)
    for ua, ub in zip(a.users, b.users):
        assert np.array_equal(ua.R, ub.R) and np.array_equal(ua.Hbar, ub.Hbar)
        assert np.all(np.diag(ua.R).real > 0)
        assert np.count_nonzero(ua.R - np.diag(np.diag(ua.R))) == 0


@settings(max_examples=30, deadline=None)
@given(
    N=st.integers(1, 6),
    n=st.lists(st.integers(1, 5), min_size=1, max_size=3),
    seed=st.integers(0, 2**32),
    los=st.booleans(),
)
def test_normalization_property(N, n, seed, los):
    g = np.random.default_rng(seed)
    Ts = []
    for nk in n:
        A = g.standard_normal((nk, nk)) + 1j * g.standard_normal((nk, nk))
        Ts.append(A @ A.conj().T + 0.1 * np.eye(nk))
    sp = build_scenario(N, n, R="random", T=Ts, Hbar="random" if los else None, seed=seed)
    for u in sp.users:
        assert abs(np.trace(u.R).real - N) <= 1e-10 * N
        assert abs(np.trace(u.T).real - u.n) <= 1e-10 * u.n
        if los:
            assert abs(np.linalg.norm(u.Hbar) ** 2 - N) <= 1e-10 * N
    assert sp.betas == pytest.approx([N / k for k in n])


def test_permuted_and_with_fading():
    sp = build_scenario(4, [2, 3], R="random", seed=2)
    p = sp.permuted([1, 0])
    assert p.dims == (3, 2)
    g = sp.with_fading(FadingSpec.nakagami(2.0))
    assert all(u.fading == FadingSpec.nakagami(2.0) for u in g.users)
    assert np.array_equal(g.users[0].R, sp.users[0].R)


# -- assemble_channel / power_check ---------------------------------------------


def test_zero_fading_leaves_deterministic_part():
    S = np.diag([0.5, 1.0, 0.0])
    sp = build_scenario(3, [2], Hbar=["random"], S=S, fading=FadingSpec.zero(), seed=4)
    d = assemble_channel(sp, 11)
    Hb = sp.users[0].Hbar
    assert np.allclose(d.B, S + Hb @ Hb.conj().T, atol=1e-14)


def test_scalar_channel():
    sp = build_scenario(1, [1])
    d = assemble_channel(sp, 5)
    assert d.B[0, 0] == pytest.approx(abs(d.X[0][0, 0]) ** 2, rel=1e-14)


def test_assemble_is_deterministic_and_psd():
    sp = build_scenario(6, [4, 3], R="random", T=[ula_correlation(4, 10, 8), None], seed=3)
    a, b = assemble_channel(sp, 123), assemble_channel(sp, 123)
    assert np.array_equal(a.B, b.B)
    assert np.array_equal(a.B, a.B.conj().T)
    assert np.linalg.eigvalsh(a.B)[0] >= -1e-12
    assert a.H.shape == (6, 7)


def test_kronecker_structure():
    R = np.diag([2.0, 1.0, 1.0])
    T = ula_correlation(2, 0, 20)
    sp = build_scenario(3, [2], R=[R], T=[T])
    d = assemble_channel(sp, 1)
    u = sp.users[0]
    assert np.allclose(d.H_blocks[0], u.R_sqrt @ d.X[0] @ u.T_sqrt)
    assert np.allclose(u.T_sqrt @ u.T_sqrt, u.T)


def test_power_check_targets():
    sp = build_scenario(8, [4, 8], R="random", seed=1)
    assert [a for _, a in power_check(sp, 1, 0)] == pytest.approx([8.0, 8.0])
    los = build_scenario(8, [4, 8], R="random", Hbar="random", seed=1)
    assert [a for _, a in power_check(los, 1, 0)] == pytest.approx([16.0, 16.0])


def test_power_check_monte_carlo():
    sp = build_scenario(8, [8], R="random", T=[ula_correlation(8, 0, 10)], seed=1)
    for emp, ana in power_check(sp, 10_000, 3):
        assert abs(emp - ana) / ana < 0.05


def test_user_channel_validation_through_spec():
    u = UserChannel(n=2, R=np.eye(3), T=np.eye(2), Hbar=np.zeros((3, 2)))
    with pytest.raises(ScenarioError):
        ScenarioSpec(N=2, users=(u,))
