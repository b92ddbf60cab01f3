"""Deterministic model inputs and random fading for the K-user Kronecker MAC.

User k sees ``H_k = R_k^{1/2} X_k T_k^{1/2} + Hbar_k`` where ``X_k`` has
i.i.d. entries ``W exp(j theta) / sqrt(n_k)``.  The receiver observes
``B_N = S + H H^H`` with ``H = [H_1 ... H_K]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy import linalg, special

from ._seeding import make_rng, trial_seed
from .errors import ScenarioError

__all__ = [
    "FadingSpec",
    "UserChannel",
    "ScenarioSpec",
    "ChannelDraw",
    "ula_correlation",
    "sample_fading",
    "cv_of",
    "build_scenario",
    "assemble_channel",
    "power_check",
    "psd_sqrt",
]

PSD_RTOL = 1e-10
FADING_FAMILIES = ("gaussian", "nakagami", "lognormal", "zero")


# ---------------------------------------------------------------------------
# Fading
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FadingSpec:
    """Law of one unscaled entry ``W exp(j theta)``, theta uniform on [0, 2pi).

    ``gaussian`` has Rayleigh amplitude (complex Gaussian entries),
    ``nakagami`` uses shape ``m >= 1/2`` (``m = inf`` gives constant amplitude) and
    ``lognormal`` uses ``W = exp(-sigma^2 + sigma Z)``.  All three have
    ``E{W^2} = 1``.  ``zero`` is a degenerate law with ``X = 0`` used to
    isolate the deterministic part of a channel.
    """

    family: str = "gaussian"
    m: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        if self.family not in FADING_FAMILIES:
            raise ValueError(f"unknown fading family {self.family!r}")
        if self.family == "nakagami":
            if self.m is None or not self.m >= 0.5:
                raise ValueError(f"Nakagami shape must be at least 0.5, got m={self.m}")
        if self.family == "lognormal":
            if self.sigma is None or not (0 < self.sigma < math.inf):
                raise ValueError(f"log-normal sigma must be positive and finite, got {self.sigma}")

    @classmethod
    def gaussian(cls) -> FadingSpec:
        return cls("gaussian")

    @classmethod
    def nakagami(cls, m: float) -> FadingSpec:
        return cls("nakagami", m=float(m))

    @classmethod
    def lognormal(cls, sigma: float) -> FadingSpec:
        return cls("lognormal", sigma=float(sigma))

    @classmethod
    def lognormal_cv(cls, cv: float) -> FadingSpec:
        """Log-normal law whose amplitude has coefficient of variation ``cv``."""
        if not cv > 0:
            raise ValueError("cv must be positive")
        return cls("lognormal", sigma=math.sqrt(math.log1p(cv * cv)))

    @classmethod
    def zero(cls) -> FadingSpec:
        return cls("zero")

    @property
    def label(self) -> str:
        if self.family == "nakagami":
            return f"nakagami_m{self.m:g}"
        if self.family == "lognormal":
            return f"lognormal_cv{cv_of(self):.3g}"
        return self.family

    def to_dict(self) -> dict:
        d = {"family": self.family}
        if self.m is not None:
            d["m"] = self.m
        if self.sigma is not None:
            d["sigma"] = self.sigma
        return d

    @classmethod
    def from_dict(cls, d: dict) -> FadingSpec:
        family = d.get("family", "gaussian")
        if family == "lognormal" and "sigma" not in d and "cv" in d:
            return cls.lognormal_cv(d["cv"])
        m = d.get("m")
        sigma = d.get("sigma")
        return cls(family, m=None if m is None else float(m), sigma=None if sigma is None else float(sigma))


def _amplitude(spec: FadingSpec, u: np.ndarray) -> np.ndarray:
    # Inverse-CDF map from uniforms.  Every family consumes the same uniforms,
    # so equal seeds give coupled draws across families.
    if spec.family == "gaussian":
        return np.sqrt(-np.log1p(-u))
    if spec.family == "nakagami":
        if math.isinf(spec.m):
            return np.ones_like(u)
        # W = sqrt(G / m), G ~ Gamma(m, 1)
        return np.sqrt(special.gammaincinv(spec.m, u) / spec.m)
    if spec.family == "lognormal":
        s = spec.sigma
        return np.exp(-s * s + s * special.ndtri(u))
    raise AssertionError(spec.family)


def _draw_entries(spec: FadingSpec, rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    if spec.family == "zero":
        return np.zeros((rows, cols), dtype=complex)
    u = rng.random((2, rows, cols))
    w = _amplitude(spec, u[0])
    return w * np.exp(2j * np.pi * u[1]) / math.sqrt(cols)


def sample_fading(spec: FadingSpec, rows: int, cols: int, seed: int) -> np.ndarray:
    """Draw a ``rows x cols`` matrix with i.i.d. entries ``W exp(j theta) / sqrt(cols)``.

    The result is a pure function of its arguments.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    return _draw_entries(spec, make_rng(seed), rows, cols)


def cv_of(spec: FadingSpec) -> float:
    """Exact coefficient of variation ``std(W) / E{W}`` of the amplitude."""
    if spec.family == "gaussian":
        return math.sqrt(4.0 / math.pi - 1.0)
    if spec.family == "nakagami":
        m = spec.m
        if math.isinf(m):
            return 0.0
        mean = math.exp(special.gammaln(m + 0.5) - special.gammaln(m) - 0.5 * math.log(m))
        return math.sqrt(max(1.0 - mean * mean, 0.0)) / mean
    if spec.family == "lognormal":
        return math.sqrt(math.expm1(spec.sigma**2))
    raise ValueError("coefficient of variation undefined for zero fading")


# ---------------------------------------------------------------------------
# Deterministic matrices
# ---------------------------------------------------------------------------


def ula_correlation(n: int, mean_angle: float, rms_spread: float, order: int = 64) -> np.ndarray:
    """Correlation of a half-wavelength ULA under a Gaussian azimuth spectrum.

    Entry ``(p, q)`` is ``E{exp(j pi (p - q) sin theta)}`` with
    ``theta ~ Normal(mean_angle, rms_spread)`` (degrees), evaluated by
    Gauss-Hermite quadrature.  The result is Hermitian Toeplitz with unit
    diagonal.

    Raises
    ------
    ValueError
        If ``n < 1``, ``rms_spread < 0``, or the quadrature has not settled
        (spread too wide for the array length).
    """
    if n < 1:
        raise ValueError("n must be positive")
    if rms_spread < 0:
        raise ValueError("rms_spread must be nonnegative")

    mu = math.radians(mean_angle)
    s = math.radians(rms_spread)
    lags = np.arange(n)

    def column(k):
        x, w = np.polynomial.hermite.hermgauss(k)
        theta = mu + math.sqrt(2.0) * s * x
        return (w / math.sqrt(math.pi)) @ np.exp(1j * math.pi * np.outer(np.sin(theta), lags))

    if s == 0.0:
        c = np.exp(1j * math.pi * lags * math.sin(mu))
    else:
        c = column(order)
        check = column(order + order // 2)
        if np.max(np.abs(c - check)) > 1e-9:
            raise ValueError(
                f"angular quadrature not converged for n={n}, rms_spread={rms_spread} deg"
            )
    c[0] = 1.0
    return linalg.toeplitz(c, c.conj())


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    """Principal square root of a Hermitian nonnegative-definite matrix."""
    if A.shape == (1, 1):
        return np.sqrt(np.maximum(A.real, 0.0)).astype(complex)
    if _is_diagonal(A):
        return np.diag(np.sqrt(np.clip(np.diag(A).real, 0.0, None))).astype(complex)
    w, V = np.linalg.eigh(A)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def _is_diagonal(A: np.ndarray) -> bool:
    return not np.any(A - np.diag(np.diag(A)))


def _as_hermitian_psd(A, size: int, name: str) -> np.ndarray:
    A = np.array(A, dtype=complex)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.shape != (size, size):
        raise ScenarioError(f"{name} must be {size}x{size}, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ScenarioError(f"{name} has non-finite entries")
    scale = np.linalg.norm(A, 2) if A.size else 0.0
    if np.max(np.abs(A - A.conj().T), initial=0.0) > 1e-8 * max(scale, 1.0):
        raise ScenarioError(f"{name} is not Hermitian")
    A = 0.5 * (A + A.conj().T)
    if scale > 0 and np.linalg.eigvalsh(A)[0] < -PSD_RTOL * scale:
        raise ScenarioError(f"{name} is not nonnegative definite")
    return A


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UserChannel:
    """Deterministic description of one user's link."""

    n: int
    R: np.ndarray
    T: np.ndarray
    Hbar: np.ndarray
    fading: FadingSpec = field(default_factory=FadingSpec)

    @property
    def has_los(self) -> bool:
        return bool(np.any(self.Hbar))

    @cached_property
    def R_sqrt(self) -> np.ndarray:
        return psd_sqrt(self.R)

    @cached_property
    def T_sqrt(self) -> np.ndarray:
        return psd_sqrt(self.T)


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Full K-user model: receive dimension ``N``, users, interference ``S``.

    The constructor checks shapes, Hermitian symmetry, nonnegativity and the
    rule that LOS with several users requires diagonal ``R_k``.  It does not
    impose the trace normalization; see :func:`build_scenario` and
    :meth:`is_normalized`.
    """

    N: int
    users: tuple[UserChannel, ...]
    S: np.ndarray | None = None

    def __post_init__(self):
        N = int(self.N)
        if N < 1:
            raise ScenarioError("N must be positive")
        if len(self.users) < 1:
            raise ScenarioError("at least one user is required")
        checked = []
        for k, u in enumerate(self.users):
            if int(u.n) < 1:
                raise ScenarioError(f"user {k}: n must be positive")
            Hbar = np.array(u.Hbar, dtype=complex)
            if Hbar.shape != (N, u.n):
                raise ScenarioError(f"user {k}: Hbar must be {N}x{u.n}, got {Hbar.shape}")
            checked.append(
                UserChannel(
                    n=int(u.n),
                    R=_as_hermitian_psd(u.R, N, f"user {k} R"),
                    T=_as_hermitian_psd(u.T, u.n, f"user {k} T"),
                    Hbar=Hbar,
                    fading=u.fading,
                )
            )
        S = np.zeros((N, N), dtype=complex) if self.S is None else _as_hermitian_psd(self.S, N, "S")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "users", tuple(checked))
        object.__setattr__(self, "S", S)
        if self.has_los and self.K > 1 and not all(_is_diagonal(u.R) for u in self.users):
            raise ScenarioError(
                "a LOS component with more than one user requires every R_k to be diagonal"
            )

    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(u.n for u in self.users)

    @property
    def n_total(self) -> int:
        return sum(self.dims)

    @property
    def betas(self) -> np.ndarray:
        return np.array([self.N / u.n for u in self.users])

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)])

    @property
    def has_los(self) -> bool:
        return any(u.has_los for u in self.users)

    @property
    def has_interference(self) -> bool:
        return bool(np.any(self.S))

    @cached_property
    def Hbar(self) -> np.ndarray:
        return np.hstack([u.Hbar for u in self.users])

    def is_normalized(self, rtol: float = PSD_RTOL) -> bool:
        N = self.N
        for u in self.users:
            if abs(np.trace(u.R).real - N) > rtol * N:
                return False
            if abs(np.trace(u.T).real - u.n) > rtol * u.n:
                return False
            if u.has_los and abs(np.linalg.norm(u.Hbar) ** 2 - N) > rtol * N:
                return False
        return True

    def with_fading(self, fading: FadingSpec | Sequence[FadingSpec]) -> ScenarioSpec:
        """Same deterministic matrices under a different fading law."""
        fadings = _broadcast(fading, self.K, "fading")
        return replace(self, users=tuple(replace(u, fading=f) for u, f in zip(self.users, fadings)))

    def with_transmit(self, T: Sequence[np.ndarray]) -> ScenarioSpec:
        """Replace each user's transmit-side matrix."""
        return replace(self, users=tuple(replace(u, T=t) for u, t in zip(self.users, T)))

    def permuted(self, order: Sequence[int]) -> ScenarioSpec:
        return replace(self, users=tuple(self.users[i] for i in order))


def _broadcast(value, K: int, name: str) -> list:
    if value is None or isinstance(value, (str, FadingSpec, np.ndarray)):
        return [value] * K
    value = list(value)
    if len(value) != K:
        raise ScenarioError(f"{name}: expected {K} entries, got {len(value)}")
    return value


MatrixInput = Union[np.ndarray, Sequence, str, None]


def build_scenario(
    N: int,
    n: Sequence[int],
    R: MatrixInput | Sequence[MatrixInput] = None,
    T: MatrixInput | Sequence[MatrixInput] = None,
    Hbar: MatrixInput | Sequence[MatrixInput] = None,
    S: np.ndarray | None = None,
    fading: FadingSpec | Sequence[FadingSpec] | None = None,
    seed: int = 0,
) -> ScenarioSpec:
    """Assemble a normalized :class:`ScenarioSpec`.

    Per-user entries of ``R``, ``T`` and ``Hbar`` may be arrays or ``None``
    (identity for ``R``/``T``, zero for ``Hbar``).  ``R`` entries may be
    ``"random"`` for a diagonal of i.i.d. uniform (0, 1] gains and ``Hbar``
    entries may be ``"random"`` for i.i.d. complex Gaussian entries; both are
    drawn from ``seed``.  Every matrix is rescaled so that ``tr R_k = N``,
    ``tr T_k = n_k`` and ``tr(Hbar_k Hbar_k^H) = N`` (when nonzero).
    """
    N = int(N)
    n = [int(v) for v in n]
    K = len(n)
    if K < 1:
        raise ScenarioError("at least one user is required")
    Rs = _broadcast(R, K, "R")
    Ts = _broadcast(T, K, "T")
    Hs = _broadcast(Hbar, K, "Hbar")
    fadings = _broadcast(fading if fading is not None else FadingSpec(), K, "fading")
    rng = make_rng(seed)

    users = []
    for k in range(K):
        Rk = Rs[k]
        if Rk is None:
            Rk = np.eye(N)
        elif isinstance(Rk, str):
            if Rk != "random":
                raise ScenarioError(f"user {k}: unknown R generator {Rk!r}")
            Rk = np.diag(1.0 - rng.random(N))
        Rk = _normalize_trace(_as_hermitian_psd(Rk, N, f"user {k} R"), N, f"user {k} R")

        Tk = np.eye(n[k]) if Ts[k] is None else Ts[k]
        Tk = _normalize_trace(_as_hermitian_psd(Tk, n[k], f"user {k} T"), n[k], f"user {k} T")

        Hk = Hs[k]
        if Hk is None:
            Hk = np.zeros((N, n[k]), dtype=complex)
        elif isinstance(Hk, str):
            if Hk != "random":
                raise ScenarioError(f"user {k}: unknown Hbar generator {Hk!r}")
            Hk = (rng.standard_normal((N, n[k])) + 1j * rng.standard_normal((N, n[k]))) / math.sqrt(2)
        Hk = np.array(Hk, dtype=complex)
        if Hk.shape != (N, n[k]):
            raise ScenarioError(f"user {k}: Hbar must be {N}x{n[k]}, got {Hk.shape}")
        power = np.linalg.norm(Hk) ** 2
        if power > 0:
            Hk = Hk * math.sqrt(N / power)
        users.append(UserChannel(n=n[k], R=Rk, T=Tk, Hbar=Hk, fading=fadings[k]))

    return ScenarioSpec(N=N, users=tuple(users), S=S)


def _normalize_trace(A: np.ndarray, target: int, name: str) -> np.ndarray:
    tr = np.trace(A).real
    if not tr > 0:
        raise ScenarioError(f"{name} has zero trace and cannot be normalized")
    return A * (target / tr)


# ---------------------------------------------------------------------------
# Random draws
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChannelDraw:
    """One realization of the channel and the matrix ``B_N = S + H H^H``."""

    X: tuple[np.ndarray, ...]
    H_blocks: tuple[np.ndarray, ...]
    S: np.ndarray

    @cached_property
    def H(self) -> np.ndarray:
        return np.hstack(self.H_blocks)

    @cached_property
    def B(self) -> np.ndarray:
        H = self.H
        B = self.S + H @ H.conj().T
        return 0.5 * (B + B.conj().T)

    @property
    def N(self) -> int:
        return self.S.shape[0]


def assemble_channel(spec: ScenarioSpec, seed: int) -> ChannelDraw:
    """Draw ``X_k`` for every user from ``seed`` and form ``H_k`` and ``B_N``."""
    rng = make_rng(seed)
    X, H = [], []
    for u in spec.users:
        Xk = _draw_entries(u.fading, rng, spec.N, u.n)
        X.append(Xk)
        H.append(u.R_sqrt @ Xk @ u.T_sqrt + u.Hbar)
    return ChannelDraw(X=tuple(X), H_blocks=tuple(H), S=spec.S)


def power_check(spec: ScenarioSpec, trials: int, seed: int) -> list[tuple[float, float]]:
    """Empirical mean of ``tr(H_k H_k^H)`` against ``tr R_k tr T_k / n_k + ||Hbar_k||_F^2``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sums = np.zeros(spec.K)
    for t in range(trials):
        draw = assemble_channel(spec, trial_seed(seed, t))
        sums += [np.linalg.norm(Hk) ** 2 for Hk in draw.H_blocks]
    out = []
    for k, u in enumerate(spec.users):
        analytic = np.trace(u.R).real * np.trace(u.T).real / u.n + np.linalg.norm(u.Hbar) ** 2
        out.append((float(sums[k] / trials), float(analytic)))
    return out
