"""Deterministic equivalents of the Stieltjes and Shannon transforms of ``B_N``.

The K-user system couples the scalars ``e_i(z) = tr(R_i Psi)/N`` and
``et_i(z) = tr(T_i <Psi~>_i)/n_i`` through

    Phi~   = -1/z blockdiag((I + beta_i e_i T_i)^{-1})
    Phi    = -1/z (-S/z + sum_i et_i R_i + I)^{-1}
    Psi    = (Phi^{-1} - z Hbar Phi~ Hbar^H)^{-1}
    Psi~   = (Phi~^{-1} - z Hbar^H Phi Hbar)^{-1}

and ``(1/N) tr Psi(z)`` is the deterministic equivalent of the Stieltjes
transform of ``B_N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .channel_models import ScenarioSpec
from .errors import ConvergenceError, ScenarioError

__all__ = [
    "SolverOptions",
    "FixedPointState",
    "DetEquivResult",
    "UniquenessDiagnostic",
    "solve_fixed_point",
    "det_stieltjes",
    "det_shannon",
    "shannon_via_integral",
    "uniqueness_diagnostic",
    "moment_identity",
    "marchenko_pastur_stieltjes",
]


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 10_000
    damping: float = 0.5
    min_damping: float = 1.0 / 16
    patience: int = 5


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True, eq=False)
class FixedPointState:
    z: complex
    e: np.ndarray
    e_tilde: np.ndarray
    residual: float
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class DetEquivResult:
    """Solution of the fixed-point system at one point ``z``.

    ``Phi_tilde`` is stored block-diagonal with blocks of sizes ``n_1..n_K``.
    """

    spec: ScenarioSpec
    state: FixedPointState
    Psi: np.ndarray
    Psi_tilde: np.ndarray
    Phi: np.ndarray
    Phi_tilde: np.ndarray

    @property
    def z(self) -> complex:
        return self.state.z

    @property
    def stieltjes(self) -> complex:
        return complex(np.trace(self.Psi) / self.spec.N)

    def block(self, A: np.ndarray, k: int) -> np.ndarray:
        """The diagonal block ``<A>_k`` of an ``n x n`` matrix."""
        o = self.spec.offsets
        return A[o[k] : o[k + 1], o[k] : o[k + 1]]


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


def _check_z(z) -> complex:
    z = complex(z)
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise ValueError("z must be finite")
    if z.imag == 0.0 and z.real >= 0.0:
        raise ValueError(f"z={z} lies on the nonnegative real axis")
    return z


def _inverse(A: np.ndarray, hermitian: bool) -> np.ndarray:
    if hermitian:
        try:
            c = linalg.cho_factor(A, check_finite=False)
            return linalg.cho_solve(c, np.eye(A.shape[0]), check_finite=False)
        except linalg.LinAlgError:
            pass
    try:
        return linalg.inv(A, check_finite=False)
    except (linalg.LinAlgError, ValueError) as exc:
        raise ValueError("singular system matrix; z is not a valid evaluation point") from exc


class _System:
    """Precomputed per-scenario quantities for repeated evaluations."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.N = spec.N
        self.betas = spec.betas
        self.R = [u.R for u in spec.users]
        self.T_eig = [np.linalg.eigh(u.T) for u in spec.users]
        self.R_diag = all(not np.any(R - np.diag(np.diag(R))) for R in self.R) and not (
            spec.has_interference and np.any(spec.S - np.diag(np.diag(spec.S)))
        )
        self.los = spec.has_los
        self.Hbar = spec.Hbar
        self.S = spec.S

    def phi_tilde_blocks(self, z, e):
        out = []
        for (lam, U), b, ei in zip(self.T_eig, self.betas, e):
            out.append((U / (1.0 + b * ei * lam)) @ U.conj().T * (-1.0 / z))
        return out

    def phi(self, z, et):
        # Phi = -1/z (-S/z + sum et_i R_i + I)^{-1} = (S - z (I + sum et_i R_i))^{-1}
        if self.R_diag:
            d = np.diag(self.S) - z * (1.0 + sum(t * np.diag(R) for t, R in zip(et, self.R)))
            return np.diag(1.0 / d)
        M = self.S - z * (np.eye(self.N) + sum(t * R for t, R in zip(et, self.R)))
        return _inverse(M, hermitian=_is_neg_real(z) and _all_real(et))

    def evaluate(self, z, e, et):
        """Return (Psi, Psi_tilde, Phi, Phi_tilde, e_new, et_new)."""
        spec = self.spec
        hermitian = _is_neg_real(z) and _all_real(e) and _all_real(et)
        blocks = self.phi_tilde_blocks(z, e)
        Phi_t = linalg.block_diag(*blocks)
        Phi = self.phi(z, et)
        if self.los:
            Hb = self.Hbar
            Phi_inv = self.S - z * (np.eye(self.N) + sum(t * R for t, R in zip(et, self.R)))
            Psi = _inverse(Phi_inv - z * (Hb @ Phi_t @ Hb.conj().T), hermitian)
            Phi_t_inv = linalg.block_diag(
                *[-z * (np.eye(u.n) + b * ei * u.T) for u, b, ei in zip(spec.users, self.betas, e)]
            )
            Psi_t = _inverse(Phi_t_inv - z * (Hb.conj().T @ Phi @ Hb), hermitian)
        else:
            Psi, Psi_t = Phi, Phi_t
        o = spec.offsets
        e_new = np.array([np.sum(R * Psi.T) / self.N for R in self.R])
        et_new = np.array(
            [
                np.sum(u.T * Psi_t[o[k] : o[k + 1], o[k] : o[k + 1]].T) / u.n
                for k, u in enumerate(spec.users)
            ]
        )
        return Psi, Psi_t, Phi, Phi_t, e_new, et_new


def _is_neg_real(z: complex) -> bool:
    return z.imag == 0.0 and z.real < 0.0


def _all_real(v) -> bool:
    return not np.any(np.imag(v))


def solve_fixed_point(
    spec: ScenarioSpec,
    z,
    opts: SolverOptions = DEFAULT_OPTIONS,
    init: tuple[np.ndarray, np.ndarray] | None = None,
) -> DetEquivResult:
    """Solve the coupled system for ``e(z)``, ``et(z)`` by damped Picard iteration.

    Starts from ``e = et = -1/z`` unless ``init`` is given.  The damping is
    halved (down to ``opts.min_damping``) whenever the residual grows for
    ``opts.patience`` consecutive steps.  A run that exhausts ``max_iter``
    returns ``state.converged = False``; it never raises for that reason.
    """
    z = _check_z(z)
    system = _System(spec)
    K = spec.K
    if init is None:
        e = np.full(K, -1.0 / z)
        et = np.full(K, -1.0 / z)
    else:
        e, et = (np.asarray(v, dtype=complex).copy() for v in init)
    if _is_neg_real(z):
        # solution is real on the negative axis
        e, et = e.real.copy(), et.real.copy()

    damping = opts.damping
    prev = math.inf
    worse = 0
    residual = math.inf
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        *_, e_new, et_new = system.evaluate(z, e, et)
        if _is_neg_real(z):
            e_new, et_new = e_new.real, et_new.real
        residual = float(np.max(np.abs(e_new - e)) + np.max(np.abs(et_new - et)))
        if not np.isfinite(residual):
            break
        if residual <= opts.tol:
            e, et = e_new, et_new
            converged = True
            break
        worse = worse + 1 if residual > prev else 0
        if worse >= opts.patience and damping > opts.min_damping:
            damping = max(damping / 2, opts.min_damping)
            worse = 0
        prev = residual
        e = e + damping * (e_new - e)
        et = et + damping * (et_new - et)

    Psi, Psi_t, Phi, Phi_t, *_ = system.evaluate(z, e, et)
    state = FixedPointState(
        z=z, e=np.array(e), e_tilde=np.array(et), residual=residual, iterations=it, converged=converged
    )
    return DetEquivResult(spec=spec, state=state, Psi=Psi, Psi_tilde=Psi_t, Phi=Phi, Phi_tilde=Phi_t)


def _solve_converged(spec, z, opts) -> DetEquivResult:
    res = solve_fixed_point(spec, z, opts)
    if not res.state.converged:
        raise ConvergenceError(
            f"fixed point not converged at z={res.state.z} after {res.state.iterations} "
            f"iterations (residual {res.state.residual:.3e})",
            state=res.state,
        )
    return res


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------


def det_stieltjes(spec: ScenarioSpec, z, opts: SolverOptions = DEFAULT_OPTIONS) -> complex:
    """Deterministic equivalent ``(1/N) tr Psi(z)`` of the Stieltjes transform."""
    return _solve_converged(spec, z, opts).stieltjes


def _logdet_pd(A: np.ndarray, what: str) -> float:
    try:
        L = linalg.cholesky(0.5 * (A + A.conj().T), lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise ValueError(f"{what} is not numerically positive definite") from exc
    return 2.0 * float(np.sum(np.log(np.diag(L).real)))


def _shannon_from(res: DetEquivResult, sigma2: float) -> float:
    spec = res.spec
    e, et = res.state.e.real, res.state.e_tilde.real
    M = np.eye(spec.N) + sum(t * u.R for t, u in zip(et, spec.users))
    if spec.has_los:
        M = M + spec.Hbar @ res.Phi_tilde @ spec.Hbar.conj().T
    value = _logdet_pd(M, "receive-side matrix")
    for u, b, ei in zip(spec.users, spec.betas, e):
        value += _logdet_pd(np.eye(u.n) + b * ei * u.T, "transmit-side matrix")
    return value / spec.N - sigma2 * float(np.dot(e, et))


def det_shannon(spec: ScenarioSpec, sigma2: float, opts: SolverOptions = DEFAULT_OPTIONS) -> float:
    """Deterministic equivalent of the ergodic mutual information, nats per receive antenna.

    Evaluates

        (1/N) logdet(Phi^{-1}/s2 + Hbar Phi~ Hbar^H) + (1/N) logdet(Phi~^{-1}/s2)
        - s2 sum_i e_i et_i

    at the fixed point ``z = -s2``.  Requires ``S = 0``.
    """
    if spec.has_interference:
        raise ScenarioError("the closed-form Shannon transform requires S = 0")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    return _shannon_from(_solve_converged(spec, -float(sigma2), opts), float(sigma2))


def first_moment(spec: ScenarioSpec) -> float:
    """``(1/N) sum_k [tr T_k tr R_k / n_k + ||Hbar_k||_F^2]``, the mean eigenvalue of ``B_N``."""
    total = 0.0
    for u in spec.users:
        total += np.trace(u.T).real * np.trace(u.R).real / u.n + np.linalg.norm(u.Hbar) ** 2
    return total / spec.N


def shannon_via_integral(
    spec: ScenarioSpec,
    sigma2: float,
    opts: SolverOptions = SolverOptions(tol=1e-12),
    epsabs: float = 1e-10,
    epsrel: float = 1e-9,
    limit: int = 200,
) -> float:
    """Shannon transform as ``int_{s2}^inf (1/w - (1/N) tr Psi(-w)) dw``.

    The range is cut at ``w_max = max(1e4, 100 * mu1)`` where ``mu1`` is the
    first spectral moment; the remainder is ``mu1 / w_max`` since the
    integrand behaves as ``mu1 / w^2``.  Integration runs in ``log w``.
    """
    if spec.has_interference:
        raise ScenarioError("the Shannon transform integral requires S = 0")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    mu1 = first_moment(spec)
    w_max = max(1e4, 100.0 * mu1)
    tail = mu1 / w_max
    if sigma2 >= w_max:
        return mu1 / sigma2

    def integrand(t):
        w = math.exp(t)
        return (1.0 / w - det_stieltjes(spec, -w, opts).real) * w

    val, err = integrate.quad(
        integrand, math.log(sigma2), math.log(w_max), epsabs=epsabs, epsrel=epsrel, limit=limit
    )
    if not err <= max(10 * epsabs, 10 * epsrel * abs(val)):
        raise ConvergenceError(f"Shannon integral did not reach accuracy (estimated error {err:.2e})")
    return val + tail


# ---------------------------------------------------------------------------
# Uniqueness diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UniquenessDiagnostic:
    Gamma: np.ndarray
    spectral_radius: float
    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray

    @property
    def margins(self) -> np.ndarray:
        """``1 - u2_ii`` and ``1 - v2_ii``; positive at a valid solution."""
        return np.concatenate([1.0 - np.diag(self.u2), 1.0 - np.diag(self.v2)])


def uniqueness_diagnostic(result: DetEquivResult) -> UniquenessDiagnostic:
    """Assemble the ``4K x 4K`` matrix Gamma at a solution and its spectral radius.

    With ``Phi_z = z Phi``, ``Phi~_z = z Phi~`` and ``T_i`` embedded in
    block ``i`` of an ``n x n`` zero matrix:

        u1_ij = (1/N) tr(R_i Psi R_j Psi^H)
        u2_ij = (beta_j/N) tr(R_i Psi Hbar_j Phi~_zj T_j Phi~_zj^H Hbar_j^H Psi^H)
        v1_ij = (beta_j/n_i) tr(T_i Psi~ T_j Psi~^H)
        v2_ij = (1/n_i) tr(T_i Psi~ Hbar^H Phi_z R_j Phi_z^H Hbar Psi~^H)

    Raises
    ------
    ValueError
        If some ``1 - u2_ii`` or ``1 - v2_ii`` is not positive.
    """
    spec = result.spec
    K, N = spec.K, spec.N
    z = result.z
    o = spec.offsets
    betas = spec.betas
    Psi, Psi_t = result.Psi, result.Psi_tilde
    Phi_z = z * result.Phi
    Hb = spec.Hbar
    R = [u.R for u in spec.users]

    RPsi = [Ri @ Psi for Ri in R]
    PsiH = Psi.conj().T
    u1 = np.empty((K, K))
    u2 = np.zeros((K, K))
    v1 = np.empty((K, K))
    v2 = np.zeros((K, K))

    # T_j embedded: Psi~ T_j Psi~^H only involves columns of block j
    TPsi_t = []
    for k, u in enumerate(spec.users):
        TPsi_t.append(Psi_t[:, o[k] : o[k + 1]] @ u.T @ Psi_t[:, o[k] : o[k + 1]].conj().T)

    for j, uj in enumerate(spec.users):
        RjPsiH = R[j] @ PsiH
        if spec.has_los:
            Pt_zj = z * result.block(result.Phi_tilde, j)
            G = uj.Hbar @ Pt_zj
            Mj = G @ uj.T @ G.conj().T @ PsiH
            Lj = Hb.conj().T @ Phi_z @ R[j] @ Phi_z.conj().T @ Hb
            Wj = Psi_t @ Lj @ Psi_t.conj().T
        for i, ui in enumerate(spec.users):
            u1[i, j] = _real_trace(RPsi[i] @ RjPsiH) / N
            Ti = ui.T
            sl = slice(o[i], o[i + 1])
            v1[i, j] = betas[j] / ui.n * _real_trace(Ti @ TPsi_t[j][sl, sl])
            if spec.has_los:
                u2[i, j] = betas[j] / N * _real_trace(RPsi[i] @ Mj)
                v2[i, j] = _real_trace(Ti @ Wj[sl, sl]) / ui.n

    du = 1.0 - np.diag(u2)
    dv = 1.0 - np.diag(v2)
    if np.any(du <= 0) or np.any(dv <= 0):
        raise ValueError("1 - u2_ii or 1 - v2_ii is not positive: invalid solution")

    G11 = u2 / du[:, None]
    np.fill_diagonal(G11, 0.0)
    G12 = u1 / du[:, None]
    G22 = v2 / dv[:, None]
    np.fill_diagonal(G22, 0.0)
    G21 = v1 / dv[:, None]
    Z = np.zeros((K, K))
    az2 = abs(z) ** 2
    Gamma = np.block(
        [
            [G11, Z, Z, G12],
            [Z, G11, az2 * G12, Z],
            [Z, G21, G22, Z],
            [az2 * G21, Z, Z, G22],
        ]
    )
    rho = float(np.max(np.abs(np.linalg.eigvals(Gamma))))
    return UniquenessDiagnostic(Gamma=Gamma, spectral_radius=rho, u1=u1, u2=u2, v1=v1, v2=v2)


def _real_trace(A: np.ndarray) -> float:
    return float(np.trace(A).real)


# ---------------------------------------------------------------------------
# Moment identity
# ---------------------------------------------------------------------------


def moment_identity(
    spec: ScenarioSpec, opts: SolverOptions = SolverOptions(tol=1e-14), z2: float = 1e4
) -> dict:
    """First moment of the deterministic spectral law, by trace formula and by probe.

    ``probe`` is ``Re{-j y (j y (1/N) tr Psi(j y) + 1)}`` at ``y = z2``,
    which tends to the first moment as ``y`` grows.
    """
    z = 1j * z2
    m = det_stieltjes(spec, z, opts)
    probe = (-1j * z2 * (z * m + 1.0)).real
    return {"trace_formula": first_moment(spec), "probe": float(probe)}


# ---------------------------------------------------------------------------
# Closed-form reference
# ---------------------------------------------------------------------------


def marchenko_pastur_stieltjes(beta: float, z) -> complex:
    """Stieltjes transform of ``X X^H``, ``X`` of size ``N x n`` with i.i.d. variance ``1/n`` entries.

    ``beta = N / n``.  Root of ``beta z m^2 + (z + beta - 1) m + 1 = 0`` lying
    in the Stieltjes class (positive on the negative axis, ``Im m > 0`` for
    ``Im z > 0``).
    """
    z = _check_z(z)
    a, b, c = beta * z, z + beta - 1.0, 1.0
    disc = np.sqrt(complex(b * b - 4 * a * c))
    roots = [(-b + disc) / (2 * a), (-b - disc) / (2 * a)]
    if z.imag == 0.0:
        return max(roots, key=lambda r: r.real)
    return max(roots, key=lambda r: r.imag * math.copysign(1.0, z.imag))
