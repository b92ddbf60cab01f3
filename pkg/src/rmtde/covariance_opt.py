"""Input-covariance design against the deterministic-equivalent rate.

The optimal covariance of user k shares the eigenvectors of ``T_k``; its
eigenvalues are found by iterative water-filling.  At a fixed point of the
coupled system the rate depends on ``Q_k`` only through
``logdet(I + beta_k e_k T_k^{1/2} Q_k T_k^{1/2})``, so with ``e`` frozen each
user water-fills over the modes of ``T_k`` with gains ``beta_k e_k lambda_j``.
Re-solving for ``e`` and repeating gives a nondecreasing rate sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel_models import ScenarioSpec
from .det_equiv import DEFAULT_OPTIONS, SolverOptions, _shannon_from, solve_fixed_point
from .errors import ConvergenceError, ScenarioError

__all__ = ["CovarianceSolution", "waterfill_allocation", "optimize_covariance"]


def waterfill_allocation(gains, budget: float) -> np.ndarray:
    """Powers ``p_i = max(0, mu - 1/g_i)`` with ``sum p = budget``.

    The water level comes from the sorted-threshold rule, so the budget is met
    to rounding.  Equal gains give exactly ``budget / n`` each.  Zero gains
    receive no power.
    """
    g = np.asarray(gains, dtype=float).reshape(-1)
    if g.size == 0:
        raise ValueError("gains must be nonempty")
    if np.any(~np.isfinite(g)) or np.any(g < 0):
        raise ValueError("gains must be finite and nonnegative")
    if not budget > 0:
        raise ValueError("budget must be positive")
    live = np.flatnonzero(g > 0)
    if live.size == 0:
        raise ValueError("at least one gain must be positive")

    floor = 1.0 / g[live]
    order = np.argsort(floor, kind="stable")
    c = floor[order]
    # largest k whose water level clears the k-th floor
    k = c.size
    while k > 1:
        level = (budget + np.sum(c[:k] - c[0])) / k + c[0]
        if level > c[k - 1]:
            break
        k -= 1
    active = order[:k]
    base = floor[active].min()
    offsets = floor[active] - base
    p_live = np.zeros(live.size)
    p_live[active] = budget / k + (offsets.mean() - offsets)
    p = np.zeros(g.size)
    p[live] = np.clip(p_live, 0.0, None)
    return p


@dataclass(frozen=True, eq=False)
class CovarianceSolution:
    Q: tuple[np.ndarray, ...]
    powers: tuple[np.ndarray, ...]
    eigvecs: tuple[np.ndarray, ...]
    eigvals: tuple[np.ndarray, ...]
    rate: float
    iterations: int
    rate_trajectory: tuple[float, ...]

    @property
    def uniform_rate(self) -> float:
        return self.rate_trajectory[0]


def _effective_spec(spec, eigvecs, eigvals, powers) -> ScenarioSpec:
    # T^{1/2} Q T^{1/2} with Q = U diag(p) U^H is U diag(lambda p) U^H
    Ts = [(U * (lam * p)) @ U.conj().T for U, lam, p in zip(eigvecs, eigvals, powers)]
    return spec.with_transmit(Ts)


def _rate_at(spec, sigma2, opts, init):
    res = solve_fixed_point(spec, -sigma2, opts, init=init)
    if not res.state.converged:
        raise ConvergenceError(
            f"inner fixed point not converged at sigma2={sigma2} (residual {res.state.residual:.3e})",
            state=res.state,
        )
    return res, _shannon_from(res, sigma2)


def optimize_covariance(
    spec: ScenarioSpec,
    sigma2: float,
    tol: float = 1e-8,
    max_iter: int = 200,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> CovarianceSolution:
    """Iterative water-filling of each ``Q_k`` over the eigenmodes of ``T_k``.

    Starts from ``Q_k = I`` and stops once the rate gain of an outer step is
    below ``tol``.  Each ``Q_k`` has trace ``n_k``.

    Raises
    ------
    ScenarioError
        If the scenario has a LOS component or interference.
    ConvergenceError
        If an inner solve fails, the rate drops between outer steps, or
        ``max_iter`` outer steps pass without settling.
    """
    if spec.has_los or spec.has_interference:
        raise ScenarioError("covariance optimization requires Hbar = 0 and S = 0")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    sigma2 = float(sigma2)

    eigvals, eigvecs = [], []
    for u in spec.users:
        lam, U = np.linalg.eigh(u.T)
        eigvals.append(np.clip(lam, 0.0, None))
        eigvecs.append(U)
    powers = [np.ones(u.n) for u in spec.users]

    res, rate = _rate_at(_effective_spec(spec, eigvecs, eigvals, powers), sigma2, opts, None)
    trajectory = [rate]
    for it in range(1, max_iter + 1):
        e = res.state.e.real
        powers = [
            waterfill_allocation(b * ek * lam, float(u.n))
            for b, ek, lam, u in zip(spec.betas, e, eigvals, spec.users)
        ]
        init = (res.state.e, res.state.e_tilde)
        res, new_rate = _rate_at(_effective_spec(spec, eigvecs, eigvals, powers), sigma2, opts, init)
        if new_rate < rate - 1e-12 * max(1.0, abs(rate)):
            raise ConvergenceError(
                f"rate decreased at outer step {it} ({rate:.12g} -> {new_rate:.12g}); allocation oscillates"
            )
        trajectory.append(new_rate)
        gained = new_rate - rate
        rate = max(rate, new_rate)
        if gained < tol:
            break
    else:
        raise ConvergenceError(f"water-filling did not settle within {max_iter} outer steps")

    Q = tuple((U * p) @ U.conj().T for U, p in zip(eigvecs, powers))
    return CovarianceSolution(
        Q=Q,
        powers=tuple(powers),
        eigvecs=tuple(eigvecs),
        eigvals=tuple(eigvals),
        rate=float(trajectory[-1]),
        iterations=it,
        rate_trajectory=tuple(trajectory),
    )
