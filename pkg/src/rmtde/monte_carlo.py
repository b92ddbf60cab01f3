"""Empirical spectral quantities of ``B_N`` over seeded ensembles."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._seeding import trial_seed
from .channel_models import ChannelDraw, FadingSpec, ScenarioSpec, assemble_channel
from .errors import TrialError

__all__ = [
    "ESD",
    "EnsembleResult",
    "empirical_stieltjes",
    "empirical_mutual_info",
    "esd",
    "run_ensemble",
    "distribution_gap",
]

QUANTITIES = ("mutual_info", "stieltjes")


def _hermitian_eigvals(B: np.ndarray) -> np.ndarray:
    B = np.asarray(B)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(np.max(np.abs(B), initial=0.0), 1.0)
    if np.max(np.abs(B - B.conj().T), initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian")
    return np.linalg.eigvalsh(B)


def _stieltjes_from_eigs(eigs: np.ndarray, z) -> np.ndarray | complex:
    z = np.asarray(z, dtype=complex)
    if np.any((z.imag == 0) & (z.real >= 0)):
        raise ValueError("z must lie off the nonnegative real axis")
    m = np.mean(1.0 / (eigs[:, None] - z.reshape(-1)[None, :]), axis=0)
    return complex(m[0]) if z.ndim == 0 else m.reshape(z.shape)


def empirical_stieltjes(B: np.ndarray, z) -> complex | np.ndarray:
    """``(1/N) tr (B - z I)^{-1}`` from the eigenvalues of ``B``.

    ``z`` may be an array, in which case one eigendecomposition serves every point.
    """
    return _stieltjes_from_eigs(_hermitian_eigvals(B), z)


def _mutual_info_grid(draw: ChannelDraw, sigma2s: np.ndarray) -> np.ndarray:
    H = draw.H
    N = H.shape[0]
    HH = H @ H.conj().T
    HH = 0.5 * (HH + HH.conj().T)
    if not np.any(draw.S):
        lam = np.clip(np.linalg.eigvalsh(HH), 0.0, None)
        return np.log1p(lam[None, :] / sigma2s[:, None]).sum(axis=1) / N
    base = np.eye(N) + draw.S
    ref = np.linalg.slogdet(base)[1]
    out = np.array([np.linalg.slogdet(base + HH / s2)[1] - ref for s2 in sigma2s]) / N
    return np.clip(out, 0.0, None)


def empirical_mutual_info(draw: ChannelDraw, sigma2: float) -> float:
    """Per-antenna mutual information of one draw, in nats.

    ``(1/N) logdet(I + H H^H / s2)`` when ``S = 0``, otherwise
    ``(1/N) [logdet(I + S + H H^H / s2) - logdet(I + S)]``.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    return float(_mutual_info_grid(draw, np.array([float(sigma2)]))[0])


@dataclass(frozen=True, eq=False)
class ESD:
    """Empirical spectral distribution: sorted eigenvalues and the step CDF."""

    eigenvalues: np.ndarray

    def cdf(self, lam):
        counts = np.searchsorted(self.eigenvalues, lam, side="right")
        return counts / self.eigenvalues.size

    def __call__(self, lam):
        return self.cdf(lam)

    @property
    def mean(self) -> float:
        return float(np.mean(self.eigenvalues))


def esd(B: np.ndarray) -> ESD:
    return ESD(np.sort(_hermitian_eigvals(B)))


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    quantity: str
    grid: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    trials: int
    master_seed: int
    samples: np.ndarray | None = None

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    @property
    def stderr(self) -> np.ndarray:
        return self.std / np.sqrt(self.trials)

    def seeds(self) -> list[int]:
        return [trial_seed(self.master_seed, t) for t in range(self.trials)]


def _welford(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # fixed trial order, so serial and threaded runs agree bitwise
    mean = np.zeros(samples.shape[1], dtype=samples.dtype)
    m2 = np.zeros(samples.shape[1])
    for k, x in enumerate(samples, start=1):
        delta = x - mean
        mean = mean + delta / k
        m2 = m2 + (np.conj(delta) * (x - mean)).real
    n = samples.shape[0]
    var = m2 / (n - 1) if n > 1 else np.zeros_like(m2)
    return mean, np.clip(var, 0.0, None)


def _trial_values(spec, quantity, grid, master_seed, t):
    try:
        draw = assemble_channel(spec, trial_seed(master_seed, t))
        if quantity == "mutual_info":
            return _mutual_info_grid(draw, grid)
        return _stieltjes_from_eigs(np.linalg.eigvalsh(draw.B), grid)
    except Exception as exc:  # attach the trial index
        raise TrialError(t, str(exc)) from exc


def run_ensemble(
    spec: ScenarioSpec,
    quantity: str,
    grid: Sequence,
    trials: int,
    master_seed: int,
    threads: int = 1,
    keep_samples: bool = False,
) -> EnsembleResult:
    """Mean and variance of ``quantity`` at each grid point over ``trials`` draws.

    ``grid`` holds noise variances ``sigma2`` for ``"mutual_info"`` and
    evaluation points ``z`` for ``"stieltjes"``.  Trial ``t`` uses seed
    ``trial_seed(master_seed, t)``; results do not depend on ``threads``.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"quantity must be one of {QUANTITIES}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    dtype = float if quantity == "mutual_info" else complex
    grid = np.asarray(grid, dtype=dtype).reshape(-1)
    if quantity == "mutual_info" and np.any(grid <= 0):
        raise ValueError("sigma2 grid must be positive")

    samples = np.empty((trials, grid.size), dtype=dtype)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = pool.map(lambda t: _trial_values(spec, quantity, grid, master_seed, t), range(trials))
            for t, row in enumerate(rows):
                samples[t] = row
    else:
        for t in range(trials):
            samples[t] = _trial_values(spec, quantity, grid, master_seed, t)

    mean, var = _welford(samples)
    return EnsembleResult(
        quantity=quantity,
        grid=grid,
        mean=mean,
        variance=var,
        trials=trials,
        master_seed=int(master_seed),
        samples=samples if keep_samples else None,
    )


def distribution_gap(spec: ScenarioSpec, z, trials: int, master_seed: int) -> dict:
    """Paired-seed difference of mean empirical Stieltjes transforms.

    Compares the scenario's own fading law against complex Gaussian fading
    with the same deterministic matrices; trial ``t`` feeds the same seed to
    both samplers.  Returns ``gap = |mean difference|`` and its standard error.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gauss = spec.with_fading(FadingSpec.gaussian())
    diffs = np.empty(trials, dtype=complex)
    own = np.empty(trials, dtype=complex)
    for t in range(trials):
        seed = trial_seed(master_seed, t)
        m1 = empirical_stieltjes(assemble_channel(spec, seed).B, z)
        m0 = empirical_stieltjes(assemble_channel(gauss, seed).B, z)
        own[t] = m1
        diffs[t] = m1 - m0
    mean_diff = complex(np.mean(diffs))
    stderr = float(np.std(diffs, ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return {
        "gap": abs(mean_diff),
        "stderr": stderr,
        "mean": complex(np.mean(own)),
        "mean_gaussian": complex(np.mean(own - diffs)),
    }
