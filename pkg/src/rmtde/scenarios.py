"""Shipped scenarios used by the validation suite and the example configs."""

from __future__ import annotations

from .channel_models import FadingSpec, ScenarioSpec
from .scenario_io import scenario_from_dict

__all__ = ["FIGURE_TEMPLATE", "figure_scenario", "default_scenarios"]

# Two users, N = n_1 = n_2, random receive gains, ULA transmit correlation.
# A 5 degree spread is the widest the angular quadrature resolves at n = 32.
FIGURE_TEMPLATE = {
    "seed": 2024,
    "users": [
        {"beta": 1, "R": "random", "T": {"ula": {"mean_angle": 0.0, "rms_spread": 5.0}}},
        {"beta": 1, "R": "random", "T": {"ula": {"mean_angle": 30.0, "rms_spread": 5.0}}},
    ],
}


def figure_scenario(N: int = 16, fading: FadingSpec | None = None) -> ScenarioSpec:
    spec = scenario_from_dict(FIGURE_TEMPLATE, N=N)
    return spec if fading is None else spec.with_fading(fading)


_DOCS = {
    "mp_beta_0.5": {"N": 8, "users": [{"n": 16}]},
    "mp_beta_1": {"N": 8, "users": [{"n": 8}]},
    "mp_beta_2": {"N": 16, "users": [{"n": 8}]},
    "mixed_correlation": {
        "N": 8,
        "seed": 11,
        "users": [
            {"n": 6, "R": "random", "T": {"ula": {"mean_angle": 10.0, "rms_spread": 10.0}}},
            {"n": 10, "R": {"ula": {"mean_angle": -20.0, "rms_spread": 15.0}}, "T": "identity"},
        ],
    },
    "los_two_users": {
        "N": 8,
        "seed": 12,
        "users": [
            {"n": 4, "R": "random", "T": {"ula": {"mean_angle": 0.0, "rms_spread": 10.0}}, "Hbar": "random"},
            {"n": 8, "R": "random", "T": {"ula": {"mean_angle": 45.0, "rms_spread": 8.0}}, "Hbar": "random"},
        ],
    },
    "los_single_user": {
        "N": 6,
        "seed": 13,
        "users": [
            {"n": 4, "R": {"ula": {"mean_angle": 15.0, "rms_spread": 12.0}}, "T": "identity", "Hbar": "random"},
        ],
    },
}


def default_scenarios() -> dict[str, ScenarioSpec]:
    """Name to scenario, in a fixed order."""
    out = {name: scenario_from_dict(doc) for name, doc in _DOCS.items()}
    out["figure_N16"] = figure_scenario(16)
    return out
