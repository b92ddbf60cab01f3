"""JSON form of a :class:`ScenarioSpec`.

A scenario document looks like::

    {"N": 4, "seed": 7,
     "users": [{"n": 2, "R": "random", "T": {"ula": {"mean_angle": 0, "rms_spread": 5}},
                "Hbar": "zero", "fading": {"family": "lognormal", "cv": 1.0}}],
     "S": null}

Matrices are row-major lists of rows whose entries are ``[re, im]`` pairs (a
bare number is read as real).  In place of a matrix a field may name a
generator: ``"identity"``, ``"zero"``, ``"random"`` (diagonal gains for ``R``,
Gaussian entries for ``Hbar``) or ``{"ula": {...}}``.  A user may give
``"beta"`` instead of ``"n"``, in which case ``n = N / beta``; such templates
can be instantiated at several ``N``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .channel_models import FadingSpec, ScenarioSpec, build_scenario, ula_correlation
from .errors import ScenarioError

__all__ = [
    "matrix_from_json",
    "matrix_to_json",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "dump_scenario",
]


def matrix_from_json(rows) -> np.ndarray:
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise ScenarioError("a matrix must be a list of rows")
    if rows and len({len(r) for r in rows}) != 1:
        raise ScenarioError("matrix rows have unequal lengths")
    out = np.zeros((len(rows), len(rows[0]) if rows else 0), dtype=complex)
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                out[i, j] = v
            elif isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
                out[i, j] = complex(v[0], v[1])
            else:
                raise ScenarioError(f"bad matrix entry at ({i}, {j}): {v!r}")
    return out


def matrix_to_json(A: np.ndarray) -> list:
    A = np.asarray(A, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in A]


def _matrix_field(value, size: int, name: str):
    """Decode a matrix field into what :func:`build_scenario` accepts."""
    if value is None or value == "identity" and name != "Hbar":
        return None
    if value == "zero":
        if name == "Hbar":
            return None
        return np.zeros((size, size))
    if value == "random":
        if name == "T":
            raise ScenarioError("no random generator for T")
        return "random"
    if isinstance(value, dict):
        if set(value) != {"ula"} or not isinstance(value["ula"], dict):
            raise ScenarioError(f"{name}: unknown generator {value!r}")
        if name == "Hbar":
            raise ScenarioError("Hbar cannot be a ULA correlation")
        args = value["ula"]
        try:
            return ula_correlation(
                size, float(args.get("mean_angle", 0.0)), float(args["rms_spread"]), int(args.get("order", 64))
            )
        except KeyError as exc:
            raise ScenarioError(f"{name}: ula generator needs {exc}") from exc
        except ValueError as exc:
            raise ScenarioError(f"{name}: {exc}") from exc
    if isinstance(value, str):
        raise ScenarioError(f"{name}: unknown generator {value!r}")
    return matrix_from_json(value)


def scenario_from_dict(doc: dict, N: int | None = None) -> ScenarioSpec:
    """Build and normalize a scenario from its JSON document.

    ``N`` overrides the document's receive dimension.
    """
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    if N is None:
        if "N" not in doc:
            raise ScenarioError("scenario needs N")
        N = doc["N"]
    if not isinstance(N, int) or isinstance(N, bool) or N < 1:
        raise ScenarioError(f"N must be a positive integer, got {N!r}")
    users = doc.get("users")
    if not isinstance(users, list) or not users:
        raise ScenarioError("scenario needs a nonempty users list")

    dims, Rs, Ts, Hs, fadings = [], [], [], [], []
    for k, u in enumerate(users):
        if not isinstance(u, dict):
            raise ScenarioError(f"user {k} must be a JSON object")
        if "n" in u:
            n = u["n"]
        elif "beta" in u:
            ratio = N / float(u["beta"])
            n = int(round(ratio))
            if n < 1 or abs(n - ratio) > 1e-9:
                raise ScenarioError(f"user {k}: N / beta = {ratio} is not a positive integer")
        else:
            raise ScenarioError(f"user {k} needs n or beta")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ScenarioError(f"user {k}: n must be a positive integer")
        dims.append(n)
        Rs.append(_matrix_field(u.get("R"), N, "R"))
        Ts.append(_matrix_field(u.get("T"), n, "T"))
        Hs.append(_matrix_field(u.get("Hbar"), N, "Hbar"))
        try:
            fadings.append(FadingSpec.from_dict(u.get("fading", {})))
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"user {k}: {exc}") from exc

    S = doc.get("S")
    if S is not None and S != "zero":
        S = matrix_from_json(S)
    else:
        S = None
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ScenarioError("seed must be an integer")
    return build_scenario(N, dims, R=Rs, T=Ts, Hbar=Hs, S=S, fading=fadings, seed=seed)


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    """Concrete JSON document; reading it back gives the same matrices."""
    return {
        "N": spec.N,
        "users": [
            {
                "n": u.n,
                "R": matrix_to_json(u.R),
                "T": matrix_to_json(u.T),
                "Hbar": matrix_to_json(u.Hbar),
                "fading": u.fading.to_dict(),
            }
            for u in spec.users
        ],
        "S": matrix_to_json(spec.S),
    }


def load_scenario(source, N: int | None = None, base: Path | None = None) -> ScenarioSpec:
    """Scenario from a document, a path, or a path relative to ``base``."""
    if isinstance(source, dict):
        return scenario_from_dict(source, N)
    path = Path(source)
    if base is not None and not path.is_absolute():
        path = base / path
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario {path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc, N)


def dump_scenario(spec: ScenarioSpec, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(spec)) + "\n")
