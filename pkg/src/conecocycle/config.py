"""TOML experiment configuration.

Layout::

    [basis]            kind = "fourier" | "chebyshev", n >= 8
    [systems.<label>]  family = "torus" | "gauss" | "cookie_cutter", plus family keys
    [env]              alphabet, law = "iid" | "periodic" | "markov", seed, law keys
    [run]              subcommand settings (all optional)

Torus keys: ``m``, ``theta1``, ``kappa = [[p, k, a, b], ...]`` for
``sum u^p (a cos 2 pi k x + b sin 2 pi k x)``. Gauss keys: ``theta``,
``i_max`` (integer or ``"auto"``), ``tail_tol``, ``kappa = [[p, m, c], ...]``
for ``sum c u^p x^m``. Cookie-cutter keys: ``branches = [{expansion =
[e0, e1], position = [p0, p1], anchor = "left" | "right"}, ...]``, ``t``,
``allow_touching``. Every system also accepts ``u``.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .basis import Basis, GridFunction
from .cocycle import IID, Cocycle, Environment, Markov, Periodic
from .errors import ValidationError
from .maps import (
    AffineBranch,
    BranchSystem,
    PolyPerturbation,
    TrigPerturbation,
    cookie_cutter,
    gauss_family,
    torus_family,
)

MIN_N = 8

_SYSTEM_KEYS = {
    "torus": {"family", "m", "theta1", "kappa", "u"},
    "gauss": {"family", "theta", "i_max", "tail_tol", "kappa", "u", "tail_correction"},
    "cookie_cutter": {"family", "branches", "t", "allow_touching", "u"},
}
_ENV_KEYS = {"alphabet", "law", "seed", "probs", "word", "matrix", "initial"}
_RUN_KEYS = {
    "u", "depth", "tol", "orbit_len", "window", "weight", "t",
    "h", "richardson", "series_tol", "observable", "annealed", "n_orbits",
    "tol_t", "bracket", "samples", "box_depth", "box_eps", "derivative",
    "k", "alpha", "sigma", "delta1", "a", "metric", "cone_samples", "cone_seed", "decay_steps", "probe",
}


def _check_keys(block: Mapping, allowed: set, where: str) -> None:
    extra = sorted(set(block) - allowed)
    if extra:
        raise ValidationError(f"{where}: unknown key(s) {extra}")


def _require(block: Mapping, key: str, where: str):
    if key not in block:
        raise ValidationError(f"{where}: missing required field '{key}'")
    return block[key]


def build_system(label: str, block: Mapping) -> BranchSystem:
    where = f"systems.{label}"
    family = _require(block, "family", where)
    if family not in _SYSTEM_KEYS:
        raise ValidationError(f"{where}: unknown family {family!r}")
    _check_keys(block, _SYSTEM_KEYS[family], where)
    u = float(block.get("u", 0.0))
    if family == "torus":
        kappa = TrigPerturbation(tuple(tuple(t) for t in block.get("kappa", [])))
        return torus_family(int(_require(block, "m", where)), kappa, float(block.get("theta1", 0.0)), u)
    if family == "gauss":
        kappa = PolyPerturbation(tuple(tuple(t) for t in block["kappa"])) if "kappa" in block else None
        i_max = block.get("i_max", "auto")
        return gauss_family(
            kappa,
            float(block.get("theta", 1.0)),
            i_max if i_max == "auto" else int(i_max),
            float(block.get("tail_tol", 1e-8)),
            u,
            tail_correction=bool(block.get("tail_correction", True)),
        )
    branches = []
    for i, b in enumerate(_require(block, "branches", where)):
        _check_keys(b, {"expansion", "position", "anchor"}, f"{where}.branches[{i}]")
        branches.append(AffineBranch(_require(b, "expansion", f"{where}.branches[{i}]"), b.get("position", 0.0), b.get("anchor", "left")))
    return cookie_cutter(branches, float(block.get("t", 1.0)), u, bool(block.get("allow_touching", False)))


def build_env(block: Mapping) -> Environment:
    where = "env"
    _check_keys(block, _ENV_KEYS, where)
    alphabet = tuple(_require(block, "alphabet", where))
    seed = _require(block, "seed", where)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ValidationError("env: field 'seed' must be an integer")
    law = block.get("law", "iid")
    if law == "iid":
        probs = block.get("probs", [1.0 / len(alphabet)] * len(alphabet))
        return Environment(alphabet, IID(tuple(probs)), seed)
    if law == "periodic":
        return Environment(alphabet, Periodic(tuple(_require(block, "word", where))), seed)
    if law == "markov":
        return Environment(alphabet, Markov(tuple(map(tuple, _require(block, "matrix", where))), tuple(_require(block, "initial", where))), seed)
    raise ValidationError(f"env: unknown law {law!r}")


@dataclass
class ExperimentConfig:
    basis: Basis
    n: int
    systems: dict
    env: Environment
    run: dict = field(default_factory=dict)
    sha256: str = ""

    def cocycle(self) -> Cocycle:
        return Cocycle(self.env, self.systems, self.basis, self.n)

    def get(self, key: str, default=None):
        return self.run.get(key, default)

    def positive(self, key: str, default: float) -> float:
        v = float(self.run.get(key, default))
        if not v > 0:
            raise ValidationError(f"run: '{key}' must be positive")
        return v

    def observable(self, key: str = "observable") -> GridFunction:
        """``observable`` is ``[[k, a, b], ...]`` (trigonometric terms) or a flat
        list of Chebyshev coefficients in ``2x - 1``."""
        block = self.run.get(key)
        if block is None:
            block = [[1, 1.0, 0.0]]
        x = GridFunction.constant(0.0, self.basis, self.n).nodes
        if len(block) and isinstance(block[0], (list, tuple)):
            v = np.zeros_like(x)
            for k, a, b in block:
                v += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
        else:
            v = np.polynomial.chebyshev.chebval(2 * x - 1, np.asarray(block, float))
        return GridFunction(self.basis, v)


def parse_config(data: Mapping, sha256: str = "") -> ExperimentConfig:
    _check_keys(data, {"basis", "systems", "env", "run"}, "config")
    basis_block = _require(data, "basis", "config")
    _check_keys(basis_block, {"kind", "n"}, "basis")
    try:
        basis = Basis(_require(basis_block, "kind", "basis"))
    except ValueError:
        raise ValidationError(f"basis: unknown kind {basis_block['kind']!r}") from None
    n = int(_require(basis_block, "n", "basis"))
    if n < MIN_N:
        raise ValidationError(f"basis: n={n} must be >= {MIN_N}")
    env = build_env(_require(data, "env", "config"))
    sys_blocks = _require(data, "systems", "config")
    missing = [a for a in env.alphabet if a not in sys_blocks]
    if missing:
        raise ValidationError(f"env: alphabet label(s) {missing} have no [systems.<label>] block")
    systems = {label: build_system(label, sys_blocks[label]) for label in env.alphabet}
    run = dict(data.get("run", {}))
    _check_keys(run, _RUN_KEYS, "run")
    if run.get("weight", "acim") not in ("acim", "geometric"):
        raise ValidationError(f"run: unknown weight {run['weight']!r}")
    if run.get("metric", "cone") not in ("cone", "orthant"):
        raise ValidationError(f"run: unknown metric {run['metric']!r}")
    return ExperimentConfig(basis, n, systems, env, run, sha256)


def load_config(path: str | Path) -> ExperimentConfig:
    raw = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ValidationError(f"cannot parse {path}: {exc}") from None
    return parse_config(data, hashlib.sha256(raw).hexdigest())
