"""Random environments and transfer-operator cocycles.

An :class:`Environment` assigns a system label to every integer time ``k``
(negative times included) as a deterministic function of ``(seed, k)``. A
:class:`Cocycle` pairs it with the labelled branch systems and a grid; the
operator used at time ``k`` is ``L_k = L_{tau^k omega}``. The equivariant
density satisfies ``f_{k+1} = L_k f_k / p_{k+1}`` with
``p_{k+1} = int L_k f_k``.
"""

from __future__ import annotations

import hashlib
import math
import struct
import threading
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .basis import Basis, DensitySection, GridFunction, grid, integrate
from .errors import (
    ConeViolationError,
    ContractionFailure,
    ConvergenceError,
    DepthError,
    ValidationError,
)
from .maps import BranchSystem, Weight
from .transfer import TransferOperator

NOISE_FLOOR = 1e-13


# ---------------------------------------------------------------------------
# environments


@dataclass(frozen=True)
class IID:
    probs: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in self.probs)
        if not p or min(p) < 0 or abs(sum(p) - 1.0) > 1e-12:
            raise ValidationError(f"probabilities {p} must be non-negative and sum to 1")
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class Periodic:
    word: tuple

    def __post_init__(self):
        if len(self.word) == 0:
            raise ValidationError("periodic word must be nonempty")
        object.__setattr__(self, "word", tuple(self.word))


@dataclass(frozen=True)
class Markov:
    matrix: tuple
    initial: tuple

    def __post_init__(self):
        P = np.array(self.matrix, dtype=float)
        q = np.array(self.initial, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or q.shape != (P.shape[0],):
            raise ValidationError("Markov chain needs a square matrix and a matching initial law")
        if P.min() < 0 or np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
            raise ValidationError("rows of the transition matrix must be probability vectors")
        if q.min() < 0 or abs(q.sum() - 1.0) > 1e-12:
            raise ValidationError("initial law must be a probability vector")
        object.__setattr__(self, "matrix", tuple(map(tuple, P.tolist())))
        object.__setattr__(self, "initial", tuple(q.tolist()))

    def stationary(self) -> np.ndarray:
        P = np.array(self.matrix)
        w, v = np.linalg.eig(P.T)
        pi = np.real(v[:, np.argmin(np.abs(w - 1.0))])
        return pi / pi.sum()


Law = Union[IID, Periodic, Markov]


def uniform(seed: int, k: int) -> float:
    """Counter-based uniform variate in ``[0, 1)`` from ``(seed, k)``."""
    h = hashlib.blake2b(struct.pack("<Qq", seed & 0xFFFFFFFFFFFFFFFF, k), digest_size=8).digest()
    return (int.from_bytes(h, "little") >> 11) * 2.0**-53


def _draw(cdf: np.ndarray, x: float) -> int:
    return int(min(np.searchsorted(cdf, x, side="right"), cdf.size - 1))


@dataclass(frozen=True)
class Environment:
    """Two-sided symbol sequence ``k -> alphabet[symbol(k)]``.

    * ``IID``: independent draws, ``symbol(k)`` from the variate at ``(seed, k)``;
    * ``Periodic``: ``word[(k + seed) mod len(word)]``;
    * ``Markov``: forward in time from ``initial`` at ``k = 0``, backward in
      time by the time-reversed chain of the stationary law.
    """

    alphabet: tuple
    law: Law
    seed: int
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        if not self.alphabet:
            raise ValidationError("alphabet must be nonempty")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValidationError("alphabet labels must be distinct")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ValidationError("seed must be an integer")
        m = len(self.alphabet)
        law = self.law
        if isinstance(law, IID) and len(law.probs) != m:
            raise ValidationError("probability vector length differs from alphabet size")
        if isinstance(law, Periodic):
            word = tuple(self.alphabet.index(s) if isinstance(s, str) else int(s) for s in law.word)
            if any(not 0 <= s < m for s in word):
                raise ValidationError("periodic word uses symbols outside the alphabet")
            object.__setattr__(self, "law", Periodic(word))
        if isinstance(law, Markov) and len(law.initial) != m:
            raise ValidationError("Markov chain size differs from alphabet size")

    @classmethod
    def deterministic(cls, label: str) -> "Environment":
        return cls((label,), Periodic((0,)), 0)

    def symbol(self, k: int) -> int:
        k = int(k)
        law = self.law
        if len(self.alphabet) == 1:
            return 0
        if isinstance(law, Periodic):
            return law.word[(k + self.seed) % len(law.word)]
        if isinstance(law, IID):
            return _draw(np.cumsum(law.probs), uniform(self.seed, k))
        return self._markov(k)

    def label(self, k: int) -> str:
        return self.alphabet[self.symbol(k)]

    def symbols(self, start: int, stop: int) -> list:
        """Symbols at times ``start, ..., stop - 1``."""
        return [self.symbol(k) for k in range(start, stop)]

    def _markov(self, k: int) -> int:
        law = self.law
        with self._lock:
            fwd = self._cache.setdefault("fwd", [])
            bwd = self._cache.setdefault("bwd", [])
            if not fwd:
                fwd.append(_draw(np.cumsum(law.initial), uniform(self.seed, 0)))
            if k >= 0:
                P = np.cumsum(np.array(law.matrix), axis=1)
                while len(fwd) <= k:
                    j = len(fwd)
                    fwd.append(_draw(P[fwd[-1]], uniform(self.seed, j)))
                return fwd[k]
            if "rev" not in self._cache:
                P = np.array(law.matrix)
                pi = law.stationary()
                with np.errstate(divide="ignore", invalid="ignore"):
                    rev = np.where(pi[:, None] > 0, P.T * pi[None, :] / pi[:, None], 0.0)
                self._cache["rev"] = np.cumsum(rev, axis=1)
            rev = self._cache["rev"]
            while len(bwd) < -k:
                prev = fwd[0] if not bwd else bwd[-1]
                j = -(len(bwd) + 1)
                bwd.append(_draw(rev[prev], uniform(self.seed, j)))
            return bwd[-k - 1]

    def frequencies(self, start: int, stop: int) -> np.ndarray:
        s = np.array(self.symbols(start, stop))
        return np.bincount(s, minlength=len(self.alphabet)) / max(1, s.size)


# ---------------------------------------------------------------------------
# cocycle


class Cocycle:
    """Labelled systems driven by an environment, discretized on one grid.

    Operators are built lazily and cached per ``(label, u, weight)``. ``u`` and
    ``weight`` default to each system's own values.
    """

    def __init__(self, env: Environment, systems: Mapping[str, BranchSystem], basis: Basis | str, n: int):
        missing = [a for a in env.alphabet if a not in systems]
        if missing:
            raise ValidationError(f"alphabet labels without a system: {missing}")
        self.env = env
        self.systems = dict(systems)
        self.basis = Basis(basis)
        self.n = int(n)
        self.grid = grid(self.basis, self.n)
        self._ops: dict = {}
        self._lock = threading.Lock()

    def system(self, label: str, u: Optional[float] = None, weight: Optional[Weight] = None) -> BranchSystem:
        s = self.systems[label]
        if u is not None and u != s.u:
            s = s.with_u(u)
        if weight is not None and weight != s.weight:
            s = s.with_weight(weight)
        return s

    def operator_for(self, label: str, u: Optional[float] = None, weight: Optional[Weight] = None) -> TransferOperator:
        key = (label, None if u is None else float(u), weight)
        with self._lock:
            op = self._ops.get(key)
        if op is None:
            op = TransferOperator(self.system(label, u, weight), self.basis, self.n)
            with self._lock:
                op = self._ops.setdefault(key, op)
        return op

    def operator(self, k: int, u: Optional[float] = None, weight: Optional[Weight] = None) -> TransferOperator:
        return self.operator_for(self.env.label(k), u, weight)

    def matrix(self, k: int, u: Optional[float] = None, weight: Optional[Weight] = None) -> np.ndarray:
        return self.operator(k, u, weight).matrix

    def warm(self, u=None, weight=None, workers: int = 1) -> None:
        """Assemble all operator matrices, optionally in parallel."""
        labels = list(self.env.alphabet)
        if workers > 1 and len(labels) > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(workers) as ex:
                list(ex.map(lambda a: self.operator_for(a, u, weight).matrix, labels))
        else:
            for a in labels:
                self.operator_for(a, u, weight).matrix

    def at(self, env: Environment) -> "Cocycle":
        """Same systems and grid (sharing the operator cache) over another environment."""
        c = Cocycle(env, self.systems, self.basis, self.n)
        c._ops = self._ops
        c._lock = self._lock
        return c

    def with_systems(self, systems: Mapping[str, BranchSystem]) -> "Cocycle":
        return Cocycle(self.env, systems, self.basis, self.n)


def sweep(coc: Cocycle, start: int, stop: int, u=None, weight=None, f0: Optional[np.ndarray] = None, keep_from: Optional[int] = None):
    """Normalized forward iteration from time ``start`` to ``stop``.

    Returns ``(F, logp)``: ``F[k]`` node values of ``f_k`` for
    ``keep_from <= k <= stop`` and ``logp[k] = log p_k`` for
    ``start < k <= stop``.
    """
    w = coc.grid.weights
    f = np.ones(coc.n) if f0 is None else np.array(f0, dtype=float)
    keep_from = start if keep_from is None else keep_from
    F, logp = {}, {}
    if start >= keep_from:
        F[start] = f
    for k in range(start, stop):
        g = coc.matrix(k, u, weight) @ f
        p = float(w @ g)
        if not p > 0.0 or not np.isfinite(p):
            raise ConeViolationError(f"normalization p_{k + 1} = {p:.3g} is not positive")
        f = g / p
        logp[k + 1] = math.log(p)
        if k + 1 >= keep_from:
            F[k + 1] = f
    return F, logp


def multi_start(coc: Cocycle, starts: Sequence[int], stop: int, u=None, weight=None) -> np.ndarray:
    """``f_stop`` obtained from the constant 1 at each time in ``starts``.

    All columns are advanced together; column ``i`` joins at time
    ``starts[i]``. Returns an ``(n, len(starts))`` array.
    """
    starts = list(starts)
    lo = min(starts)
    w = coc.grid.weights
    F = np.zeros((coc.n, len(starts)))
    active = np.zeros(len(starts), bool)
    for k in range(lo, stop):
        join = np.array([s == k for s in starts])
        F[:, join] = 1.0
        active |= join
        G = coc.matrix(k, u, weight) @ F[:, active]
        F[:, active] = G / (w @ G)
    F[:, np.array([s == stop for s in starts], bool)] = 1.0
    return F


def _fit_eta(diffs: np.ndarray, ref: float) -> float:
    ok = np.flatnonzero(diffs > NOISE_FLOOR * max(ref, 1.0))
    if ok.size == 0:
        return 0.0
    ok = ok[: np.argmax(np.diff(np.concatenate([ok, [ok[-1] + 2]])) > 1) + 1]  # leading run
    if ok.size < 2:
        return float(min(1.0, diffs[ok[0]] / max(ref, 1.0)))
    slope = np.polyfit(ok.astype(float), np.log(diffs[ok]), 1)[0]
    return float(math.exp(slope))


def measure_eta(coc: Cocycle, time: int = 0, steps: int = 40, u=None, weight=None) -> float:
    """Geometric rate of ``||f_time^{(j+1)} - f_time^{(j)}||`` in the depth ``j``."""
    F = multi_start(coc, [time - j for j in range(1, steps + 2)], time, u, weight)
    diffs = np.max(np.abs(np.diff(F, axis=1)), axis=0)
    return _fit_eta(diffs, float(np.max(np.abs(F[:, -1]))))


@dataclass
class CocycleResult:
    density: DensitySection
    p_log_samples: np.ndarray
    chi: float
    eta_measured: float
    residual: float
    depth: int
    times: np.ndarray

    @property
    def f0(self) -> GridFunction:
        return self.density[0] if 0 in self.density else self.density[self.density.times[-1]]


def equivariant_density(
    coc: Cocycle,
    u: Optional[float] = None,
    depth: int = 60,
    tol: float = 1e-12,
    window: tuple = (-8, 0),
    weight: Optional[Weight] = None,
) -> CocycleResult:
    """Fixed-point section ``f_k`` for ``window[0] <= k <= window[1]``.

    Each member is iterated from the constant 1 at least ``D`` steps back,
    with ``D`` doubled from ``min(depth, 16)`` up to ``depth`` until the
    depth-``D`` and depth-``D+1`` windows agree to ``tol`` in sup-norm. That
    difference is the reported ``residual``; it equals the equivariance
    defect ``||pi_k f_{k-1} - f_k||`` of the depth-``D`` section.
    """
    lo, hi = int(window[0]), int(window[1])
    if hi < lo:
        raise ValidationError("window must satisfy lo <= hi")
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    D = min(depth, 16)
    while True:
        F, logp = sweep(coc, lo - D, hi, u, weight, keep_from=lo)
        F1, _ = sweep(coc, lo - D - 1, hi, u, weight, keep_from=lo)
        resid = max(float(np.max(np.abs(F[k] - F1[k]))) for k in F)
        if resid <= tol or D >= depth:
            break
        D = min(2 * D, depth)
    eta = measure_eta(coc, lo, min(D, 40), u, weight)
    if resid > tol:
        if eta >= 1.0:
            raise ContractionFailure(f"no contraction: measured eta={eta:.3g} at depth {D}")
        raise ConvergenceError(f"fixed point not converged at depth {D}: residual {resid:.3g} > tol {tol:.3g}")
    sec = DensitySection({k: GridFunction(coc.basis, F[k]) for k in range(lo, hi + 1)}, D)
    ks = np.array(sorted(k for k in logp if k > lo))
    lp = np.array([logp[k] for k in ks])
    return CocycleResult(
        density=sec,
        p_log_samples=lp,
        chi=float(lp.mean()) if lp.size else float("nan"),
        eta_measured=eta,
        residual=resid,
        depth=D,
        times=ks,
    )


@dataclass
class ExponentEstimate:
    chi: float
    stderr: float
    log_p: np.ndarray
    depth: int
    batch: int

    def __iter__(self):
        return iter((self.chi, self.stderr))


def _batch_size(env: Environment, N: int) -> int:
    if len(env.alphabet) == 1:
        return 1
    if isinstance(env.law, Periodic):
        return len(env.law.word)
    return max(1, int(math.isqrt(N)))


def batch_stderr(x: np.ndarray, batch: int) -> float:
    """Standard error of the mean from non-overlapping batch means.

    Batch means agreeing to rounding (spread at most a few ulps) give 0.
    """
    nb = x.size // batch
    if nb < 2:
        return 0.0
    means = x[: nb * batch].reshape(nb, batch).mean(axis=1)
    if np.ptp(means) <= 8 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(means)))):
        return 0.0
    return float(np.std(means, ddof=1) / math.sqrt(nb))


def characteristic_exponent(
    coc: Cocycle,
    u: Optional[float] = None,
    weight: Optional[Weight] = None,
    orbit_len: int = 1000,
    depth: int = 60,
) -> ExponentEstimate:
    """Birkhoff average of ``log p_k``, ``k = 1..orbit_len``.

    Iteration starts from the constant 1 at time ``-depth`` (burn-in), so each
    ``f_{k-1}`` used has depth at least ``depth``.
    """
    if orbit_len < 1:
        raise ValidationError("orbit_len must be >= 1")
    _, logp = sweep(coc, -depth, orbit_len, u, weight, keep_from=orbit_len)
    lp = np.array([logp[k] for k in range(1, orbit_len + 1)])
    b = _batch_size(coc.env, orbit_len)
    return ExponentEstimate(float(lp.mean()), batch_stderr(lp, b), lp, depth, b)


@dataclass
class DecayReport:
    norms: np.ndarray  # ||L^{(n)} probe||_sup, n = 0..n_max
    slope: float
    intercept: float
    fit_window: tuple
    eta_bound: Optional[float]

    @property
    def within_bound(self) -> Optional[bool]:
        if self.eta_bound is None:
            return None
        return self.slope <= math.log(self.eta_bound) + 0.05

    @property
    def constants(self) -> dict:
        return {"C": math.exp(self.intercept) if np.isfinite(self.intercept) else 0.0, "rate": math.exp(self.slope)}


def decay_rate(
    coc: Cocycle,
    probe: GridFunction,
    n_max: int = 30,
    u: Optional[float] = None,
    eta_bound: Optional[float] = None,
    time: int = 0,
) -> DecayReport:
    """Decay of ``||L_{-1} ... L_{-n} probe||`` for a mean-zero ``probe``.

    The slope of ``log`` norms against ``n`` is fitted on ``n >= 1`` up to the
    last value above the rounding floor; it is ``-inf`` when the probe is
    annihilated at once.
    """
    if abs(integrate(probe)) > 1e-12:
        raise ValidationError(f"probe must have zero mean (got {integrate(probe):.3g})")
    if probe.basis is not coc.basis or probe.n != coc.n:
        raise ValidationError("probe grid differs from the cocycle grid")
    norms = [probe.sup()]
    for n in range(1, n_max + 1):
        v = probe.values
        for k in range(time - n, time):
            v = coc.matrix(k, u) @ v
        norms.append(float(np.max(np.abs(v))))
    norms = np.array(norms)
    floor = NOISE_FLOOR * norms[0]
    ok = [n for n in range(1, n_max + 1) if norms[n] > floor]
    run = []
    for n in ok:
        if run and n != run[-1] + 1:
            break
        run.append(n)
    if len(run) >= 2 and run[0] == 1:
        slope, icpt = np.polyfit(np.array(run, float), np.log(norms[run]), 1)
        win = (run[0], run[-1])
    elif run and run[0] == 1:
        slope, icpt = math.log(norms[1] / norms[0]), math.log(norms[0])
        win = (1, 1)
    else:
        slope, icpt, win = -math.inf, -math.inf, (0, 0)
    return DecayReport(norms, float(slope), float(icpt), win, eta_bound)
