"""Linear response of equivariant densities.

At the fixed point the derivative of the normalized map is the operator

    (Q z)_k = (L_{k-1} z_{k-1} - (int L_{k-1} z_{k-1}) f_k) / p_k,

which for the natural (a.c.i.m.) weight reduces to
``L_{k-1} z_{k-1} - (int z_{k-1}) f_k``. The parameter derivative of the
density section solves ``(1 - Q) D_u f = P`` with
``P_k = d_u L_{k-1} f_{k-1}``; its Neumann series gives the quenched
response formula

    D_u int psi f_0 = sum_n int psi L_{-1} ... L_{-n} P_{-n} dm,

evaluated here in dual form by pulling ``psi`` back with transposed matrices.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .basis import GridFunction, integrate
from .cocycle import Cocycle, CocycleResult, Environment, batch_stderr, equivariant_density
from .errors import ContractionFailure, ConvergenceError, DepthError, DerivativeInconsistencyError, ValidationError

P_MEAN_TOL = 5e-9
MIN_TERMS = 4


class FixedPoint:
    """Equivariant density of ``coc`` at ``u`` with an extendable window ending at ``time``."""

    def __init__(self, coc: Cocycle, u: Optional[float] = None, time: int = 0, depth: int = 60, tol: float = 1e-13, span: int = 32):
        self.coc, self.u, self.time, self.depth, self.tol = coc, u, time, depth, tol
        self.result: Optional[CocycleResult] = None
        self.ensure(time - span)

    def ensure(self, lo: int) -> CocycleResult:
        if self.result is None or lo < self.result.density.times[0]:
            span = self.time - lo
            if self.result is not None:
                span = max(span, 2 * (self.time - self.result.density.times[0]))
            self.result = equivariant_density(self.coc, self.u, self.depth, self.tol, (self.time - span, self.time))
        return self.result

    def f(self, k: int) -> np.ndarray:
        if k > self.time:
            raise DepthError(f"time {k} lies after the window end {self.time}")
        return self.ensure(k).density[k].values

    def p(self, k: int) -> float:
        """Normalization factor ``p_k = int L_{k-1} f_{k-1}``."""
        return float(self.coc.grid.weights @ (self.A(k - 1) @ self.f(k - 1)))

    def A(self, k: int) -> np.ndarray:
        return self.coc.matrix(k, self.u)

    def dA(self, k: int) -> np.ndarray:
        return self.coc.operator(k, self.u).u_derivative_matrix

    @property
    def eta(self) -> float:
        return self.result.eta_measured

    @property
    def natural(self) -> bool:
        return all(self.coc.system(a, self.u).weight.kind == "acim" for a in self.coc.env.alphabet)


def _fixed_point(coc_or_fp, u=None, time: int = 0) -> FixedPoint:
    if isinstance(coc_or_fp, FixedPoint):
        return coc_or_fp
    return FixedPoint(coc_or_fp, u, time)


def _section(z) -> Callable[[int], np.ndarray]:
    if isinstance(z, GridFunction):
        return lambda k: z.values
    if callable(z):
        return lambda k: np.asarray(getattr(z(k), "values", z(k)), dtype=float)
    raise ValidationError("z must be a GridFunction or a callable k -> GridFunction")


def _q(fp: FixedPoint, k: int, v: np.ndarray) -> np.ndarray:
    """``(Q z)_k`` from ``v = z_{k-1}``."""
    w = fp.coc.grid.weights
    Lz = fp.A(k - 1) @ v
    if fp.natural:
        return Lz - float(w @ v) * fp.f(k)
    return (Lz - float(w @ Lz) * fp.f(k)) / fp.p(k)


def q_apply(coc, u: Optional[float], z: GridFunction, k: int = 0) -> GridFunction:
    """``(Q z)_k = L_{k-1} z - (int z) f_k`` (natural weight; general form otherwise).

    ``coc`` may be a :class:`Cocycle` or a prepared :class:`FixedPoint`.
    """
    fp = _fixed_point(coc, u, max(k, 0))
    return z.like(_q(fp, k, z.values))


def q_power_apply(coc, u: Optional[float], z: GridFunction, n: int, k: int = 0) -> GridFunction:
    """``(Q^n z)_k`` for the constant section ``z``."""
    fp = _fixed_point(coc, u, max(k, 0))
    v = z.values
    for j in range(k - n + 1, k + 1):
        v = _q(fp, j, v)
    return z.like(v)


def p_apply(coc, u: Optional[float] = None, k: int = 0, check: bool = True) -> GridFunction:
    """``P_k = d_u L_{k-1} f_{k-1}``.

    For the natural weight its integral vanishes; a defect above ``5e-9``
    raises :class:`DerivativeInconsistencyError` when ``check`` is set.
    """
    fp = _fixed_point(coc, u, max(k, 0))
    return GridFunction(fp.coc.basis, _p(fp, k, check))


def _p(fp: FixedPoint, k: int, check: bool = True) -> np.ndarray:
    v = fp.dA(k - 1) @ fp.f(k - 1)
    w = fp.coc.grid.weights
    if fp.natural:
        if check and abs(float(w @ v)) > P_MEAN_TOL:
            raise DerivativeInconsistencyError(f"int d_uL f = {float(w @ v):.3g} exceeds {P_MEAN_TOL:g}")
        return v
    # general weights: derivative of the normalized map
    return (v - float(w @ v) * fp.f(k)) / fp.p(k)


@dataclass
class ResolventResult:
    value: GridFunction
    terms: int
    truncation_bound: float


def _resolvent(fp: FixedPoint, zsec, k: int, tol: float, n0: int = 8, n_max: int = 4096) -> ResolventResult:
    eta = fp.eta
    if eta >= 1.0:
        raise ContractionFailure(f"measured eta={eta:.3g} >= 1")
    prev = None
    N = n0
    while True:
        W = zsec(k - N).copy()
        for j in range(k - N + 1, k + 1):
            W = _q(fp, j, W) + zsec(j)
        if prev is not None:
            diff = float(np.max(np.abs(W - prev)))
            bound = diff / (1.0 - eta ** (N // 2)) if eta > 0 else diff
            if bound < tol:
                return ResolventResult(GridFunction(fp.coc.basis, W), N, bound)
        if N >= n_max:
            raise ConvergenceError(f"resolvent series not converged with {N} terms")
        prev = W
        N *= 2


def resolvent_apply(coc, u: Optional[float], z, tol: float = 1e-10, k: int = 0) -> GridFunction:
    """``((1 - Q)^{-1} z)_k = sum_n (Q^n z)_k`` for a mean-zero section ``z``.

    ``z`` is a GridFunction (the constant section) or a callable of the time.
    The number of terms is doubled until two successive truncations agree
    within ``tol`` (after a geometric tail correction with the measured rate).
    """
    fp = _fixed_point(coc, u, max(k, 0))
    zsec = _section(z)
    m = integrate(GridFunction(fp.coc.basis, zsec(k)))
    if abs(m) > 1e-10:
        raise ValidationError(f"resolvent input must have zero mean (got {m:.3g})")
    return _resolvent(fp, zsec, k, tol).value


def density_derivative(coc, u: Optional[float] = None, tol: float = 1e-10, k: int = 0) -> ResolventResult:
    """``D_u f_k = ((1 - Q)^{-1} P)_k`` with its truncation data."""
    fp = _fixed_point(coc, u, max(k, 0))
    return _resolvent(fp, lambda j: _p(fp, j), k, tol)


def implicit_residual(coc, u: Optional[float] = None, tol: float = 1e-10, k: int = 0) -> float:
    """``||D_u f_k - (Q D_u f)_k - P_k||_sup`` with both derivatives computed independently."""
    fp = _fixed_point(coc, u, max(k, 0))
    d0 = density_derivative(fp, tol=tol, k=k).value.values
    d1 = density_derivative(fp, tol=tol, k=k - 1).value.values
    return float(np.max(np.abs(d0 - _q(fp, k, d1) - _p(fp, k))))


# ---------------------------------------------------------------------------
# quenched and annealed response


@dataclass
class ResponseReport:
    observable: GridFunction
    series_value: float
    terms: np.ndarray  # partial sums
    truncation_N: int
    truncation_bound: float
    fd_value: float = float("nan")
    fd_step: float = float("nan")
    rel_error: float = float("nan")
    annealed_value: Optional[float] = None
    stderr: Optional[float] = None
    fd_flag: str = ""
    eta_measured: float = float("nan")
    term_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def summary(self) -> dict:
        return {
            "series_value": self.series_value,
            "fd_value": self.fd_value,
            "rel_error": self.rel_error,
            "truncation_N": self.truncation_N,
            "truncation_bound": self.truncation_bound,
            "h": self.fd_step,
            "annealed_value": self.annealed_value,
            "stderr": self.stderr,
            "eta_measured": self.eta_measured,
            "fd_flag": self.fd_flag,
        }


def _observable_value(coc: Cocycle, u: float, psi: GridFunction, time: int, tol: float, depth: int) -> float:
    r = equivariant_density(coc, u, depth, tol, (time, time))
    return integrate(psi * r.density[time])


def fd_response(coc: Cocycle, u0: float, psi: GridFunction, h: float = 1e-3, time: int = 0, tol: float = 1e-14, depth: int = 400, richardson: bool = False) -> float:
    """Central difference of ``u -> int psi f_time(u)`` with the environment frozen."""

    def central(step):
        up = _observable_value(coc, u0 + step, psi, time, tol, depth)
        dn = _observable_value(coc, u0 - step, psi, time, tol, depth)
        return (up - dn) / (2.0 * step)

    d = central(h)
    if richardson:
        d = (4.0 * central(h / 2.0) - d) / 3.0
    return d


def _series(fp: FixedPoint, psi: GridFunction, tol: float, k: int, n_max: int = 4096):
    """Terms ``int psi L^{(n)} P_{k-n}`` until the geometric tail bound is below ``tol``."""
    eta = fp.eta
    if eta >= 1.0:
        raise ContractionFailure(f"measured eta={eta:.3g} >= 1")
    w = fp.coc.grid.weights
    v = w * psi.values
    proj = float(v @ fp.f(k))  # int psi f_k
    terms = []
    n = 0
    while True:
        z = _p(fp, k - n)
        t = float(v @ z)
        if fp.natural and n > 0:
            # general weights carry the projection inside _p
            t -= float(w @ z) * proj
        terms.append(t)
        recent = max(abs(x) for x in terms[-2:])
        rate = max(eta, _term_rate(terms))
        bound = recent * rate / (1.0 - rate) if rate < 1 else math.inf
        if n + 1 >= MIN_TERMS and bound < tol:
            return np.array(terms), bound
        if n >= n_max:
            raise ConvergenceError(f"response series not converged after {n} terms")
        # pull psi back one step: v <- (A_{k-n-1})^T v, with the mean projection for general weights
        A = fp.A(k - n - 1)
        if fp.natural:
            v = A.T @ v
        else:
            pk = fp.p(k - n)
            f = fp.f(k - n)
            v = (A.T @ (v - float(v @ f) * w)) / pk
        n += 1


def _term_rate(terms) -> float:
    a = np.abs(np.array(terms[-6:]))
    a = a[a > 0]
    if a.size < 3:
        return 0.0
    r = a[1:] / a[:-1]
    return float(min(np.max(r), 1.0))


def quenched_response(
    coc: Cocycle,
    u0: float,
    psi: GridFunction,
    tol: float = 1e-9,
    h: Optional[float] = 1e-3,
    richardson: bool = False,
    time: int = 0,
    depth: int = 400,
) -> ResponseReport:
    """Derivative of ``int psi f_time(u)`` at ``u0`` by the response series.

    Set ``h=None`` to skip the finite-difference check.
    """
    if psi.basis is not coc.basis or psi.n != coc.n:
        raise ValidationError("observable grid differs from the cocycle grid")
    fp = FixedPoint(coc, u0, time, depth=depth)
    terms, bound = _series(fp, psi, tol, time)
    partial = np.cumsum(terms)
    rep = ResponseReport(
        observable=psi,
        series_value=float(partial[-1]),
        terms=partial,
        truncation_N=len(terms) - 1,
        truncation_bound=bound,
        eta_measured=fp.eta,
        term_values=terms,
    )
    if h is not None:
        fd = fd_response(coc, u0, psi, h, time, richardson=richardson)
        rep.fd_value, rep.fd_step = fd, h
        if not math.isfinite(fd):
            rep.fd_flag = "non-finite"
        rep.rel_error = abs(rep.series_value - fd) / max(abs(fd), 1e-12)
    return rep


def sample_seed(seed: int, i: int) -> int:
    """Deterministic per-sample seed derived from ``(seed, i)``."""
    h = hashlib.blake2b(struct.pack("<Qq", seed & 0xFFFFFFFFFFFFFFFF, i), digest_size=8, person=b"annealed").digest()
    return int.from_bytes(h, "little") >> 1


def annealed_response(
    coc: Cocycle,
    u0: float,
    psi: GridFunction,
    tol: float = 1e-9,
    n_orbits: int = 16,
    h: Optional[float] = 1e-3,
    workers: int = 1,
    depth: int = 400,
) -> ResponseReport:
    """Average of quenched responses over ``n_orbits`` independent environments.

    Sample ``i`` uses the law of ``coc.env`` with seed ``sample_seed(seed, i)``;
    the finite-difference check averages the per-sample differences.
    """
    env = coc.env
    if len(env.alphabet) == 1:
        n_orbits = 1
    envs = [Environment(env.alphabet, env.law, sample_seed(env.seed, i)) for i in range(n_orbits)]

    def one(e):
        return quenched_response(coc.at(e), u0, psi, tol, h, depth=depth)

    if workers > 1 and n_orbits > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            reps = list(ex.map(one, envs))
    else:
        reps = [one(e) for e in envs]
    vals = np.array([r.series_value for r in reps])
    fds = np.array([r.fd_value for r in reps])
    mean = float(vals[0]) if n_orbits == 1 else float(vals.mean())
    fd = float(fds[0]) if n_orbits == 1 else float(fds.mean())
    se = 0.0 if n_orbits == 1 else float(vals.std(ddof=1) / math.sqrt(n_orbits))
    return ResponseReport(
        observable=psi,
        series_value=mean,
        terms=np.array([r.series_value for r in reps]),
        truncation_N=max(r.truncation_N for r in reps),
        truncation_bound=max(r.truncation_bound for r in reps),
        fd_value=fd,
        fd_step=h if h is not None else float("nan"),
        rel_error=abs(mean - fd) / max(abs(fd), 1e-12) if h is not None else float("nan"),
        annealed_value=mean,
        stderr=se,
        eta_measured=max(r.eta_measured for r in reps),
    )
