"""Pressure, Bowen roots and dimension estimates for random cookie-cutters.

With geometric weights ``|psi_i'|^t`` the characteristic exponent
``chi(t, u)`` of the transfer-operator cocycle plays the role of the
pressure. Its zero in ``t`` is the Hausdorff dimension of the random
repeller; the derivative in ``u`` follows from the implicit function
theorem.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .cocycle import Cocycle, ExponentEstimate, batch_stderr, characteristic_exponent, _batch_size
from .errors import BracketError, DepthError, MonotonicityError, ValidationError
from .maps import Weight

MAX_CYLINDERS = 10**7


def pressure(coc: Cocycle, t: float, u: Optional[float] = None, orbit_len: int = 1000, depth: int = 60) -> ExponentEstimate:
    """Characteristic exponent of the ``t``-weighted cocycle."""
    if t < 0:
        raise ValidationError("t must be non-negative")
    return characteristic_exponent(coc, u, Weight.geometric(t), orbit_len, depth)


@dataclass
class TangentExponent:
    chi: float
    dchi: float
    stderr: float
    dstderr: float


def exponent_derivative(coc: Cocycle, t: float, param: str = "t", u: Optional[float] = None, orbit_len: int = 1000, depth: int = 60) -> TangentExponent:
    """``chi(t, u)`` and its derivative in ``t`` or ``u``, same orbit and seed.

    The derivative of the finite-orbit estimate is exact: the density and
    its tangent are advanced together,
    ``p = int A f``, ``p' = int (A' f + A f')``,
    ``f <- A f / p``, ``f' <- (A' f + A f') / p - (p'/p) f``.
    """
    if param not in ("t", "u"):
        raise ValidationError("param must be 't' or 'u'")
    wq = coc.grid.weights
    weight = Weight.geometric(t)
    f = np.ones(coc.n)
    df = np.zeros(coc.n)
    lp, dlp = [], []
    for k in range(-depth, orbit_len):
        op = coc.operator(k, u, weight)
        A = op.matrix
        dA = op.t_derivative_matrix if param == "t" else op.u_derivative_matrix
        g = A @ f
        dg = dA @ f + A @ df
        p, dp = float(wq @ g), float(wq @ dg)
        if not p > 0:
            raise ValidationError(f"non-positive normalization at time {k + 1}")
        f, df = g / p, dg / p - (dp / p) * (g / p)
        if k >= 0:
            lp.append(math.log(p))
            dlp.append(dp / p)
    lp, dlp = np.array(lp), np.array(dlp)
    b = _batch_size(coc.env, orbit_len)
    return TangentExponent(float(lp.mean()), float(dlp.mean()), batch_stderr(lp, b), batch_stderr(dlp, b))


def min_expansion(coc: Cocycle, u: Optional[float] = None) -> float:
    return min(coc.system(a, u).lam for a in coc.env.alphabet)


@dataclass
class PressureCurve:
    t_samples: np.ndarray
    chi_values: np.ndarray
    stderr_values: np.ndarray
    u: Optional[float]
    root: float
    bracket: tuple
    slope_at_root: float
    stderr_at_root: float = 0.0
    evaluations: int = 0

    @property
    def root_stderr(self) -> float:
        """Standard error of the root propagated through the slope."""
        return self.stderr_at_root / abs(self.slope_at_root) if self.slope_at_root else math.inf

    def summary(self) -> dict:
        return {
            "root": self.root,
            "bracket": list(self.bracket),
            "slope_at_root": self.slope_at_root,
            "root_stderr": self.root_stderr,
            "u": self.u,
        }


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def bowen_root(
    coc: Cocycle,
    u: Optional[float] = None,
    tol_t: float = 1e-10,
    orbit_len: int = 1000,
    depth: int = 60,
    bracket: tuple = (0.0, 1.0),
    samples: int = 11,
    workers: int = 1,
) -> PressureCurve:
    """Zero of ``t -> chi(t, u)`` on ``bracket``.

    The same environment realization is used for every ``t``, which makes
    the estimate a smooth function of ``t``; Brent's method then locates the
    zero to ``tol_t``. ``samples`` points of the curve are recorded for
    plotting and monotonicity checks.
    """
    lo, hi = map(float, bracket)
    if not 0.0 <= lo < hi:
        raise ValidationError("bracket must satisfy 0 <= lo < hi")
    calls = [0]

    def chi(t):
        calls[0] += 1
        return pressure(coc, t, u, orbit_len, depth).chi

    ts = np.linspace(lo, hi, max(samples, 2))
    ests = _map(lambda t: pressure(coc, float(t), u, orbit_len, depth), list(ts), workers)
    cv = np.array([e.chi for e in ests])
    se = np.array([e.stderr for e in ests])
    if not cv[0] > 0 > cv[-1]:
        raise BracketError(f"no sign change of chi on [{lo}, {hi}]: chi={cv[0]:.4g}, {cv[-1]:.4g}")
    i = int(np.flatnonzero(cv <= 0)[0])
    a, b = float(ts[i - 1]), float(ts[i])
    root = brentq(chi, a, b, xtol=tol_t / 4, rtol=4 * np.finfo(float).eps, maxiter=200)
    at = exponent_derivative(coc, root, "t", u, orbit_len, depth)
    return PressureCurve(
        t_samples=ts,
        chi_values=cv,
        stderr_values=se,
        u=u,
        root=float(root),
        bracket=(max(lo, root - tol_t), min(hi, root + tol_t)),
        slope_at_root=at.dchi,
        stderr_at_root=at.stderr,
        evaluations=calls[0] + len(ts),
    )


@dataclass
class DimensionDerivative:
    value: float
    d_u_chi: float
    d_t_chi: float
    root: float
    slope_bound: float  # -log(lambda_min)

    def __float__(self) -> float:
        return self.value


def dimension_derivative(
    coc: Cocycle,
    u0: float,
    tol: float = 1e-10,
    orbit_len: int = 1000,
    depth: int = 60,
    root: Optional[float] = None,
) -> DimensionDerivative:
    """``d_u z = -d_u chi(z, u0) / d_t chi(z, u0)`` at the Bowen root ``z``.

    Both partial derivatives come from tangent sweeps along the same orbit.
    A non-negative ``t``-slope raises :class:`MonotonicityError`.
    """
    z = bowen_root(coc, u0, tol, orbit_len, depth).root if root is None else root
    du = exponent_derivative(coc, z, "u", u0, orbit_len, depth).dchi
    dt = exponent_derivative(coc, z, "t", u0, orbit_len, depth).dchi
    bound = -math.log(min_expansion(coc, u0))
    if not dt < 0:
        raise MonotonicityError(f"d_t chi = {dt:.4g} is not negative at t={z:.6g}")
    if dt > bound + 1e-8:
        raise MonotonicityError(f"d_t chi = {dt:.6g} exceeds -log(lambda) = {bound:.6g}")
    return DimensionDerivative(-du / dt, du, dt, z, bound)


# ---------------------------------------------------------------------------
# box counting


@dataclass
class BoxCount:
    slope: float
    residual: float
    eps: np.ndarray
    counts: np.ndarray
    cylinders: int


def cylinders(coc: Cocycle, u: Optional[float], gen_depth: int, time: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints of all level-``gen_depth`` cylinders
    ``psi_{k_0, i_0} o ... o psi_{k_{d-1}, i_{d-1}}([0, 1])``, ``k_j = time + j``."""
    systems = [coc.system(coc.env.label(time + j), u) for j in range(gen_depth)]
    total = 1
    for s in systems:
        total *= s.branch_count
        if total > MAX_CYLINDERS:
            raise DepthError(f"more than {MAX_CYLINDERS} cylinders at depth {gen_depth}")
    lo, hi = np.zeros(1), np.ones(1)
    for s in reversed(systems):
        los, his = [], []
        for br in s.branches:
            a, b = np.asarray(br.psi(s.u, lo), float), np.asarray(br.psi(s.u, hi), float)
            los.append(np.minimum(a, b))
            his.append(np.maximum(a, b))
        lo, hi = np.concatenate(los), np.concatenate(his)
    return lo, hi


def box_counting_oracle(
    coc: Cocycle,
    u: Optional[float] = None,
    gen_depth: int = 12,
    grid_eps: Optional[Sequence[float]] = None,
    time: int = 0,
) -> BoxCount:
    """Box-counting slope of the repeller from explicit cylinders.

    ``grid_eps`` defaults to dyadic scales ``2^-4`` down to four times the
    largest cylinder length. The slope of ``log N(eps)`` against
    ``log(1/eps)`` is fitted by least squares.
    """
    if gen_depth < 8:
        raise ValidationError("gen_depth must be >= 8")
    lo, hi = cylinders(coc, u, gen_depth, time)
    # shrink slightly so cylinders ending exactly on a box edge count once
    pad = 1e-6 * (hi - lo)
    lo, hi = lo + pad, hi - pad
    if grid_eps is None:
        smallest = 4.0 * float(np.max(hi - lo))
        jmax = int(math.floor(-math.log2(smallest)))
        grid_eps = [2.0**-j for j in range(4, max(jmax, 6) + 1)]
    eps = np.array(sorted(grid_eps, reverse=True), dtype=float)
    counts = []
    for e in eps:
        a = np.floor(lo / e).astype(np.int64)
        b = np.floor(hi / e).astype(np.int64)
        boxes = [a, b]
        span = b - a
        for j in np.flatnonzero(span > 1):
            boxes.append(np.arange(a[j] + 1, b[j]))
        counts.append(np.unique(np.concatenate(boxes)).size)
    counts = np.array(counts)
    X = np.log(1.0 / eps)
    Y = np.log(counts)
    (slope, icpt), res, *_ = np.polyfit(X, Y, 1, full=True)
    resid = float(np.sqrt(res[0] / len(X))) if len(res) else 0.0
    return BoxCount(float(slope), resid, eps, counts, int(lo.size))


def moran_root(ratios: Sequence[float], bracket: tuple = (0.0, 1.0)) -> float:
    """Solution ``s`` of ``sum c_i^s = 1`` for contraction ratios ``c_i``."""
    c = np.asarray(ratios, float)
    return float(brentq(lambda s: np.sum(c**s) - 1.0, *bracket, xtol=1e-15, rtol=4 * np.finfo(float).eps))
