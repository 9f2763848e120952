"""Hilbert projective metrics, the cone family ``C_a`` and contraction checks.

A function ``phi`` belongs to ``C_a`` (order ``k``, Hölder exponent
``alpha``, scale ``delta1``) when ``phi >= 0`` and, at every point ``x``,

* ``||D^q phi(x)|| <= a_q phi(x)`` for ``q = 1..k``;
* ``||D^k phi(x) - D^k phi(x')|| <= a_{k,alpha} phi(x) d(x, x')**alpha`` for
  ``d(x, x') <= delta1``,

norms being taken in the line element at ``x``. On a grid these become finitely
many linear inequalities ``G phi >= 0`` on node values, so the discrete cone is
polyhedral and its Hilbert metric is an orthant metric on ``G phi``.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import Basis, GridFunction, grid, integrate, line_element, pair_distances
from .errors import ConeViolationError, ContractionFailure, ValidationError

MIN_PAIR_DISTANCE = 1e-8


class InsufficientConstantsError(ValidationError):
    """Neither ``(K, rho)`` nor ``(sigma, R)`` is available for a diameter bound."""


@dataclass(frozen=True)
class ConeParams:
    """Constants of the cone ``C_a``.

    ``a`` lists ``(a_1, ..., a_k, a_{k,alpha})``. ``rho``, ``K`` and ``R``
    default to the values derived from ``a``: ``rho`` just below
    ``min a/(1+a)``, ``R = exp(a_1)`` and ``K = R max(1, max a)``.
    ``theta`` is the optional uniform operator-norm bound used to bracket
    normalization factors.
    """

    a: tuple
    k: int = 1
    alpha: float = 1.0
    sigma: float = 0.8
    delta1: float = 1.0 / 3.0
    metric: str = "euclidean"
    rho: Optional[float] = None
    K: Optional[float] = None
    R: Optional[float] = None
    theta: Optional[float] = None

    def __post_init__(self):
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        object.__setattr__(self, "a", a)
        if self.k < 0 or len(a) != self.k + 1:
            raise ValidationError(f"need k+1={self.k + 1} cone constants, got {len(a)}")
        if not all(v > 0 for v in a):
            raise ValidationError("cone constants must be strictly positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ValidationError("alpha must lie in (0, 1]")
        if not 0.0 < self.sigma < 1.0:
            raise ValidationError("sigma must lie in (0, 1)")
        if not self.delta1 > 0:
            raise ValidationError("delta1 must be positive")
        line_element(self.metric)
        if self.rho is not None and not 0.0 <= self.rho <= 1.0:
            raise ValidationError("rho must lie in [0, 1]")
        if self.K is not None and not self.K >= 1.0:
            raise ValidationError("K must be >= 1")
        if self.R is not None and not self.R >= 1.0:
            raise ValidationError("R must be >= 1")

    @property
    def rho_sup(self) -> float:
        """``min a/(1+a)``: every ``rho`` below it is an inner radius at ``1``."""
        return min(v / (1.0 + v) for v in self.a)

    @property
    def rho_value(self) -> float:
        return self.rho if self.rho is not None else self.rho_sup * (1.0 - 1e-9)

    @property
    def R_value(self) -> float:
        if self.R is not None:
            return self.R
        return math.exp(self.a[0]) if self.k >= 1 else math.exp(self.a[0] * self.delta1 ** self.alpha) ** math.ceil(1 / self.delta1)

    @property
    def K_value(self) -> float:
        return self.K if self.K is not None else self.R_value * max(1.0, max(self.a))

    def scaled(self, s: float) -> "ConeParams":
        """The cone ``C_{s a}`` with the remaining constants re-derived."""
        return dataclasses.replace(self, a=tuple(s * v for v in self.a), rho=None, K=None, R=None)

    def diameter_bound(self) -> float:
        return diameter_bound(K=self.K_value, rho=self.rho_value, sigma=self.sigma, R=self.R_value)

    def eta_bound(self) -> float:
        return math.tanh(self.diameter_bound() / 4.0)


def diameter_bound(K=None, rho=None, sigma=None, R=None) -> float:
    """Upper bound for the diameter of the image cone.

    The minimum of ``2 log(1 + 2K/rho)`` (when ``K`` and ``rho > 0`` are
    given) and ``2 log((1+sigma)/(1-sigma)) + 2 log R`` (when ``sigma`` and
    ``R`` are given).
    """
    bounds = []
    if K is not None and rho is not None and rho > 0:
        bounds.append(2.0 * math.log1p(2.0 * K / rho))
    if sigma is not None and R is not None:
        if not 0.0 <= sigma < 1.0:
            raise ValidationError("sigma must lie in [0, 1)")
        bounds.append(2.0 * math.log((1.0 + sigma) / (1.0 - sigma)) + 2.0 * math.log(R))
    if not bounds:
        raise InsufficientConstantsError("need (K, rho > 0) or (sigma, R) for a diameter bound")
    return min(bounds)


def eta_from_diameter(delta: float) -> float:
    """Birkhoff contraction factor ``tanh(delta/4)``."""
    return math.tanh(delta / 4.0)


# ---------------------------------------------------------------------------
# discrete cone geometry


@dataclass(frozen=True, eq=False)
class _Geometry:
    Dq: tuple  # metric-scaled derivative matrices, q = 1..k
    Dk: np.ndarray  # unscaled k-th derivative matrix
    I: np.ndarray
    J: np.ndarray
    w: np.ndarray  # h(x_I)^{-k} / d^alpha

    def lhs(self, v: np.ndarray) -> tuple[list, np.ndarray]:
        c1 = [np.abs(D @ v) for D in self.Dq]
        dk = self.Dk @ v
        c2 = np.abs(dk[self.I] - dk[self.J]) * self.w
        return c1, c2


@functools.lru_cache(maxsize=32)
def _geometry(basis: Basis, n: int, k: int, alpha: float, delta1: float, metric: str) -> _Geometry:
    g = grid(basis, n)
    h = line_element(metric).density(g.nodes)
    Dq = tuple(g.diff_matrix(q) * (h ** (-q))[:, None] for q in range(1, k + 1))
    Dk = g.diff_matrix(k) if k else np.eye(n)
    d = pair_distances(g, metric)
    I, J = np.nonzero((d > 0.0) & (d <= delta1))
    w = h[I] ** (-k) / d[I, J] ** alpha
    return _Geometry(Dq, Dk, I, J, w)


def _geom(cone: ConeParams, basis: Basis, n: int) -> _Geometry:
    return _geometry(Basis(basis), int(n), cone.k, float(cone.alpha), float(cone.delta1), cone.metric)


def constraint_matrix(cone: ConeParams, basis: Basis | str, n: int) -> np.ndarray:
    """Rows ``G`` with ``C_a = {v : G v >= 0}`` on the grid."""
    geo = _geom(cone, basis, n)
    eye = np.eye(int(n))
    rows = [eye]
    for q, D in enumerate(geo.Dq):
        rows += [cone.a[q] * eye + D, cone.a[q] * eye - D]
    if geo.I.size:
        diff = (geo.Dk[geo.I] - geo.Dk[geo.J]) * geo.w[:, None]
        base = cone.a[-1] * eye[geo.I]
        rows += [base + diff, base - diff]
    return np.vstack(rows)


@dataclass
class MembershipReport:
    member: bool
    margins: dict

    def __bool__(self) -> bool:
        return self.member

    @property
    def min_margin(self) -> float:
        return min(self.margins.values())


def cone_membership(f: GridFunction, cone: ConeParams) -> MembershipReport:
    """Check positivity, (C1) and (C2) at the nodes.

    Margins are minima over nodes (or node pairs) of ``a f(x) - lhs``;
    the positivity margin is ``min f``.
    """
    v = f.values
    geo = _geom(cone, f.basis, f.n)
    c1, c2 = geo.lhs(v)
    margins = {"positivity": float(v.min())}
    for q, lhs in enumerate(c1, start=1):
        margins[f"C1[{q}]"] = float(np.min(cone.a[q - 1] * v - lhs))
    if c2.size:
        margins["C2"] = float(np.min(cone.a[-1] * v[geo.I] - c2))
    return MembershipReport(all(m >= 0.0 for m in margins.values()), margins)


# ---------------------------------------------------------------------------
# Hilbert metrics


def _as_values(x) -> np.ndarray:
    return np.asarray(x.values if isinstance(x, GridFunction) else x, dtype=float)


def orthant_distance(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if not (np.all(x > 0) and np.all(y > 0)):
        raise ConeViolationError("Hilbert distance needs strictly positive entries")
    r = np.log(y) - np.log(x)
    d = float(r.max() - r.min())
    return d if math.isfinite(d) else math.inf


def hilbert_distance(x, y) -> float:
    """Hilbert metric of the positive orthant of node values.

    ``d(x, y) = log(max_k x_k/y_k * max_k y_k/x_k)``.
    """
    return orthant_distance(_as_values(x), _as_values(y))


def cone_distance(x: GridFunction, y: GridFunction, cone: ConeParams) -> float:
    """Hilbert metric of the discrete cone ``C_a``: the orthant metric of ``G x, G y``."""
    G = constraint_matrix(cone, x.basis, x.n)
    gx, gy = G @ x.values, G @ y.values
    if not (np.all(gx > 0) and np.all(gy > 0)):
        raise ConeViolationError("cone distance needs points in the interior of C_a")
    return orthant_distance(gx, gy)


# ---------------------------------------------------------------------------
# sampling


def _random_direction(basis: Basis, n: int, rng: np.random.Generator) -> np.ndarray:
    x = grid(basis, n).nodes
    if basis is Basis.FOURIER:
        kk = np.arange(1, 5)
        c = rng.standard_normal((2, kk.size)) / kk**2
        arg = 2 * np.pi * np.outer(x, kk)
        return np.cos(arg) @ c[0] + np.sin(arg) @ c[1]
    jj = np.arange(1, 7)
    c = rng.standard_normal(jj.size) / jj**2
    return np.polynomial.chebyshev.chebval(2 * x - 1, np.concatenate([[0.0], c]))


def max_step(p: np.ndarray, cone: ConeParams, basis: Basis | str, n: int, iters: int = 60) -> float:
    """Largest ``s`` with ``1 + s p`` in ``C_a`` (the set of such ``s`` is an interval)."""
    basis = Basis(basis)

    def inside(s):
        return cone_membership(GridFunction(basis, 1.0 + s * p), cone).member

    lo, hi = 0.0, 1.0
    while inside(hi):
        lo, hi = hi, 2 * hi
        if hi > 1e12:
            return lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if inside(mid) else (lo, mid)
    return lo


def random_cone_member(
    cone: ConeParams,
    basis: Basis | str,
    n: int,
    rng: np.random.Generator,
    fill: tuple = (0.3, 0.95),
) -> GridFunction:
    """``c (1 + s p)`` with ``p`` a random low-degree direction, ``s`` a random
    fraction ``fill`` of the largest admissible step and ``c`` a random scale."""
    basis = Basis(basis)
    p = _random_direction(basis, n, rng)
    s = rng.uniform(*fill) * max_step(p, cone, basis, n)
    scale = math.exp(rng.uniform(-1.0, 1.0))
    return GridFunction(basis, scale * (1.0 + s * p))


# ---------------------------------------------------------------------------
# operators


def _as_operator(op):
    """Return ``(matrix, basis, n)``; basis is ``None`` for bare matrices."""
    if hasattr(op, "matrix") and hasattr(op, "basis"):
        return np.asarray(op.matrix), op.basis, op.n
    A = np.asarray(op, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("operator must be a TransferOperator or a square matrix")
    return A, None, A.shape[0]


@dataclass
class CertificateReport:
    max_ratio: float
    diam_estimate: float
    eta_bound: Optional[float]
    samples: int
    seed: int
    metric: str
    ratios: list = field(default_factory=list, repr=False)
    failures: list = field(default_factory=list)

    @property
    def nonexpanding(self) -> bool:
        return self.max_ratio <= 1.0 + 1e-12 and not self.failures

    @property
    def strict(self) -> bool:
        return self.max_ratio < 1.0 and not self.failures

    @property
    def within_bound(self) -> Optional[bool]:
        if self.eta_bound is None:
            return None
        return self.max_ratio <= self.eta_bound + 1e-12 and not self.failures

    def to_dict(self) -> dict:
        return {
            "max_ratio": self.max_ratio,
            "diam_estimate": self.diam_estimate,
            "eta_bound": self.eta_bound,
            "samples": self.samples,
            "seed": self.seed,
            "metric": self.metric,
            "strict": self.strict,
            "within_bound": self.within_bound,
            "failures": len(self.failures),
        }


def contraction_certificate(
    op,
    cone: Optional[ConeParams] = None,
    samples: int = 100,
    seed: int = 0,
    metric: Optional[str] = None,
) -> CertificateReport:
    """Empirical Birkhoff contraction ratio on ``samples`` random pairs.

    ``op`` is a :class:`~conecocycle.transfer.TransferOperator` (pairs are
    random members of ``cone`` on its grid) or a square matrix (pairs are
    random positive vectors). ``metric`` is ``"cone"`` (the Hilbert metric of
    the discrete ``C_a``, in which the Birkhoff bound applies; default when a
    cone and a grid are available) or ``"orthant"`` (node values). Pairs closer than ``1e-8`` are
    skipped. Images leaving the cone are recorded in ``failures``.
    """
    A, basis, n = _as_operator(op)
    if metric is None:
        metric = "cone" if cone is not None and basis is not None else "orthant"
    if metric not in ("orthant", "cone"):
        raise ValidationError("metric must be 'orthant' or 'cone'")
    if metric == "cone" and (cone is None or basis is None):
        raise ValidationError("the cone metric needs a cone and a gridded operator")
    rng = np.random.default_rng(seed)

    def draw():
        if basis is None or cone is None:
            return np.exp(rng.uniform(-1.0, 1.0, n))
        return random_cone_member(cone, basis, n, rng).values

    if metric == "cone":
        G = constraint_matrix(cone, basis, n)

        def dist(x, y):
            return orthant_distance(G @ x, G @ y)
    else:
        dist = orthant_distance

    ratios, failures, images = [], [], []
    for i in range(samples):
        x, y = draw(), draw()
        try:
            d0 = dist(x, y)
        except ConeViolationError as exc:
            failures.append((i, f"sample outside cone: {exc}"))
            continue
        Lx, Ly = A @ x, A @ y
        try:
            d1 = dist(Lx, Ly)
        except ConeViolationError as exc:
            failures.append((i, str(exc)))
            continue
        images += [Lx, Ly]
        if d0 > MIN_PAIR_DISTANCE:
            ratios.append(d1 / d0)
    diam = 0.0
    for i in range(len(images)):
        for j in range(i):
            diam = max(diam, dist(images[i], images[j]))
    eta = None
    if cone is not None:
        eta = cone.eta_bound()
    return CertificateReport(
        max_ratio=max(ratios) if ratios else 0.0,
        diam_estimate=diam,
        eta_bound=eta,
        samples=samples,
        seed=seed,
        metric=metric,
        ratios=ratios,
        failures=failures,
    )


@dataclass
class InvarianceReport:
    cone: ConeParams
    min_margins: list
    needed: np.ndarray  # smallest sigma' with L(phi) in C_{sigma' a}, per sample

    @property
    def ok(self) -> bool:
        return bool(self.min_margins) and min(self.min_margins) > 0.0

    @property
    def worst_sigma(self) -> float:
        return float(np.max(self.needed)) if len(self.needed) else 0.0


def _needed_ratios(v: np.ndarray, cone: ConeParams, basis: Basis) -> np.ndarray:
    """Smallest factors ``r`` with ``v`` satisfying each condition at ``r a``."""
    geo = _geom(cone, basis, v.size)
    c1, c2 = geo.lhs(v)
    r = [float(np.max(lhs / v)) / cone.a[q] for q, lhs in enumerate(c1)]
    if c2.size:
        r.append(float(np.max(c2 / v[geo.I])) / cone.a[-1])
    return np.array(r)


def invariance_check(operators: Sequence, cone: ConeParams, samples: int = 50, seed: int = 0) -> InvarianceReport:
    """Map random members of ``C_a`` through each operator and check ``C_{sigma a}``."""
    rng = np.random.default_rng(seed)
    target = cone.scaled(cone.sigma)
    margins, needed = [], []
    for L in operators:
        A, basis, n = _as_operator(L)
        for _ in range(samples):
            phi = random_cone_member(cone, basis, n, rng)
            img = A @ phi.values
            if np.min(img) <= 0:
                margins.append(float(np.min(img)))
                needed.append(np.inf)
                continue
            img = img / integrate(GridFunction(basis, img))
            margins.append(cone_membership(GridFunction(basis, img), target).min_margin)
            needed.append(float(np.max(_needed_ratios(img, cone, basis))))
    return InvarianceReport(cone, margins, np.array(needed))


def find_invariant_cone(
    operators: Sequence,
    k: int = 1,
    alpha: float = 1.0,
    sigma: float = 0.8,
    delta1: float = 1.0 / 3.0,
    metric: str = "euclidean",
    a0: Optional[Sequence[float]] = None,
    samples: int = 100,
    seed: int = 0,
    safety: float = 0.9,
    max_rounds: int = 60,
) -> ConeParams:
    """Search for constants ``a`` with ``L(C_a) ⊂ C_{sigma a}`` for every operator.

    Starting from ``a0`` (default all ones), each round maps random members
    of the current cone (drawn close to its boundary) through the operators
    and raises every ``a_q`` to ``r_q / (safety * sigma)``, where ``r_q`` is
    the largest ratio observed for that condition. Stops when a round leaves
    ``a`` unchanged; the result is then verified on fresh samples.
    """
    a = np.ones(k + 1) if a0 is None else np.asarray(a0, float).copy()
    rng = np.random.default_rng(seed)
    ops = [_as_operator(L) for L in operators]
    for _ in range(max_rounds):
        cone = ConeParams(tuple(a), k, alpha, sigma, delta1, metric)
        worst = np.zeros(k + 1)
        for A, basis, n in ops:
            for _ in range(samples):
                phi = random_cone_member(cone, basis, n, rng, fill=(0.5, 1.0))
                img = A @ phi.values
                if np.min(img) <= 0:
                    raise ConeViolationError("operator image left the positive cone")
                worst = np.maximum(worst, _needed_ratios(img, cone, basis) * a)
        new = np.maximum(a, worst / (safety * sigma))
        if np.all(new <= a):
            break
        a = new * (1.0 + 1e-3)
    else:
        raise ContractionFailure(f"no invariant cone found in {max_rounds} rounds (sigma={sigma})")
    cone = ConeParams(tuple(a), k, alpha, sigma, delta1, metric)
    report = invariance_check(operators, cone, samples=samples, seed=seed + 1)
    if not report.ok:
        raise ContractionFailure(f"cone invariance failed on fresh samples (worst sigma' {report.worst_sigma:.3g})")
    return cone
