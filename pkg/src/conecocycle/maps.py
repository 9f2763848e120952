"""Parametrized uniformly expanding maps given by their inverse branches.

Three families are provided:

* :func:`torus_family` -- circle maps ``T_u(x) = m x + kappa(u, x) mod 1``;
* :func:`gauss_family` -- Gauss-type maps ``T_u(x) = frac(1 / kappa(u, x))``
  with countably many branches, truncated at ``i_max`` plus a tail
  correction;
* :func:`cookie_cutter` -- finitely many contracting branches with pairwise
  disjoint images in ``[0, 1]``.

A system stores the parameter value ``u`` and a :class:`Weight`; the weight
composed with branch ``i`` is ``g_i(u, y) = s * log|d_y psi_i(u, y)|`` with
``s = 1`` for the absolutely continuous invariant measure normalization and
``s = t`` for the geometric (pressure) weights.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import BranchInversionError, ValidationError

NEWTON_MAXITER = 50


class Family(str, enum.Enum):
    TORUS = "torus"
    GAUSS = "gauss"
    COOKIE_CUTTER = "cookie_cutter"


@dataclass(frozen=True)
class Weight:
    kind: str = "acim"
    t: float = 1.0

    def __post_init__(self):
        if self.kind not in ("acim", "geometric"):
            raise ValidationError(f"unknown weight kind {self.kind!r}")
        if self.kind == "geometric" and not self.t >= 0.0:
            raise ValidationError("geometric weight needs t >= 0")

    @classmethod
    def geometric(cls, t: float) -> "Weight":
        return cls("geometric", float(t))

    @property
    def exponent(self) -> float:
        return 1.0 if self.kind == "acim" else self.t


ACIM = Weight()


# ---------------------------------------------------------------------------
# perturbations


@dataclass(frozen=True)
class TrigPerturbation:
    """``kappa(u, x) = sum u**p * (a cos(2 pi k x) + b sin(2 pi k x))``.

    ``terms`` holds tuples ``(p, k, a, b)``.
    """

    terms: tuple = ()

    def __post_init__(self):
        terms = tuple((int(p), int(k), float(a), float(b)) for p, k, a, b in self.terms)
        if any(p < 0 or k < 0 for p, k, _, _ in terms):
            raise ValidationError("powers and wave numbers must be non-negative")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def sine(cls, amplitude: float, k: int = 1, power: int = 1) -> "TrigPerturbation":
        """``u**power * amplitude * sin(2 pi k x)``."""
        return cls(((power, k, 0.0, amplitude),))

    def _eval(self, u, x, dx: int, du: int):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast_shapes(np.shape(u), x.shape))
        for p, k, a, b in self.terms:
            if p < du:
                continue
            up = math.perm(p, du) * np.asarray(u, float) ** (p - du)
            w = 2.0 * np.pi * k
            arg = w * x
            # d^dx/dx^dx of a cos + b sin cycles with period 4
            c, s = np.cos(arg), np.sin(arg)
            phase = [(a * c + b * s), (-a * s + b * c), (-a * c - b * s), (a * s - b * c)][dx % 4]
            out = out + up * w**dx * phase if dx else out + up * phase
        return out

    def __call__(self, u, x):
        return self._eval(u, x, 0, 0)

    def dx(self, u, x):
        return self._eval(u, x, 1, 0)

    def dxx(self, u, x):
        return self._eval(u, x, 2, 0)

    def du(self, u, x):
        return self._eval(u, x, 0, 1)

    def dxu(self, u, x):
        return self._eval(u, x, 1, 1)

    def sup_bound(self, u: float) -> float:
        return sum(abs(u) ** p * (abs(a) + abs(b)) for p, k, a, b in self.terms)

    def sup_dx_bound(self, u: float) -> float:
        return sum(abs(u) ** p * 2 * np.pi * k * (abs(a) + abs(b)) for p, k, a, b in self.terms)

    @property
    def depends_on_u(self) -> bool:
        return any(p > 0 and (a or b) for p, k, a, b in self.terms)


@dataclass(frozen=True)
class PolyPerturbation:
    """``kappa(u, x) = sum c * u**p * x**m`` with ``terms = ((p, m, c), ...)``."""

    terms: tuple = ((0, 1, 1.0),)

    def __post_init__(self):
        terms = tuple((int(p), int(m), float(c)) for p, m, c in self.terms)
        if any(p < 0 or m < 0 for p, m, _ in terms):
            raise ValidationError("powers must be non-negative")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def identity(cls) -> "PolyPerturbation":
        return cls(((0, 1, 1.0),))

    def _eval(self, u, x, dx: int, du: int):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast_shapes(np.shape(u), x.shape))
        for p, m, c in self.terms:
            if p < du or m < dx:
                continue
            out = out + c * math.perm(p, du) * np.asarray(u, float) ** (p - du) * math.perm(m, dx) * x ** (m - dx)
        return out

    def __call__(self, u, x):
        return self._eval(u, x, 0, 0)

    def dx(self, u, x):
        return self._eval(u, x, 1, 0)

    def dxx(self, u, x):
        return self._eval(u, x, 2, 0)

    def du(self, u, x):
        return self._eval(u, x, 0, 1)

    def dxu(self, u, x):
        return self._eval(u, x, 1, 1)

    @property
    def depends_on_u(self) -> bool:
        return any(p > 0 and c for p, m, c in self.terms)


# ---------------------------------------------------------------------------
# branches


class BranchData(NamedTuple):
    """Inverse-branch data at ``(u, y)``; arrays of shape ``(branches, points)``.

    ``logjac`` is ``log|d_y psi|``; ``du`` and ``dlogjac_du`` are ``None`` when
    the family has no closed-form parameter derivative.
    """

    psi: np.ndarray
    dy: np.ndarray
    logjac: np.ndarray
    dlogjac_dy: np.ndarray
    du: Optional[np.ndarray]
    dlogjac_du: Optional[np.ndarray]


class TailData(NamedTuple):
    """Gauss tail: ``sum_{i > i_max} e^{g_i} phi(psi_i) ~ int_0^upper phi dm``."""

    upper: np.ndarray
    upper_du: np.ndarray


def _solve_increasing(F, dF, target, lo, hi, x0):
    """Newton iteration with bisection safeguard for increasing ``F``."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    x = np.clip(np.array(x0, dtype=float), lo, hi)
    for _ in range(NEWTON_MAXITER):
        r = F(x) - target
        lo = np.where(r < 0, x, lo)
        hi = np.where(r > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = r / dF(x)
        xn = x - step
        bad = ~np.isfinite(xn) | (xn < lo) | (xn > hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= 4.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(x))
        x = xn
        if np.all(done | (r == 0)):
            return x
    r = F(x) - target
    if np.max(np.abs(r)) > 1e-13 * max(1.0, float(np.max(np.abs(target)))):
        raise BranchInversionError(f"inverse branch did not converge in {NEWTON_MAXITER} iterations")
    return x


@dataclass(frozen=True)
class AffineBranch:
    """Affine contraction with expansion ``e(u) = e0 + e1 u``.

    ``anchor='left'``:  ``psi(u, y) = p(u) + y / e(u)``;
    ``anchor='right'``: ``psi(u, y) = p(u) - (1 - y) / e(u)``;
    with ``p(u) = p0 + p1 u``.
    """

    expansion: tuple = (3.0, 0.0)
    position: tuple = (0.0, 0.0)
    anchor: str = "left"

    def __post_init__(self):
        e = tuple(float(v) for v in np.broadcast_to(self.expansion, 2)) if np.ndim(self.expansion) else (float(self.expansion), 0.0)
        p = tuple(float(v) for v in np.broadcast_to(self.position, 2)) if np.ndim(self.position) else (float(self.position), 0.0)
        if self.anchor not in ("left", "right"):
            raise ValidationError("anchor must be 'left' or 'right'")
        object.__setattr__(self, "expansion", e)
        object.__setattr__(self, "position", p)

    def _e(self, u):
        return self.expansion[0] + self.expansion[1] * u

    def psi(self, u, y):
        e, p = self._e(u), self.position[0] + self.position[1] * u
        y = np.asarray(y, float)
        return p + y / e if self.anchor == "left" else p - (1.0 - y) / e

    def dpsi_dy(self, u, y):
        return np.full(np.shape(y), 1.0 / self._e(u))

    def dpsi_du(self, u, y):
        e = self._e(u)
        y = np.asarray(y, float)
        de = -self.expansion[1] / e**2
        return self.position[1] + (y * de if self.anchor == "left" else -(1.0 - y) * de)

    def dlogjac_du(self, u, y):
        return np.full(np.shape(y), -self.expansion[1] / self._e(u))

    def dlogjac_dy(self, u, y):
        return np.zeros(np.shape(y))

    def inverse(self, u, x):
        e, p = self._e(u), self.position[0] + self.position[1] * u
        x = np.asarray(x, float)
        return (x - p) * e if self.anchor == "left" else 1.0 - (p - x) * e


@dataclass(frozen=True)
class CallableBranch:
    """Branch given by user callables of ``(u, y)``.

    ``d2psi_dydu`` and ``dpsi_du`` are optional; without them parameter
    derivatives fall back to finite differences.
    """

    psi: Callable
    dpsi_dy: Callable
    dpsi_du: Optional[Callable] = None
    d2psi_dydu: Optional[Callable] = None
    d2psi_dy2: Optional[Callable] = None

    def dlogjac_du(self, u, y):
        if self.dpsi_du is None or self.d2psi_dydu is None:
            return None
        return np.asarray(self.d2psi_dydu(u, y)) / np.asarray(self.dpsi_dy(u, y))

    def dlogjac_dy(self, u, y):
        if self.d2psi_dy2 is None:
            h = 1e-6
            yy = np.asarray(y, float)
            up = np.log(np.abs(self.dpsi_dy(u, np.minimum(yy + h, 1.0))))
            dn = np.log(np.abs(self.dpsi_dy(u, np.maximum(yy - h, 0.0))))
            return (up - dn) / (np.minimum(yy + h, 1.0) - np.maximum(yy - h, 0.0))
        return np.asarray(self.d2psi_dy2(u, y)) / np.asarray(self.dpsi_dy(u, y))

    def inverse(self, u, x):
        x = np.asarray(x, float)
        a, b = self.psi(u, 0.0), self.psi(u, 1.0)
        sign = 1.0 if b > a else -1.0
        return _solve_increasing(
            lambda y: sign * self.psi(u, y),
            lambda y: sign * self.dpsi_dy(u, y),
            sign * x,
            np.zeros_like(x),
            np.ones_like(x),
            np.clip((x - a) / (b - a), 0.0, 1.0),
        )


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class BranchSystem:
    """Common interface; use the constructors :func:`torus_family`,
    :func:`gauss_family` and :func:`cookie_cutter`."""

    u: float = 0.0
    weight: Weight = ACIM

    family = None  # overridden

    def with_u(self, u: float) -> "BranchSystem":
        return dataclasses.replace(self, u=float(u))

    def with_weight(self, weight: Weight) -> "BranchSystem":
        return dataclasses.replace(self, weight=weight)

    def with_t(self, t: float) -> "BranchSystem":
        return self.with_weight(Weight.geometric(t))

    @property
    def branch_count(self) -> int:
        raise NotImplementedError

    @property
    def lam(self) -> float:
        """Expansion constant (in the adapted metric)."""
        raise NotImplementedError

    @property
    def metric(self) -> str:
        return "euclidean"

    @property
    def has_u_derivative(self) -> bool:
        return True

    @property
    def full_branch(self) -> bool:
        return True

    def branch_data(self, y) -> BranchData:
        raise NotImplementedError

    def tail(self, y) -> Optional[TailData]:
        return None

    def forward(self, x):
        """The expanding map ``T_u`` itself."""
        raise NotImplementedError

    def log_weights(self, y) -> np.ndarray:
        return self.weight.exponent * self.branch_data(y).logjac


@dataclass(frozen=True)
class TorusSystem(BranchSystem):
    m: int = 2
    kappa: TrigPerturbation = field(default_factory=TrigPerturbation)
    theta1: float = 0.0

    family = Family.TORUS

    def __post_init__(self):
        if self.m < 2:
            raise ValidationError("torus maps need an integer degree m >= 2")
        if not 0.0 <= self.theta1 < self.m - 1:
            raise ValidationError(f"theta1={self.theta1} must lie in [0, m-1) so that lambda > 1")
        xs = np.linspace(0.0, 1.0, 257)
        sup = float(np.max(np.abs(self.kappa.dx(self.u, xs))))
        if sup > self.theta1 * (1 + 1e-12) + 1e-15:
            raise ValidationError(f"sup|d_x kappa| = {sup:.6g} exceeds theta1 = {self.theta1}")

    @property
    def branch_count(self) -> int:
        return self.m

    @property
    def lam(self) -> float:
        return self.m - self.theta1

    @property
    def has_u_derivative(self) -> bool:
        return True

    def branch_data(self, y) -> BranchData:
        y = np.atleast_1d(np.asarray(y, float))
        u, m, kap = self.u, self.m, self.kappa
        i = np.arange(m)[:, None]
        target = y[None, :] + i
        S = kap.sup_bound(u)
        x0 = (target - kap(u, i / m)) / m
        psi = _solve_increasing(
            lambda x: m * x + kap(u, x),
            lambda x: m + kap.dx(u, x),
            target,
            (target - S) / m - 1e-12,
            (target + S) / m + 1e-12,
            x0,
        )
        J = m + kap.dx(u, psi)
        dy = 1.0 / J
        du = -kap.du(u, psi) / J
        kxx = kap.dxx(u, psi)
        return BranchData(
            psi=psi,
            dy=dy,
            logjac=-np.log(J),
            dlogjac_dy=-kxx * dy / J,
            du=du,
            dlogjac_du=-(kap.dxu(u, psi) + kxx * du) / J,
        )

    def forward(self, x):
        x = np.asarray(x, float)
        return np.mod(self.m * x + self.kappa(self.u, x), 1.0)


@dataclass(frozen=True)
class GaussSystem(BranchSystem):
    kappa: PolyPerturbation = field(default_factory=PolyPerturbation.identity)
    theta: float = 1.0
    i_max: int = 256
    tail_correction: bool = True

    family = Family.GAUSS

    def __post_init__(self):
        if not self.theta > 0.5:
            raise ValidationError(f"theta={self.theta} must exceed 1/2")
        if self.i_max < 1:
            raise ValidationError("i_max must be >= 1")
        u = self.u
        if abs(float(self.kappa(u, 0.0))) > 1e-12 or abs(float(self.kappa(u, 1.0)) - 1.0) > 1e-12:
            raise ValidationError("kappa must satisfy kappa(u,0)=0 and kappa(u,1)=1")
        xs = np.linspace(0.0, 1.0, 257)
        if float(np.min(self.kappa.dx(u, xs))) < self.theta - 1e-12:
            raise ValidationError(f"d_x kappa falls below theta={self.theta}")

    @property
    def branch_count(self) -> int:
        return self.i_max

    @property
    def lam(self) -> float:
        return 2.0 * self.theta

    @property
    def metric(self) -> str:
        return "gauss"

    @property
    def tail_mass_bound(self) -> float:
        """Bound on ``sum_{i > i_max} |d_y psi_i|`` (uncorrected truncation)."""
        return 1.0 / (self.theta * self.i_max)

    @property
    def tail_error_estimate(self) -> float:
        """Error of the corrected tail per unit sup-norm of the argument.

        The tail sum is replaced by an integral over the remaining branch
        images (midpoint rule in the branch index), accurate to
        ``O(i_max**-3)``.
        """
        if not self.tail_active:
            return self.tail_mass_bound
        return 1.0 / (6.0 * self.theta * self.i_max**3)

    @property
    def tail_active(self) -> bool:
        # the integral identity holds for the natural weight only
        return self.tail_correction and self.weight.kind == "acim"

    def _inverse(self, s):
        u, kap = self.u, self.kappa
        return _solve_increasing(
            lambda x: kap(u, x),
            lambda x: kap.dx(u, x),
            s,
            np.zeros_like(s),
            np.ones_like(s),
            s,
        )

    def branch_data(self, y) -> BranchData:
        y = np.atleast_1d(np.asarray(y, float))
        u, kap = self.u, self.kappa
        i = np.arange(1, self.i_max + 1, dtype=float)[:, None]
        s = 1.0 / (i + y[None, :])
        psi = self._inverse(s)
        kx = kap.dx(u, psi)
        kxx = kap.dxx(u, psi)
        dy = -(s**2) / kx
        du = -kap.du(u, psi) / kx
        return BranchData(
            psi=psi,
            dy=dy,
            logjac=2.0 * np.log(s) - np.log(kx),
            dlogjac_dy=-2.0 * s - kxx * dy / kx,
            du=du,
            dlogjac_du=-(kap.dxu(u, psi) + kxx * du) / kx,
        )

    def tail(self, y) -> Optional[TailData]:
        if not self.tail_active:
            return None
        y = np.atleast_1d(np.asarray(y, float))
        x0 = self._inverse(1.0 / (self.i_max + 0.5 + y))
        return TailData(upper=x0, upper_du=-self.kappa.du(self.u, x0) / self.kappa.dx(self.u, x0))

    def forward(self, x):
        v = 1.0 / self.kappa(self.u, np.asarray(x, float))
        return v - np.floor(v)


@dataclass(frozen=True)
class CookieCutterSystem(BranchSystem):
    branches: tuple = ()
    allow_touching: bool = False
    weight: Weight = Weight("geometric", 1.0)

    family = Family.COOKIE_CUTTER

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if not self.branches:
            raise ValidationError("a cookie-cutter needs at least one branch")
        ys = np.linspace(0.0, 1.0, 65)
        slopes = np.array([np.abs(b.dpsi_dy(self.u, ys)) for b in self.branches])
        if np.max(slopes) >= 1.0:
            raise ValidationError("branches must be strict contractions (|d_y psi| < 1)")
        check_disjoint_images(self.branches, [self.u], allow_touching=self.allow_touching)

    @property
    def branch_count(self) -> int:
        return len(self.branches)

    @property
    def lam(self) -> float:
        ys = np.linspace(0.0, 1.0, 257)
        return float(1.0 / np.max([np.abs(b.dpsi_dy(self.u, ys)) for b in self.branches]))

    @property
    def full_branch(self) -> bool:
        """True when touching branch images cover ``[0, 1]``."""
        if not self.allow_touching:
            return False
        cover = sum(abs(float(b.psi(self.u, 1.0)) - float(b.psi(self.u, 0.0))) for b in self.branches)
        return abs(cover - 1.0) <= 1e-12

    @property
    def has_u_derivative(self) -> bool:
        return all(b.dlogjac_du(self.u, 0.5) is not None for b in self.branches)

    def branch_data(self, y) -> BranchData:
        y = np.atleast_1d(np.asarray(y, float))
        u = self.u
        psi = np.array([np.broadcast_to(b.psi(u, y), y.shape) for b in self.branches], dtype=float)
        dy = np.array([np.broadcast_to(b.dpsi_dy(u, y), y.shape) for b in self.branches], dtype=float)
        dlj_dy = np.array([np.broadcast_to(b.dlogjac_dy(u, y), y.shape) for b in self.branches], dtype=float)
        if self.has_u_derivative:
            du = np.array([np.broadcast_to(b.dpsi_du(u, y), y.shape) for b in self.branches], dtype=float)
            dlj_du = np.array([np.broadcast_to(b.dlogjac_du(u, y), y.shape) for b in self.branches], dtype=float)
        else:
            du = dlj_du = None
        return BranchData(psi, dy, np.log(np.abs(dy)), dlj_dy, du, dlj_du)

    def forward(self, x):
        """Apply ``T_u``; points outside every branch image map to ``nan``."""
        x = np.atleast_1d(np.asarray(x, float))
        out = np.full(x.shape, np.nan)
        for b in self.branches:
            lo, hi = sorted((float(b.psi(self.u, 0.0)), float(b.psi(self.u, 1.0))))
            sel = (x >= lo) & (x <= hi)
            if sel.any():
                out[sel] = b.inverse(self.u, x[sel])
        return out


def check_disjoint_images(branches: Sequence, u_values, allow_touching: bool = False) -> None:
    """Raise :class:`ValidationError` unless the branch images are disjoint in ``(0, 1)``."""
    for u in np.atleast_1d(u_values):
        ivs = sorted(sorted((float(b.psi(u, 0.0)), float(b.psi(u, 1.0)))) for b in branches)
        for lo, hi in ivs:
            if lo < -1e-15 or hi > 1.0 + 1e-15:
                raise ValidationError(f"branch image [{lo}, {hi}] leaves [0, 1] at u={u}")
        for (a0, a1), (b0, b1) in zip(ivs, ivs[1:]):
            gap = b0 - a1
            if gap < -1e-15 or (gap <= 1e-15 and not allow_touching):
                raise ValidationError(
                    f"branch images [{a0}, {a1}] and [{b0}, {b1}] are not disjoint at u={u}"
                    + ("" if gap < 0 else " (touching; pass allow_touching=True for full branches)")
                )


# ---------------------------------------------------------------------------
# constructors


def torus_family(m: int, kappa: TrigPerturbation | None = None, theta1: float = 0.0, u: float = 0.0, weight: Weight = ACIM) -> TorusSystem:
    """Circle map ``x -> m x + kappa(u, x) mod 1`` with ``m`` full branches.

    ``theta1`` bounds ``sup|d_x kappa(u, .)|`` and must be ``< m - 1``;
    the expansion constant is ``m - theta1``.
    """
    return TorusSystem(u=float(u), weight=weight, m=int(m), kappa=kappa or TrigPerturbation(), theta1=float(theta1))


def auto_i_max(theta: float, tail_tol: float) -> int:
    """Smallest branch cap whose corrected-tail error estimate is ``<= tail_tol``."""
    return max(1, int(math.ceil((1.0 / (6.0 * theta * tail_tol)) ** (1.0 / 3.0))))


def gauss_family(
    kappa: PolyPerturbation | None = None,
    theta: float = 1.0,
    i_max: int | str = "auto",
    tail_tol: float = 1e-8,
    u: float = 0.0,
    weight: Weight = ACIM,
    tail_correction: bool = True,
) -> GaussSystem:
    """Gauss-type map ``x -> frac(1 / kappa(u, x))``.

    ``kappa(u, .)`` is an increasing diffeomorphism of ``[0, 1]`` with
    ``d_x kappa >= theta > 1/2``; the default is the identity (classical
    Gauss map). Branch ``i`` solves ``kappa(u, psi) = 1 / (i + y)``.
    """
    if i_max == "auto":
        i_max = auto_i_max(theta, tail_tol)
    return GaussSystem(
        u=float(u),
        weight=weight,
        kappa=kappa or PolyPerturbation.identity(),
        theta=float(theta),
        i_max=int(i_max),
        tail_correction=tail_correction,
    )


def cookie_cutter(branches: Sequence, t: float = 1.0, u: float = 0.0, allow_touching: bool = False) -> CookieCutterSystem:
    """Cookie-cutter from contracting branches with pairwise disjoint images.

    The weight is geometric, ``e^{g_i} = |d_y psi_i|**t``.
    """
    return CookieCutterSystem(u=float(u), weight=Weight.geometric(t), branches=tuple(branches), allow_touching=allow_touching)


def middle_third(t: float = 1.0) -> CookieCutterSystem:
    return cookie_cutter([AffineBranch((3.0, 0.0), (0.0, 0.0), "left"), AffineBranch((3.0, 0.0), (1.0, 0.0), "right")], t=t)


def linear_cookie_cutter(expansions: Sequence[float], t: float = 1.0) -> CookieCutterSystem:
    """Two-branch linear cookie-cutter: first branch at 0, last at 1,
    any middle branches spread evenly."""
    e = [float(v) for v in expansions]
    if len(e) != 2:
        raise ValidationError("linear_cookie_cutter takes exactly two expansions")
    return cookie_cutter([AffineBranch((e[0], 0.0), (0.0, 0.0), "left"), AffineBranch((e[1], 0.0), (1.0, 0.0), "right")], t=t)


# ---------------------------------------------------------------------------
# derived quantities


def weight_u_derivative(b: BranchSystem, i: int, y) -> np.ndarray:
    """``d_u g_i(u, y)`` from the closed-form branch formulas."""
    data = b.branch_data(y)
    if data.dlogjac_du is None:
        raise ValidationError("this system has no closed-form parameter derivative")
    return b.weight.exponent * data.dlogjac_du[i]


@dataclass
class ExpansionReport:
    lam: float
    max_branch_derivative: float
    k_T: float
    k_g: float
    sigma_min: float
    sigma_max: float
    k_sigma: float
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_expansion(b: BranchSystem, u_values=None, y_values=None) -> ExpansionReport:
    """Measure the constants of the branch system on a ``(u, y)`` mesh.

    Checks the contraction ``|d_y psi_i| <= 1/lambda`` (metric norm for the
    Gauss family), and reports bounds on branch derivatives (``k_T``), on
    weight derivatives (``k_g``) and on ``sum_i e^{g_i}`` (``k_sigma``).
    """
    us = np.atleast_1d(b.u if u_values is None else u_values).astype(float)
    ys = np.linspace(0.0, 1.0, 65) if y_values is None else np.atleast_1d(y_values).astype(float)
    max_dpsi = k_T = k_g = 0.0
    smin, smax = np.inf, 0.0
    violations = []
    for u in us:
        s = b.with_u(u)
        d = s.branch_data(ys)
        if s.metric == "gauss":
            dpsi = (1.0 + ys[None, :]) / (1.0 + d.psi) * np.abs(d.dy)
        else:
            dpsi = np.abs(d.dy)
        max_dpsi = max(max_dpsi, float(dpsi.max()))
        k_T = max(k_T, float(np.abs(d.dy).max()), 0.0 if d.du is None else float(np.abs(d.du).max()))
        ex = s.weight.exponent
        k_g = max(k_g, float(np.abs(ex * d.dlogjac_dy).max()))
        if d.dlogjac_du is not None:
            k_g = max(k_g, float(np.abs(ex * d.dlogjac_du).max()))
        total = np.exp(ex * d.logjac).sum(axis=0)
        tail = s.tail(ys)
        if tail is not None:
            total = total + tail.upper
        smin, smax = min(smin, float(total.min())), max(smax, float(total.max()))
        if max_dpsi > 1.0 / s.lam * (1 + 1e-9):
            violations.append(f"branch derivative {max_dpsi:.6g} exceeds 1/lambda={1 / s.lam:.6g} at u={u}")
    if smin <= 0:
        violations.append("sum of weights not positive")
    return ExpansionReport(
        lam=float(b.lam),
        max_branch_derivative=max_dpsi,
        k_T=k_T,
        k_g=k_g,
        sigma_min=smin,
        sigma_max=smax,
        k_sigma=max(smax, 1.0 / smin) if smin > 0 else math.inf,
        violations=violations,
    )
