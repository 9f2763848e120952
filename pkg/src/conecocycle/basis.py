"""Spectral collocation on the circle and on the unit interval.

Functions on ``M`` are stored by their values at canonical nodes:

* ``Basis.FOURIER``: ``n`` uniform nodes ``j/n`` on ``[0, 1)``, trigonometric
  interpolation (1-periodic);
* ``Basis.CHEBYSHEV``: ``n`` Chebyshev--Gauss--Lobatto nodes affinely mapped
  to ``[0, 1]`` in increasing order, barycentric polynomial interpolation.

Integration is against normalized Lebesgue measure on ``[0, 1]`` (mean of
node values on the circle, Clenshaw--Curtis on the interval).
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from .errors import ConeViolationError, DomainError, ResolutionError, ValidationError

ArrayLike = Union[float, np.ndarray]

# Chebyshev points may leave [0, 1] by rounding only; anything beyond is a bug.
DOMAIN_SLACK = 1e-12


class Basis(str, enum.Enum):
    FOURIER = "fourier"
    CHEBYSHEV = "chebyshev"

    @property
    def periodic(self) -> bool:
        return self is Basis.FOURIER


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _clenshaw_curtis(N: int) -> np.ndarray:
    """Clenshaw--Curtis weights on [-1, 1] for the N+1 Lobatto points."""
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    ii = np.arange(1, N)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
        v -= np.cos(N * theta[ii]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
    w[ii] = 2.0 * v / N
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes, quadrature and cached linear maps for one ``(basis, n)`` pair.

    Obtain instances through :func:`grid`, which memoizes them.
    """

    basis: Basis
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @functools.cached_property
    def bary(self) -> np.ndarray:
        if self.basis is not Basis.CHEBYSHEV:
            raise AttributeError("barycentric weights exist for Chebyshev grids only")
        w = (-1.0) ** np.arange(self.n)
        w[0] *= 0.5
        w[-1] *= 0.5
        return _readonly(w)

    def diff_matrix(self, order: int = 1) -> np.ndarray:
        """Dense spectral differentiation matrix of the given order."""
        if order < 0:
            raise ValidationError("derivative order must be non-negative")
        if order > self.n / 2:
            raise ResolutionError(f"derivative order {order} exceeds n/2 = {self.n / 2}")
        key = ("D", order)
        if key in self._cache:
            return self._cache[key]
        n = self.n
        if order == 0:
            D = np.eye(n)
        elif self.basis is Basis.FOURIER:
            k = np.fft.fftfreq(n, 1.0 / n)
            mult = (2j * np.pi * k) ** order
            if n % 2 == 0 and order % 2 == 1:
                mult[n // 2] = 0.0
            D = np.real(np.fft.ifft(mult[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0))
        else:
            x, w = self.nodes, self.bary
            c = x[:, None] - x[None, :]
            np.fill_diagonal(c, 1.0)
            D1 = (w[None, :] / w[:, None]) / c
            np.fill_diagonal(D1, 0.0)
            np.fill_diagonal(D1, -D1.sum(axis=1))
            D = np.linalg.matrix_power(D1, order)
        D = _readonly(D)
        self._cache[key] = D
        return D

    def check_points(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise DomainError("interpolation point is not finite")
        if self.basis is Basis.FOURIER:
            return np.mod(x, 1.0)
        if np.any(x < -DOMAIN_SLACK) or np.any(x > 1.0 + DOMAIN_SLACK):
            bad = x[(x < -DOMAIN_SLACK) | (x > 1.0 + DOMAIN_SLACK)]
            raise DomainError(f"point(s) outside [0, 1]: {bad[:3]}")
        return np.clip(x, 0.0, 1.0)

    def interp_matrix(self, x: ArrayLike) -> np.ndarray:
        """Matrix ``E`` with ``E @ values`` = interpolant at the points ``x``."""
        pts = self.check_points(np.atleast_1d(x)).ravel()
        n = self.n
        if self.basis is Basis.FOURIER:
            coeffs = self._rfft_matrix()
            kk = np.arange(coeffs.shape[0])
            wk = self._fourier_multiplicity()
            arg = 2.0 * np.pi * np.outer(pts, kk)
            return (np.cos(arg) * wk) @ coeffs.real - (np.sin(arg) * wk) @ coeffs.imag
        diff = pts[:, None] - self.nodes[None, :]
        hit = diff == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            W = self.bary[None, :] / diff
            E = W / W.sum(axis=1, keepdims=True)
        rows = hit.any(axis=1)
        if rows.any():
            E[rows] = hit[rows].astype(float)
        assert E.shape == (pts.size, n)
        return E

    def _rfft_matrix(self) -> np.ndarray:
        if "rfft" not in self._cache:
            self._cache["rfft"] = np.fft.rfft(np.eye(self.n), axis=0) / self.n
        return self._cache["rfft"]

    def _fourier_multiplicity(self) -> np.ndarray:
        m = self.n // 2 + 1
        wk = np.full(m, 2.0)
        wk[0] = 1.0
        if self.n % 2 == 0:
            wk[-1] = 1.0
        return wk

    def cheb_coefficients(self) -> np.ndarray:
        """Values-to-Chebyshev-coefficients matrix (variable ``t = 2x - 1``)."""
        if self.basis is not Basis.CHEBYSHEV:
            raise ValidationError("Chebyshev coefficients need a Chebyshev grid")
        if "coef" not in self._cache:
            V = npcheb.chebvander(2.0 * self.nodes - 1.0, self.n - 1)
            self._cache["coef"] = np.linalg.inv(V)
        return self._cache["coef"]

    def primitive_matrix(self, x: ArrayLike) -> np.ndarray:
        """Matrix mapping node values to ``int_0^x f`` at the points ``x``."""
        if self.basis is Basis.FOURIER:
            # no reduction mod 1: the primitive is not periodic
            pts = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
            if not np.all(np.isfinite(pts)):
                raise DomainError("integration limit is not finite")
            coeffs = self._rfft_matrix()
            kk = np.arange(coeffs.shape[0])
            wk = self._fourier_multiplicity()
            arg = 2.0 * np.pi * np.outer(pts, kk)
            with np.errstate(divide="ignore", invalid="ignore"):
                scale = np.where(kk > 0, wk / (2.0 * np.pi * kk), 0.0)
            # int_0^x cos(2 pi k s) ds = sin(2 pi k x)/(2 pi k), sin -> (1-cos)/(2 pi k)
            P = (np.sin(arg) * scale) @ coeffs.real - ((1.0 - np.cos(arg)) * scale) @ coeffs.imag
            P += np.outer(pts, coeffs[0].real)
            return P
        pts = self.check_points(np.atleast_1d(x)).ravel()
        C = npcheb.chebint(self.cheb_coefficients(), lbnd=-1.0, axis=0)
        V = npcheb.chebvander(2.0 * pts - 1.0, C.shape[0] - 1)
        return 0.5 * (V @ C)


@functools.lru_cache(maxsize=64)
def grid(basis: Basis | str, n: int) -> Grid:
    """Return the (memoized) grid for ``basis`` with ``n`` nodes."""
    basis = Basis(basis)
    n = int(n)
    if basis is Basis.FOURIER:
        if n < 1:
            raise ValidationError("Fourier grid needs n >= 1")
        nodes = np.arange(n) / n
        weights = np.full(n, 1.0 / n)
    else:
        if n < 2:
            raise ValidationError("Chebyshev grid needs n >= 2")
        N = n - 1
        nodes = 0.5 * (1.0 - np.cos(np.pi * np.arange(n) / N))
        nodes[0], nodes[-1] = 0.0, 1.0
        weights = 0.5 * _clenshaw_curtis(N)
    return Grid(basis, n, _readonly(nodes), _readonly(weights))


def nodes(basis: Basis | str, n: int) -> np.ndarray:
    return grid(basis, n).nodes


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A real function on ``M`` given by its values at the canonical nodes."""

    basis: Basis
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "basis", Basis(self.basis))
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size == 0:
            raise ValidationError("GridFunction needs at least one node")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("GridFunction values must be finite")
        object.__setattr__(self, "values", _readonly(vals))

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], ArrayLike], basis: Basis | str, n: int) -> "GridFunction":
        x = nodes(basis, n)
        return cls(Basis(basis), np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape))

    @classmethod
    def constant(cls, c: float, basis: Basis | str, n: int) -> "GridFunction":
        return cls(Basis(basis), np.full(int(n), float(c)))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def grid(self) -> Grid:
        return grid(self.basis, self.n)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def like(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.basis, values)

    def __call__(self, x: ArrayLike):
        return interpolate(self, x)

    def _check(self, other: "GridFunction") -> None:
        if other.basis is not self.basis or other.n != self.n:
            raise ValidationError("grid functions live on different grids")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return self.like(self.values + other.values)
        return self.like(self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return self.like(self.values - other.values)
        return self.like(self.values - float(other))

    def __neg__(self):
        return self.like(-self.values)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return self.like(self.values * other.values)
        return self.like(self.values * float(other))

    __rmul__ = __mul__

    def __truediv__(self, c: float):
        return self.like(self.values / float(c))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __repr__(self) -> str:
        return f"GridFunction({self.basis.value}, n={self.n})"


def interpolate(f: GridFunction, x: ArrayLike):
    """Evaluate the spectral interpolant of ``f`` at ``x``.

    Points on the circle are reduced mod 1; on the interval they must lie in
    ``[0, 1]``. Returns a float for scalar input and an array otherwise.
    """
    g = f.grid
    scalar = np.ndim(x) == 0
    pts = g.check_points(np.atleast_1d(x))
    shape = pts.shape
    pts = pts.ravel()
    if f.basis is Basis.FOURIER:
        c = np.fft.rfft(f.values) / f.n
        kk = np.arange(c.size)
        arg = 2.0 * np.pi * np.outer(pts, kk)
        wk = g._fourier_multiplicity()
        out = (np.cos(arg) * wk) @ c.real - (np.sin(arg) * wk) @ c.imag
    else:
        diff = pts[:, None] - g.nodes[None, :]
        hit = diff == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            W = g.bary[None, :] / diff
            out = (W @ f.values) / W.sum(axis=1)
        rows = np.flatnonzero(hit.any(axis=1))
        if rows.size:
            out[rows] = f.values[np.argmax(hit[rows], axis=1)]
    out = out.reshape(shape)
    return float(out[0]) if scalar else out


def integrate(f: GridFunction) -> float:
    """Integral of ``f`` against normalized Lebesgue measure on ``[0, 1]``."""
    return float(f.grid.weights @ f.values)


def differentiate(f: GridFunction, order: int = 1) -> GridFunction:
    """Spectral derivative of order ``order`` at the same nodes."""
    if order < 1:
        raise ValidationError("order must be >= 1")
    return f.like(f.grid.diff_matrix(order) @ f.values)


@dataclass(frozen=True)
class LineElement:
    """A Riemannian line element ``ds = h(x)|dx|`` on ``[0, 1]``.

    ``primitive`` is an antiderivative of ``h``; geodesic distances are
    differences of it.
    """

    name: str
    density: Callable[[np.ndarray], np.ndarray]
    primitive: Callable[[np.ndarray], np.ndarray]


EUCLIDEAN = LineElement("euclidean", lambda x: np.ones_like(np.asarray(x, dtype=float)), lambda x: np.asarray(x, float))
# ds = |dx|/(1+x): makes Gauss-type inverse branches uniformly contracting.
GAUSS_METRIC = LineElement("gauss", lambda x: 1.0 / (1.0 + np.asarray(x, float)), lambda x: np.log1p(np.asarray(x, float)))

METRICS: Mapping[str, LineElement] = {m.name: m for m in (EUCLIDEAN, GAUSS_METRIC)}


def line_element(metric: str | LineElement | None) -> LineElement:
    if metric is None:
        return EUCLIDEAN
    if isinstance(metric, LineElement):
        return metric
    try:
        return METRICS[metric]
    except KeyError:
        raise ValidationError(f"unknown metric {metric!r}") from None


def pair_distances(g: Grid, metric: str | LineElement | None = None) -> np.ndarray:
    """Geodesic distances between all node pairs."""
    le = line_element(metric)
    if g.basis is Basis.FOURIER:
        if le is not EUCLIDEAN:
            raise ValidationError("only the flat metric is supported on the circle")
        d = np.abs(g.nodes[:, None] - g.nodes[None, :])
        return np.minimum(d, 1.0 - d)
    H = le.primitive(g.nodes)
    return np.abs(H[:, None] - H[None, :])


def holder_seminorm(
    f: GridFunction,
    k: int,
    alpha: float,
    delta1: float = 1.0 / 3.0,
    metric: str | LineElement | None = None,
) -> float:
    """Node-pair estimate of the ``delta1``-local Hölder seminorm of ``D^k f``.

    The maximum of ``|D^k f(x) - D^k f(x')| / d(x, x')**alpha`` over node
    pairs with ``0 < d <= delta1``. Because only nodes are scanned this is a
    lower bound for the seminorm of the interpolant. With a non-flat
    ``metric`` the difference is measured in the norm at ``x``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValidationError("alpha must lie in (0, 1]")
    g = f.grid
    Dk = f.values if k == 0 else g.diff_matrix(k) @ f.values
    d = pair_distances(g, metric)
    mask = (d > 0.0) & (d <= delta1)
    if not mask.any():
        raise DomainError(f"no node pair within delta1={delta1}")
    scale = line_element(metric).density(g.nodes) ** (-k) if k else np.ones(g.n)
    num = np.abs(Dk[:, None] - Dk[None, :]) * scale[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(mask, num / np.where(mask, d, 1.0) ** alpha, 0.0)
    return float(q.max())


@dataclass(frozen=True)
class DensitySection:
    """Window ``{k: f_{tau^k omega}}`` of the equivariant density section.

    Every member is strictly positive at the nodes and integrates to one.
    """

    window: Mapping[int, GridFunction]
    depth: int

    def __post_init__(self):
        for k, f in self.window.items():
            if np.min(f.values) <= 0.0:
                raise ConeViolationError(f"density at time {k} is not strictly positive")
            if abs(integrate(f) - 1.0) > 1e-12:
                raise ConeViolationError(f"density at time {k} is not normalized")

    def __getitem__(self, k: int) -> GridFunction:
        return self.window[k]

    def __contains__(self, k: int) -> bool:
        return k in self.window

    @property
    def times(self) -> list[int]:
        return sorted(self.window)
