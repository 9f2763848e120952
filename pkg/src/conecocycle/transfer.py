"""Discretized weighted transfer operators.

For a branch system with weights ``g_i`` the operator acts on node values by

    (L phi)(y) = sum_i exp(g_i(u, y)) phi(psi_i(u, y)),

evaluating ``phi`` through its spectral interpolant. For truncated Gauss
systems the missing branches are replaced by ``int_0^{x0(y)} phi`` where
``x0(y)`` is the lower end of the union of their images (see
:meth:`conecocycle.maps.GaussSystem.tail`).
"""

from __future__ import annotations

import functools
from typing import Optional

import numpy as np

from .basis import Basis, GridFunction, grid, integrate, interpolate
from .errors import ConeViolationError, ValidationError
from .maps import BranchSystem

FD_STEP = 1e-5


class UnsupportedFamilyError(ValidationError):
    """The system lacks the data needed for the requested derivative."""


class TransferOperator:
    """Transfer operator of ``system`` on the grid ``(basis, n)``.

    Branch data at the nodes is computed once; the dense matrix and its
    parameter derivatives are assembled on first use.
    """

    def __init__(self, system: BranchSystem, basis: Basis | str, n: int):
        self.system = system
        self.basis = Basis(basis)
        self.n = int(n)
        if self.basis.periodic and not getattr(system, "family", None) == "torus":
            raise ValidationError(f"the Fourier basis needs a circle map, got family {system.family.value}")
        self.grid = grid(self.basis, self.n)

    def __repr__(self) -> str:
        return f"TransferOperator({self.system.family.value}, u={self.system.u}, {self.basis.value}, n={self.n})"

    @functools.cached_property
    def _data(self):
        return self.system.branch_data(self.grid.nodes)

    @functools.cached_property
    def _tail(self):
        return self.system.tail(self.grid.nodes)

    @functools.cached_property
    def weights(self) -> np.ndarray:
        """``exp(g_i)`` at the nodes, shape ``(branches, n)``."""
        return np.exp(self.system.weight.exponent * self._data.logjac)

    @property
    def tail_bound(self) -> float:
        """Estimated error of the branch truncation per unit sup-norm (0 if exact)."""
        est = getattr(self.system, "tail_error_estimate", None)
        return 0.0 if est is None else float(est)

    @property
    def u_derivative_method(self) -> str:
        return "analytic" if self.system.has_u_derivative else "finite-difference"

    # -- matrix-free application -------------------------------------------

    def apply_values(self, v: np.ndarray) -> np.ndarray:
        f = GridFunction(self.basis, v)
        vals = interpolate(f, self._data.psi)
        out = np.sum(self.weights * vals, axis=0)
        if self._tail is not None:
            out = out + self.grid.primitive_matrix(self._tail.upper) @ v
        return out

    # -- assembled matrices -------------------------------------------------

    def _branch_sum(self, row_factors, deriv_factors=None) -> np.ndarray:
        """``sum_i diag(r_i) E(psi_i) [+ diag(d_i) E(psi_i) D]``."""
        n = self.n
        A = np.zeros((n, n))
        B = np.zeros((n, n)) if deriv_factors is not None else None
        psi = self._data.psi
        for i in range(psi.shape[0]):
            E = self.grid.interp_matrix(psi[i])
            A += row_factors[i][:, None] * E
            if B is not None:
                B += deriv_factors[i][:, None] * E
        if B is not None:
            A += B @ self.grid.diff_matrix(1)
        return A

    @functools.cached_property
    def matrix(self) -> np.ndarray:
        A = self._branch_sum(self.weights)
        if self._tail is not None:
            A += self.grid.primitive_matrix(self._tail.upper)
        A.setflags(write=False)
        return A

    @functools.cached_property
    def u_derivative_matrix(self) -> np.ndarray:
        """Matrix of ``phi -> d_u (L_u phi)``."""
        if not self.system.has_u_derivative:
            u, h = self.system.u, FD_STEP
            up = TransferOperator(self.system.with_u(u + h), self.basis, self.n).matrix
            dn = TransferOperator(self.system.with_u(u - h), self.basis, self.n).matrix
            M = (up - dn) / (2 * h)
        else:
            d = self._data
            s = self.system.weight.exponent
            M = self._branch_sum(self.weights * s * d.dlogjac_du, self.weights * d.du)
            if self._tail is not None:
                M += self._tail.upper_du[:, None] * self.grid.interp_matrix(self._tail.upper)
        M.setflags(write=False)
        return M

    @functools.cached_property
    def t_derivative_matrix(self) -> np.ndarray:
        """Matrix of ``phi -> d_t (L_t phi)`` for geometric weights ``|psi'|^t``."""
        if self.system.weight.kind != "geometric":
            raise UnsupportedFamilyError("t-derivative needs a geometric weight")
        M = self._branch_sum(self._data.logjac * self.weights)
        M.setflags(write=False)
        return M

    # -- GridFunction interface --------------------------------------------

    def _check(self, phi: GridFunction) -> None:
        if phi.basis is not self.basis or phi.n != self.n:
            raise ValidationError(f"{phi!r} does not match operator grid ({self.basis.value}, n={self.n})")

    def __call__(self, phi: GridFunction) -> GridFunction:
        return apply(self, phi)


def transfer_operator(system: BranchSystem, basis: Basis | str, n: int) -> TransferOperator:
    return TransferOperator(system, basis, n)


def apply(L: TransferOperator, phi: GridFunction) -> GridFunction:
    """``L phi`` evaluated node-wise by the branch sum."""
    L._check(phi)
    return phi.like(L.apply_values(phi.values))


def normalization(L: TransferOperator, phi: GridFunction) -> float:
    """``Lambda = int L phi``; raises :class:`ConeViolationError` if not positive."""
    lam = integrate(apply(L, phi))
    if not lam > 0.0:
        raise ConeViolationError(f"normalization {lam:.3g} is not positive")
    return lam


def normalized_apply(L: TransferOperator, phi: GridFunction) -> tuple[GridFunction, float]:
    """``(L phi / Lambda, Lambda)`` with ``Lambda = int L phi``."""
    Lphi = apply(L, phi)
    lam = integrate(Lphi)
    if not lam > 0.0:
        raise ConeViolationError(f"normalization {lam:.3g} is not positive")
    return Lphi / lam, lam


def apply_u_derivative(L: TransferOperator, phi: GridFunction) -> GridFunction:
    """``d_u L phi = sum_i e^{g_i} [d_u g_i phi(psi_i) + phi'(psi_i) d_u psi_i]``.

    Falls back to a central difference of ``L`` in ``u`` when the family has
    no closed-form parameter derivative (see ``L.u_derivative_method``).
    """
    L._check(phi)
    return phi.like(L.u_derivative_matrix @ phi.values)


def apply_t_derivative(L: TransferOperator, phi: GridFunction) -> GridFunction:
    """``d_t L phi = sum_i log|psi_i'| |psi_i'|^t phi(psi_i)``."""
    L._check(phi)
    return phi.like(L.t_derivative_matrix @ phi.values)


def power_iterate(L: TransferOperator, steps: int, phi: Optional[GridFunction] = None) -> tuple[GridFunction, float]:
    """Iterate the normalized map ``steps`` times from ``phi`` (default 1)."""
    f = phi if phi is not None else GridFunction.constant(1.0, L.basis, L.n)
    lam = float("nan")
    for _ in range(steps):
        f, lam = normalized_apply(L, f)
    return f, lam
