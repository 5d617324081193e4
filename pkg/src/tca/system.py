"""The stacked equilibrium representation and its IRF matrices.

A model plus a transmission ordering and horizon ``h`` determine the
systems form ``x = B x + Omega e`` on the ``(h+1)K`` grid, where ``B``
is strictly lower-triangular and ``Omega`` block-lower-triangular.  The
nonzero entries of ``(B, Omega)`` are the edges of the transmission DAG.

System indices are 1-based: index ``m = t*K + r`` refers to the variable
at ordered position ``r`` (1..K) and horizon ``t`` (0..h).  This
convention is used by every interface in the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionMismatchError,
    InconsistentNormalizationError,
    NotPositiveDefiniteError,
)
from .linalg import Permutation, ql_decompose, solve_unit_lower
from .model import ReducedVar, StructuralShockColumn, VarmaModel

__all__ = [
    "TransmissionOrdering",
    "SystemsForm",
    "SingleShockSystem",
    "IrfSet",
    "make_systems_form",
    "irf_total",
    "cholesky_irfs",
    "reconstruct_from_single_shock",
]

#: Soft cap on the stacked system size (h <= 200 at K <= 20); pass
#: ``allow_large=True`` to override.
SYSTEM_SIZE_CAP = 201 * 20


@dataclass(frozen=True)
class TransmissionOrdering:
    """Researcher-chosen ordering of the variables.

    ``labels[r]`` is the variable placed at ordered position ``r + 1``;
    ``perm`` maps ordered positions to original indices.
    """

    perm: Permutation
    labels: tuple

    def __post_init__(self):
        if len(self.labels) != self.perm.size:
            raise DimensionMismatchError("labels do not match permutation size")
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @property
    def K(self) -> int:
        return self.perm.size

    @classmethod
    def from_names(cls, var_names, ordered_names) -> "TransmissionOrdering":
        """Ordering that places ``ordered_names`` first-to-last."""
        names = [str(n) for n in var_names]
        wanted = [str(n) for n in ordered_names]
        if sorted(names) != sorted(wanted):
            raise ValueError(
                f"ordered names {wanted} are not a permutation of {names}"
            )
        dest = tuple(names.index(n) for n in wanted)
        return cls(perm=Permutation(dest), labels=tuple(wanted))

    @classmethod
    def identity(cls, var_names) -> "TransmissionOrdering":
        names = tuple(str(n) for n in var_names)
        return cls(perm=Permutation.identity(len(names)), labels=names)

    def matrix(self) -> np.ndarray:
        return self.perm.matrix()

    def position(self, name: str) -> int:
        """1-based ordered position of a variable name."""
        return self.labels.index(str(name)) + 1


def _check_ordering(ordering: TransmissionOrdering, var_names) -> None:
    if sorted(ordering.labels) != sorted(str(n) for n in var_names):
        raise ValueError("ordering labels do not match the model's variables")
    for r, orig in enumerate(ordering.perm.dest):
        if str(var_names[orig]) != ordering.labels[r]:
            raise ValueError("ordering permutation disagrees with its labels")


@dataclass(frozen=True)
class SystemsForm:
    """The pair ``(B, Omega)`` with index bookkeeping."""

    K: int
    h: int
    B: np.ndarray
    omega: np.ndarray
    ordering: TransmissionOrdering

    @property
    def size(self) -> int:
        return (self.h + 1) * self.K

    def sys_index(self, position: int, horizon: int) -> int:
        """1-based system index of ordered position ``position`` at ``horizon``."""
        if not 1 <= position <= self.K:
            raise IndexError(f"position must be in 1..{self.K}")
        if not 0 <= horizon <= self.h:
            raise IndexError(f"horizon must be in 0..{self.h}")
        return horizon * self.K + position

    def var_horizon(self, m: int) -> tuple:
        """Inverse of :meth:`sys_index`: ``m -> (position, horizon)``."""
        if not 1 <= m <= self.size:
            raise IndexError(f"system index must be in 1..{self.size}")
        return (m - 1) % self.K + 1, (m - 1) // self.K

    def label(self, m: int) -> str:
        r, t = self.var_horizon(m)
        return f"{self.ordering.labels[r - 1]}_{t}"

    def shock_column(self, shock: int) -> np.ndarray:
        """Omega column of the 1-based time-0 shock ``shock``."""
        if not 1 <= shock <= self.K:
            raise IndexError(f"shock must be in 1..{self.K}")
        return self.omega[:, shock - 1].copy()


@dataclass(frozen=True)
class SingleShockSystem:
    """``B`` plus the single identified shock column of ``Omega``."""

    K: int
    h: int
    B: np.ndarray
    omega_col: np.ndarray
    ordering: TransmissionOrdering
    shock_label: str = "shock"

    @property
    def size(self) -> int:
        return (self.h + 1) * self.K


@dataclass(frozen=True)
class IrfSet:
    """Structural IRFs and the orthogonalised IRFs used alongside them."""

    phi: np.ndarray
    phi_tilde: np.ndarray
    ordering: TransmissionOrdering
    K: int
    h: int

    @classmethod
    def from_model(cls, model: VarmaModel, ordering: TransmissionOrdering,
                   h: int, allow_large: bool = False) -> "IrfSet":
        sf = make_systems_form(model, ordering, h, allow_large=allow_large)
        return cls(
            phi=irf_total(sf),
            phi_tilde=cholesky_irfs(model, ordering, h, allow_large=allow_large),
            ordering=ordering,
            K=model.K,
            h=h,
        )


def _check_size(K: int, h: int, allow_large: bool) -> None:
    if h < 0:
        raise ValueError("horizon must be >= 0")
    if not allow_large and (h + 1) * K > SYSTEM_SIZE_CAP:
        raise ValueError(
            f"system size (h+1)*K = {(h + 1) * K} exceeds the soft cap "
            f"{SYSTEM_SIZE_CAP}; pass allow_large=True to override"
        )


def _stack_blocks(K: int, h: int, diag: np.ndarray, sub) -> np.ndarray:
    """Block lower-triangular matrix with ``diag`` on the block diagonal
    and ``sub[l-1]`` on the l-th sub-block-diagonal."""
    n = (h + 1) * K
    out = np.zeros((n, n))
    for t in range(h + 1):
        out[t * K : (t + 1) * K, t * K : (t + 1) * K] = diag
        for l, block in enumerate(sub, start=1):
            if l > t:
                break
            out[t * K : (t + 1) * K, (t - l) * K : (t - l + 1) * K] = block
    return out


def make_systems_form(model: VarmaModel, ordering: TransmissionOrdering,
                      h: int, allow_large: bool = False) -> SystemsForm:
    """Build ``(B, Omega)`` from a structural model under an ordering.

    The contemporaneous matrix is column-permuted and QL-factored; with
    ``D`` the inverse of the triangular factor's diagonal, the diagonal
    blocks of ``B`` are ``I - D L`` and its lag-``i`` blocks ``D Q' A_i``
    (in permuted coordinates).  ``Omega`` has diagonal blocks ``D Q'``
    and MA blocks ``D Q' Psi_j``.  Pre-sample terms are dropped: only a
    time-0 shock propagates.
    """
    _check_ordering(ordering, model.var_names)
    K = model.K
    _check_size(K, h, allow_large)
    dest = list(ordering.perm.dest)

    Q, L = ql_decompose(model.A0[:, dest])
    d = 1.0 / np.diag(L)
    DQt = d[:, None] * Q.T

    b_diag = -(d[:, None] * L)
    np.fill_diagonal(b_diag, 0.0)
    b_sub = [DQt @ Ai[:, dest] for Ai in model.A[: min(h, model.ar_order)]]
    o_sub = [DQt @ Pj for Pj in model.Psi[: min(h, model.ma_order)]]

    B = _stack_blocks(K, h, b_diag, b_sub)
    omega = _stack_blocks(K, h, DQt, o_sub)
    return SystemsForm(K=K, h=h, B=B, omega=omega, ordering=ordering)


def irf_total(sf: SystemsForm) -> np.ndarray:
    """Total-effect IRF matrix ``(I - B)^{-1} Omega``."""
    return solve_unit_lower(sf.B, sf.omega)


def _cholesky_form(source, ordering: TransmissionOrdering):
    """Orthogonalised-form quantities ``(L, D, Abar, Psibar)``.

    These are exactly the objects recoverable from the reduced form
    alone: the triangular contemporaneous matrix under the ordering, the
    inverse of its diagonal, and the rotated AR and MA matrices.
    """
    dest = list(ordering.perm.dest)
    if isinstance(source, VarmaModel):
        _check_ordering(ordering, source.var_names)
        Q, L = ql_decompose(source.A0[:, dest])
        abar = [Q.T @ Ai[:, dest] for Ai in source.A]
        psibar = [Q.T @ Pj @ Q for Pj in source.Psi]
    elif isinstance(source, ReducedVar):
        _check_ordering(ordering, source.var_names)
        sigma = source.sigma_u[np.ix_(dest, dest)]
        try:
            P = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(
                "permuted residual covariance has no Cholesky factor"
            ) from exc
        L = solve_triangular(P, np.eye(source.K), lower=True)
        abar = [L @ Ai[np.ix_(dest, dest)] for Ai in source.coefs]
        psibar = []
    else:
        raise TypeError(f"unsupported source type: {type(source).__name__}")
    d = 1.0 / np.diag(L)
    return L, d, abar, psibar


def _b_from_cholesky_form(K, h, L, d, abar) -> np.ndarray:
    b_diag = -(d[:, None] * L)
    np.fill_diagonal(b_diag, 0.0)
    b_sub = [d[:, None] * Ab for Ab in abar[:h]]
    return _stack_blocks(K, h, b_diag, b_sub)


def cholesky_irfs(source, ordering: TransmissionOrdering, h: int,
                  allow_large: bool = False) -> np.ndarray:
    """IRFs to orthogonalised shocks under the given ordering.

    ``source`` may be a structural :class:`VarmaModel` or an estimated
    :class:`ReducedVar`; both yield the same matrix when the reduced
    form derives from the structural model.  The orthogonalisation is a
    computational device tied to the ordering, not an identification
    claim.
    """
    K = source.K
    _check_size(K, h, allow_large)
    L, d, abar, psibar = _cholesky_form(source, ordering)
    B = _b_from_cholesky_form(K, h, L, d, abar)
    o_sub = [d[:, None] * Pb for Pb in psibar[:h]]
    omega_tilde = _stack_blocks(K, h, np.diag(d), o_sub)
    return solve_unit_lower(B, omega_tilde)


def reconstruct_from_single_shock(reduced, ordering: TransmissionOrdering,
                                  phi_col, h: int,
                                  allow_large: bool = False,
                                  shock_label: str | None = None) -> SingleShockSystem:
    """Rebuild ``B`` and one ``Omega`` column from reduced-form
    quantities plus a single identified impact column.

    ``phi_col`` holds the horizon-0 responses of the K variables (in the
    model's native variable order) to the identified shock; a
    :class:`StructuralShockColumn` or a length-K vector is accepted.
    The result suffices to compute every transmission effect of that
    shock, without knowing the other structural shocks.
    """
    K = reduced.K
    _check_size(K, h, allow_large)
    if isinstance(phi_col, StructuralShockColumn):
        if phi_col.K != K:
            raise InconsistentNormalizationError(
                f"shock column is for K={phi_col.K}, system has K={K}"
            )
        impact = phi_col.impact_block()
        if shock_label is None:
            shock_label = phi_col.label
    else:
        impact = np.asarray(phi_col, dtype=float).reshape(-1)
        if impact.shape[0] != K:
            raise InconsistentNormalizationError(
                f"impact column has length {impact.shape[0]}, expected K={K}"
            )
    if shock_label is None:
        shock_label = "shock"

    L, d, abar, psibar = _cholesky_form(reduced, ordering)
    B = _b_from_cholesky_form(K, h, L, d, abar)

    q_col = L @ impact[list(ordering.perm.dest)]
    blocks = [d * q_col]
    for j in range(1, h + 1):
        if j <= len(psibar):
            blocks.append(d * (psibar[j - 1] @ q_col))
        else:
            blocks.append(np.zeros(K))
    return SingleShockSystem(
        K=K,
        h=h,
        B=B,
        omega_col=np.concatenate(blocks),
        ordering=ordering,
        shock_label=shock_label,
    )
