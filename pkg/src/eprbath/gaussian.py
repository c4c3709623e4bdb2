"""Gaussian states over labeled bosonic modes and their primitive channels.

Conventions
-----------
Quadratures are ordered ``(X_1, P_1, X_2, P_2, ...)`` and dimensionless, with
``[X, P] = i``.  Vacuum (and the coherent spin state in the Holstein-Primakoff
picture) has variance 1/2 per quadrature.  In this normalization the EPR
witness ``xi = var(P_c) + var(P_s)`` equals 1 on the separability boundary and
``(mu - nu)^2`` for the ideal two-mode squeezed steady state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ChannelNotPhysicalError,
    DegenerateMeasurementError,
    InvalidArgumentError,
    InvalidStateError,
)

__all__ = [
    "ATOMIC_C", "ATOMIC_S", "LIGHT_C", "LIGHT_S",
    "SqueezeParams", "GaussianState",
    "symplectic_form", "new_vacuum", "apply_affine_channel",
    "condition_on_homodyne", "epr_xi", "beam_splitter_loss",
]

# Canonical mode labels used by the two-ensemble scenarios.  The c/s modes are
# the nonlocal combinations X_c = (X_I + X_II)/sqrt(2), P_c = (P_I + P_II)/sqrt(2),
# X_s = -(P_I - P_II)/sqrt(2), P_s = (X_I - X_II)/sqrt(2).
ATOMIC_C = "atomic_c"
ATOMIC_S = "atomic_s"
LIGHT_C = "light_c"
LIGHT_S = "light_s"

SYMMETRY_TOL = 1e-12
PHYSICALITY_TOL = 1e-10


def symplectic_form(n_modes: int) -> np.ndarray:
    """Standard symplectic form for (X1, P1, ..., Xn, Pn) ordering."""
    omega = np.zeros((2 * n_modes, 2 * n_modes))
    for k in range(n_modes):
        omega[2 * k, 2 * k + 1] = 1.0
        omega[2 * k + 1, 2 * k] = -1.0
    return omega


@dataclass(frozen=True)
class SqueezeParams:
    """Two-mode squeezing parameters ``mu = cosh(r)``, ``nu = sinh(r)``.

    ``Z = mu + nu = e^r`` and ``Zinv = mu - nu = e^-r`` are the quadrature
    scale factors of the target state; ``mu^2 - nu^2 = 1`` and ``Z*Zinv = 1``
    hold by construction and are re-checked on creation.
    """

    r: float
    mu: float = field(init=False)
    nu: float = field(init=False)
    Z: float = field(init=False)
    Zinv: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mu", math.cosh(self.r))
        object.__setattr__(self, "nu", math.sinh(self.r))
        object.__setattr__(self, "Z", self.mu + self.nu)
        object.__setattr__(self, "Zinv", self.mu - self.nu)
        if abs(self.mu**2 - self.nu**2 - 1.0) > 1e-12:
            raise InvalidArgumentError(
                f"mu^2 - nu^2 = {self.mu**2 - self.nu**2} != 1; r too large "
                "for double precision")
        if abs(self.Z * self.Zinv - 1.0) > 1e-12:
            raise InvalidArgumentError("Z * Zinv != 1 within 1e-12")

    @classmethod
    def from_r(cls, r: float) -> "SqueezeParams":
        return cls(r=float(r))

    @classmethod
    def from_Z(cls, Z: float) -> "SqueezeParams":
        if Z <= 0:
            raise InvalidArgumentError(f"Z must be positive, got {Z}")
        return cls(r=math.log(Z))


@dataclass(frozen=True)
class GaussianState:
    """Gaussian state: labeled modes, covariance matrix, displacement vector.

    Attributes
    ----------
    modes : tuple of str
        Ordered mode labels; quadrature ``2*i`` is X of ``modes[i]``,
        ``2*i + 1`` its P.
    cov : ndarray, shape (2n, 2n)
        Symmetric covariance matrix of the quadratures (vacuum = I/2).
    disp : ndarray, shape (2n,)
        Mean quadrature vector.

    Construction validates symmetry (1e-12), the uncertainty relation
    ``cov + (i/2) Omega >= 0`` (eigenvalues >= -1e-10), and symplectic
    eigenvalues >= 1/2 - 1e-10.  Instances are immutable; the arrays are
    copied and marked read-only.
    """

    modes: tuple
    cov: np.ndarray
    disp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        cov = np.array(self.cov, dtype=float)
        disp = np.array(self.disp, dtype=float)
        n = len(self.modes)
        if cov.shape != (2 * n, 2 * n):
            raise InvalidStateError(
                f"cov shape {cov.shape} does not match {n} modes")
        if disp.shape != (2 * n,):
            raise InvalidStateError(
                f"disp shape {disp.shape} does not match {n} modes")
        if not np.all(np.abs(cov - cov.T) <= SYMMETRY_TOL):
            raise InvalidStateError("covariance matrix is not symmetric "
                                    f"within {SYMMETRY_TOL}")
        cov = 0.5 * (cov + cov.T)
        omega = symplectic_form(n)
        eigs = np.linalg.eigvalsh(cov + 0.5j * omega)
        if eigs.min() < -PHYSICALITY_TOL:
            raise InvalidStateError(
                "covariance matrix violates the uncertainty relation: "
                f"min eigenvalue of cov + (i/2)Omega is {eigs.min():.3e}")
        if self.symplectic_eigenvalues(cov).min() < 0.5 - PHYSICALITY_TOL:
            raise InvalidStateError("symplectic eigenvalue below 1/2")
        cov.setflags(write=False)
        disp.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "disp", disp)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def mode_index(self, label) -> int:
        try:
            return self.modes.index(label)
        except ValueError:
            raise InvalidStateError(
                f"mode {label!r} not in state (modes: {self.modes})") from None

    def quad_index(self, label, quadrature: str) -> int:
        """Row/column index of quadrature 'X' or 'P' of the given mode."""
        if quadrature not in ("X", "P"):
            raise InvalidArgumentError(
                f"quadrature must be 'X' or 'P', got {quadrature!r}")
        return 2 * self.mode_index(label) + (0 if quadrature == "X" else 1)

    def variance(self, label, quadrature: str) -> float:
        i = self.quad_index(label, quadrature)
        return float(self.cov[i, i])

    def covariance(self, label_a, quad_a, label_b, quad_b) -> float:
        i = self.quad_index(label_a, quad_a)
        j = self.quad_index(label_b, quad_b)
        return float(self.cov[i, j])

    def mean(self, label, quadrature: str) -> float:
        return float(self.disp[self.quad_index(label, quadrature)])

    @staticmethod
    def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
        """Symplectic spectrum: moduli of the eigenvalues of i*Omega*cov."""
        n = cov.shape[0] // 2
        ev = np.linalg.eigvals(1j * symplectic_form(n) @ cov)
        return np.sort(np.abs(ev))[::2]  # eigenvalues come in +/- pairs


def new_vacuum(n_modes: int, labels=None) -> GaussianState:
    """Vacuum state: cov = I/2, disp = 0.

    ``labels`` defaults to ``mode_0, mode_1, ...``; pass explicit labels (for
    instance ``(ATOMIC_C, ATOMIC_S)``) to address modes by name later.
    """
    if not isinstance(n_modes, (int, np.integer)) or n_modes < 1:
        raise InvalidArgumentError(
            f"n_modes must be a positive integer, got {n_modes!r}")
    if labels is None:
        labels = tuple(f"mode_{i}" for i in range(n_modes))
    labels = tuple(labels)
    if len(labels) != n_modes:
        raise InvalidArgumentError("number of labels must equal n_modes")
    return GaussianState(labels, 0.5 * np.eye(2 * n_modes),
                         np.zeros(2 * n_modes))


def apply_affine_channel(state: GaussianState, S: np.ndarray, N: np.ndarray,
                         d_shift: np.ndarray | None = None) -> GaussianState:
    """Apply the Gaussian channel cov -> S cov S^T + N, disp -> S disp + d.

    ``N`` must be symmetric.  Raises ChannelNotPhysicalError if the output
    covariance violates the uncertainty relation (the error carries the
    offending eigenvalue).
    """
    S = np.asarray(S, dtype=float)
    N = np.asarray(N, dtype=float)
    dim = 2 * state.n_modes
    if S.shape != (dim, dim) or N.shape != (dim, dim):
        raise InvalidArgumentError(
            f"S and N must be {dim}x{dim}, got {S.shape} and {N.shape}")
    if not np.all(np.abs(N - N.T) <= SYMMETRY_TOL):
        raise InvalidArgumentError("added-noise matrix N is not symmetric")
    if d_shift is None:
        d_shift = np.zeros(dim)
    d_shift = np.asarray(d_shift, dtype=float)
    if d_shift.shape != (dim,):
        raise InvalidArgumentError(f"d_shift must have length {dim}")

    cov_out = S @ state.cov @ S.T + N
    cov_out = 0.5 * (cov_out + cov_out.T)
    disp_out = S @ state.disp + d_shift
    try:
        return GaussianState(state.modes, cov_out, disp_out)
    except InvalidStateError:
        omega = symplectic_form(state.n_modes)
        eigs = np.linalg.eigvalsh(cov_out + 0.5j * omega)
        raise ChannelNotPhysicalError(eigenvalue=float(eigs.min())) from None


def condition_on_homodyne(state: GaussianState, mode, quadrature: str,
                          outcome: float) -> GaussianState:
    """Condition the state on a homodyne measurement of one quadrature.

    The remaining covariance is the Schur complement of the measured
    quadrature's row/column,

        var_cond(P) = var(P) - cov_sym(P, y)^2 / var(y),

    and the displacement is updated by the Gaussian conditional mean.  The
    measured mode is removed from the state; the conjugate quadrature of that
    mode is discarded (it is fully randomized by the measurement).  The
    conditional covariance does not depend on the outcome.
    """
    k = state.quad_index(mode, quadrature)
    var_k = state.cov[k, k]
    if var_k < 1e-14:
        raise DegenerateMeasurementError(
            f"variance of measured quadrature is {var_k:.3e} (< 1e-14)")

    m = state.mode_index(mode)
    keep = [i for i in range(2 * state.n_modes) if i not in (2 * m, 2 * m + 1)]
    cross = state.cov[keep, k]
    cov_out = state.cov[np.ix_(keep, keep)] - np.outer(cross, cross) / var_k
    disp_out = state.disp[keep] + cross * (outcome - state.disp[k]) / var_k
    labels = tuple(lab for lab in state.modes if lab != state.modes[m])
    return GaussianState(labels, 0.5 * (cov_out + cov_out.T), disp_out)


def epr_xi(state: GaussianState) -> float:
    """EPR variance witness xi = var(P_c) + var(P_s).

    The coherent spin state gives xi = 1; xi < 1 certifies inseparability of
    the two ensembles; the ideal two-mode squeezed steady state gives
    xi = (mu - nu)^2.  Requires the atomic c and s modes to be present.
    """
    for label in (ATOMIC_C, ATOMIC_S):
        if label not in state.modes:
            raise InvalidStateError(
                f"epr_xi requires mode {label!r}; state has {state.modes}")
    return state.variance(ATOMIC_C, "P") + state.variance(ATOMIC_S, "P")


def beam_splitter_loss(state: GaussianState, mode, eta: float) -> GaussianState:
    """Mix one mode with vacuum on a beam splitter of transmission eta.

    Variances map to ``eta*var + (1 - eta)/2``, cross-covariances with other
    modes scale by sqrt(eta).  Models detection efficiency.
    """
    if not 0.0 <= eta <= 1.0:
        raise InvalidArgumentError(f"eta must lie in [0, 1], got {eta}")
    m = state.mode_index(mode)
    dim = 2 * state.n_modes
    S = np.eye(dim)
    N = np.zeros((dim, dim))
    for i in (2 * m, 2 * m + 1):
        S[i, i] = math.sqrt(eta)
        N[i, i] = (1.0 - eta) / 2.0
    return apply_affine_channel(state, S, N)
