"""Exact density-operator integration of the two-ensemble master equation.

Serves as the ground-truth oracle for the Gaussian model at small atom
number.  The dissipative dynamics implemented here is

    drho/dt =   (d Gamma / 2) (D[A] + D[B]) rho
              + (Gamma_cool / 2) sum_i (D[sigma_I,i] + D[sigma_II,i^dag]) rho
              + (Gamma_heat / 2) sum_i (D[sigma_I,i^dag] + D[sigma_II,i]) rho
              + (Gamma_deph / 2) sum_i (D[n_dn_I,i] + D[n_dn_II,i]) rho

with D[L]rho = L rho L^dag - {L^dag L, rho}/2 and the nonlocal jump operators

    A = (mu J-_I - nu J-_II) / sqrt(N),   B = (mu J+_II - nu J+_I) / sqrt(N),

where J- = sum_i |up><dn| and J+ = (J-)^dag.  Ensemble I is pumped into
|up>, ensemble II into |dn>; "cooling" drives each ensemble toward its own
pumped state.

Representations
---------------
microscopic
    Full 2^(2N) product basis (N <= 4); single-particle noise terms are exact.
dicke
    Permutation-symmetric collective-spin basis of dimension (N+1)^2
    (N <= 32).  Single-particle noise breaks permutation symmetry, so here the
    cooling/heating/dephasing terms are replaced by their collective
    approximations with jump operators J-/sqrt(N), J+/sqrt(N) and
    n_dn/sqrt(N) per ensemble; the collective entangling terms are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    CapacityError,
    DegenerateSteadyStateError,
    InvalidArgumentError,
    InvalidStateError,
    UndefinedWitnessError,
)
from .gaussian import SqueezeParams

__all__ = [
    "LindbladSystem", "DensityOperator",
    "build_jump_ops", "spin_operators", "css_state",
    "integrate_master", "witness_xi", "witness_xi_pn", "steady_state",
    "liouvillian_matrix",
]

MICROSCOPIC_MAX_ATOMS = 4
DICKE_MAX_ATOMS = 32
NULLSPACE_MAX_DIM = 256


@dataclass(frozen=True)
class LindbladSystem:
    """Two-ensemble open system in the microscopic or Dicke representation.

    ``d`` is the resonant optical depth (the collective enhancement of the
    entangling terms), ``Gamma`` the single-particle radiative rate and
    ``Gamma_cool/heat/deph`` the local noise rates, all in 1/ms.
    """

    representation: str
    n_atoms: int
    d: float
    Gamma: float
    squeeze: SqueezeParams
    Gamma_cool: float = 0.0
    Gamma_heat: float = 0.0
    Gamma_deph: float = 0.0

    def __post_init__(self):
        if self.representation not in ("microscopic", "dicke"):
            raise InvalidArgumentError(
                f"unknown representation {self.representation!r}")
        if self.n_atoms < 1:
            raise InvalidArgumentError("n_atoms must be >= 1")
        if self.representation == "microscopic" and self.n_atoms > MICROSCOPIC_MAX_ATOMS:
            raise CapacityError(
                f"microscopic representation supports N <= {MICROSCOPIC_MAX_ATOMS}, "
                f"got {self.n_atoms}")
        if self.representation == "dicke" and self.n_atoms > DICKE_MAX_ATOMS:
            raise CapacityError(
                f"dicke representation supports N <= {DICKE_MAX_ATOMS}, "
                f"got {self.n_atoms}")
        for name in ("d", "Gamma", "Gamma_cool", "Gamma_heat", "Gamma_deph"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be >= 0")

    @property
    def ensemble_dim(self) -> int:
        if self.representation == "microscopic":
            return 2 ** self.n_atoms
        return self.n_atoms + 1

    @property
    def dim(self) -> int:
        return self.ensemble_dim ** 2


@dataclass(frozen=True)
class DensityOperator:
    """Dense density matrix plus the basis metadata needed to interpret it."""

    representation: str
    n_atoms: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidStateError("density matrix must be square")
        if np.abs(m - m.conj().T).max() > 1e-10:
            raise InvalidStateError("density matrix is not Hermitian (1e-10)")
        tr = np.trace(m).real
        if abs(tr - 1.0) > 1e-10:
            raise InvalidStateError(f"trace = {tr} differs from 1 by > 1e-10")
        if np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min() < -1e-8:
            raise InvalidStateError("density matrix has eigenvalue < -1e-8")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


# ---------------------------------------------------------------------------
# operator construction
# ---------------------------------------------------------------------------

_SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]])    # |up><dn| in the (up, dn) basis
_N_DN = np.array([[0.0, 0.0], [0.0, 1.0]])     # |dn><dn|


def _embed_qubit(op2, site: int, total_sites: int) -> sp.csr_matrix:
    """Place a single-qubit operator at the given site of a product chain."""
    mat = sp.identity(1, format="csr", dtype=complex)
    for s in range(total_sites):
        factor = sp.csr_matrix(op2, dtype=complex) if s == site \
            else sp.identity(2, format="csr", dtype=complex)
        mat = sp.kron(mat, factor, format="csr")
    return mat


def _dicke_jminus(n_atoms: int) -> sp.csr_matrix:
    """Collective J- = sum_i |up><dn| on the symmetric j = N/2 multiplet.

    Basis index k corresponds to the J_x eigenvalue m = j - k (k = 0 is the
    fully pumped |up...up> state); J- raises m with the ladder element
    sqrt(j(j+1) - m(m+1)).
    """
    j = n_atoms / 2.0
    dim = n_atoms + 1
    rows, cols, vals = [], [], []
    for k in range(1, dim):
        m = j - k
        rows.append(k - 1)
        cols.append(k)
        vals.append(math.sqrt(j * (j + 1) - m * (m + 1)))
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim), dtype=complex)


def _dicke_jx(n_atoms: int) -> sp.csr_matrix:
    j = n_atoms / 2.0
    return sp.diags([j - k for k in range(n_atoms + 1)], format="csr",
                    dtype=complex)


def _ensemble_ops(system: LindbladSystem):
    """Per-ensemble collective operators (J-_I, J-_II, Jx_I, Jx_II, n_dn_*)."""
    N = system.n_atoms
    if system.representation == "microscopic":
        sites = 2 * N
        jm_I = sum(_embed_qubit(_SIGMA, i, sites) for i in range(N))
        jm_II = sum(_embed_qubit(_SIGMA, N + i, sites) for i in range(N))
        ndn_I = sum(_embed_qubit(_N_DN, i, sites) for i in range(N))
        ndn_II = sum(_embed_qubit(_N_DN, N + i, sites) for i in range(N))
    else:
        jm = _dicke_jminus(N)
        ident = sp.identity(N + 1, format="csr", dtype=complex)
        jm_I = sp.kron(jm, ident, format="csr")
        jm_II = sp.kron(ident, jm, format="csr")
        jx = _dicke_jx(N)
        ndn_loc = (N / 2.0) * sp.identity(N + 1, format="csr", dtype=complex) - jx
        ndn_I = sp.kron(ndn_loc, ident, format="csr")
        ndn_II = sp.kron(ident, ndn_loc, format="csr")
        return jm_I, jm_II, ndn_I, ndn_II
    return jm_I.tocsr(), jm_II.tocsr(), ndn_I.tocsr(), ndn_II.tocsr()


def build_jump_ops(system: LindbladSystem):
    """Nonlocal jump operators (A, B) as sparse matrices in the system basis.

    A annihilates the two-mode squeezed dark state together with B; for
    nu = 0 they reduce to the bare collective ladder operators driving each
    ensemble into its pumped state.
    """
    mu, nu = system.squeeze.mu, system.squeeze.nu
    rN = math.sqrt(system.n_atoms)
    jm_I, jm_II, _, _ = _ensemble_ops(system)
    A = (mu * jm_I - nu * jm_II) / rN
    B = (mu * jm_II.conj().T.tocsr() - nu * jm_I.conj().T.tocsr()) / rN
    return A.tocsr(), B.tocsr()


def spin_operators(representation: str, n_atoms: int):
    """Collective spin components per ensemble, as dense arrays.

    Returns a dict with Jx, Jy, Jz for each ensemble, built from
    J- = sum |up><dn| via Jy = (J- + J+)/2, Jz = (J- - J+)/(2i).
    """
    system = LindbladSystem(representation=representation, n_atoms=n_atoms,
                            d=1.0, Gamma=0.0, squeeze=SqueezeParams.from_r(0.0))
    jm_I, jm_II, ndn_I, ndn_II = _ensemble_ops(system)
    N = n_atoms
    ops = {}
    for label, jm, ndn in (("I", jm_I, ndn_I), ("II", jm_II, ndn_II)):
        jm = jm.toarray()
        jp = jm.conj().T
        ops[f"Jx_{label}"] = (N / 2.0) * np.eye(jm.shape[0]) - ndn.toarray()
        ops[f"Jy_{label}"] = 0.5 * (jm + jp)
        ops[f"Jz_{label}"] = (jm - jp) / 2j
    return ops


def css_state(system: LindbladSystem) -> DensityOperator:
    """Oppositely pumped coherent spin state: I all-up, II all-dn."""
    dim_e = system.ensemble_dim
    if system.representation == "microscopic":
        idx_I, idx_II = 0, dim_e - 1          # |up...up> and |dn...dn|
    else:
        idx_I, idx_II = 0, system.n_atoms     # m = +j and m = -j
    rho = np.zeros((system.dim, system.dim), dtype=complex)
    rho[idx_I * dim_e + idx_II, idx_I * dim_e + idx_II] = 1.0
    return DensityOperator(system.representation, system.n_atoms, rho)


def _jump_list(system: LindbladSystem, include_noise: bool):
    """(rate, operator) pairs of the master equation's dissipators."""
    jumps = []
    A, B = build_jump_ops(system)
    collective_rate = 0.5 * system.d * system.Gamma
    if collective_rate > 0:
        jumps += [(collective_rate, A), (collective_rate, B)]
    if not include_noise:
        return jumps
    N = system.n_atoms
    if system.representation == "microscopic":
        sites = 2 * N
        for i in range(N):
            s_I = _embed_qubit(_SIGMA, i, sites)
            s_II = _embed_qubit(_SIGMA, N + i, sites)
            if system.Gamma_cool > 0:
                jumps += [(0.5 * system.Gamma_cool, s_I),
                          (0.5 * system.Gamma_cool, s_II.conj().T.tocsr())]
            if system.Gamma_heat > 0:
                jumps += [(0.5 * system.Gamma_heat, s_I.conj().T.tocsr()),
                          (0.5 * system.Gamma_heat, s_II)]
            if system.Gamma_deph > 0:
                jumps += [(0.5 * system.Gamma_deph, _embed_qubit(_N_DN, i, sites)),
                          (0.5 * system.Gamma_deph, _embed_qubit(_N_DN, N + i, sites))]
    else:
        jm_I, jm_II, ndn_I, ndn_II = _ensemble_ops(system)
        rN = math.sqrt(N)
        if system.Gamma_cool > 0:
            jumps += [(0.5 * system.Gamma_cool, (jm_I / rN).tocsr()),
                      (0.5 * system.Gamma_cool, (jm_II.conj().T / rN).tocsr())]
        if system.Gamma_heat > 0:
            jumps += [(0.5 * system.Gamma_heat, (jm_I.conj().T / rN).tocsr()),
                      (0.5 * system.Gamma_heat, (jm_II / rN).tocsr())]
        if system.Gamma_deph > 0:
            jumps += [(0.5 * system.Gamma_deph, (ndn_I / rN).tocsr()),
                      (0.5 * system.Gamma_deph, (ndn_II / rN).tocsr())]
    return jumps


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def _rhs_factory(system: LindbladSystem, include_noise: bool):
    """Master-equation right-hand side with precomputed sparse operators."""
    jumps = _jump_list(system, include_noise)
    dim = system.dim
    K = sp.csr_matrix((dim, dim), dtype=complex)
    for rate, L in jumps:
        K = K + rate * (L.conj().T @ L)
    K = K.tocsr()
    dag_ops = [(rate, L, sp.csr_matrix(L).conj().T.tocsr()) for rate, L in jumps]

    def rhs(rho):
        # D-form: sum_k rate (L rho L^dag) - {K, rho}/2 with K = sum rate L^dag L
        out = -0.5 * (K @ rho)
        out += -0.5 * (K @ rho.conj().T).conj().T
        for rate, L, Ld in dag_ops:
            # L rho L^dag via two sparse-dense products
            out += rate * (Ld.T @ (L @ rho).T).T
        return out

    rate_scale = float(sum(rate * spla.norm(L, 1) * spla.norm(L, np.inf)
                           for rate, L in jumps)) or 1.0
    return rhs, rate_scale


def _rk4_step(rhs, rho, dt):
    k1 = rhs(rho)
    k2 = rhs(rho + 0.5 * dt * k1)
    k3 = rhs(rho + 0.5 * dt * k2)
    k4 = rhs(rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _trace_norm(m: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T))).sum())


def _choose_step(rhs, rho0, rate_scale, step_tol=1e-9):
    """Fixed RK4 step sized so one step vs. two half steps agree in trace norm."""
    dt = 0.1 / rate_scale
    for _ in range(40):
        full = _rk4_step(rhs, rho0, dt)
        half = _rk4_step(rhs, _rk4_step(rhs, rho0, 0.5 * dt), 0.5 * dt)
        if _trace_norm(full - half) < step_tol:
            return dt
        dt *= 0.5
    raise RuntimeError("could not find a stable integration step")


def integrate_master(system: LindbladSystem, rho0: DensityOperator, t: float,
                     include_noise: bool = True) -> DensityOperator:
    """Integrate the master equation for time t (ms) with fixed-step RK4.

    In the microscopic representation the noise terms are the exact
    single-particle dissipators; in the Dicke representation their collective
    approximations are used (see the module docstring).  Trace and
    Hermiticity are preserved by the generator and checked on the result.
    """
    if rho0.representation != system.representation or rho0.n_atoms != system.n_atoms:
        raise InvalidStateError("density operator does not match the system basis")
    if rho0.dim != system.dim:
        raise InvalidStateError(
            f"density matrix dimension {rho0.dim} != system dimension {system.dim}")
    if t < 0:
        raise InvalidArgumentError("t must be >= 0")
    if t == 0:
        return rho0
    rhs, rate_scale = _rhs_factory(system, include_noise)
    rho = np.array(rho0.matrix, dtype=complex)
    dt = _choose_step(rhs, rho, rate_scale)
    n_steps = max(1, int(math.ceil(t / dt)))
    dt = t / n_steps
    for _ in range(n_steps):
        rho = _rk4_step(rhs, rho, dt)
    return DensityOperator(system.representation, system.n_atoms, rho)


def witness_xi(rho: DensityOperator) -> float:
    """EPR witness xi = Sigma_J / (2 |<J_x>|) from the exact state.

    Sigma_J = var(J_y,I - J_y,II) + var(J_z,I - J_z,II); the mean spin in the
    denominator is the orientation-corrected polarization
    |<J_x,I> - <J_x,II>|/2 (the two ensembles are oppositely pumped, so their
    bare J_x expectations carry opposite signs).  Raises UndefinedWitnessError
    when the mean spin vanishes rather than returning an infinity.
    """
    ops = spin_operators(rho.representation, rho.n_atoms)
    m = rho.matrix

    def expect(op):
        return float(np.trace(op @ m).real)

    def var_of(op):
        return float(np.trace(op @ op @ m).real) - expect(op) ** 2

    jx = 0.5 * (expect(ops["Jx_I"]) - expect(ops["Jx_II"]))
    if abs(jx) <= 0.5e-12 * max(1.0, rho.n_atoms):
        raise UndefinedWitnessError(
            "mean spin vanishes; the EPR witness is undefined for this state")
    sigma_j = (var_of(ops["Jy_I"] - ops["Jy_II"])
               + var_of(ops["Jz_I"] - ops["Jz_II"]))
    return sigma_j / (2.0 * abs(jx))


def witness_xi_pn(rho: DensityOperator) -> float:
    """EPR variance in projection-noise units: Sigma_J / N.

    References the spin-sum variance to its coherent-spin-state value instead
    of the instantaneous mean spin.  Unlike :func:`witness_xi` (which the
    ideal dark state saturates at exactly (mu - nu)^2 for every N), this
    normalization retains the finite-size depolarization of the squeezed
    state and converges to the bosonic-model value as 1/N; it is the quantity
    measured when atomic noise is calibrated against projection noise.
    """
    ops = spin_operators(rho.representation, rho.n_atoms)
    m = rho.matrix

    def expect(op):
        return float(np.trace(op @ m).real)

    def var_of(op):
        return float(np.trace(op @ op @ m).real) - expect(op) ** 2

    sigma_j = (var_of(ops["Jy_I"] - ops["Jy_II"])
               + var_of(ops["Jz_I"] - ops["Jz_II"]))
    return sigma_j / rho.n_atoms


def liouvillian_matrix(system: LindbladSystem,
                       include_noise: bool = True) -> sp.csr_matrix:
    """Vectorized generator L with drho/dt = unvec(L vec(rho)), row-major vec."""
    dim = system.dim
    ident = sp.identity(dim, format="csr", dtype=complex)
    L_super = sp.csr_matrix((dim * dim, dim * dim), dtype=complex)
    for rate, L in _jump_list(system, include_noise):
        Ld = L.conj().T.tocsr()
        LdL = (Ld @ L).tocsr()
        L_super = L_super + rate * (
            sp.kron(L, L.conj(), format="csr")
            - 0.5 * sp.kron(LdL, ident, format="csr")
            - 0.5 * sp.kron(ident, LdL.T, format="csr"))
    return L_super.tocsr()


def _nullspace_state(system: LindbladSystem, include_noise: bool,
                     tol: float = 1e-9) -> np.ndarray:
    """Steady state from the null space of the vectorized generator.

    Dense SVD below dimension 64, shift-inverted sparse eigensolver above.
    Raises DegenerateSteadyStateError when the stationary subspace has
    dimension > 1.
    """
    L_super = liouvillian_matrix(system, include_noise)
    dim = system.dim
    scale = max(rate * spla.norm(Lk, 1) for rate, Lk in
                _jump_list(system, include_noise))
    if dim <= 64:
        from scipy.linalg import null_space
        ns = null_space(L_super.toarray(), rcond=tol)
        if ns.shape[1] == 0:
            raise DegenerateSteadyStateError("no stationary state found")
        if ns.shape[1] > 1:
            raise DegenerateSteadyStateError(
                f"stationary subspace has dimension {ns.shape[1]}")
        vec = ns[:, 0]
    else:
        sigma = -1e-8 * scale  # avoid factorizing the exactly singular L
        vals, vecs = spla.eigs(L_super, k=2, sigma=sigma, which="LM")
        order = np.argsort(np.abs(vals))
        vals, vecs = vals[order], vecs[:, order]
        if abs(vals[0]) > tol * scale:
            raise DegenerateSteadyStateError("no stationary state found")
        if abs(vals[1]) < tol * scale:
            raise DegenerateSteadyStateError(
                "stationary subspace has dimension > 1")
        vec = vecs[:, 0]
    rho = vec.reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho)
    return rho


def steady_state(system: LindbladSystem, include_noise: bool = True,
                 max_time: float = 1e5) -> DensityOperator:
    """Stationary state of the full dissipator.

    Integrates from the pumped coherent spin state until
    ||drho/dt||_1 < 1e-10, then (for dimensions <= 256) cross-checks against
    the null space of the vectorized generator, which also certifies
    uniqueness of the stationary state.
    """
    rhs, rate_scale = _rhs_factory(system, include_noise)
    rho = np.array(css_state(system).matrix)
    dt = _choose_step(rhs, rho, rate_scale)
    # check convergence every ~2 upper-bound relaxation times
    window = max(50, int(round(2.0 / (rate_scale * dt))))
    elapsed = 0.0
    converged = False
    while elapsed < max_time:
        for _ in range(window):
            rho = _rk4_step(rhs, rho, dt)
        elapsed += window * dt
        if _trace_norm(rhs(rho)) < 1e-10:
            converged = True
            break
    if not converged:
        raise DegenerateSteadyStateError(
            f"no convergence to a stationary state within t = {max_time}")

    if system.dim <= NULLSPACE_MAX_DIM:
        rho_ns = _nullspace_state(system, include_noise)
        dist = 0.5 * _trace_norm(rho - rho_ns)
        if dist > 1e-7:
            raise DegenerateSteadyStateError(
                f"integrated and null-space steady states differ "
                f"(trace distance {dist:.2e})")
    return DensityOperator(system.representation, system.n_atoms, rho)
