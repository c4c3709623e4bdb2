"""Two-ensemble Gaussian dynamics: pulse maps, variance evolution, steady states.

The engineered dissipation relaxes the nonlocal quadratures P_c and P_s toward
the two-mode squeezed value at a rate set by ``gamma_s``, while transverse
decay at ``gamma_extra`` pulls them back toward the coherent-spin-state value
1/2.  The module provides

* the pulse-level input-output map (ideal and with decay) as affine channels,
* continuous-time unconditional and conditional (filtered) variance evolution,
* closed-form steady states for both,
* the full 4x4 covariance evolution with a Larmor detuning between the
  ensembles, and
* the light-atom coupling constant ``kappa`` used by the reconstruction.

Time is measured in milliseconds throughout; rates in 1/ms.

Variance relaxation here uses the rate ``2*gamma`` consistent with amplitude
decay ``e^{-gamma T}`` of the pulse map; steady-state values are unaffected by
this choice of exponent convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvalidArgumentError, InvalidStateError
from .gaussian import (
    ATOMIC_C, ATOMIC_S, LIGHT_C, LIGHT_S,
    GaussianState, SqueezeParams, apply_affine_channel, symplectic_form,
)

__all__ = [
    "DynamicsParams", "DerivedCouplings", "NoisyChannelCoefficients",
    "VarianceTrajectory", "XiTrajectory",
    "coupling_kappa", "mode_overlap", "io_symplectic", "step_io",
    "noisy_channel_coefficients", "noisy_channel", "step_io_noisy",
    "evolve_unconditional", "evolve_conditional",
    "steady_state_xi", "steady_state_xi_cond", "evolve_with_detuning",
    "atomic_rotation",
]

ODE_RTOL = 1e-10
ODE_ATOL = 1e-12


@dataclass(frozen=True)
class DynamicsParams:
    """Physical rates and squeezing parameters of the two-ensemble model.

    Attributes
    ----------
    gamma_s : float
        Engineered-dissipation rate (1/ms); amplitude decay of the pulse map.
    gamma_extra : float
        Transverse decay rate toward the coherent spin state (1/ms).
    squeeze : SqueezeParams
        Squeezing parameters (Z, mu, nu).
    Omega : float
        Larmor frequency (rad/ms); enters temporal-mode bookkeeping only.
    delta_Omega : float
        Larmor detuning between the two ensembles (rad/ms).
    T : float
        Pulse duration (ms).
    eta : float
        Detection efficiency in [0, 1].
    """

    gamma_s: float
    T: float
    squeeze: SqueezeParams
    gamma_extra: float = 0.0
    Omega: float = 0.0
    delta_Omega: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        if self.gamma_s <= 0:
            raise InvalidArgumentError(f"gamma_s must be > 0, got {self.gamma_s}")
        if self.gamma_extra < 0:
            raise InvalidArgumentError(
                f"gamma_extra must be >= 0, got {self.gamma_extra}")
        if self.T <= 0:
            raise InvalidArgumentError(f"T must be > 0, got {self.T}")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidArgumentError(f"eta must lie in [0, 1], got {self.eta}")


@dataclass(frozen=True)
class DerivedCouplings:
    """Coupling constant and decay bookkeeping derived from DynamicsParams.

    ``gamma_total = 1/T2 = gamma_s + gamma_extra`` is the total transverse
    decay rate, ``epsilon^2 = gamma_extra / gamma_total`` the decay fraction,
    and ``kappa = Z sqrt((1 - eps^2)(1 - e^{-2 gamma_total T}))`` the
    decay-corrected light-atom transfer coefficient (reducing to
    ``Z sqrt(1 - e^{-2 gamma_s T})`` for gamma_extra = 0).
    """

    kappa: float
    gamma_total: float
    epsilon: float


def coupling_kappa(params: DynamicsParams) -> DerivedCouplings:
    """Coupling constant, total decay rate and decay fraction for a pulse."""
    gamma = params.gamma_s + params.gamma_extra
    eps2 = params.gamma_extra / gamma
    kappa = params.squeeze.Z * math.sqrt(
        (1.0 - eps2) * (1.0 - math.exp(-2.0 * gamma * params.T)))
    return DerivedCouplings(kappa=kappa, gamma_total=gamma,
                            epsilon=math.sqrt(eps2))


def mode_overlap(gamma: float, T: float) -> float:
    """Overlap of the normalized rising and falling exponential modes.

    ``integral f_+ f_- dt = gamma T / sinh(gamma T)`` for envelopes
    ``e^{+gamma t}`` and ``e^{-gamma t}`` on [0, T]; tends to 1 as T -> 0 and
    to 0 as gamma T -> infinity.
    """
    x = gamma * T
    if x < 1e-8:
        return 1.0 - x * x / 6.0
    return x / math.sinh(x)


# ---------------------------------------------------------------------------
# pulse-level input-output maps
# ---------------------------------------------------------------------------

def _sector_indices(state: GaussianState, atom_label, light_label):
    ia = 2 * state.mode_index(atom_label)
    il = 2 * state.mode_index(light_label)
    return ia, ia + 1, il, il + 1  # X_at, P_at, y, q


def io_symplectic(params: DynamicsParams, state: GaussianState) -> np.ndarray:
    """Symplectic matrix of the ideal pulse map on the state's mode ordering.

    Per sector (c and s independently), with a = e^{-gamma_s T} and
    b = sqrt(1 - a^2):

        X_out = a X + b Z q,      P_out = a P - (b/Z) y,
        y_out = a y + b Z P,      q_out = a q - (b/Z) X.
    """
    a = math.exp(-params.gamma_s * params.T)
    b = math.sqrt(1.0 - a * a)
    Z = params.squeeze.Z
    S = np.eye(2 * state.n_modes)
    for atom, light in ((ATOMIC_C, LIGHT_C), (ATOMIC_S, LIGHT_S)):
        x, p, y, q = _sector_indices(state, atom, light)
        S[x, x] = a;  S[x, q] = b * Z
        S[p, p] = a;  S[p, y] = -b / Z
        S[y, y] = a;  S[y, p] = b * Z
        S[q, q] = a;  S[q, x] = -b / Z
    return S


def step_io(params: DynamicsParams, state: GaussianState) -> GaussianState:
    """Ideal pulse: atoms exchange quadratures with fresh light modes.

    The state must carry atomic c/s modes and light c/s modes (the rising
    input modes, vacuum unless explicitly displaced).  After the map the
    light modes hold the falling output modes y_-, q_-.
    """
    for label in (ATOMIC_C, ATOMIC_S, LIGHT_C, LIGHT_S):
        if label not in state.modes:
            raise InvalidStateError(f"step_io requires mode {label!r}")
    S = io_symplectic(params, state)
    return apply_affine_channel(state, S, np.zeros_like(S))


@dataclass(frozen=True)
class NoisyChannelCoefficients:
    """Coefficients of the decay-extended pulse channel for one sector.

    ``kappa`` is the reduced coupling, ``s = e^{-gamma T}`` the amplitude
    decay over the pulse, ``overlap`` the rising/falling temporal-mode overlap
    and ``eps2 = gamma_extra/gamma``.  ``U2`` and ``V2`` collect the
    input-light and decay-noise contributions to the detected falling-mode
    variance,

        var(y_-^out) = kappa^2 var(P_in) + U2 * sigma_in^2 + V2 * <F^2>,

    with sigma_in^2 = <F^2> = 1/2 for vacuum inputs.  ``light_in_coeff`` is
    the coefficient of the rising input mode in y_-^out and ``atom_noise`` /
    ``cross_noise`` the added-noise entries of the affine channel.
    """

    kappa: float
    s: float
    eps2: float
    overlap: float
    U2: float
    V2: float
    light_in_coeff: float
    atom_noise: float
    light_noise_y: float
    light_noise_q: float
    cross_noise: float


def noisy_channel_coefficients(params: DynamicsParams) -> NoisyChannelCoefficients:
    """Compute the decay-extended channel coefficients for the given pulse.

    All coefficients follow from the total decay gamma = gamma_s + gamma_extra
    and the decay fraction eps^2; the noise operators F carry variance 1/2 and
    the rising/falling mode pairs have overlap gamma*T/sinh(gamma*T).
    """
    Z = params.squeeze.Z
    der = coupling_kappa(params)
    gamma, kappa = der.gamma_total, der.kappa
    eps2 = der.epsilon**2
    s = math.exp(-gamma * params.T)
    O = mode_overlap(gamma, params.T)

    # y_-^out = kappa P_in + [s(1-eps2) + eps2*O] y_+^in + orthogonal noise
    light_in = s * (1.0 - eps2) + eps2 * O
    U2 = eps2**2 + (1.0 - eps2) ** 2 * s * s + 2.0 * eps2 * (1.0 - eps2) * s * O
    V2 = eps2 * (1.0 - eps2) * Z * Z * (1.0 + s * s - 2.0 * s * O)

    b2 = 1.0 - s * s
    atom_noise = eps2 * b2 * 0.5                      # eps^2(1-e^{-2gT}) <F^2>
    # leftovers after splitting off the tracked rising input mode; the decay
    # noise reaches q_- only through X with gain kappa/Z^2, hence the Z^-4
    light_noise_y = (U2 - light_in**2) * 0.5 + V2 * 0.5
    light_noise_q = (U2 - light_in**2) * 0.5 + V2 / Z**4 * 0.5
    # decay noise enters the atomic output and the falling light output with
    # correlation proportional to the rising/falling mode mismatch O - s
    cross_noise = (eps2 * Z * math.sqrt((1.0 - eps2) * b2)
                   * (O - s) * 0.5)
    return NoisyChannelCoefficients(
        kappa=kappa, s=s, eps2=eps2, overlap=O, U2=U2, V2=V2,
        light_in_coeff=light_in, atom_noise=atom_noise,
        light_noise_y=light_noise_y, light_noise_q=light_noise_q,
        cross_noise=cross_noise)


def noisy_channel(params: DynamicsParams,
                  state: GaussianState) -> tuple[np.ndarray, np.ndarray]:
    """(S, N) of the decay-extended pulse channel on the state's ordering.

    Atomic lines acquire amplitude decay e^{-gamma T} and injected noise with
    variance eps^2 (1 - e^{-2 gamma T})/2; the falling light output mixes the
    non-orthogonal rising and falling input modes, with everything that is
    uncorrelated with the tracked modes collected in N.
    """
    c = noisy_channel_coefficients(params)
    Z = params.squeeze.Z
    dim = 2 * state.n_modes
    S = np.eye(dim)
    N = np.zeros((dim, dim))
    for atom, light in ((ATOMIC_C, LIGHT_C), (ATOMIC_S, LIGHT_S)):
        x, p, y, q = _sector_indices(state, atom, light)
        S[x, x] = c.s;  S[x, q] = c.kappa
        S[p, p] = c.s;  S[p, y] = -c.kappa / Z**2
        S[y, p] = c.kappa;  S[y, y] = c.light_in_coeff
        S[q, x] = -c.kappa / Z**2;  S[q, q] = c.light_in_coeff
        N[x, x] = N[p, p] = c.atom_noise
        N[y, y] = c.light_noise_y
        N[q, q] = c.light_noise_q
        N[p, y] = N[y, p] = c.cross_noise
        N[x, q] = N[q, x] = -c.cross_noise / Z**2
    return S, N


def step_io_noisy(params: DynamicsParams, state: GaussianState) -> GaussianState:
    """Pulse map including transverse decay toward the coherent spin state.

    Reduces exactly to :func:`step_io` for gamma_extra = 0.
    """
    for label in (ATOMIC_C, ATOMIC_S, LIGHT_C, LIGHT_S):
        if label not in state.modes:
            raise InvalidStateError(f"step_io_noisy requires mode {label!r}")
    S, N = noisy_channel(params, state)
    return apply_affine_channel(state, S, N)


def atomic_rotation(state: GaussianState, angle: float) -> GaussianState:
    """Rotate both atomic c/s modes in phase space by the given angle.

    ``angle = -pi/2`` maps X into P (the spin rotation used between the two
    calibration pulses).
    """
    dim = 2 * state.n_modes
    S = np.eye(dim)
    cs, sn = math.cos(angle), math.sin(angle)
    for atom in (ATOMIC_C, ATOMIC_S):
        i = 2 * state.mode_index(atom)
        S[i, i] = cs;      S[i, i + 1] = sn
        S[i + 1, i] = -sn; S[i + 1, i + 1] = cs
    return apply_affine_channel(state, S, np.zeros_like(S))


# ---------------------------------------------------------------------------
# continuous-time variance evolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarianceTrajectory:
    """var(P_c/s)(t) from ODE integration and its closed form; xi = 2*var."""

    times: np.ndarray
    var_ode: np.ndarray
    var_closed: np.ndarray

    @property
    def xi_ode(self) -> np.ndarray:
        return 2.0 * self.var_ode

    @property
    def xi_closed(self) -> np.ndarray:
        return 2.0 * self.var_closed


def _time_grid(t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise InvalidArgumentError("times must be non-negative")
    if t.size == 1:
        t = np.linspace(0.0, t[0], 201)
    return t


def evolve_unconditional(params: DynamicsParams, v0: float,
                         t) -> VarianceTrajectory:
    """Evolve var(P_c/s) without measurements.

        dv/dt = -2 gamma_s (v - 1/(2 Z^2)) - 2 gamma_extra (v - 1/2)

    relaxes toward ``v_inf = (gamma_s/(2Z^2) + gamma_extra/2) / gamma`` with
    rate 2 gamma.  Returns both the numerical integration and the exponential
    closed form.
    """
    if v0 < 0:
        raise InvalidArgumentError(f"v0 must be >= 0, got {v0}")
    t = _time_grid(t)
    gs, ge = params.gamma_s, params.gamma_extra
    Z = params.squeeze.Z
    gamma = gs + ge
    v_inf = 0.5 * (gs / Z**2 + ge) / gamma
    v_closed = v_inf + (v0 - v_inf) * np.exp(-2.0 * gamma * t)

    sol = solve_ivp(
        lambda _t, v: -2.0 * gs * (v - 0.5 / Z**2) - 2.0 * ge * (v - 0.5),
        (0.0, t[-1]) if t[-1] > 0 else (0.0, 1e-12), [v0],
        t_eval=t, rtol=ODE_RTOL, atol=ODE_ATOL, method="RK45")
    return VarianceTrajectory(times=t, var_ode=sol.y[0], var_closed=v_closed)


def _riccati_rhs(v, gs, ge, Z):
    # composition of the infinitesimal pulse map with conditioning on y
    return (-2.0 * gs * v + gs / Z**2
            - 4.0 * gs * (Z * v - 1.0 / (2.0 * Z)) ** 2
            - 2.0 * ge * (v - 0.5))


def _riccati_closed_form(t, v0, gs, ge, Z):
    # dv/dt = a v^2 + b v + c with the stable root v_plus; standard solution
    # through the Moebius transform of e^{-lambda t}
    a = -4.0 * gs * Z**2
    b = 2.0 * (gs - ge)
    c = ge
    disc = math.sqrt(b * b - 4.0 * a * c)
    v_plus = (-b - disc) / (2.0 * a)
    v_minus = (-b + disc) / (2.0 * a)
    lam = -a * (v_plus - v_minus)  # positive
    if abs(v0 - v_minus) < 1e-300:
        return np.full_like(t, v_minus)
    k = (v0 - v_plus) / (v0 - v_minus)
    e = np.exp(-lam * t)
    return (v_plus - v_minus * k * e) / (1.0 - k * e)


def evolve_conditional(params: DynamicsParams, v0: float,
                       t) -> VarianceTrajectory:
    """Evolve var(P_c/s) under continuous homodyne monitoring of y.

    Integrates the Riccati equation obtained by composing the infinitesimal
    input-output step with Gaussian conditioning on the scattered light,

        dv/dt = -2 gamma_s v + gamma_s/Z^2 - 4 gamma_s (Z v - 1/(2Z))^2
                - 2 gamma_extra (v - 1/2).

    For gamma_extra = 0 the steady state coincides with the unconditional
    one (monitoring cannot improve the ideal steady state); for
    gamma_extra > 0 it is strictly smaller.  The closed form is the standard
    Moebius solution of the scalar Riccati equation.
    """
    if v0 < 0:
        raise InvalidArgumentError(f"v0 must be >= 0, got {v0}")
    t = _time_grid(t)
    gs, ge = params.gamma_s, params.gamma_extra
    Z = params.squeeze.Z
    sol = solve_ivp(
        lambda _t, v: _riccati_rhs(v, gs, ge, Z),
        (0.0, t[-1]) if t[-1] > 0 else (0.0, 1e-12), [v0],
        t_eval=t, rtol=ODE_RTOL, atol=ODE_ATOL, method="RK45")
    v_closed = _riccati_closed_form(t, v0, gs, ge, Z)
    return VarianceTrajectory(times=t, var_ode=sol.y[0], var_closed=v_closed)


def steady_state_xi(params: DynamicsParams) -> float:
    """Unconditional steady-state witness.

        xi_inf = (gamma_s / Z^2 + gamma_extra) / (gamma_s + gamma_extra)
    """
    gs, ge = params.gamma_s, params.gamma_extra
    if gs + ge <= 0:
        raise InvalidArgumentError("gamma_s + gamma_extra must be positive")
    Z = params.squeeze.Z
    return (gs / Z**2 + ge) / (gs + ge)


def steady_state_xi_cond(params: DynamicsParams) -> float:
    """Conditional (measurement-assisted) steady-state witness.

        xi_cond_inf = (1/(2 Z^2)) (1 - g + sqrt((1 - g)^2 + 4 Z^2 g)),
        g = gamma_extra / gamma_s.

    Equals 1/Z^2 at g = 0 and is strictly below xi_inf for g > 0.
    """
    if params.gamma_s <= 0:
        raise InvalidArgumentError("gamma_s must be positive")
    g = params.gamma_extra / params.gamma_s
    Z = params.squeeze.Z
    return (1.0 - g + math.sqrt((1.0 - g) ** 2 + 4.0 * Z**2 * g)) / (2.0 * Z**2)


# ---------------------------------------------------------------------------
# detuned two-ensemble covariance evolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class XiTrajectory:
    times: np.ndarray
    xi: np.ndarray
    covs: np.ndarray = field(repr=False, default=None)


def _lindblad_covariance_generator(jump_vectors, G, n_modes):
    """Drift and diffusion of d(cov)/dt = M cov + cov M^T + D.

    For jump operators ``L_k = c_k . R`` linear in the quadratures and a
    quadratic Hamiltonian ``H = R^T G R / 2``:

        M = Omega G - Omega Im(C),   D = Omega Re(C) Omega^T,
        C = sum_k outer(c_k, conj(c_k)).
    """
    omega = symplectic_form(n_modes)
    C = np.zeros((2 * n_modes, 2 * n_modes), dtype=complex)
    for c in jump_vectors:
        C += np.outer(c, np.conj(c))
    M = omega @ G - omega @ C.imag
    D = omega @ C.real @ omega.T
    return M, D


def detuning_generator(params: DynamicsParams):
    """(M, D) for the 4x4 covariance of (X_I, P_I, X_II, P_II).

    The collective jump operators are A = mu a - nu b^dag and
    B = mu b - nu a^dag with overall rate 2 gamma_s (amplitude decay
    gamma_s), plus local relaxation of each mode at gamma_extra.  Ensemble
    II additionally rotates at delta_Omega relative to the co-rotating frame
    of ensemble I, entering through H = delta_Omega (X_II^2 + P_II^2)/2.
    """
    gs, ge = params.gamma_s, params.gamma_extra
    mu, nu = params.squeeze.mu, params.squeeze.nu
    rg = math.sqrt(gs)
    jumps = [rg * np.array([mu, 1j * mu, -nu, 1j * nu]),
             rg * np.array([-nu, 1j * nu, mu, 1j * mu])]
    if ge > 0:
        re = math.sqrt(ge)
        jumps.append(re * np.array([1.0, 1j, 0.0, 0.0]))
        jumps.append(re * np.array([0.0, 0.0, 1.0, 1j]))
    G = np.diag([0.0, 0.0, params.delta_Omega, params.delta_Omega])
    return _lindblad_covariance_generator(jumps, G, 2)


def xi_from_two_ensemble_cov(cov: np.ndarray) -> float:
    """Witness from the 4x4 covariance of (X_I, P_I, X_II, P_II)."""
    var_pc = 0.5 * (cov[1, 1] + cov[3, 3] + 2.0 * cov[1, 3])
    var_ps = 0.5 * (cov[0, 0] + cov[2, 2] - 2.0 * cov[0, 2])
    return float(var_pc + var_ps)


def evolve_with_detuning(params: DynamicsParams, t,
                         cov0: np.ndarray | None = None) -> XiTrajectory:
    """xi(t) from the full two-ensemble covariance with Larmor detuning.

    Starts from the coherent spin state (cov = I/2) unless ``cov0`` is given.
    At delta_Omega = 0 this reproduces :func:`evolve_unconditional` exactly;
    a detuning comparable to the dissipation rate degrades the attainable
    squeezing, and a detuning far above it suppresses entanglement entirely
    (the ensembles no longer share one reservoir).
    """
    t = _time_grid(t)
    if cov0 is None:
        cov0 = 0.5 * np.eye(4)
    cov0 = np.asarray(cov0, dtype=float)
    if cov0.shape != (4, 4):
        raise InvalidStateError("cov0 must be 4x4 over (X_I,P_I,X_II,P_II)")
    M, D = detuning_generator(params)

    def rhs(_t, y):
        S = y.reshape(4, 4)
        return (M @ S + S @ M.T + D).ravel()

    sol = solve_ivp(rhs, (0.0, t[-1]) if t[-1] > 0 else (0.0, 1e-12),
                    cov0.ravel(), t_eval=t, rtol=ODE_RTOL, atol=ODE_ATOL,
                    method="RK45")
    covs = sol.y.T.reshape(-1, 4, 4)
    xi = np.array([xi_from_two_ensemble_cov(S) for S in covs])
    return XiTrajectory(times=t, xi=xi, covs=covs)
