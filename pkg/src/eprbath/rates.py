"""Three-level population rate model and the resulting witness evolution.

Each ensemble is reduced to the two entangled levels |up>, |dn> plus a
reservoir level |h> fed by radiative leakage and collisions and emptied by
repumping.  Populations follow linear rate equations; the EPR witness of the
two-level subsystem follows the spin-sum variance Sigma_J2 driven by the
collectively enhanced dissipation d(t)*Gamma and the local dephasing
aggregate Gamma_tilde.

All rates in 1/ms, times in ms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import InvalidArgumentError
from .gaussian import SqueezeParams

__all__ = [
    "RateModelParams", "EffectiveRates", "PopulationState",
    "PopulationTrajectory", "Xi2Trajectory",
    "effective_rates", "evolve_populations", "xi2_steady",
    "steady_polarization", "xi2_adiabatic",
]


@dataclass(frozen=True)
class RateModelParams:
    """Rates of the three-level model.

    ``Gamma`` is the driving-field radiative rate, ``Gamma_tilde`` the fitted
    dephasing aggregate (cooling + heating + dephasing), ``Gamma_col`` the
    collisional rate assumed equal for all transitions, ``Gamma_pump`` /
    ``Gamma_repump`` the pump-field rates, and ``Gamma_L_out`` the radiative
    leakage out of the two-level subsystem.  ``d`` is the resonant optical
    depth and ``N`` the atom number per ensemble.
    """

    Gamma: float
    Gamma_tilde: float
    Gamma_col: float
    Gamma_pump: float
    Gamma_repump: float
    Gamma_L_out: float
    d: float
    N: float
    squeeze: SqueezeParams

    def __post_init__(self):
        for name in ("Gamma", "Gamma_tilde", "Gamma_col", "Gamma_pump",
                     "Gamma_repump", "Gamma_L_out", "N"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be >= 0")
        if self.d <= 0:
            raise InvalidArgumentError(f"d must be > 0, got {self.d}")


@dataclass(frozen=True)
class EffectiveRates:
    """Composed transition rates of the three-level scheme.

    ``Gamma_34`` (toward the stretched pumped state) acts as the cooling rate
    and ``Gamma_43`` as the heating rate of the two-level dissipator;
    ``Gamma_tilde_eff`` includes the pump-induced dephasing 2*Gamma_pump.
    """

    Gamma_out: float
    Gamma_in: float
    Gamma_34: float
    Gamma_43: float
    Gamma_cool: float
    Gamma_heat: float
    Gamma_tilde_eff: float


def effective_rates(params: RateModelParams) -> EffectiveRates:
    """Compose the effective rates from pump, repump, collision and drive.

        Gamma_out = Gamma_L_out + Gamma_col      (leakage into |h>)
        Gamma_in  = Gamma_repump + Gamma_col     (return from |h>, per level)
        Gamma_34  = mu^2 Gamma + Gamma_pump + Gamma_col   (cooling)
        Gamma_43  = nu^2 Gamma + Gamma_col                (heating)

    Pump fields add 2*Gamma_pump of dephasing; repump fields do not dephase.
    """
    mu2 = params.squeeze.mu ** 2
    nu2 = params.squeeze.nu ** 2
    g34 = mu2 * params.Gamma + params.Gamma_pump + params.Gamma_col
    g43 = nu2 * params.Gamma + params.Gamma_col
    return EffectiveRates(
        Gamma_out=params.Gamma_L_out + params.Gamma_col,
        Gamma_in=params.Gamma_repump + params.Gamma_col,
        Gamma_34=g34,
        Gamma_43=g43,
        Gamma_cool=g34,
        Gamma_heat=g43,
        Gamma_tilde_eff=params.Gamma_tilde + 2.0 * params.Gamma_pump,
    )


@dataclass(frozen=True)
class PopulationState:
    """Populations of |up>, |dn>, |h> for one ensemble (in atoms)."""

    n_up: float
    n_dn: float
    n_h: float

    def __post_init__(self):
        for name in ("n_up", "n_dn", "n_h"):
            if getattr(self, name) < -1e-12:
                raise InvalidArgumentError(f"{name} must be >= 0")

    @property
    def N2(self) -> float:
        return self.n_up + self.n_dn

    @property
    def P2(self) -> float:
        return (self.n_up - self.n_dn) / self.N2


@dataclass(frozen=True)
class PopulationTrajectory:
    times: np.ndarray
    n_up: np.ndarray
    n_dn: np.ndarray
    n_h: np.ndarray
    params: RateModelParams

    @property
    def N2(self) -> np.ndarray:
        return self.n_up + self.n_dn

    @property
    def P2(self) -> np.ndarray:
        return (self.n_up - self.n_dn) / self.N2

    @property
    def d_eff(self) -> np.ndarray:
        """Time-dependent optical depth d(t) = d * N2(t) / N."""
        return self.params.d * self.N2 / self.params.N

    def state(self, i: int) -> PopulationState:
        return PopulationState(self.n_up[i], self.n_dn[i], self.n_h[i])


def _rate_matrix(eff: EffectiveRates) -> np.ndarray:
    go, gi, g34, g43 = eff.Gamma_out, eff.Gamma_in, eff.Gamma_34, eff.Gamma_43
    return np.array([
        [-go - g43, g34, gi],
        [g43, -go - g34, gi],
        [go, go, -2.0 * gi],
    ])


def evolve_populations(params: RateModelParams, t) -> PopulationTrajectory:
    """Populations from the fully pumped initial state (n_up = N).

    The linear system is propagated with the exact matrix exponential, so the
    total population is conserved to roundoff.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise InvalidArgumentError("times must be non-negative")
    R = _rate_matrix(effective_rates(params))
    p0 = np.array([params.N, 0.0, 0.0])
    pops = np.empty((t.size, 3))
    for i, ti in enumerate(t):
        pops[i] = expm(R * ti) @ p0
    return PopulationTrajectory(times=t, n_up=pops[:, 0], n_dn=pops[:, 1],
                                n_h=pops[:, 2], params=params)


def xi2_steady(gamma_tilde_eff: float, d_gamma: float, P: float,
               squeeze: SqueezeParams) -> float:
    """Steady-state witness of the two-level subsystem at polarization P.

        xi2_inf = (1/P) (Gt + d*Gamma*P^2*(mu-nu)^2) / (Gt + d*Gamma*P)

    Approaches (mu - nu)^2 as d -> infinity at P = 1, and 1/P >= 1 without
    the collectively enhanced dissipation (d*Gamma = 0).
    """
    if P <= 0 or P > 1:
        raise InvalidArgumentError(f"P must lie in (0, 1], got {P}")
    if gamma_tilde_eff < 0 or d_gamma < 0:
        raise InvalidArgumentError("rates must be >= 0")
    mn2 = squeeze.Zinv ** 2
    return (gamma_tilde_eff + d_gamma * P * P * mn2) / (
        P * (gamma_tilde_eff + d_gamma * P))


def steady_polarization(eff: EffectiveRates) -> float:
    """P2_inf = (Gamma_cool - Gamma_heat) / (Gamma_cool + Gamma_heat)."""
    tot = eff.Gamma_cool + eff.Gamma_heat
    if tot <= 0:
        raise InvalidArgumentError("Gamma_cool + Gamma_heat must be positive")
    return (eff.Gamma_cool - eff.Gamma_heat) / tot


@dataclass(frozen=True)
class Xi2Trajectory:
    """Witness evolution: adiabatic closed form and direct Sigma integration."""

    times: np.ndarray
    xi2: np.ndarray
    xi2_direct: np.ndarray
    populations: PopulationTrajectory


def xi2_adiabatic(params: RateModelParams, t) -> Xi2Trajectory:
    """xi2(t) riding on the slowly varying populations.

    The spin-sum variance starts at the projection-noise value
    Sigma_J2(0) = N and relaxes at Lambda(t) = Gt_eff + d(t) Gamma P2(t)
    toward the steady-state form, giving the two-term closed form

        xi2(t) = [N / (N2 P2)] e^{-Lambda t}
                 + [Gt_eff + d(t) Gamma P2^2 (mu-nu)^2]
                   / [P2 (Gt_eff + d(t) Gamma P2)] (1 - e^{-Lambda t}).

    For cross-validation, d(Sigma_J2)/dt is also integrated directly along
    the population trajectory and converted through
    xi2 = Sigma_J2 / (N2 P2); the two agree when the population timescales
    are slow compared to the Sigma relaxation.  Raises on P2 <= 0 anywhere.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise InvalidArgumentError("times must be non-negative")
    pops = evolve_populations(params, t)
    P2, N2, d_eff = pops.P2, pops.N2, pops.d_eff
    if np.any(P2 <= 0):
        raise InvalidArgumentError(
            "polarization P2 <= 0 along the trajectory; witness undefined")
    eff = effective_rates(params)
    gt = eff.Gamma_tilde_eff
    mn2 = params.squeeze.Zinv ** 2
    G = params.Gamma
    N = params.N

    lam = gt + d_eff * G * P2
    decay = np.exp(-lam * t)
    term1 = (N / (N2 * P2)) * decay
    term2 = (gt + d_eff * G * P2**2 * mn2) / (P2 * lam) * (1.0 - decay)
    xi2 = term1 + term2

    R = _rate_matrix(eff)

    def rhs(_t, y):
        p = y[:3]
        n2 = p[0] + p[1]
        pol = (p[0] - p[1]) / n2
        deff = params.d * n2 / N
        lam_t = gt + deff * G * pol
        dsigma = -lam_t * y[3] + n2 * (gt + deff * G * pol * pol * mn2)
        return [*(R @ p), dsigma]

    sol = solve_ivp(rhs, (0.0, t[-1]) if t[-1] > 0 else (0.0, 1e-12),
                    [params.N, 0.0, 0.0, float(N)], t_eval=t,
                    rtol=1e-10, atol=1e-12, method="RK45")
    n2_ode = sol.y[0] + sol.y[1]
    p2_ode = (sol.y[0] - sol.y[1]) / n2_ode
    xi2_direct = sol.y[3] / (n2_ode * p2_ode)
    return Xi2Trajectory(times=t, xi2=xi2, xi2_direct=xi2_direct,
                         populations=pops)
