"""Measurement pipeline: temporal modes, synthetic records, reconstruction.

The scattered light is read out through exponentially weighted, Larmor
cos/sin-modulated temporal modes.  This module provides

* canonical temporal mode functions and their exact overlap integrals,
* seeded Monte Carlo generation of homodyne records (discretized pulses with
  explicit vacuum and decay-noise draws, plus the deterministic per-step
  filter giving the outcome-independent conditional variance),
* shot-noise-referenced variance reconstruction with decay and detection
  efficiency,
* the two-pulse mean-transfer calibration of the coupling constant, and
* the two-slice conditional-variance estimator with closed-form alpha*.

Record generation runs on the compiled stepping kernel when available and on
the NumPy fallback otherwise; both consume the identical seeded noise stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dynamics import (
    DynamicsParams, coupling_kappa, mode_overlap, noisy_channel_coefficients,
)
from .errors import (
    CalibrationError,
    InvalidArgumentError,
    ReconstructionError,
    StepSizeError,
)

__all__ = [
    "ModeFunction", "HomodyneRecord", "SimulatedRecords",
    "ReconstructionInput", "KappaCalibrationResult",
    "ConditionalVarianceEstimate",
    "decay_coefficients", "project_record", "project_ensemble",
    "reconstruct_variance", "calibrate_kappa", "run_kappa_calibration",
    "simulate_records", "conditional_variance_estimate",
    "empirical_conditional_variance", "optimal_probe_rate",
]

MAX_GAMMA_DT = 0.01


# ---------------------------------------------------------------------------
# temporal mode functions
# ---------------------------------------------------------------------------

def _exp_cos_integral(a: float, b: float, T: float) -> float:
    """integral_0^T e^{a t} cos(b t) dt, exact."""
    if b == 0.0:
        if abs(a) < 1e-300:
            return T
        return (math.exp(a * T) - 1.0) / a if abs(a * T) > 1e-8 else \
            T * (1.0 + a * T / 2.0 + (a * T) ** 2 / 6.0)
    e = math.exp(a * T)
    return (e * (a * math.cos(b * T) + b * math.sin(b * T)) - a) / (a * a + b * b)


def _exp_sin_integral(a: float, b: float, T: float) -> float:
    """integral_0^T e^{a t} sin(b t) dt, exact."""
    if b == 0.0:
        return 0.0
    e = math.exp(a * T)
    return (e * (a * math.sin(b * T) - b * math.cos(b * T)) + b) / (a * a + b * b)


@dataclass(frozen=True)
class ModeFunction:
    """Exponential cos/sin-modulated temporal mode on [0, duration].

    The full weight is ``norm * e^{+/- rate * t} * cos/sin(Omega t)`` with the
    canonical normalization

        N_+ = 2 sqrt(rate) / sqrt(e^{2 rate T} - 1)   (rising)
        N_- = 2 sqrt(rate) / sqrt(1 - e^{-2 rate T})  (falling)

    valid for Omega T >> 1 (cos^2 averages to 1/2).  Demodulated records use
    the envelope ``(norm/sqrt(2)) e^{+/- rate t}``, whose square integrates
    to one.
    """

    kind: str        # "rising" | "falling"
    rate: float
    duration: float
    phase: str = "cos"

    def __post_init__(self):
        if self.kind not in ("rising", "falling"):
            raise InvalidArgumentError(f"kind must be rising|falling, got {self.kind!r}")
        if self.phase not in ("cos", "sin"):
            raise InvalidArgumentError(f"phase must be cos|sin, got {self.phase!r}")
        if self.rate <= 0 or self.duration <= 0:
            raise InvalidArgumentError("rate and duration must be positive")

    @property
    def sign(self) -> float:
        return 1.0 if self.kind == "rising" else -1.0

    @property
    def normalization(self) -> float:
        x = 2.0 * self.rate * self.duration
        if self.kind == "rising":
            return 2.0 * math.sqrt(self.rate) / math.sqrt(math.expm1(x))
        return 2.0 * math.sqrt(self.rate) / math.sqrt(-math.expm1(-x))

    def envelope(self, t) -> np.ndarray:
        """Demodulated canonical weight (norm/sqrt(2)) e^{+/- rate t}.

        Normalized so its square integrates to one; projecting a record in
        flux-density units against it yields a canonical mode outcome.
        """
        t = np.asarray(t, dtype=float)
        return (self.normalization / math.sqrt(2.0)) * np.exp(
            self.sign * self.rate * t)

    def weight(self, t, Omega: float) -> np.ndarray:
        """Full modulated weight norm * e^{+/- rate t} * cos/sin(Omega t)."""
        t = np.asarray(t, dtype=float)
        trig = np.cos if self.phase == "cos" else np.sin
        return self.normalization * np.exp(self.sign * self.rate * t) * trig(
            Omega * t)

    def discrete_weights(self, n_steps: int, dt: float,
                         renormalize: bool = True) -> np.ndarray:
        """Per-sample quadrature weights f(t_n) dt at bin centers.

        Records hold flux-density samples, so the projection is the Riemann
        sum ``sum_n w_n y_n`` with ``w_n = f(t_n) dt``; by default the
        weights are rescaled so the discrete mode is exactly canonical
        (``sum_n w_n^2 / dt = 1``).
        """
        t = (np.arange(n_steps) + 0.5) * dt
        w = self.envelope(t) * dt
        if renormalize:
            w = w / math.sqrt(float(w @ w) / dt)
        return w

    def overlap(self, other: "ModeFunction", Omega: float) -> float:
        """Exact overlap integral of the two modulated weights on [0, T].

        Modes must share the duration.  With equal rates and phases this is
        1 for self-overlap and gamma*T/sinh(gamma*T) for a rising/falling
        pair (up to O(rate/Omega) modulation corrections).
        """
        if abs(self.duration - other.duration) > 1e-12:
            raise InvalidArgumentError("mode durations differ")
        T = self.duration
        a = self.sign * self.rate + other.sign * other.rate
        pref = 0.5 * self.normalization * other.normalization
        pair = (self.phase, other.phase)
        if pair == ("cos", "cos"):
            val = _exp_cos_integral(a, 0.0, T) + _exp_cos_integral(a, 2 * Omega, T)
        elif pair == ("sin", "sin"):
            val = _exp_cos_integral(a, 0.0, T) - _exp_cos_integral(a, 2 * Omega, T)
        else:
            val = _exp_sin_integral(a, 2 * Omega, T)
        return pref * val


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HomodyneRecord:
    """One trajectory of demodulated y-quadrature outcomes per c/s channel.

    Samples are flux densities (one canonical bin outcome divided by
    sqrt(dt)), so mode projections are plain Riemann sums and a vacuum
    record projects to shot-noise variance 1/2 for any sampling rate.
    """

    dt: float
    y_c: np.ndarray
    y_s: np.ndarray
    seed: int
    params: DynamicsParams

    def __post_init__(self):
        if self.y_c.shape != self.y_s.shape or self.y_c.ndim != 1:
            raise InvalidArgumentError("channels must be equal-length 1-d arrays")

    @property
    def n_steps(self) -> int:
        return self.y_c.size

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt


@dataclass(frozen=True)
class SimulatedRecords:
    """Record ensemble plus final quadratures and the deterministic filter.

    ``quads`` holds the final (X_c, P_c, X_s, P_s) per trajectory,
    ``filter_means`` the final conditional means of (P_c, P_s), and
    ``filter_var`` the per-step conditional variance (identical for both
    sectors and for every trajectory: Gaussian conditioning is
    outcome-independent).
    """

    params: DynamicsParams
    dt: float
    seed: int
    backend: str
    times: np.ndarray
    y_c: np.ndarray = field(repr=False)
    y_s: np.ndarray = field(repr=False)
    quads: np.ndarray = field(repr=False)
    filter_means: np.ndarray = field(repr=False)
    filter_var: np.ndarray = field(repr=False)

    @property
    def n_traj(self) -> int:
        return self.y_c.shape[0]

    @property
    def n_steps(self) -> int:
        return self.y_c.shape[1]

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    def record(self, i: int) -> HomodyneRecord:
        return HomodyneRecord(dt=self.dt, y_c=self.y_c[i], y_s=self.y_s[i],
                              seed=self.seed, params=self.params)

    def to_csv(self, path):
        """Write the ensemble in the documented long format.

        Columns: trajectory_id, step, t_ms, y_c, y_s (UTF-8, header row,
        '.' decimal separator, 17 significant digits).
        """
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("trajectory_id,step,t_ms,y_c,y_s\n")
            for i in range(self.n_traj):
                for k in range(self.n_steps):
                    fh.write(f"{i},{k},{self.times[k]:.17g},"
                             f"{self.y_c[i, k]:.17g},{self.y_s[i, k]:.17g}\n")


def _filter_gains(params: DynamicsParams, n_steps: int, dt: float,
                  v0: float = 0.5):
    """Deterministic conditional-variance recursion and per-step gains.

    One step = exact ideal pulse of duration dt, homodyne conditioning on the
    detected y (detection efficiency included), then transverse decay toward
    variance 1/2.  Returns (variance after each step, Kalman gains).
    """
    Z = params.squeeze.Z
    a = math.exp(-params.gamma_s * dt)
    b = math.sqrt(1.0 - a * a)
    ae = math.exp(-params.gamma_extra * dt)
    eta = params.eta
    v = v0
    var_seq = np.empty(n_steps)
    gains = np.empty(n_steps)
    for i in range(n_steps):
        var_p = a * a * v + b * b / (2.0 * Z * Z)
        cov = a * b * (Z * v - 1.0 / (2.0 * Z))
        var_y = a * a * 0.5 + b * b * Z * Z * v
        cov_det = math.sqrt(eta) * cov
        var_det = eta * var_y + (1.0 - eta) * 0.5
        gains[i] = cov_det / var_det
        v = var_p - cov_det * cov_det / var_det
        v = ae * ae * v + (1.0 - ae * ae) * 0.5
        var_seq[i] = v
    return var_seq, gains


_TRAJ_BLOCK = 256


def simulate_records(params: DynamicsParams, n_steps: int, n_traj: int,
                     seed: int, initial_quads: np.ndarray | None = None,
                     q_shift: np.ndarray | None = None) -> SimulatedRecords:
    """Generate seeded homodyne records by discretized pulse stepping.

    The pulse duration ``params.T`` is split into ``n_steps`` slices of
    duration dt (``gamma_s * dt < 0.01`` enforced); each slice applies the
    exact ideal pulse map with fresh vacuum light, records the detected y per
    sector (in flux-density units), and relaxes toward the coherent spin
    state at ``gamma_extra``.  Atoms start in the coherent spin state unless
    ``initial_quads`` (n_traj, 4) carries them over from a previous pulse;
    ``q_shift`` displaces both q draws deterministically (calibration
    pulses).

    Trajectories are processed in fixed blocks, each drawing its noise from
    a spawned child of the seed sequence; results depend only on
    (params, n_steps, n_traj, seed) and are identical on both stepping
    backends.
    """
    if n_steps < 1 or n_traj < 1:
        raise InvalidArgumentError("n_steps and n_traj must be >= 1")
    dt = params.T / n_steps
    if params.gamma_s * dt >= MAX_GAMMA_DT:
        raise StepSizeError(
            f"gamma_s * dt = {params.gamma_s * dt:.4f} >= {MAX_GAMMA_DT}; "
            "increase n_steps")
    if q_shift is not None:
        q_shift = np.ascontiguousarray(q_shift, dtype=float)
        if q_shift.shape != (n_steps,):
            raise InvalidArgumentError("q_shift must have shape (n_steps,)")

    Z = params.squeeze.Z
    a_s = math.exp(-params.gamma_s * dt)
    bZ = math.sqrt(1.0 - a_s * a_s) * Z
    b_over_Z = math.sqrt(1.0 - a_s * a_s) / Z
    a_e = math.exp(-params.gamma_extra * dt)
    b_e = math.sqrt(1.0 - a_e * a_e)
    has_decay = params.gamma_extra > 0
    has_eta = params.eta < 1.0
    n_cols = 4 + (4 if has_decay else 0) + (2 if has_eta else 0)
    coefs = np.array([a_s, bZ, b_over_Z, a_e, b_e,
                      math.sqrt(params.eta), math.sqrt(1.0 - params.eta),
                      math.sqrt(params.eta) * bZ])
    var_seq, gains = _filter_gains(params, n_steps, dt)

    quads = np.zeros((n_traj, 6))
    root = np.random.SeedSequence(seed)
    n_chunks = (n_traj + chunk_size - 1) // chunk_size
    children = root.spawn(n_chunks + 1)
    if initial_quads is not None:
        initial_quads = np.asarray(initial_quads, dtype=float)
        if initial_quads.shape != (n_traj, 4):
            raise InvalidArgumentError("initial_quads must have shape (n_traj, 4)")
        quads[:, :4] = initial_quads
    else:
        rng0 = np.random.default_rng(children[n_chunks])
        quads[:, :4] = rng0.normal(0.0, math.sqrt(0.5), size=(n_traj, 4))

    rec = np.empty((n_steps, n_traj, 2))
    sigma = math.sqrt(0.5)
    for c in range(n_chunks):
        lo, hi = c * chunk_size, min((c + 1) * chunk_size, n_traj)
        rng = np.random.default_rng(children[c])
        noise = rng.normal(0.0, sigma, size=(n_steps, hi - lo, n_cols))
        chunk = np.ascontiguousarray(quads[lo:hi])
        rec_chunk = np.empty((n_steps, hi - lo, 2))
        _kernels.step_chunk(chunk, noise, rec_chunk, coefs, gains, q_shift)
        quads[lo:hi] = chunk
        rec[:, lo:hi, :] = rec_chunk

    times = (np.arange(n_steps) + 0.5) * dt
    return SimulatedRecords(
        params=params, dt=dt, seed=seed, backend=_kernels.BACKEND,
        times=times, y_c=np.ascontiguousarray(rec[:, :, 0].T),
        y_s=np.ascontiguousarray(rec[:, :, 1].T),
        quads=quads[:, :4].copy(), filter_means=quads[:, 4:6].copy(),
        filter_var=var_seq)


def empirical_conditional_variance(records: SimulatedRecords):
    """Across-trajectory variance of P around the filter conditional mean.

    Returns (var_c, var_s); both should match ``filter_var[-1]`` to
    statistical accuracy, independently of the measurement outcomes.
    """
    res_c = records.quads[:, 1] - records.filter_means[:, 0]
    res_s = records.quads[:, 3] - records.filter_means[:, 1]
    return float(np.var(res_c)), float(np.var(res_s))


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def _check_duration(record_duration: float, dt: float, mode: ModeFunction):
    if abs(record_duration - mode.duration) > dt * (1.0 + 1e-9):
        raise InvalidArgumentError(
            f"record duration {record_duration:.6g} does not match mode "
            f"duration {mode.duration:.6g}")


def project_record(record: HomodyneRecord, mode: ModeFunction) -> float:
    """Project one record onto a temporal mode (cos phase reads the c
    channel, sin the s channel)."""
    _check_duration(record.duration, record.dt, mode)
    w = mode.discrete_weights(record.n_steps, record.dt)
    samples = record.y_c if mode.phase == "cos" else record.y_s
    return float(w @ samples)


def project_ensemble(records: SimulatedRecords, mode: ModeFunction,
                     start: int = 0, stop: int | None = None) -> np.ndarray:
    """Mode projection of every trajectory over the step slice [start, stop)."""
    stop = records.n_steps if stop is None else stop
    n = stop - start
    _check_duration(n * records.dt, records.dt, mode)
    w = mode.discrete_weights(n, records.dt)
    samples = records.y_c if mode.phase == "cos" else records.y_s
    return samples[:, start:stop] @ w


# ---------------------------------------------------------------------------
# variance reconstruction
# ---------------------------------------------------------------------------

def decay_coefficients(kappa: float, Z: float, T2: float, T: float):
    """(U2, V2, eps2) of the decay-corrected reconstruction.

    Only the measured coupling constant and the decay time T2 = 1/gamma are
    needed: eps^2 follows from kappa^2 = Z^2 (1 - eps^2)(1 - e^{-2 gamma T}).
    """
    gamma = 1.0 / T2
    b2 = -math.expm1(-2.0 * gamma * T)
    eps2 = 1.0 - kappa**2 / (Z * Z * b2)
    if eps2 < -1e-9 or eps2 > 1.0:
        raise ReconstructionError(
            f"inconsistent kappa/T2: implied eps^2 = {eps2:.4g}")
    eps2 = min(max(eps2, 0.0), 1.0)
    s = math.exp(-gamma * T)
    O = mode_overlap(gamma, T)
    U2 = eps2**2 + (1.0 - eps2) ** 2 * s * s + 2.0 * eps2 * (1.0 - eps2) * s * O
    V2 = eps2 * (1.0 - eps2) * Z * Z * (1.0 + s * s - 2.0 * s * O)
    return U2, V2, eps2


@dataclass(frozen=True)
class ReconstructionInput:
    """Measured falling-mode variance plus the calibration constants.

    ``T2`` and ``T`` are only required for the decay-corrected path.
    """

    var_y_out: float
    kappa: float
    Z: float
    sigma_in2: float = 0.5
    eta: float = 1.0
    T2: float | None = None
    T: float | None = None

    def __post_init__(self):
        if self.var_y_out < 0:
            raise InvalidArgumentError("var_y_out must be >= 0")
        if self.kappa <= 0:
            raise InvalidArgumentError("kappa must be > 0")


def reconstruct_variance(inp: ReconstructionInput,
                         with_decay: bool = False) -> float:
    """Atomic input variance from the measured falling-mode light variance.

    Without decay:

        var(P_in) = (var(y_out) - sigma_in^2 (1 - kappa^2/Z^2)) / kappa^2.

    With decay, the shot-noise and decay-noise admixtures are subtracted with
    the coefficients from :func:`decay_coefficients`:

        var(P_in) = (var(y_out) - U2 sigma_in^2 - V2/2) / kappa^2.

    A detection efficiency eta < 1 is undone first by inverting the
    beam-splitter admixture of vacuum.
    """
    k2 = inp.kappa**2
    if k2 < 1e-12:
        raise ReconstructionError("kappa^2 < 1e-12; reconstruction ill-conditioned")
    var_y = inp.var_y_out
    if inp.eta < 1.0:
        if inp.eta <= 0.0:
            raise ReconstructionError("eta must be positive to invert detection loss")
        var_y = (var_y - (1.0 - inp.eta) * inp.sigma_in2) / inp.eta
    if not with_decay:
        return (var_y - inp.sigma_in2 * (1.0 - k2 / inp.Z**2)) / k2
    if inp.T2 is None or inp.T is None:
        raise InvalidArgumentError("decay-corrected reconstruction needs T2 and T")
    U2, V2, _ = decay_coefficients(inp.kappa, inp.Z, inp.T2, inp.T)
    return (var_y - U2 * inp.sigma_in2 - V2 * 0.5) / k2


# ---------------------------------------------------------------------------
# coupling-constant calibration
# ---------------------------------------------------------------------------

def calibrate_kappa(q_first_mean: float, y_second_mean: float) -> float:
    """kappa^2 from the two-pulse mean transfer: <y_2nd> / <q_1st>."""
    if abs(q_first_mean) <= 1e-9:
        raise CalibrationError(
            "first-pulse displacement too small; calibration undefined")
    return y_second_mean / q_first_mean


@dataclass(frozen=True)
class KappaCalibrationResult:
    kappa2: float
    kappa2_expected: float
    q_first_mean: float
    y_second_mean: float
    method: str


def _fresh_light_vacuum(state):
    """Replace the light modes of a four-mode c/s state with fresh vacuum."""
    from .gaussian import GaussianState, LIGHT_C, LIGHT_S
    cov = np.array(state.cov)
    disp = np.array(state.disp)
    for label in (LIGHT_C, LIGHT_S):
        i = 2 * state.mode_index(label)
        cov[i:i + 2, :] = 0.0
        cov[:, i:i + 2] = 0.0
        cov[i, i] = cov[i + 1, i + 1] = 0.5
        disp[i:i + 2] = 0.0
    return GaussianState(state.modes, cov, disp)


def run_kappa_calibration(params: DynamicsParams, displacement: float = 1.0,
                          n_traj: int = 0, n_steps: int = 400,
                          seed: int = 0) -> KappaCalibrationResult:
    """Simulate the two-pulse protocol and return the recovered kappa^2.

    Pulse one carries a known displacement of the rising q mode, leaving the
    atoms with <X> = kappa <q>; a pi/2 spin rotation maps X into P; pulse two
    reads <y_-> = kappa <P> = kappa^2 <q>.  With ``n_traj = 0`` the protocol
    runs noiselessly on the Gaussian channel means (exact); otherwise the
    means are Monte Carlo averages over seeded records.
    """
    if abs(displacement) <= 1e-9:
        raise CalibrationError("displacement must be nonzero")
    from .dynamics import atomic_rotation, step_io_noisy
    from .gaussian import (
        ATOMIC_C, ATOMIC_S, LIGHT_C, LIGHT_S, new_vacuum,
    )
    kappa_true = coupling_kappa(params).kappa
    gamma = coupling_kappa(params).gamma_total

    if n_traj == 0:
        state = new_vacuum(4, (ATOMIC_C, ATOMIC_S, LIGHT_C, LIGHT_S))
        disp = np.array(state.disp)
        for label in (LIGHT_C, LIGHT_S):
            disp[2 * state.mode_index(label) + 1] = displacement
        from .gaussian import GaussianState
        state = GaussianState(state.modes, state.cov, disp)
        state = step_io_noisy(params, state)
        state = atomic_rotation(state, -math.pi / 2.0)
        state = _fresh_light_vacuum(state)
        state = step_io_noisy(params, state)
        y_mean = state.mean(LIGHT_C, "X")
        method = "noiseless"
    else:
        # displacing the canonical rising mode by beta shifts the mean of
        # sample n by beta * w_n (unit-norm discrete weights)
        rising = ModeFunction("rising", gamma, params.T, "cos")
        shift = displacement * rising.discrete_weights(n_steps, params.T / n_steps)
        first = simulate_records(params, n_steps, n_traj, seed,
                                 q_shift=shift)
        rotated = np.empty_like(first.quads)
        rotated[:, 0] = -first.quads[:, 1]   # X' = -P
        rotated[:, 1] = first.quads[:, 0]    # P' = X
        rotated[:, 2] = -first.quads[:, 3]
        rotated[:, 3] = first.quads[:, 2]
        second = simulate_records(params, n_steps, n_traj, seed + 1,
                                  initial_quads=rotated)
        falling = ModeFunction("falling", gamma, params.T, "cos")
        y_mean = float(np.mean(project_ensemble(second, falling)))
        method = "monte_carlo"
    kappa2 = calibrate_kappa(displacement, y_mean)
    return KappaCalibrationResult(
        kappa2=kappa2, kappa2_expected=kappa_true**2,
        q_first_mean=displacement, y_second_mean=y_mean, method=method)


# ---------------------------------------------------------------------------
# conditional-variance estimation
# ---------------------------------------------------------------------------

def optimal_probe_rate(params: DynamicsParams) -> float:
    """Rate of the rising probe mode that saturates the filtering bound.

    The steady-state optimal kernel for estimating P(t) from the past record
    is exponential with the closed-loop filter rate

        lambda = 4 gamma_s Z^2 v* - (gamma_s - gamma_extra),

    v* the conditional steady-state variance; for gamma_extra = 0 this is
    gamma_s, and it grows past 1/T2 with increasing extra noise.
    """
    from .dynamics import steady_state_xi_cond
    v_star = 0.5 * steady_state_xi_cond(params)
    return (4.0 * params.gamma_s * params.squeeze.Z**2 * v_star
            - (params.gamma_s - params.gamma_extra))


@dataclass(frozen=True)
class ConditionalVarianceEstimate:
    """alpha*-optimized conditional variance, reconstructed to atomic units."""

    alpha_star: tuple
    var_y_cond: tuple
    var_p_cond: tuple
    xi_cond: float
    stderr_xi: float
    alpha_grid_best: tuple | None = None


def conditional_variance_estimate(
        records: SimulatedRecords, t_split: float,
        probe_mode: ModeFunction, readout_mode: ModeFunction,
        alpha_grid: np.ndarray | None = None) -> ConditionalVarianceEstimate:
    """Estimate the conditionally squeezed atomic variance from records.

    The record is split at ``t_split``: the first slice is projected onto the
    rising probe mode, the second onto the falling readout mode.  The
    residual variance var(y_out - alpha* y_probe) with the closed-form
    minimizer alpha* = <y_probe y_out> / var(y_probe) is reconstructed into
    var(P)_cond through the decay-corrected inversion for the readout
    window.  ``alpha_grid`` optionally validates the minimizer by grid
    search.
    """
    i_split = int(round(t_split / records.dt))
    if not 0 < i_split < records.n_steps:
        raise InvalidArgumentError("t_split outside the record")
    n_read = records.n_steps - i_split
    gamma = coupling_kappa(records.params).gamma_total
    T_read = n_read * records.dt
    kappa_read = records.params.squeeze.Z * math.sqrt(
        (1.0 - records.params.gamma_extra / gamma)
        * -math.expm1(-2.0 * gamma * T_read))

    alpha_stars, var_conds, var_ps, grid_best = [], [], [], []
    for phase in ("cos", "sin"):
        probe = ModeFunction(probe_mode.kind, probe_mode.rate,
                             i_split * records.dt, phase)
        readout = ModeFunction(readout_mode.kind, readout_mode.rate,
                               T_read, phase)
        y_probe = project_ensemble(records, probe, 0, i_split)
        y_read = project_ensemble(records, readout, i_split, records.n_steps)
        y_probe = y_probe - y_probe.mean()
        y_read = y_read - y_read.mean()
        var_probe = float(np.var(y_probe))
        if var_probe < 1e-14:
            raise ReconstructionError("degenerate probe variance")
        alpha = float(np.mean(y_probe * y_read) / var_probe)
        var_cond = float(np.var(y_read - alpha * y_probe))
        if alpha_grid is not None:
            grid_vars = [float(np.var(y_read - a * y_probe)) for a in alpha_grid]
            grid_best.append(float(alpha_grid[int(np.argmin(grid_vars))]))
        inp = ReconstructionInput(
            var_y_out=var_cond, kappa=kappa_read, Z=records.params.squeeze.Z,
            eta=records.params.eta, T2=1.0 / gamma, T=T_read)
        var_ps.append(reconstruct_variance(inp, with_decay=True))
        alpha_stars.append(alpha)
        var_conds.append(var_cond)

    n = records.n_traj
    # variance-of-variance for Gaussian samples, propagated through 1/kappa^2
    stderr = math.sqrt(sum((math.sqrt(2.0 / (n - 1)) * vc / kappa_read**2) ** 2
                           for vc in var_conds))
    return ConditionalVarianceEstimate(
        alpha_star=tuple(alpha_stars), var_y_cond=tuple(var_conds),
        var_p_cond=tuple(var_ps), xi_cond=float(sum(var_ps)),
        stderr_xi=stderr,
        alpha_grid_best=tuple(grid_best) if alpha_grid is not None else None)
