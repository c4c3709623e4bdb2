"""Pure-NumPy trajectory stepping, vectorized over trajectories.

The per-step arithmetic (operation order included) matches the Cython kernel
exactly so that both backends produce identical records from the same noise.

State layout per trajectory: ``quads[:, 0:6] = (X_c, P_c, X_s, P_s, m_c, m_s)``
where m_c/m_s are the running conditional means of P_c/P_s.

Noise layout per step: columns ``(y_c, q_c, y_s, q_s)`` always, followed by
``(Fp_c, Fx_c, Fp_s, Fx_s)`` when ``has_decay`` and ``(v_c, v_s)`` when
``has_eta``.  All draws are already scaled to their physical standard
deviations (sqrt(1/2) for vacuum modes and noise operators).
"""

import numpy as np


def step_chunk(quads, noise, rec, coefs, gains, q_shift=None):
    """Advance a chunk of trajectories through every step.

    Parameters
    ----------
    quads : ndarray, shape (n, 6), float64
        Trajectory state, updated in place.
    noise : ndarray, shape (n_steps, n, k)
        Pre-drawn noise, k = 4 + 4*has_decay + 2*has_eta.
    rec : ndarray, shape (n_steps, n, 2)
        Output records (detected y per c/s channel), written in place.
    coefs : ndarray, shape (8,)
        (a_s, bZ, b_over_Z, a_e, b_e, sqrt_eta, sqrt_1m_eta, c_pred) where
        c_pred = sqrt_eta * bZ is the innovation coefficient of the filter.
    gains : ndarray, shape (n_steps,)
        Per-step Kalman gains for the conditional-mean update.
    q_shift : ndarray, shape (n_steps,), optional
        Deterministic displacement added to both q draws (calibration pulses).
    """
    a_s, bZ, b_over_Z, a_e, b_e, sq_eta, sq_1m_eta, c_pred = coefs
    n_steps = noise.shape[0]
    k = noise.shape[2]
    has_decay = k >= 8
    has_eta = k in (6, 10)
    eta_base = 8 if has_decay else 4

    X_c = quads[:, 0]; P_c = quads[:, 1]
    X_s = quads[:, 2]; P_s = quads[:, 3]
    m_c = quads[:, 4]; m_s = quads[:, 5]

    for i in range(n_steps):
        nz = noise[i]
        y_c = nz[:, 0]; q_c = nz[:, 1]
        y_s = nz[:, 2]; q_s = nz[:, 3]
        if q_shift is not None:
            q_c = q_c + q_shift[i]
            q_s = q_s + q_shift[i]

        y_out_c = a_s * y_c + bZ * P_c
        y_out_s = a_s * y_s + bZ * P_s
        if has_eta:
            y_det_c = sq_eta * y_out_c + sq_1m_eta * nz[:, eta_base]
            y_det_s = sq_eta * y_out_s + sq_1m_eta * nz[:, eta_base + 1]
        else:
            y_det_c = y_out_c
            y_det_s = y_out_s
        rec[i, :, 0] = y_det_c
        rec[i, :, 1] = y_det_s

        Xn_c = a_s * X_c + bZ * q_c
        Pn_c = a_s * P_c - b_over_Z * y_c
        Xn_s = a_s * X_s + bZ * q_s
        Pn_s = a_s * P_s - b_over_Z * y_s

        g = gains[i]
        mn_c = a_s * m_c + g * (y_det_c - c_pred * m_c)
        mn_s = a_s * m_s + g * (y_det_s - c_pred * m_s)

        if has_decay:
            X_c = a_e * Xn_c + b_e * nz[:, 5]
            P_c = a_e * Pn_c + b_e * nz[:, 4]
            X_s = a_e * Xn_s + b_e * nz[:, 7]
            P_s = a_e * Pn_s + b_e * nz[:, 6]
        else:
            X_c = Xn_c; P_c = Pn_c
            X_s = Xn_s; P_s = Pn_s
        m_c = a_e * mn_c
        m_s = a_e * mn_s

    quads[:, 0] = X_c; quads[:, 1] = P_c
    quads[:, 2] = X_s; quads[:, 3] = P_s
    quads[:, 4] = m_c; quads[:, 5] = m_s
