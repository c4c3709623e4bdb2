# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython trajectory-stepping kernel.

Arithmetic and operation order match numpy_backend.step_chunk exactly; the
module docstring there documents the array layouts.  Compiled with
-ffp-contract=off so both backends produce bit-identical records from the
same noise arrays.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def step_chunk(cnp.float64_t[:, ::1] quads,
               cnp.float64_t[:, :, ::1] noise,
               cnp.float64_t[:, :, ::1] rec,
               cnp.float64_t[::1] coefs,
               cnp.float64_t[::1] gains,
               q_shift=None):
    cdef double a_s = coefs[0]
    cdef double bZ = coefs[1]
    cdef double b_over_Z = coefs[2]
    cdef double a_e = coefs[3]
    cdef double b_e = coefs[4]
    cdef double sq_eta = coefs[5]
    cdef double sq_1m_eta = coefs[6]
    cdef double c_pred = coefs[7]

    cdef Py_ssize_t n_steps = noise.shape[0]
    cdef Py_ssize_t n = noise.shape[1]
    cdef Py_ssize_t k = noise.shape[2]
    cdef bint has_decay = k >= 8
    cdef bint has_eta = (k == 6) or (k == 10)
    cdef Py_ssize_t eta_base = 8 if has_decay else 4

    cdef bint has_shift = q_shift is not None
    cdef cnp.float64_t[::1] shift
    if has_shift:
        shift = q_shift
    else:
        shift = np.zeros(1)

    cdef Py_ssize_t i, j
    cdef double X_c, P_c, X_s, P_s, m_c, m_s
    cdef double y_c, q_c, y_s, q_s
    cdef double y_out_c, y_out_s, y_det_c, y_det_s
    cdef double Xn_c, Pn_c, Xn_s, Pn_s, mn_c, mn_s, g, sh

    for j in range(n):
        X_c = quads[j, 0]; P_c = quads[j, 1]
        X_s = quads[j, 2]; P_s = quads[j, 3]
        m_c = quads[j, 4]; m_s = quads[j, 5]

        for i in range(n_steps):
            y_c = noise[i, j, 0]; q_c = noise[i, j, 1]
            y_s = noise[i, j, 2]; q_s = noise[i, j, 3]
            if has_shift:
                sh = shift[i]
                q_c = q_c + sh
                q_s = q_s + sh

            y_out_c = a_s * y_c + bZ * P_c
            y_out_s = a_s * y_s + bZ * P_s
            if has_eta:
                y_det_c = sq_eta * y_out_c + sq_1m_eta * noise[i, j, eta_base]
                y_det_s = sq_eta * y_out_s + sq_1m_eta * noise[i, j, eta_base + 1]
            else:
                y_det_c = y_out_c
                y_det_s = y_out_s
            rec[i, j, 0] = y_det_c
            rec[i, j, 1] = y_det_s

            Xn_c = a_s * X_c + bZ * q_c
            Pn_c = a_s * P_c - b_over_Z * y_c
            Xn_s = a_s * X_s + bZ * q_s
            Pn_s = a_s * P_s - b_over_Z * y_s

            g = gains[i]
            mn_c = a_s * m_c + g * (y_det_c - c_pred * m_c)
            mn_s = a_s * m_s + g * (y_det_s - c_pred * m_s)

            if has_decay:
                X_c = a_e * Xn_c + b_e * noise[i, j, 5]
                P_c = a_e * Pn_c + b_e * noise[i, j, 4]
                X_s = a_e * Xn_s + b_e * noise[i, j, 7]
                P_s = a_e * Pn_s + b_e * noise[i, j, 6]
            else:
                X_c = Xn_c; P_c = Pn_c
                X_s = Xn_s; P_s = Pn_s
            m_c = a_e * mn_c
            m_s = a_e * mn_s

        quads[j, 0] = X_c; quads[j, 1] = P_c
        quads[j, 2] = X_s; quads[j, 3] = P_s
        quads[j, 4] = m_c; quads[j, 5] = m_s
