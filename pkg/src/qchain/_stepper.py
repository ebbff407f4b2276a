"""Compiled Dormand-Prince trial step.

The adaptive loop in ``integrator`` spends nearly all of its time on many
thousands of small dense operations; compiling one trial step (seven
right-hand-side evaluations plus the embedded error estimate) removes the
per-call overhead that dominates at these matrix sizes.  The numerical
method is identical to the pure-numpy path in ``integrator._step_dp45``,
which remains as a fallback when numba is unavailable; a unit test pins
the two paths against each other.

Status codes: 0 ok, 1 singular schedule denominator (the offending time
is returned so the caller can raise SingularSchedule).
"""

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:      # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

# Dormand-Prince nodes, stage coefficients and embedded-error weights;
# must stay in sync with integrator._A/_B/_E.
_NODES = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_STAGE = np.zeros((7, 6))
_STAGE[1, :1] = [1 / 5]
_STAGE[2, :2] = [3 / 40, 9 / 40]
_STAGE[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_STAGE[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_STAGE[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_STAGE[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_ERR = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
                 22 / 525, -1 / 40])

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _rhs(lconst, dephs, shifts, params, use_deph, use_shift, denom_floor, t, v):
        """L(t) @ v with the oscillatory dephasing/shift groups added."""
        w = lconst @ v
        for g in range(params.shape[0]):
            pi_j = params[g, 0]
            two_pi_j = params[g, 1]
            amp = params[g, 2]
            cos4 = params[g, 3]
            shift_coef = params[g, 4]
            s = np.sin(pi_j * t)
            den = 3.0 + 2.0 * cos4 * s * s + np.cos(two_pi_j * t)
            if abs(den) <= denom_floor:
                return 1, w
            if use_deph[g]:
                w += (amp * np.sin(two_pi_j * t) / den) * (dephs[g] @ v)
            if use_shift[g]:
                w += (shift_coef / den) * (shifts[g] @ v)
        return 0, w

    @numba.njit(cache=True)
    def dp45_trial(lconst, dephs, shifts, params, use_deph, use_shift, denom_floor,
                   t, h, y, rel_tol, abs_tol):
        """One trial step: returns (status, t_fail, y_new, err_norm)."""
        n = y.size
        k = np.empty((7, n), np.complex128)
        st, k0 = _rhs(lconst, dephs, shifts, params, use_deph, use_shift,
                      denom_floor, t, y)
        if st != 0:
            return 1, t, y, 0.0
        k[0] = k0
        z = np.empty(n, np.complex128)
        for i in range(1, 7):
            for m in range(n):
                acc = 0.0 + 0.0j
                for j in range(i):
                    acc += _STAGE[i, j] * k[j, m]
                z[m] = y[m] + h * acc
            ti = t + _NODES[i] * h
            st, ki = _rhs(lconst, dephs, shifts, params, use_deph, use_shift,
                          denom_floor, ti, z)
            if st != 0:
                return 1, ti, y, 0.0
            k[i] = ki
        y_new = np.empty(n, np.complex128)
        for m in range(n):
            y_new[m] = y[m] + h * (_STAGE[6, 0] * k[0, m] + _STAGE[6, 2] * k[2, m]
                                   + _STAGE[6, 3] * k[3, m] + _STAGE[6, 4] * k[4, m]
                                   + _STAGE[6, 5] * k[5, m])
        acc = 0.0
        for m in range(n):
            err = h * (_ERR[0] * k[0, m] + _ERR[2] * k[2, m] + _ERR[3] * k[3, m]
                       + _ERR[4] * k[4, m] + _ERR[5] * k[5, m] + _ERR[6] * k[6, m])
            scale = abs_tol + rel_tol * max(abs(y[m]), abs(y_new[m]))
            q = abs(err) / scale
            acc += q * q
        return 0, t + h, y_new, np.sqrt(acc / n)

else:      # pragma: no cover - exercised only without numba
    dp45_trial = None
