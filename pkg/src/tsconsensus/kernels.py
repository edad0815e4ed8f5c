"""Hot numeric loops: cyclic Jacobi eigensolver and fixed-step RK4.

Each kernel exists twice. The ``*_numpy`` variants are plain Python driving
vectorised numpy updates; the ``*_numba`` variants are scalar loops compiled
with ``numba.njit``. ``jacobi_eigh`` and ``rk4_fixed`` point at the numba
versions unless numba is missing or ``TSCONSENSUS_DISABLE_NUMBA`` is set.

Dynamics and gains are passed to the RK4 kernel as integer codes plus float
parameters so the compiled path never calls back into Python.
"""

import math

import numpy as np

from ._jit import NUMBA_AVAILABLE, USE_NUMBA, njit

# F(t, x) - F(t, x0 1) codes, see simulate.DynamicsSpec
F_ZERO = 0
F_LINEAR = 1
F_LINEAR_DECAY = 2
F_SCALED_LINEAR = 3
F_SINE_INV_T2 = 4
F_SINE_INV_SQRT_T = 5

# gain codes on right-dense runs, see spectral.GammaSpec
G_POLY = 0
G_COSINE = 1

MAX_SWEEPS = 50


def _time_weight(f_code, t):
    if f_code == F_LINEAR_DECAY or f_code == F_SINE_INV_T2:
        return 1.0 / (t * t)
    if f_code == F_SCALED_LINEAR:
        return 1.0 / t
    if f_code == F_SINE_INV_SQRT_T:
        return 1.0 / math.sqrt(t)
    return 1.0


def _gain(g_code, g_params, t):
    if g_code == G_COSINE:
        return g_params[0] + g_params[1] * math.cos(t)
    acc = 0.0
    for k in range(g_params.shape[0] - 1, -1, -1):
        acc = acc * t + g_params[k]
    return acc


# ---------------------------------------------------------------------------
# numpy path


def _rhs_numpy(f_code, f_a, g_code, g_params, B, lead, t, eps):
    g = _gain(g_code, g_params, t)
    if f_code == F_ZERO:
        fd = 0.0
    elif f_code == F_SINE_INV_T2 or f_code == F_SINE_INV_SQRT_T:
        fd = f_a * _time_weight(f_code, t) * (np.sin(eps + lead) - np.sin(lead))
    else:
        fd = f_a * _time_weight(f_code, t) * eps
    return fd - g * (B @ eps)


def _rk4_numpy(f_code, f_a, g_code, g_params, B, lead, t0, t1, eps, nsteps):
    y = np.array(eps, dtype=np.float64)
    if nsteps <= 0 or t1 == t0:
        return y
    h = (t1 - t0) / nsteps
    for k in range(nsteps):
        t = t0 + k * h
        k1 = _rhs_numpy(f_code, f_a, g_code, g_params, B, lead, t, y)
        k2 = _rhs_numpy(f_code, f_a, g_code, g_params, B, lead, t + 0.5 * h, y + 0.5 * h * k1)
        k3 = _rhs_numpy(f_code, f_a, g_code, g_params, B, lead, t + 0.5 * h, y + 0.5 * h * k2)
        k4 = _rhs_numpy(f_code, f_a, g_code, g_params, B, lead, t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _jacobi_numpy(a, tol, max_sweeps):
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    scale = math.sqrt(float(np.sum(a * a)))
    thresh = tol * scale
    offdiag = ~np.eye(n, dtype=bool)
    for sweep in range(max_sweeps + 1):
        # summed directly; subtracting the diagonal from the total cancels
        off = math.sqrt(float(np.sum(a[offdiag] ** 2)))
        if off <= thresh:
            return np.diag(a).copy(), v, sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                with np.errstate(over="ignore"):
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, -1


# ---------------------------------------------------------------------------
# numba path

if NUMBA_AVAILABLE:
    _time_weight_nb = njit(_time_weight)
    _gain_nb = njit(_gain)

    @njit
    def _rhs_numba(f_code, f_a, g_code, g_params, B, lead, t, eps, out):
        n = eps.shape[0]
        g = _gain_nb(g_code, g_params, t)
        w = _time_weight_nb(f_code, t)
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += B[i, j] * eps[j]
            if f_code == F_ZERO:
                fd = 0.0
            elif f_code == F_SINE_INV_T2 or f_code == F_SINE_INV_SQRT_T:
                fd = f_a * w * (math.sin(eps[i] + lead[i]) - math.sin(lead[i]))
            else:
                fd = f_a * w * eps[i]
            out[i] = fd - g * acc

    @njit
    def _rk4_numba(f_code, f_a, g_code, g_params, B, lead, t0, t1, eps, nsteps):
        n = eps.shape[0]
        y = eps.copy()
        if nsteps <= 0 or t1 == t0:
            return y
        h = (t1 - t0) / nsteps
        k1 = np.empty(n)
        k2 = np.empty(n)
        k3 = np.empty(n)
        k4 = np.empty(n)
        tmp = np.empty(n)
        for k in range(nsteps):
            t = t0 + k * h
            _rhs_numba(f_code, f_a, g_code, g_params, B, lead, t, y, k1)
            for i in range(n):
                tmp[i] = y[i] + 0.5 * h * k1[i]
            _rhs_numba(f_code, f_a, g_code, g_params, B, lead, t + 0.5 * h, tmp, k2)
            for i in range(n):
                tmp[i] = y[i] + 0.5 * h * k2[i]
            _rhs_numba(f_code, f_a, g_code, g_params, B, lead, t + 0.5 * h, tmp, k3)
            for i in range(n):
                tmp[i] = y[i] + h * k3[i]
            _rhs_numba(f_code, f_a, g_code, g_params, B, lead, t + h, tmp, k4)
            for i in range(n):
                y[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        return y

    @njit
    def _jacobi_numba(a_in, tol, max_sweeps):
        a = a_in.copy()
        n = a.shape[0]
        v = np.eye(n)
        total = 0.0
        for i in range(n):
            for j in range(n):
                total += a[i, j] * a[i, j]
        thresh = tol * math.sqrt(total)
        for sweep in range(max_sweeps + 1):
            off = 0.0
            for i in range(n):
                for j in range(n):
                    if i != j:
                        off += a[i, j] * a[i, j]
            if math.sqrt(off) <= thresh:
                w = np.empty(n)
                for i in range(n):
                    w[i] = a[i, i]
                return w, v, sweep
            if sweep == max_sweeps:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if abs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        sgn = 1.0 if theta >= 0.0 else -1.0
                        t = sgn / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    c = 1.0 / math.sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(n):
                        akp = a[k, p]
                        akq = a[k, q]
                        a[k, p] = c * akp - s * akq
                        a[k, q] = s * akp + c * akq
                    for k in range(n):
                        apk = a[p, k]
                        aqk = a[q, k]
                        a[p, k] = c * apk - s * aqk
                        a[q, k] = s * apk + c * aqk
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(n):
                        vkp = v[k, p]
                        vkq = v[k, q]
                        v[k, p] = c * vkp - s * vkq
                        v[k, q] = s * vkp + c * vkq
        w = np.empty(n)
        for i in range(n):
            w[i] = a[i, i]
        return w, v, -1

else:  # pragma: no cover
    _rk4_numba = None
    _jacobi_numba = None


if USE_NUMBA:
    rk4_fixed = _rk4_numba
    jacobi_eigh = _jacobi_numba
    BACKEND = "numba"
else:  # pragma: no cover - exercised with TSCONSENSUS_DISABLE_NUMBA=1
    rk4_fixed = _rk4_numpy
    jacobi_eigh = _jacobi_numpy
    BACKEND = "numpy"
