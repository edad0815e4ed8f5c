"""Adaptive Simpson quadrature for scalar or vector-valued integrands."""

import numpy as np


def adaptive_simpson(f, a, b, tol=1e-9, rel_tol=1e-13, max_depth=40):
    """Integrate ``f`` over ``[a, b]``.

    Panels are split until the Richardson estimate of the local error drops
    below ``max(tol, rel_tol * |panel|)``; the relative floor keeps the
    recursion finite when the integrand is huge.
    """
    if b == a:
        return 0.0 * np.asarray(f(a), dtype=float)
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        diff = np.max(np.abs(left + right - est))
        scale = np.max(np.abs(left + right))
        if depth >= max_depth or diff <= 15.0 * max(eps, rel_tol * scale):
            total = total + left + right + (left + right - est) / 15.0
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
    return total
