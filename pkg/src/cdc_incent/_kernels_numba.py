"""numba-compiled kernels; same contracts as the numpy versions."""
from __future__ import annotations

import numpy as np
from numba import njit

FAIL_DEPTH = -1


@njit(cache=True)
def _g(t, x, d, c, coef):
    if t < x[0] or t > x[-1]:
        return 0.0
    i = np.searchsorted(x, t, side="right") - 1
    if i > len(x) - 2:
        i = len(x) - 2
    if i < 0:
        i = 0
    h = x[i + 1] - x[i]
    u = t - x[i]
    slope = (d[i + 1] - d[i]) / h
    f = d[i] + slope * u
    F = c[i] + d[i] * u + 0.5 * slope * u * u
    F = min(max(F, 0.0), 1.0)
    G = 1.0 - F
    n = len(coef)
    acc = 0.0
    for k in range(1, n + 1):
        if coef[k - 1] != 0.0:
            acc += coef[k - 1] * F ** (n - k) * G ** (k - 1)
    return t * f * acc


@njit(cache=True)
def score_density(t, x, d, c, coef):
    out = np.empty(len(t))
    for i in range(len(t)):
        out[i] = _g(t[i], x, d, c, coef)
    return out


@njit(cache=True)
def score_increments(grid, x, d, c, coef, tol, max_depth):
    ng = len(grid) - 1
    out = np.zeros(ng)
    span = grid[-1] - grid[0]
    cap = 2 * max_depth + 8
    sa = np.empty(cap)
    sb = np.empty(cap)
    sfa = np.empty(cap)
    sfm = np.empty(cap)
    sfb = np.empty(cap)
    sw = np.empty(cap)
    se = np.empty(cap)
    sd = np.empty(cap, dtype=np.int64)
    for g in range(ng):
        a = grid[g]
        b = grid[g + 1]
        fa = _g(a, x, d, c, coef)
        fb = _g(b, x, d, c, coef)
        fm = _g(0.5 * (a + b), x, d, c, coef)
        top = 0
        sa[0] = a
        sb[0] = b
        sfa[0] = fa
        sfm[0] = fm
        sfb[0] = fb
        sw[0] = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
        se[0] = tol * (b - a) / span
        sd[0] = 0
        top = 1
        total = 0.0
        while top > 0:
            top -= 1
            a = sa[top]
            b = sb[top]
            fa = sfa[top]
            fm = sfm[top]
            fb = sfb[top]
            whole = sw[top]
            eps = se[top]
            depth = sd[top]
            m = 0.5 * (a + b)
            flm = _g(0.5 * (a + m), x, d, c, coef)
            frm = _g(0.5 * (m + b), x, d, c, coef)
            left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
            right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
            delta = left + right - whole
            if abs(delta) <= 15.0 * eps:
                total += left + right + delta / 15.0
                continue
            if depth >= max_depth:
                return out, FAIL_DEPTH
            sa[top] = m
            sb[top] = b
            sfa[top] = fm
            sfm[top] = frm
            sfb[top] = fb
            sw[top] = right
            se[top] = 0.5 * eps
            sd[top] = depth + 1
            top += 1
            sa[top] = a
            sb[top] = m
            sfa[top] = fa
            sfm[top] = flm
            sfb[top] = fm
            sw[top] = left
            se[top] = 0.5 * eps
            sd[top] = depth + 1
            top += 1
        out[g] = total
    return out, 0


@njit(cache=True)
def modmatmul(A, B, p):
    r, s = A.shape
    t = B.shape[1]
    out = np.zeros((r, t), dtype=np.int64)
    for i in range(r):
        for k in range(s):
            a = A[i, k]
            if a == 0:
                continue
            for j in range(t):
                out[i, j] = (out[i, j] + a * B[k, j]) % p
    return out
