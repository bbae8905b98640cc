"""Pure-numpy kernels. Reference path, and the fallback when numba is off."""
from __future__ import annotations

import numpy as np

FAIL_DEPTH = -1


def dist_eval(t, x, d, c):
    """Density and cdf of a piecewise-linear density with knots `x`, values `d`, cdf `c`."""
    t = np.asarray(t, dtype=np.float64)
    tc = np.minimum(np.maximum(t, x[0]), x[-1])
    i = np.clip(np.searchsorted(x, tc, side="right") - 1, 0, len(x) - 2)
    h = x[i + 1] - x[i]
    u = tc - x[i]
    slope = (d[i + 1] - d[i]) / h
    f = d[i] + slope * u
    F = c[i] + d[i] * u + 0.5 * slope * u * u
    F = np.minimum(np.maximum(F, 0.0), 1.0)
    outside = (t < x[0]) | (t > x[-1])
    return np.where(outside, 0.0, f), F


def score_density(t, x, d, c, coef):
    """t * f(t) * sum_k coef[k-1] F^(n-k) (1-F)^(k-1), with n = len(coef)."""
    f, F = dist_eval(t, x, d, c)
    n = len(coef)
    acc = np.zeros_like(F)
    G = 1.0 - F
    for k in range(1, n + 1):
        if coef[k - 1] != 0.0:
            acc = acc + coef[k - 1] * F ** (n - k) * G ** (k - 1)
    return np.asarray(t, dtype=np.float64) * f * acc


def score_increments(grid, x, d, c, coef, tol, max_depth):
    """Integral of score_density over each [grid[g], grid[g+1]].

    Breadth-first adaptive Simpson: every pending panel is refined in one
    vectorised step. Panel tolerances are `tol` shared in proportion to width.
    Returns (increments, status) with status FAIL_DEPTH on non-convergence.
    """
    grid = np.asarray(grid, dtype=np.float64)
    a, b = grid[:-1], grid[1:]
    owner = np.arange(len(a))
    span = grid[-1] - grid[0]
    eps = tol * (b - a) / span
    fa = score_density(a, x, d, c, coef)
    fb = score_density(b, x, d, c, coef)
    m = 0.5 * (a + b)
    fm = score_density(m, x, d, c, coef)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    out = np.zeros(len(a))
    depth = 0
    while len(a):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm = score_density(lm, x, d, c, coef)
        frm = score_density(rm, x, d, c, coef)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        ok = np.abs(delta) <= 15.0 * eps
        np.add.at(out, owner[ok], (left + right + delta / 15.0)[ok])
        if ok.all():
            break
        if depth >= max_depth:
            return out, FAIL_DEPTH
        nk = ~ok
        a, m, b = a[nk], m[nk], b[nk]
        fa, flm, fm, frm, fb = fa[nk], flm[nk], fm[nk], frm[nk], fb[nk]
        left, right, eps, owner = left[nk], right[nk], eps[nk], owner[nk]
        a, b = np.concatenate((a, m)), np.concatenate((m, b))
        fa, fb = np.concatenate((fa, fm)), np.concatenate((fm, fb))
        fm = np.concatenate((flm, frm))
        whole = np.concatenate((left, right))
        eps = np.concatenate((0.5 * eps, 0.5 * eps))
        owner = np.concatenate((owner, owner))
        depth += 1
    return out, 0


def modmatmul(A, B, p):
    """A @ B mod p for int64 matrices with entries in [0, p), p < 2**31.

    A is split into 16-bit halves so every partial dot product stays below
    2**63 for inner dimensions up to 2**15.
    """
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    inner = A.shape[1]
    out = np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
    for s in range(0, inner, 1 << 15):
        a = A[:, s:s + (1 << 15)]
        b = B[s:s + (1 << 15)]
        hi = (a >> 16) @ b % p
        lo = (a & 0xFFFF) @ b % p
        out = (out + (hi << 16) % p + lo) % p
    return out
