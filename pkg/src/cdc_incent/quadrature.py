"""Scalar adaptive Simpson quadrature and bracketed bisection."""
from __future__ import annotations

import math
from typing import Callable


class QuadratureError(ArithmeticError):
    """Adaptive refinement hit the depth limit before meeting the tolerance."""


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 40,
) -> float:
    """Integral of `f` over [a, b] to absolute tolerance `tol`.

    Uses the Richardson-corrected estimate, so polynomials up to degree five
    integrate exactly on every panel.
    """
    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    # explicit stack: (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
            continue
        if depth >= max_depth:
            raise QuadratureError(f"adaptive Simpson did not converge on [{a:.6g}, {b:.6g}] at depth {depth}")
        stack.append((m, b, fm, frm, fb, right, 0.5 * eps, depth + 1))
        stack.append((a, m, fa, flm, fm, left, 0.5 * eps, depth + 1))
    return total


def bisect(g: Callable[[float], float], lo: float, hi: float, rtol: float = 1e-10, max_iter: int = 200) -> float:
    """Root of a monotone `g` bracketed by [lo, hi]."""
    glo, ghi = g(lo), g(hi)
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    if (glo > 0) == (ghi > 0):
        raise ValueError(f"root is not bracketed by [{lo:.6g}, {hi:.6g}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
        if hi - lo <= rtol * max(abs(hi), abs(lo), math.ulp(1.0)):
            break
    return 0.5 * (lo + hi)
