"""Independent reference computations.

None of these touch the heat-kernel or parametrix code paths: the eta
oracle uses Hurwitz zeta continuation, the index oracles use per-mode
kernel analysis of first-order ODEs.
"""
from __future__ import annotations

from math import floor, pi

import mpmath
import numpy as np
from scipy.integrate import cumulative_simpson, trapezoid


def eta_zeta(a: float, L: float = 2 * pi, m: int = 1, g: int = 0, sign: int = 1) -> complex:
    """eta(0) of spectrum sign*(w n - a), n in Z, weighted by e^{-2 pi i n g / m}.

    eta(s) = sum sgn(lam) |lam|^{-s}; splitting n = m q + r turns each
    residue class into a pair of Hurwitz zeta functions evaluated at s = 0.
    """
    w = 2 * pi / L
    total = mpmath.mpc(0)
    for r in range(m):
        weight = mpmath.exp(-2j * mpmath.pi * r * g / m)
        b = mpmath.mpf(a) / w
        # modes n = m q + r: lam = w m (q - (b - r)/m)
        c = (b - r) / m
        f = c - mpmath.floor(c)
        if f == 0:
            part = mpmath.mpf(0)
        else:
            part = mpmath.zeta(0, 1 - f) - mpmath.zeta(0, f)
        total += weight * part
    return complex(sign * total)


def mode_index(lam_minus: float, lam_plus: float) -> int:
    """L2 index of -d/dx + Lambda(x) with Lambda -> lam_minus at -inf, lam_plus at +inf.

    Kernel exp(int Lambda) decays iff lam_minus > 0 > lam_plus; cokernel
    exp(-int Lambda) decays iff lam_minus < 0 < lam_plus.
    """
    return int(lam_minus > 0 > lam_plus) - int(lam_minus < 0 < lam_plus)


def mode_flow(a_minus: float, a_plus: float, L: float = 2 * pi, m: int = 1, g: int = 0,
              nmax: int = 200) -> complex:
    """Character-weighted count of per-mode indices for Lambda_n = w n - a(x)."""
    w = 2 * pi / L
    total = 0j
    for n in range(-nmax, nmax + 1):
        k = mode_index(w * n - a_minus, w * n - a_plus)
        if k:
            total += k * np.exp(-2j * pi * n * g / m)
    return total


def mode_kernel(profile, n: int, x, L: float = 2 * pi, sgn: int = 1):
    """exp(sgn * int_0^x Lambda_n) with Lambda_n = w n - profile, by cumulative Simpson.

    ``sgn = 1`` solves (-d/dx + Lambda) f = 0, ``sgn = -1`` the adjoint equation.
    """
    x = np.asarray(x, dtype=float)
    lam = (2 * pi / L) * n - profile(x)
    prim = cumulative_simpson(lam, x=x, initial=0.0)
    i0 = int(np.argmin(np.abs(x)))
    return np.exp(sgn * (prim - prim[i0]))


def kernel_projection_index(profile, a_minus: float, a_plus: float, L: float = 2 * pi, m: int = 1,
                            g: int = 0, span: float | None = None, nmax: int = 50) -> complex:
    """Tr_g(P_+) - Tr_g(P_-) from explicitly integrated mode kernels.

    For each mode the candidate kernel exp(+-int Lambda) is integrated on
    [-span, span]; it is an L2 element when almost all of its mass sits in
    the inner half-window.  The trace of the normalised rank-one projection
    is then the integral of its density, which is 1 up to quadrature error.
    The window defaults to a width over which the slowest end decays by e^{-40}.
    """
    w = 2 * pi / L
    if span is None:
        ends = np.abs(w * np.arange(-nmax, nmax + 1)[:, None] - np.array([a_minus, a_plus])).ravel()
        ends = ends[ends > 1e-12]
        span = max(40.0, 40.0 / ends.min())
    xs = np.linspace(-span, span, 2 * int(50 * span) + 1)
    inner = np.abs(xs) <= span / 2
    total = 0j
    for n in range(-nmax, nmax + 1):
        if min(abs(w * n - a_minus), abs(w * n - a_plus)) > 0 and (w * n - a_minus) * (w * n - a_plus) > 0:
            continue
        contrib = 0.0
        for sgn in (1, -1):
            lam = w * n - profile(xs)
            log_f = sgn * cumulative_simpson(lam, x=xs, initial=0.0)
            dens = np.exp(2 * (log_f - log_f.max()))
            n_all = trapezoid(dens, xs)
            n_in = trapezoid(dens[inner], xs[inner])
            if n_all > 0 and (n_all - n_in) / n_all < 1e-6:
                contrib += sgn * trapezoid(dens / n_all, xs)
        if contrib:
            total += contrib * np.exp(-2j * pi * n * g / m)
    return total


def theta_sum(a: float, t: float, L: float = 2 * pi, m: int = 1, g: int = 0, nmax: int = 400) -> complex:
    """sum_n e^{-2 pi i n g/m} e^{-t (w n - a)^2}."""
    w = 2 * pi / L
    n = np.arange(-nmax, nmax + 1)
    return complex(np.sum(np.exp(-2j * pi * n * g / m) * np.exp(-t * (w * n - a) ** 2)))


def eta_cover_closed(n: int, L: float = 1.0) -> complex:
    """Time integral of the Gaussian integrand on the cover: -i / (pi n L)."""
    return -1j / (pi * n * L)
