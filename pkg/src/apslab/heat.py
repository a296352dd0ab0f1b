"""Heat kernels, g-traces, the TR map and trace-property checks.

For compact groups the Haar measure is normalised to total mass one, so
chi = 1 is an admissible cutoff and the g-trace is the ordinary trace of
``g T``.  For Z acting on the line cover by translation through L the
cutoff is the smoothed fundamental-domain indicator from
:func:`apslab.geometry.cover_chi`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import pi, sqrt
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .errors import NonSummableClass, TruncationInsufficient, UnsupportedGeometry
from .geometry import GRID_PER_UNIT, BoundaryOperator, cover_chi, rotation_chi
from .groups import GroupFunction, integers, cyclic

KernelFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SmoothingKernel:
    """Scalar two-point kernel with a sup-norm truncation bound.

    ``space`` is ``circle`` (period L) or ``line``; ``op`` is the operator
    whose group action the kernel commutes with.
    """

    fn: KernelFn
    bound: float
    op: BoundaryOperator
    space: str
    t: float | None = None
    label: str = ""

    def __call__(self, x, y):
        return self.fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float))


@dataclass(frozen=True)
class TraceValue:
    value: complex
    err: float

    def __post_init__(self):
        if not self.err >= 0:
            raise ValueError("error estimate must be nonnegative")


@dataclass(frozen=True)
class Multiplier:
    """Multiplication operator by a smooth function (an invariant, non-smoothing factor)."""

    fn: Callable[[np.ndarray], np.ndarray]


# -- kernels --------------------------------------------------------------

def _circle_kernel(op: BoundaryOperator, coeff: Callable[[np.ndarray], np.ndarray]) -> KernelFn:
    vals, vecs, comps = op.eigendata()
    if op.rank != 1:
        raise UnsupportedGeometry("pointwise kernels are implemented for rank one")
    n = op.modes()
    c = coeff(vals)
    w = op.omega
    L = op.L

    def fn(x, y):
        ex = np.exp(1j * w * np.multiply.outer(x, n))  # (..., modes)
        ey = np.exp(1j * w * np.multiply.outer(y, n))
        fx = ex @ vecs  # eigenfunctions at x (..., eig)
        fy = ey @ vecs
        return np.sum(fx * c * fy.conj(), axis=-1) / L

    return fn


def heat_kernel(op: BoundaryOperator, t: float, *, derivative: bool = False, tol: float = 1e-12) -> SmoothingKernel:
    """Kernel of e^{-t D^2} (or D e^{-t D^2} with ``derivative=True``)."""
    if t <= 0:
        raise ValueError("t must be positive")
    if op.is_cover:
        if op.has_potential:
            raise UnsupportedGeometry("cover operator carries no potential")
        a = op.a

        def fn(x, y):
            d = x - y
            g = np.exp(-d**2 / (4 * t)) / np.sqrt(4 * pi * t) * np.exp(1j * a * d)
            if derivative:
                return (1j * d / (2 * t)) * g
            return g + 0j

        return SmoothingKernel(fn, 0.0, op, "line", t, "D e^{-tD^2}" if derivative else "e^{-tD^2}")
    bound = op.certify(t, tol, power=1 if derivative else 0) / op.L
    if derivative:
        coeff = lambda lam: lam * np.exp(-t * lam**2)
    else:
        coeff = lambda lam: np.exp(-t * lam**2)
    return SmoothingKernel(_circle_kernel(op, coeff), bound, op, "circle", t,
                           "D e^{-tD^2}" if derivative else "e^{-tD^2}")


def line_heat_kernel(s: float) -> Callable:
    """Kernel of e^{s d^2/du^2} on the line."""
    if s <= 0:
        raise ValueError("s must be positive")
    return lambda u, v: np.exp(-(np.asarray(u) - np.asarray(v)) ** 2 / (4 * s)) / sqrt(4 * pi * s)


def line_heat_derivative_kernel(s: float) -> Callable:
    """Kernel of e^{s d^2/du^2} d/du: -(u - u') / (2 s) times the heat kernel."""
    k = line_heat_kernel(s)
    return lambda u, v: -(np.asarray(u) - np.asarray(v)) / (2 * s) * k(u, v)


# -- quadrature helpers ---------------------------------------------------

def _periodic_nodes(L: float, per_unit: int = GRID_PER_UNIT) -> np.ndarray:
    n = max(int(round(L * per_unit)), 64)
    return np.arange(n) * (L / n)


def _chunked_diag(fn, x, shift, chunk=4096):
    out = np.empty(len(x), dtype=complex)
    for i in range(0, len(x), chunk):
        xi = x[i:i + chunk]
        out[i:i + chunk] = fn(xi - shift, xi)
    return out


def _group_shift(op: BoundaryOperator, g: int) -> float:
    if op.action.kind == "cover":
        return g * op.L
    m = op.action.order or 1
    return (g % m) * op.L / m


def _cover_window(op: BoundaryOperator, per_unit: int):
    lo, hi = -0.25 * op.L, 1.25 * op.L
    n = int(round((hi - lo) * per_unit))
    return np.linspace(lo, hi, n + 1)


def g_trace(k: SmoothingKernel, g: int = 0, cutoff: str = "one", *, per_unit: int = GRID_PER_UNIT) -> TraceValue:
    """int chi_g(m)^2 tr(g k(g^-1 m, m)) dm by quadrature.

    ``cutoff`` is ``one`` (compact groups, normalised Haar) or ``fundamental``
    (smoothed fundamental-domain chi).  For the cover the fundamental cutoff
    is always used.
    """
    op = k.op
    shift = _group_shift(op, g)
    if k.space == "line":
        x = _cover_window(op, per_unit)
        chi2 = cover_chi(x, op.L) ** 2
        f = chi2 * _chunked_diag(k.fn, x, shift)
        val = simpson(f, x=x)
        coarse = simpson(f[::2], x=x[::2])
        return TraceValue(complex(val), float(abs(val - coarse)))
    x = _periodic_nodes(op.L, per_unit)
    diag = _chunked_diag(k.fn, x, shift)
    if cutoff == "one":
        w = np.ones_like(x)
    elif cutoff == "fundamental":
        m = op.action.order or 1
        w = rotation_chi(x, op.L, m) ** 2 if m > 1 else np.ones_like(x)
    else:
        raise ValueError(f"unknown cutoff {cutoff!r}")
    h = op.L / len(x)
    val = h * np.sum(w * diag)
    coarse = 2 * h * np.sum((w * diag)[::2])
    err = abs(val - coarse) + k.bound * op.L
    return TraceValue(complex(val), float(err))


def spectral_trace(op: BoundaryOperator, f: Callable[[np.ndarray], np.ndarray], g: int = 0) -> complex:
    """Character-weighted spectral sum sum_j <phi_j, U_g phi_j> f(lambda_j)."""
    vals, vecs, _ = op.eigendata()
    w = op.group_weights(g, vecs if op.has_potential else None)
    return complex(np.sum(w * f(vals)))


# -- TR map ---------------------------------------------------------------

def TR_map(k: SmoothingKernel, r: int, cutoff: str = "fundamental", *, per_unit: int = GRID_PER_UNIT) -> GroupFunction:
    """x -> int chi(x m)^2 tr(x k(x^-1 m, m)) dm tabulated for |x| <= r."""
    op = k.op
    if op.action.kind == "cover":
        G = integers()
        x = _cover_window(op, per_unit)
        vals = {}
        for n in range(-r, r + 1):
            s = n * op.L
            # chi(m + nL)^2 against k(m - nL, m); integrate over the shifted window
            m = x - s
            f = cover_chi(m + s, op.L) ** 2 * k.fn(m - s, m)
            vals[n] = complex(simpson(f, x=m))
        return GroupFunction(G, vals)
    mord = op.action.order or 1
    G = cyclic(mord)
    x = _periodic_nodes(op.L, per_unit)
    h = op.L / len(x)
    vals = {}
    for j in range(mord):
        if min(j, mord - j) > r:
            continue
        s = j * op.L / mord
        if cutoff == "fundamental" and mord > 1:
            w = rotation_chi(x + s, op.L, mord) ** 2
        else:
            w = np.ones_like(x)
        vals[j] = complex(h * np.sum(w * _chunked_diag(k.fn, x, s)))
    return GroupFunction(G, vals)


# -- random equivariant kernels and the trace property ----------------------

@dataclass(frozen=True)
class FourierKernel:
    """Kernel sum_{j,k} C[j,k] e^{i w j x} e^{-i w k y} / L on a circle.

    Equivariance under Z_m requires C[j,k] = 0 unless j = k mod m.
    """

    op: BoundaryOperator
    C: np.ndarray
    modes: np.ndarray

    def __call__(self, x, y):
        w = self.op.omega
        ex = np.exp(1j * w * np.multiply.outer(np.asarray(x, float), self.modes))
        ey = np.exp(1j * w * np.multiply.outer(np.asarray(y, float), self.modes))
        return np.einsum("...j,jk,...k->...", ex, self.C, ey.conj()) / self.op.L


def random_equivariant_circle_kernel(op: BoundaryOperator, rng: np.random.Generator, nmax: int = 6,
                                     decay: float = 0.5) -> FourierKernel:
    m = op.action.order or 1
    n = np.arange(-nmax, nmax + 1)
    C = rng.normal(size=(len(n), len(n))) + 1j * rng.normal(size=(len(n), len(n)))
    C *= np.exp(-decay * (np.abs(n)[:, None] + np.abs(n)[None, :]))
    C[(n[:, None] - n[None, :]) % m != 0] = 0.0
    return FourierKernel(op, C, n)


@dataclass(frozen=True)
class CoverKernel:
    """Z-equivariant kernel on the line: G_s(x - y) p(x) q(y) with L-periodic p, q."""

    op: BoundaryOperator
    s: float
    p: np.ndarray
    q: np.ndarray

    def _per(self, c, x):
        w = self.op.omega
        k = np.arange(len(c)) - len(c) // 2
        return np.exp(1j * w * np.multiply.outer(x, k)) @ c

    def __call__(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        d = x - y
        return np.exp(-d**2 / (4 * self.s)) / np.sqrt(4 * pi * self.s) * self._per(self.p, x) * self._per(self.q, y)


def random_cover_kernel(op: BoundaryOperator, rng: np.random.Generator, kmax: int = 2) -> CoverKernel:
    size = 2 * kmax + 1
    p = (rng.normal(size=size) + 1j * rng.normal(size=size)) * 0.5 ** np.abs(np.arange(size) - kmax)
    q = (rng.normal(size=size) + 1j * rng.normal(size=size)) * 0.5 ** np.abs(np.arange(size) - kmax)
    s = float(rng.uniform(0.05, 0.2)) * op.L**2
    return CoverKernel(op, s, p, q)


def _compose_trace(op, S, T, g, per_unit_circle=64, per_unit_line=48, window=6.0):
    """Tr_g(S T) by quadrature of the composed kernel."""
    shift = _group_shift(op, g)
    if op.action.kind == "cover":
        L = op.L
        x = np.linspace(-0.25 * L, 1.25 * L, int(1.5 * L * per_unit_line) + 1)
        z = np.linspace(-window * L, (1 + window) * L, int((1 + 2 * window) * L * per_unit_line) + 1)
        hz = z[1] - z[0]
        chi2 = cover_chi(x, L) ** 2
        X, Z = np.meshgrid(x, z, indexing="ij")
        left = S(X - shift, Z) if not isinstance(S, Multiplier) else None
        right = T(Z, X) if not isinstance(T, Multiplier) else None
        if isinstance(S, Multiplier):
            comp = S.fn(x - shift) * T(x - shift, x)
        elif isinstance(T, Multiplier):
            comp = S(x - shift, x) * T.fn(x)
        else:
            comp = hz * np.sum(left * right, axis=1)
        return complex(simpson(chi2 * comp, x=x))
    x = _periodic_nodes(op.L, per_unit_circle)
    h = op.L / len(x)
    if isinstance(S, Multiplier):
        comp = S.fn(x - shift) * T(x - shift, x)
    elif isinstance(T, Multiplier):
        comp = S(x - shift, x) * T.fn(x)
    else:
        X, Z = np.meshgrid(x, x, indexing="ij")
        comp = h * np.sum(S(X - shift, Z) * T(Z, X), axis=1)
    return complex(h * np.sum(comp))


def trace_property_residual(S, T, g: int = 0, op: BoundaryOperator | None = None) -> float:
    """|Tr_g(S T) - Tr_g(T S)| with both compositions done by quadrature."""
    op = op or getattr(S, "op", None) or getattr(T, "op", None)
    if op is None:
        raise ValueError("need the operator fixing the group action")
    return abs(_compose_trace(op, S, T, g) - _compose_trace(op, T, S, g))


def kernel_sup_weighted(op: BoundaryOperator, t: float, p: int, nmax: int = 40) -> float:
    """sup_n |k_t(m - n L, m)| (1 + |n|)^p on the cover: decay surrogate for the A-norm."""
    k = heat_kernel(op, t)
    vals = [abs(k(np.array([-n * op.L]), np.array([0.0]))[0]) * (1 + abs(n)) ** p for n in range(-nmax, nmax + 1)]
    return float(max(vals))


def conjugation_check(k: SmoothingKernel, g: int) -> float:
    """|Tr_{g^-1}(k) - conj(Tr_g(k))|."""
    inv = -g if k.op.action.kind == "cover" else (-g) % (k.op.action.order or 1)
    return abs(g_trace(k, inv).value - np.conj(g_trace(k, g).value))


def check_summable(partials: list[complex], tol: float) -> complex:
    """Accept a radius-ordered partial-sum sequence once two consecutive increments are below tol."""
    quiet = 0
    for a, b in zip(partials, partials[1:]):
        quiet = quiet + 1 if abs(b - a) < tol else 0
        if quiet >= 2:
            return partials[-1]
    raise NonSummableClass("partial sums over the class did not settle")
