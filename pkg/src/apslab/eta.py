"""Eta invariants from the heat integrand, kernel projections and spectral shifts.

    eta_g(D) = (2/sqrt(pi)) int_0^inf Tr_g(D e^{-t^2 D^2}) dt

split into a small-t part (Richardson extrapolation in the lower limit),
a quadrature part on [eps_t, T] and an analytic large-t part.  Zero modes
are removed before integrating; their contribution is reported separately
through :func:`projection_trace`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import pi, sqrt

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc

from .errors import EpsilonTooLarge, ExtrapolationUnstable, TailUnbounded
from .geometry import BoundaryOperator, spectral_gap
from .heat import SmoothingKernel, g_trace, heat_kernel

ZERO_TOL = 1e-12
NORM = 2 / sqrt(pi)


@dataclass(frozen=True)
class EtaConfig:
    eps_t: float = 0.05
    T_max: float | None = None
    quad_tol: float = 1e-13
    orders: tuple[int, ...] = (1, 2)
    extrap_tol: float = 1e-6
    tail_tol: float = 1e-12

    def __post_init__(self):
        if self.eps_t <= 0:
            raise ValueError("eps_t must be positive")


@dataclass(frozen=True)
class EtaResult:
    value: complex
    err: float
    parts: dict
    samples: tuple = ()


@dataclass(frozen=True)
class ProjectionData:
    eigvals: np.ndarray
    eigvecs: np.ndarray
    trP: complex
    idempotency_residual: float
    annihilation_residual: float


def _compressed(op: BoundaryOperator, g: int):
    vals, vecs, _ = op.eigendata()
    w = op.group_weights(g, vecs if op.has_potential else None)
    keep = np.abs(vals) > ZERO_TOL
    return vals[keep], w[keep]


def eta_integrand(op: BoundaryOperator, g: int, t: float) -> complex:
    """Tr_g(D e^{-t^2 D^2}) with zero modes removed."""
    if t <= 0:
        raise ValueError("t must be positive")
    if op.is_cover:
        return g_trace(heat_kernel(op, t * t, derivative=True), g).value
    lam, w = _compressed(op, g)
    return complex(np.sum(w * lam * np.exp(-(t * lam) ** 2)))


def _integrand_vec(op: BoundaryOperator, g: int):
    if op.is_cover:
        if op.a != 0:
            return lambda t: eta_integrand(op, g, t)
        # closed-form diagonal of the derivative kernel times int chi^2 = 1
        s = g * op.L
        return lambda t: (-1j * s / (4 * sqrt(pi) * t**3)) * np.exp(-(s**2) / (4 * t * t))
    lam, w = _compressed(op, g)
    return lambda t: complex(np.sum(w * lam * np.exp(-(t * lam) ** 2)))


def _cquad(f, a, b, tol):
    re, e1 = quad(lambda t: f(t).real, a, b, epsabs=tol, epsrel=tol, limit=400)
    im, e2 = quad(lambda t: f(t).imag, a, b, epsabs=tol, epsrel=tol, limit=400)
    return complex(re, im), abs(e1) + abs(e2)


def _tail_time(lam0: float, total_weight: float, tol: float) -> float:
    # (2/sqrt pi) sum |lam| e^{-T^2 lam^2} <= tol, majorised through the gap
    T = 1.0
    while NORM * total_weight * np.exp(-(T * lam0) ** 2) * max(1.0, 1 / lam0) > tol:
        T *= 1.25
    return T


def eta_invariant(op: BoundaryOperator, g: int = 0, cfg: EtaConfig | None = None) -> EtaResult:
    cfg = cfg or EtaConfig()
    f = _integrand_vec(op, g)
    eps = cfg.eps_t
    if op.is_cover:
        T = cfg.T_max or max(20.0, 4 * abs(g) * op.L)
        tail, tail_err = _cquad(f, T, np.inf, cfg.quad_tol)
        # |integrand| <= |s| / (4 sqrt(pi) t^3) beyond T
        tail_err += 0.0
    else:
        op.certify((eps / 4) ** 2, cfg.tail_tol, power=1)
        lam, w = _compressed(op, g)
        if lam.size == 0:
            raise TailUnbounded("no nonzero spectrum in the truncation")
        lam0 = float(np.abs(lam).min())
        if lam0 <= 0:
            raise TailUnbounded("no positive spectral gap")
        T = cfg.T_max or _tail_time(lam0, float(np.sum(np.abs(w * lam))) / lam0, cfg.tail_tol)
        # exact large-t part: int_T^inf lam e^{-t^2 lam^2} dt = (sqrt pi / 2) sgn(lam) erfc(|lam| T)
        tail = complex(np.sum(w * np.sign(lam) * erfc(np.abs(lam) * T))) * (sqrt(pi) / 2)
        tail_err = cfg.tail_tol
    F = {}
    errs = 0.0
    for j in range(3):
        e = eps / 2**j
        v, er = _cquad(f, e, T, cfg.quad_tol)
        F[j] = v
        errs += er
    # Richardson in the lower limit, F(e) = F0 + c1 e + c2 e^2 + ...
    r1 = [2 * F[1] - F[0], 2 * F[2] - F[1]]
    r2 = (4 * r1[1] - r1[0]) / 3
    estimates = {1: r1[1], 2: r2}
    best = estimates[max(cfg.orders)]
    spread = abs(estimates[max(cfg.orders)] - estimates[min(cfg.orders)])
    if spread > cfg.extrap_tol:
        raise ExtrapolationUnstable(f"extrapolated small-t estimates differ by {spread:.3e}")
    small = best - F[0]
    mid = F[0]
    parts = {
        "small": NORM * small,
        "mid": NORM * mid,
        "tail": NORM * tail,
    }
    value = parts["small"] + parts["mid"] + parts["tail"]
    err = NORM * (spread + errs + abs(tail_err))
    ts = np.linspace(eps, T, 9)
    samples = tuple((float(t), complex(f(t))) for t in ts)
    return EtaResult(complex(value), float(err), parts, samples)


def eta_direct(op: BoundaryOperator, g: int = 0, eps_t: float = 1e-3, T: float = 60.0, tol: float = 1e-13) -> complex:
    """Plain quadrature from a fixed small lower limit, without extrapolation."""
    f = _integrand_vec(op, g)
    v, _ = _cquad(f, eps_t, T, tol)
    if not op.is_cover:
        lam, w = _compressed(op, g)
        v += complex(np.sum(w * np.sign(lam) * erfc(np.abs(lam) * T))) * (sqrt(pi) / 2)
    return NORM * v


def projection_trace(op: BoundaryOperator, g: int = 0, cutoff: str = "one") -> ProjectionData:
    """Kernel projection P of D_N and Tr_g(P) from the integral of its kernel."""
    if op.is_cover:
        # -i d/dx - a on the line has no L^2 kernel
        return ProjectionData(np.zeros(0), np.zeros((0, 0)), 0j, 0.0, 0.0)
    vals, vecs, _ = op.eigendata()
    keep = np.abs(vals) <= ZERO_TOL
    kv = vecs[:, keep]
    P = kv @ kv.conj().T
    H = op.fourier_matrix() if op.rank == 1 else None
    idem = float(np.abs(P @ P - P).max()) if P.size else 0.0
    ann = float(np.abs(H @ P).max()) if (P.size and H is not None) else 0.0
    if op.rank == 1 and kv.shape[1]:
        n = op.modes()
        w_ = op.omega
        L = op.L

        def fn(x, y):
            ex = np.exp(1j * w_ * np.multiply.outer(x, n)) @ kv
            ey = np.exp(1j * w_ * np.multiply.outer(y, n)) @ kv
            return np.sum(ex * ey.conj(), axis=-1) / L

        trP = g_trace(SmoothingKernel(fn, 0.0, op, "circle", None, "P"), g, cutoff).value
    else:
        w = op.group_weights(g, vecs if op.has_potential else None)[keep]
        trP = complex(np.sum(w))
    return ProjectionData(vals[keep], kv, complex(trP), idem, ann)


def perturb(op: BoundaryOperator, eps: float) -> BoundaryOperator:
    """D_N + eps, for 0 < eps below the spectral bracket."""
    if eps <= 0:
        raise EpsilonTooLarge("eps must be positive")
    bracket = spectral_gap(op).eps_max
    if eps >= bracket:
        raise EpsilonTooLarge(f"eps = {eps} not below the bracket {bracket}")
    return op.shifted(eps)


@dataclass(frozen=True)
class DecayReport:
    regime: str
    gap: float
    C: float
    slope: float
    holds: bool
    samples: tuple = field(default_factory=tuple)


def decay_diagnostic(op: BoundaryOperator, g: int, t_grid) -> DecayReport:
    """Fit the large-t decay of |Tr_g(D e^{-t^2 D^2})| along ``t_grid``."""
    t = np.asarray(sorted(t_grid), dtype=float)
    f = _integrand_vec(op, g)
    vals = np.array([abs(f(x)) for x in t])
    samples = tuple(zip(t.tolist(), vals.tolist()))
    if np.all(vals == 0):
        return DecayReport("trivial", 0.0, 0.0, 0.0, True, samples)
    if op.is_cover:
        m = (vals > 0) & (t >= 2)
        slope = float(np.polyfit(np.log(t[m]), np.log(vals[m]), 1)[0])
        C = float(np.max(vals[m] * t[m] ** 3))
        holds = bool(np.all(vals[m] <= C * t[m] ** -3 * (1 + 1e-12)))
        return DecayReport("polynomial", 0.0, C, slope, holds, samples)
    lam, _ = _compressed(op, g)
    gap = float(np.abs(lam).min())
    m = (t >= 2) & (vals > 1e-300)
    env = np.exp(-(t[m] * gap) ** 2 / 2)
    C = float(np.max(vals[m] / env)) if m.any() else 0.0
    slope = float(np.polyfit(t[m] ** 2, np.log(vals[m]), 1)[0]) if m.sum() >= 2 else float("nan")
    holds = bool(slope <= -(gap**2) / 2)
    return DecayReport("exponential", gap, C, slope, holds, samples)
