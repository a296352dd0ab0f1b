"""Model geometries: circle boundary operators, two-ended cylinders, doubles, cutoffs.

Coordinates.  The boundary circle has circumference ``L`` and angular
frequency ``w = 2 pi / L``; Fourier mode ``n`` of the pure operator
``-i d/dtheta - a`` has eigenvalue ``w n - a``.

The two-ended scenario lives on the line ``x``.  The profile ``a(x)`` is
constant outside ``[-1, 0]``; the compact piece is ``M = [x_left, x_right]``
with a unit collar at each end, separated from the profile region by a
buffer.  Per Fourier mode the positive-chirality operator is
``-d/dx + Lambda_n(x)`` with ``Lambda_n = w n - a(x)`` (plus the
perturbation ramp when ``eps > 0``).  The boundary operator of the right
end is ``A_+``; the left end is oriented outward, so its boundary operator
is ``-A_-``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import floor, gcd, isclose, pi

import numpy as np

from .errors import InvalidEpsilon, TruncationInsufficient, UnsupportedGeometry

GRID_PER_UNIT = 2048


# -- smooth building blocks -----------------------------------------------

def _h(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    m = y > 0
    out[m] = np.exp(-1.0 / y[m])
    return out


def smooth_step(y):
    """C-infinity step: 0 for y <= 0, 1 for y >= 1, from the e^{-1/x} bump ratio."""
    a = _h(y)
    b = _h(1.0 - np.asarray(y, dtype=float))
    return a / (a + b)


def smooth_step_deriv(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    m = (y > 0) & (y < 1)
    ym = y[m]
    a = np.exp(-1.0 / ym)
    b = np.exp(-1.0 / (1.0 - ym))
    da = a / ym**2
    db = -b / (1.0 - ym) ** 2
    out[m] = (da * b - a * db) / (a + b) ** 2
    return out


def ramp(x, lo, hi):
    """Smooth step from 0 at ``lo`` to 1 at ``hi``."""
    return smooth_step((np.asarray(x, dtype=float) - lo) / (hi - lo))


def ramp_deriv(x, lo, hi):
    return smooth_step_deriv((np.asarray(x, dtype=float) - lo) / (hi - lo)) / (hi - lo)


# -- boundary operator ----------------------------------------------------

@dataclass(frozen=True)
class ActionSpec:
    """Group acting on the boundary: trivial, rotation by L/n, or Z on the line cover."""

    kind: str = "trivial"
    n: int = 1

    def __post_init__(self):
        if self.kind not in ("trivial", "rotation", "cover"):
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.kind == "rotation" and self.n < 1:
            raise ValueError("rotation order must be >= 1")

    @property
    def order(self) -> int | None:
        if self.kind == "trivial":
            return 1
        if self.kind == "rotation":
            return self.n
        return None

    def elements(self) -> list[int]:
        if self.kind == "cover":
            raise ValueError("the Z action has infinitely many elements")
        return list(range(self.order))


@dataclass(frozen=True)
class BoundaryOperator:
    """Self-adjoint ``-i d/dtheta - a (+ holonomy) + v(theta)`` on a circle of circumference L.

    ``potential`` holds cosine coefficients ``c_k`` with
    ``v(theta) = sum_k c_k cos(k w theta)`` (``c_0`` a constant shift);
    ``potential_sin`` holds sine coefficients starting at ``k = 1``.
    With ``action.kind == "cover"`` the operator is ``-i d/dx - a`` on the
    line, with Z acting by translation through L.
    """

    L: float = 2 * pi
    a: float = 0.0
    rank: int = 1
    holonomy: tuple[float, ...] = ()
    potential: tuple[float, ...] = ()
    potential_sin: tuple[float, ...] = ()
    Ncut: int = 64
    action: ActionSpec = field(default_factory=ActionSpec)
    orientation: int = 1

    @property
    def omega(self) -> float:
        return 2 * pi / self.L

    @property
    def is_cover(self) -> bool:
        return self.action.kind == "cover"

    @property
    def has_potential(self) -> bool:
        return any(c != 0 for c in self.potential[1:]) or any(c != 0 for c in self.potential_sin)

    @property
    def constant_shift(self) -> float:
        return self.potential[0] if self.potential else 0.0

    def holonomy_shifts(self) -> np.ndarray:
        h = np.zeros(self.rank)
        for j, alpha in enumerate(self.holonomy[: self.rank]):
            h[j] = alpha
        return h

    def potential_sup(self) -> float:
        return float(sum(abs(c) for c in self.potential[1:]) + sum(abs(c) for c in self.potential_sin))

    def modes(self, nmax: int | None = None) -> np.ndarray:
        nmax = self.Ncut if nmax is None else nmax
        return np.arange(-nmax, nmax + 1)

    def pure_eigenvalues(self, n) -> np.ndarray:
        """Eigenvalues of the potential-free part for modes ``n``; shape (len(n), rank)."""
        n = np.asarray(n, dtype=float)
        hol = self.holonomy_shifts()
        lam = self.omega * (n[:, None] - hol[None, :] / (2 * pi)) - self.a + self.constant_shift
        return self.orientation * lam

    def fourier_matrix(self, component: int = 0) -> np.ndarray:
        """Hermitian matrix of the operator on modes ``|n| <= Ncut`` for one rank component."""
        n = self.modes()
        lam = self.pure_eigenvalues(n)[:, component]
        H = np.diag(lam).astype(complex)
        size = len(n)
        sgn = self.orientation
        for k, c in enumerate(self.potential[1:], start=1):
            c = sgn * c
            if c and k < size:
                idx = np.arange(size - k)
                H[idx + k, idx] += c / 2
                H[idx, idx + k] += c / 2
        for k, c in enumerate(self.potential_sin, start=1):
            c = sgn * c
            if c and k < size:
                idx = np.arange(size - k)
                # sin = (e^{ik} - e^{-ik}) / 2i
                H[idx + k, idx] += c / 2j
                H[idx, idx + k] += -c / 2j
        return H

    def eigendata(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Truncated eigenvalues, eigenvectors (Fourier coefficients) and component labels."""
        vals, vecs, comps = [], [], []
        size = 2 * self.Ncut + 1
        for j in range(self.rank):
            H = self.fourier_matrix(j)
            if self.has_potential:
                w, v = np.linalg.eigh(H)
            else:
                w = np.real(np.diag(H))
                v = np.eye(size, dtype=complex)
            vals.append(w)
            vecs.append(v)
            comps.append(np.full(size, j))
        return np.concatenate(vals), np.hstack(vecs) if self.rank == 1 else _block(vecs), np.concatenate(comps)

    def rotation_matrix(self, j: int) -> np.ndarray:
        """Action of the rotation ``theta -> theta + j L/m`` on the Fourier coefficients."""
        m = self.action.order or 1
        n = self.modes()
        return np.diag(np.exp(-2j * pi * n * j / m))

    def group_weights(self, g: int, vecs: np.ndarray | None = None) -> np.ndarray:
        """Diagonal matrix elements <phi_j, U_g phi_j> of the eigenbasis."""
        if self.action.kind == "cover":
            raise UnsupportedGeometry("group weights are defined for compact actions only")
        m = self.action.order or 1
        n = np.tile(self.modes(), self.rank)
        phase = np.exp(-2j * pi * n * (g % m) / m)
        if vecs is None:
            return phase
        return np.einsum("ij,i,ij->j", vecs.conj(), phase, vecs)

    def spectrum(self, nmax: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(eigenvalues, mode labels) for the pure model with modes ``|n| <= nmax``."""
        if self.has_potential:
            raise UnsupportedGeometry("closed-form spectrum needs a potential-free operator")
        n = self.modes(nmax)
        lam = self.pure_eigenvalues(n)
        return lam.T.reshape(-1), np.tile(n, self.rank)

    def heat_tail_bound(self, t: float, power: int = 0) -> float:
        """Majorant of sum_{|n|>Ncut} |lam|^power e^{-t lam^2} over the discarded modes."""
        if self.is_cover:
            return 0.0
        shift = abs(self.a) + abs(self.constant_shift) + self.potential_sup() + self.omega * max(
            (abs(h) / (2 * pi) for h in self.holonomy[: self.rank]), default=0.0
        )
        total = 0.0
        n = self.Ncut + 1
        while True:
            mu = max(self.omega * n - shift, 0.0)
            term = 2 * self.rank * (mu + 2 * shift + self.omega) ** power * np.exp(-t * mu**2)
            total += term
            if mu > 0 and term < 1e-18 * max(total, 1e-300) or term == 0.0:
                break
            n += 1
            if n > self.Ncut + 10**7:
                break
        return float(total)

    def certify(self, t_min: float, tol: float = 1e-12, power: int = 0) -> float:
        bound = self.heat_tail_bound(t_min, power)
        if bound > tol:
            raise TruncationInsufficient(
                f"Fourier tail {bound:.3e} exceeds {tol:.1e} at t = {t_min}; raise Ncut above {self.Ncut}"
            )
        return bound

    def equivariance_residual(self) -> float:
        if self.action.kind != "rotation":
            return 0.0
        worst = 0.0
        for j in range(self.rank):
            H = self.fourier_matrix(j)
            for g in range(self.action.n):
                U = self.rotation_matrix(g)
                worst = max(worst, float(np.abs(U @ H - H @ U).max()))
        return worst

    def shifted(self, eps: float) -> "BoundaryOperator":
        """D + eps."""
        return replace(self, a=self.a - self.orientation * eps)

    def negated(self) -> "BoundaryOperator":
        """The operator -D with the same eigenfunctions (orientation reversal)."""
        return replace(self, orientation=-self.orientation)


def _block(mats):
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n), dtype=complex)
    i = 0
    for m in mats:
        k = m.shape[0]
        out[i:i + k, i:i + k] = m
        i += k
    return out


def build_boundary_operator(spec: dict | BoundaryOperator, *, t_min: float | None = None,
                            tol: float = 1e-12) -> BoundaryOperator:
    """Validate a boundary operator spec and certify its Fourier truncation at ``t_min``."""
    op = spec if isinstance(spec, BoundaryOperator) else BoundaryOperator(**spec)
    if op.Ncut < 8:
        raise ValueError("Ncut must be at least 8")
    if op.rank < 1:
        raise ValueError("rank must be positive")
    if t_min is not None:
        op.certify(t_min, tol)
    return op


@dataclass(frozen=True)
class GapReport:
    lambda0: float
    zero_in_spectrum: bool
    kernel_dim: int
    gap_nonzero: float
    eps_max: float


def spectral_gap(op: BoundaryOperator, zero_tol: float = 1e-12) -> GapReport:
    """Smallest |eigenvalue|, zero-mode flag, and the largest eps with
    ([-2 eps, 2 eps] cap spec) minus {0} empty."""
    vals = op.eigendata()[0] if op.has_potential else op.spectrum()[0]
    absv = np.abs(vals)
    zero = absv <= zero_tol
    nonzero = absv[~zero]
    gap = float(nonzero.min())
    return GapReport(
        lambda0=float(absv.min()),
        zero_in_spectrum=bool(zero.any()),
        kernel_dim=int(zero.sum()),
        gap_nonzero=gap,
        eps_max=gap / 2,
    )


# -- two-ended scenario ---------------------------------------------------

PROFILE_LO, PROFILE_HI = -1.0, 0.0
# the eps weight turns on over this width just outside the profile region
RAMP_WIDTH = 0.3


@dataclass(frozen=True)
class ScenarioSpec:
    """Two-ended cylinder with profile a(x) from ``a_minus`` to ``a_plus`` across [-1, 0].

    ``kind`` is ``two_ended``, ``hat`` (constant profile, both ends equal)
    or ``double`` (only the doubled closed model is used).  ``buffer``
    separates the profile region from each collar; ``eps`` is the
    perturbation parameter of the conjugated operator, whose ramp lives in
    the buffers.
    """

    kind: str = "two_ended"
    a_minus: float = 0.5
    a_plus: float = -0.5
    L: float = 2 * pi
    action: ActionSpec = field(default_factory=ActionSpec)
    buffer: float = 1.0
    collar: float = 1.0
    eps_collar: float = 0.1
    eps: float = 0.0
    Ncut: int = 1024

    def __post_init__(self):
        if self.kind not in ("two_ended", "hat", "double"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.kind == "hat" and self.a_minus != self.a_plus:
            raise ValueError("hat scenario has a constant profile")
        if self.collar != 1.0:
            raise UnsupportedGeometry("collar length is fixed to 1")
        if self.buffer < RAMP_WIDTH + 0.2:
            raise ValueError(f"buffer must be at least {RAMP_WIDTH + 0.2}")
        if self.action.kind == "cover":
            raise UnsupportedGeometry("index scenarios use compact boundary actions")

    @property
    def omega(self) -> float:
        return 2 * pi / self.L

    @property
    def x_right(self) -> float:
        return PROFILE_HI + self.buffer + self.collar

    @property
    def x_left(self) -> float:
        return PROFILE_LO - self.buffer - self.collar

    @property
    def collar_right(self) -> tuple[float, float]:
        return (self.x_right - self.collar, self.x_right)

    @property
    def collar_left(self) -> tuple[float, float]:
        return (self.x_left, self.x_left + self.collar)

    @property
    def length(self) -> float:
        return self.x_right - self.x_left

    def boundary_right(self) -> BoundaryOperator:
        return BoundaryOperator(L=self.L, a=self.a_plus, Ncut=self.Ncut, action=self.action)

    def boundary_left_inward(self) -> BoundaryOperator:
        """A_- as seen from the interior (profile value at the left end)."""
        return BoundaryOperator(L=self.L, a=self.a_minus, Ncut=self.Ncut, action=self.action)

    def boundary_left(self) -> BoundaryOperator:
        """Outward-oriented boundary operator -A_- of the left end."""
        return self.boundary_left_inward().negated()

    def profile(self, x):
        return self.a_minus + (self.a_plus - self.a_minus) * ramp(x, PROFILE_LO, PROFILE_HI)

    def perturbation_slope(self, x):
        """psi'(x) for the weight psi (= outward collar coordinate on the cylinders)."""
        x = np.asarray(x, dtype=float)
        right = ramp(x, PROFILE_HI, PROFILE_HI + RAMP_WIDTH)
        left = ramp(-x, -PROFILE_LO, -PROFILE_LO + RAMP_WIDTH)
        return right - left

    def effective_profile(self, x):
        """a(x) - eps psi'(x): the mode potential is w n - effective_profile."""
        return self.profile(x) - self.eps * self.perturbation_slope(x)

    def end_values(self) -> tuple[float, float]:
        """(lambda shift at -inf, at +inf) of the effective profile: a_- + eps, a_+ - eps."""
        return (self.a_minus + self.eps, self.a_plus - self.eps)

    def mode_potential(self, n, x):
        return self.omega * n - self.effective_profile(x)

    def variation_span(self) -> tuple[float, float]:
        """Interval outside which the effective profile is constant."""
        pad = RAMP_WIDTH if self.eps else 0.0
        return (PROFILE_LO - pad, PROFILE_HI + pad)

    def with_eps(self, eps: float) -> "ScenarioSpec":
        return replace(self, eps=eps)


def perturbed_scenario(spec: ScenarioSpec, eps: float) -> ScenarioSpec:
    """Scenario of the conjugated operator e^{eps psi} D e^{-eps psi}."""
    from .errors import EpsilonTooLarge

    if eps <= 0:
        raise EpsilonTooLarge("eps must be positive")
    for op in (spec.boundary_right(), spec.boundary_left()):
        if eps >= spectral_gap(op).eps_max:
            raise EpsilonTooLarge(f"eps = {eps} outside the spectral bracket of an end operator")
    return spec.with_eps(eps)


# -- double ---------------------------------------------------------------

@dataclass(frozen=True)
class DoubleModel:
    """Closed double of M realised as a quasi-periodic chain along x.

    Copy 1 is M itself; copy 2 is the mirror of M about ``x_right`` carrying
    the profile ``2 a_+ - a(R x)`` (plus a compensating bump when eps > 0).
    One lap has length ``P = 2 |M|``; across a lap the profile rises by
    ``shift`` so that the Fourier label moves by ``k = shift / w``.  When
    k = 0 every mode is a circle of circumference P; otherwise modes are
    strung into |k| chains, each an operator on the whole line.
    """

    scenario: ScenarioSpec
    k: int
    P: float

    @property
    def x0(self) -> float:
        return self.scenario.x_left

    def lap_profile(self, y):
        """Profile on one lap, y in [x0, x0 + P)."""
        s = self.scenario
        y = np.asarray(y, dtype=float)
        xr = s.x_right
        copy1 = y <= xr
        mirror = 2 * xr - y
        a_end = s.a_plus - s.eps
        second = 2 * a_end - s.effective_profile(mirror)
        if s.eps:
            # bump over the mirrored profile region restoring the unperturbed lap increment
            lo = 2 * xr - PROFILE_HI
            second = second + 4 * s.eps * ramp(y, lo, lo + 1.0)
        return np.where(copy1, s.effective_profile(np.where(copy1, y, xr)), second)

    def profile(self, x):
        x = np.asarray(x, dtype=float)
        j = np.floor((x - self.x0) / self.P)
        y = x - j * self.P
        return self.lap_profile(y) + j * self.k * self.scenario.omega

    def mode_potential(self, n, x):
        return self.scenario.omega * n - self.profile(x)

    def lap_partition(self, x, width: float = 2.0):
        """Smooth weight whose translates by multiples of P sum to 1."""
        x = np.asarray(x, dtype=float)
        lo = self.x0 - width / 2
        return ramp(x, lo, lo + width) - ramp(x, lo + self.P, lo + self.P + width)

    def curvature_degree(self, pts_per_unit: int = GRID_PER_UNIT) -> float:
        """Degree of the twisting line bundle, (1/w) times the integral of a' over one lap."""
        y = np.linspace(self.x0, self.x0 + self.P, int(self.P * pts_per_unit) + 1)
        prof = self.lap_profile(y[:-1])
        end = self.profile(np.array([self.x0 + self.P]))[0]
        total = (end - prof[0])
        return float(total / self.scenario.omega)


def build_double(spec: ScenarioSpec) -> DoubleModel:
    s = spec
    # the eps ramps are compensated inside copy 2, so the lap increment is unperturbed
    shift = 2 * (s.a_plus - s.a_minus)
    kf = shift / s.omega
    k = int(round(kf))
    if not isclose(kf, k, abs_tol=1e-9):
        raise UnsupportedGeometry(
            f"profile jump {shift} is not a multiple of the mode spacing; the twisted double needs an integer twist"
        )
    m = s.action.order or 1
    if m > 1 and k % m:
        raise UnsupportedGeometry(f"twist {k} not divisible by the rotation order {m}")
    return DoubleModel(scenario=s, k=k, P=2 * s.length)


# -- cutoffs --------------------------------------------------------------

@dataclass(frozen=True)
class CutoffFunction:
    """A sampled smooth profile with its support-relation certificate."""

    name: str
    grid: np.ndarray
    values: np.ndarray
    certificate: dict


@dataclass(frozen=True)
class Cutoffs:
    """Collar cutoffs of the parametrix construction for a two-ended scenario."""

    scenario: ScenarioSpec
    eps: float

    def _u(self, x):
        s = self.scenario
        x = np.asarray(x, dtype=float)
        return x - s.collar_right[0], s.collar_left[1] - x

    def _psi1_u(self, u):
        e = self.eps
        return 1.0 - smooth_step((u - e) / (1 - 2 * e))

    def _psi1_u_d(self, u):
        e = self.eps
        return -smooth_step_deriv((u - e) / (1 - 2 * e)) / (1 - 2 * e)

    def _phi1_u(self, u):
        e = self.eps
        return 1.0 - smooth_step((u - (1 - e / 2)) / (e / 2))

    def _phi1_u_d(self, u):
        e = self.eps
        return -smooth_step_deriv((u - (1 - e / 2)) / (e / 2)) / (e / 2)

    def _phi2_u(self, u):
        e = self.eps
        return smooth_step((u - e / 4) / (e / 4))

    def _phi2_u_d(self, u):
        e = self.eps
        return smooth_step_deriv((u - e / 4) / (e / 4)) / (e / 4)

    def psi1(self, x):
        ur, ul = self._u(x)
        return self._psi1_u(ur) * self._psi1_u(ul)

    def psi1_d(self, x):
        ur, ul = self._u(x)
        return self._psi1_u_d(ur) * self._psi1_u(ul) - self._psi1_u(ur) * self._psi1_u_d(ul)

    def psi1_d_right(self, x):
        ur, ul = self._u(x)
        return np.where(ur > 0, self._psi1_u_d(ur), 0.0) * self._psi1_u(ul)

    def psi1_d_left(self, x):
        ur, ul = self._u(x)
        return -self._psi1_u(ur) * np.where(ul > 0, self._psi1_u_d(ul), 0.0)

    def psi2(self, x):
        return 1.0 - self.psi1(x)

    def psi2_right(self, x):
        ur, _ = self._u(x)
        return 1.0 - self._psi1_u(ur)

    def psi2_left(self, x):
        _, ul = self._u(x)
        return 1.0 - self._psi1_u(ul)

    def phi1(self, x):
        ur, ul = self._u(x)
        return self._phi1_u(ur) * self._phi1_u(ul)

    def phi1_d(self, x):
        ur, ul = self._u(x)
        return self._phi1_u_d(ur) * self._phi1_u(ul) - self._phi1_u(ur) * self._phi1_u_d(ul)

    def phi2_right(self, x):
        ur, _ = self._u(x)
        return self._phi2_u(ur)

    def phi2_left(self, x):
        _, ul = self._u(x)
        return self._phi2_u(ul)

    def phi2(self, x):
        return self.phi2_right(x) + self.phi2_left(x)

    def phi2_d(self, x):
        ur, ul = self._u(x)
        return self._phi2_u_d(ur) - self._phi2_u_d(ul)

    # collar-coordinate profiles for the cylinder line factor
    def collar_profiles(self, u):
        return {
            "phi2": self._phi2_u(u),
            "psi2": 1.0 - self._psi1_u(u),
            "psi2_d": -self._psi1_u_d(u),
        }

    def sampled(self, name: str) -> CutoffFunction:
        s = self.scenario
        lo, hi = s.x_left - 1.0, s.x_right + 1.0
        grid = np.linspace(lo, hi, int((hi - lo) * GRID_PER_UNIT) + 1)
        vals = getattr(self, name)(grid)
        return CutoffFunction(name, grid, vals, support_certificate(self, grid))


def support_certificate(c: Cutoffs, grid) -> dict:
    """Max residuals of the support relations on ``grid`` (all exactly 0 by construction)."""
    x = np.asarray(grid, dtype=float)
    ur, ul = c._u(x)
    inner = (ur <= 1) & (ul <= 1)
    return {
        "phi1_psi1": float(np.abs(c.phi1(x) * c.psi1(x) - c.psi1(x)).max()),
        "phi2_psi2": float(np.abs(c.phi2(x) * c.psi2(x) - c.psi2(x)).max()),
        "phi1d_psi1": float(np.abs(c.phi1_d(x) * c.psi1(x)).max()),
        "phi2d_psi2": float(np.abs(c.phi2_d(x) * c.psi2(x)).max()),
        "psi_sum": float(np.abs((c.psi1(x) + c.psi2(x) - 1.0)[inner]).max()),
    }


def build_cutoffs(spec: ScenarioSpec, eps_collar: float | None = None) -> Cutoffs:
    eps = spec.eps_collar if eps_collar is None else eps_collar
    if not (0.0 < eps < 0.5):
        raise InvalidEpsilon(f"eps_collar = {eps} must lie in (0, 1/2)")
    return Cutoffs(spec, float(eps))


# -- group cutoffs chi ----------------------------------------------------

def cover_chi(x, period: float = 1.0):
    """chi for Z acting by translation: chi^2 is a smoothed indicator of [0, period)
    normalised so that sum_n chi(x - n period)^2 = 1."""
    y = np.asarray(x, dtype=float) / period

    def rho(z):
        return _h(z + 0.25) * _h(1.25 - z)

    num = rho(y)
    base = np.floor(y)
    den = np.zeros_like(y)
    for j in range(-2, 3):
        den += rho(y - (base + j))
    return np.sqrt(num / den)


def rotation_chi(theta, L: float, m: int):
    """Fundamental-domain chi for Z_m rotating a circle, normalised for Haar probability:
    (1/m) sum_j chi(theta + j L/m)^2 = 1."""
    th = np.mod(np.asarray(theta, dtype=float), L)
    sq = cover_chi(th, L / m) ** 2 + cover_chi(th - L, L / m) ** 2
    return np.sqrt(m * sq)


def chi_partition_residual(kind: str, L: float = 1.0, m: int = 1, points: int = 10**4, K: int = 4) -> float:
    x = np.linspace(-1.0, 2.0, points) * L
    if kind == "cover":
        tot = sum(cover_chi(x - n * L, L) ** 2 for n in range(-K, K + 1))
        return float(np.abs(tot - 1.0).max())
    if kind == "rotation":
        tot = sum(rotation_chi(x + j * L / m, L, m) ** 2 for j in range(m)) / m
        return float(np.abs(tot - 1.0).max())
    return 0.0
