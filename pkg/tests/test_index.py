from math import pi, sqrt

import numpy as np
import pytest
from scipy.integrate import cumulative_simpson, quad
from scipy.linalg import expm
from scipy.special import erfc, erfcx

from apslab.errors import BoundaryNotInvertible, EpsilonTooLarge, UnsupportedGeometry
from apslab.geometry import ActionSpec, ScenarioSpec
from apslab.index import (
    IndexConfig,
    build_parametrix,
    conjugated_heat_traces,
    cylinder_boundary_term,
    cylinder_green,
    disjoint_support_trace,
    fixed_point_term,
    g_index,
    interior_mismatch_term,
    interior_term,
    perturbed_operator,
)
from apslab.oracles import kernel_projection_index, mode_index, mode_kernel

CROSSING = ScenarioSpec(a_minus=0.5, a_plus=-0.5)
HAT = ScenarioSpec(kind="hat", a_minus=0.25, a_plus=0.25)
# mode 0 has end value lambda = 1 at both ends
UNIT = ScenarioSpec(kind="hat", a_minus=-1.0, a_plus=-1.0)


@pytest.fixture(scope="module")
def unit_pack():
    return build_parametrix(UNIT, 0.5, n=0)


def _line_green_gaussian(x, lam, c, sig):
    """int_x^inf e^{-lam (y - x)} exp(-(y - c)^2 / 2 sig^2) dy, lam > 0."""
    z = (x - c + lam * sig**2) / (sig * sqrt(2))
    pos = sig * sqrt(pi / 2) * erfcx(np.maximum(z, 0)) * np.exp(-((x - c) ** 2) / (2 * sig**2))
    neg = sig * sqrt(pi / 2) * np.exp(lam * (x - c) + (lam * sig) ** 2 / 2) * erfc(np.minimum(z, 0))
    return np.where(z >= 0, pos, neg)


def test_green_kernel_closed_form():
    G = cylinder_green(1.0)
    c, sig = 0.3, 0.5
    for x in (-1.0, 0.2, 1.5):
        num, _ = quad(lambda y: G(x, y) * np.exp(-((y - c) ** 2) / (2 * sig**2)), x, x + 40)
        assert num == pytest.approx(float(_line_green_gaussian(x, 1.0, c, sig)), abs=1e-12)
    assert float(cylinder_green(-2.0)(0.0, -1.0)) == pytest.approx(-np.exp(-2.0))
    with pytest.raises(BoundaryNotInvertible):
        cylinder_green(0.0)


def test_box_cylinder_inverse_matches_green(unit_pack):
    grid = unit_pack.grid
    x, W = grid.x, grid.span
    Q = unit_pack.Q_C["right"]
    rng = np.random.default_rng(11)
    lo, hi = x[0] + 5, x[-1] - 5
    for _ in range(20):
        c, sig = rng.uniform(lo, hi), rng.uniform(0.4, 1.0)
        s = sum(np.exp(-((x - c - j * W) ** 2) / (2 * sig**2)) for j in (-1, 0, 1))
        # periodic images of the line solution
        exact = sum(_line_green_gaussian(x - j * W, 1.0, c, sig) for j in range(-3, 12))
        assert np.abs(Q @ s - exact).max() < 1e-10


def test_cylinder_inverse_is_right_inverse(unit_pack):
    rng = np.random.default_rng(12)
    x = unit_pack.grid.x
    for e in ("right", "left"):
        A, Q = unit_pack.A_C[e], unit_pack.Q_C[e]
        for _ in range(20):
            c, sig = rng.uniform(x[0] + 5, x[-1] - 5), rng.uniform(0.4, 1.0)
            s = np.exp(-((x - c) ** 2) / (2 * sig**2))
            assert np.abs(A @ (Q @ s) - s).max() < 1e-10


def test_heat_regularised_cylinder_parametrix(unit_pack):
    # Q_C - Q'_C = e^{-t A*A} Q_C
    t = unit_pack.t
    for e in ("right", "left"):
        A = unit_pack.A_C[e]
        lhs = unit_pack.Q_C[e] - unit_pack.Q_C_prime[e]
        rhs = expm(-t * (A.T @ A)) @ unit_pack.Q_C[e]
        assert np.abs(lhs - rhs).max() < 1e-8


@pytest.mark.parametrize("scenario", [CROSSING, HAT], ids=["crossing", "hat"])
def test_double_parametrix_identity(scenario):
    p = build_parametrix(scenario, 0.5)
    N = p.grid.x.size
    assert np.abs(np.eye(N) - p.Q_tilde @ p.A_tilde - p.S0_tilde).max() < 1e-8
    assert np.abs(np.eye(N) - p.A_tilde @ p.Q_tilde - p.S1_tilde).max() < 1e-8


@pytest.mark.parametrize("scenario,n", [(CROSSING, 0), (CROSSING, 1), (HAT, 0)])
def test_remainder_identities(scenario, n):
    res = build_parametrix(scenario, 0.5, n=n).remainder_residuals(np.random.default_rng(n), 50)
    assert max(res.values()) <= 1e-8, res


def test_parametrix_needs_invertible_ends():
    with pytest.raises(BoundaryNotInvertible):
        build_parametrix(ScenarioSpec(a_minus=0.5, a_plus=0.0), 0.5)


@pytest.mark.parametrize("scenario", [CROSSING, HAT], ids=["crossing", "hat"])
def test_disjoint_support_trace_vanishes(scenario):
    for n in (0, 1):
        assert disjoint_support_trace(scenario, 0.5, n) <= 1e-8


@pytest.mark.parametrize("scenario", [HAT, ScenarioSpec(a_minus=0.75, a_plus=0.25)], ids=["hat", "twisted"])
def test_conjugation_preserves_heat_traces(scenario):
    out = conjugated_heat_traces(scenario, 0.3, 0.5)
    for tag in ("-+", "+-"):
        assert abs(out["plain_" + tag] - out["conj_" + tag]) < 1e-8


def test_conjugated_kernels_differ_by_weight():
    eps = 0.25
    s = ScenarioSpec(a_minus=1.0, a_plus=0.0)
    sp = perturbed_operator(s, eps)
    x = np.linspace(-12, 12, 24001)
    psi = cumulative_simpson(s.perturbation_slope(x), x=x, initial=0.0)
    psi -= psi[np.argmin(np.abs(x))]
    k0 = mode_kernel(s.profile, 0, x, sgn=-1)
    k1 = mode_kernel(sp.effective_profile, 0, x, sgn=-1)
    assert np.abs(k1 / k0 - np.exp(-eps * psi)).max() < 1e-8


def test_perturbation_makes_ends_invertible():
    s = ScenarioSpec(a_minus=0.5, a_plus=0.0)
    sp = perturbed_operator(s, 0.125)
    am, ap = sp.end_values()
    assert ap == -0.125
    # mode 0 now has a decaying cokernel
    assert mode_index(-am, -ap) == -1
    assert abs(kernel_projection_index(sp.effective_profile, am, ap) + 1) < 1e-6


def test_perturbed_end_mode_value():
    sp = perturbed_operator(ScenarioSpec(a_minus=1.0, a_plus=0.0), 0.25)
    assert sp.mode_potential(0, 100.0) == 0.25
    with pytest.raises(EpsilonTooLarge):
        perturbed_operator(ScenarioSpec(a_minus=1.0, a_plus=0.0), 0.5)
    with pytest.raises(EpsilonTooLarge):
        perturbed_operator(CROSSING, 0.0)


def test_constant_profile_has_index_zero():
    r = g_index(HAT)
    assert abs(r.ind_g) < 1e-8
    assert r.oracle_flow == 0 and abs(r.oracle_kernel) < 1e-6
    assert r.err < 1e-6


def test_crossing_interior_and_fixed_point_terms():
    it = interior_term(CROSSING)
    assert it.oracle == -1
    assert abs(it.value - it.oracle) < 1e-6
    assert fixed_point_term(CROSSING) == pytest.approx(-1, abs=1e-12)
    z2 = ScenarioSpec(a_minus=0.5, a_plus=-0.5, action=ActionSpec("rotation", 2))
    assert fixed_point_term(z2, 1) == 0
    assert fixed_point_term(HAT) == 0


def test_boundary_term_symmetric_spectrum():
    sym = ScenarioSpec(kind="hat", a_minus=0.5, a_plus=0.5)
    b = cylinder_boundary_term(sym, 0, 0.01)
    assert abs(b.value) < 1e-12 and abs(b.quadrature) < 1e-12
    assert b.derivative_piece == 0


def test_boundary_term_needs_invertible_end():
    with pytest.raises(BoundaryNotInvertible):
        cylinder_boundary_term(ScenarioSpec(a_minus=0.5, a_plus=0.0), 0, 0.1)


def test_mismatch_vanishes_on_constant_profile():
    assert abs(interior_mismatch_term(HAT, 0, 0.01).value) <= 1e-6


def test_mismatch_z2_rotation():
    z2 = ScenarioSpec(a_minus=0.5, a_plus=-0.5, action=ActionSpec("rotation", 2))
    assert abs(interior_mismatch_term(z2, 1, 0.1).value) <= 1e-8


def test_index_config_validation():
    with pytest.raises(ValueError):
        IndexConfig(t=(0.0,))
    with pytest.raises(ValueError):
        IndexConfig(eps_collar=())
    with pytest.raises(UnsupportedGeometry):
        g_index(ScenarioSpec(kind="double"))
