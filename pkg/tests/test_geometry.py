from math import pi

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apslab.errors import InvalidEpsilon, TruncationInsufficient, UnsupportedGeometry
from apslab.geometry import (
    ActionSpec,
    BoundaryOperator,
    ScenarioSpec,
    build_boundary_operator,
    build_cutoffs,
    build_double,
    chi_partition_residual,
    cover_chi,
    spectral_gap,
    support_certificate,
)
from apslab.oracles import theta_sum


def test_pure_spectrum():
    op = build_boundary_operator({"a": 0.25})
    lam, n = op.spectrum(5)
    assert np.allclose(lam, n - 0.25, atol=0)


def test_zero_mode_at_a_zero():
    assert spectral_gap(build_boundary_operator({"a": 0.0})).kernel_dim == 1


def test_potential_matches_dense_oracle_at_double_truncation():
    op = build_boundary_operator({"a": 0.25, "potential": (0.0, 0.1), "Ncut": 64})
    big = BoundaryOperator(a=0.25, potential=(0.0, 0.1), Ncut=128)
    # independent dense assembly of -i d/dtheta - a + 0.1 cos(theta)
    n = np.arange(-128, 129)
    H = np.diag(n - 0.25).astype(complex)
    H += np.diag(np.full(len(n) - 1, 0.05), 1) + np.diag(np.full(len(n) - 1, 0.05), -1)
    dense = np.linalg.eigvalsh(H)
    assert np.allclose(np.sort(big.eigendata()[0]), dense, atol=1e-12)
    mine = np.sort(op.eigendata()[0])
    inner = np.abs(mine) < 40
    near = [dense[np.argmin(np.abs(dense - v))] for v in mine[inner]]
    assert np.max(np.abs(mine[inner] - near)) < 1e-8


def test_self_adjoint_and_orthonormal():
    op = BoundaryOperator(a=0.3, potential=(0.05, 0.2, 0.1), potential_sin=(0.1,), Ncut=32)
    H = op.fourier_matrix()
    assert np.abs(H - H.conj().T).max() == 0
    vals, vecs, _ = op.eigendata()
    assert np.isrealobj(vals)
    assert np.abs(vecs.conj().T @ vecs - np.eye(vecs.shape[1])).max() < 1e-12


def test_equivariance_residual():
    op = BoundaryOperator(a=0.3, potential=(0.0, 0.0, 0.2), Ncut=32, action=ActionSpec("rotation", 2))
    assert op.equivariance_residual() <= 1e-10


def test_truncation_refused():
    with pytest.raises(TruncationInsufficient):
        build_boundary_operator({"a": 0.25, "Ncut": 8}, t_min=1e-3)
    with pytest.raises(ValueError):
        build_boundary_operator({"Ncut": 4})


def test_spectral_gap_examples():
    g = spectral_gap(build_boundary_operator({"a": 0.25}))
    assert g.lambda0 == 0.25 and not g.zero_in_spectrum
    # nearest nonzero eigenvalue is -0.25, so the bracket is 0.125
    assert g.eps_max == 0.125
    g = spectral_gap(build_boundary_operator({"a": 0.0}))
    assert g.zero_in_spectrum and g.gap_nonzero == 1.0 and g.eps_max == 0.5
    assert spectral_gap(build_boundary_operator({"a": 0.5})).lambda0 == 0.5


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.49, 0.49), st.floats(0.05, 3.0))
def test_heat_trace_matches_theta_sum(a, t):
    op = BoundaryOperator(a=a, Ncut=256)
    lam, _ = op.spectrum()
    direct = np.sum(np.exp(-t * lam**2))
    assert abs(direct - theta_sum(a, t).real) <= op.heat_tail_bound(t) + 1e-12


def test_scenario_collar_is_product():
    s = ScenarioSpec(a_minus=0.5, a_plus=-0.5)
    u = np.linspace(*s.collar_right, 200)
    assert np.all(s.profile(u) == s.a_plus)
    u = np.linspace(*s.collar_left, 200)
    assert np.all(s.profile(u) == s.a_minus)
    assert s.end_values() == (0.5, -0.5)


def test_scenario_validation():
    with pytest.raises(ValueError):
        ScenarioSpec(kind="hat", a_minus=0.2, a_plus=0.3)
    with pytest.raises(UnsupportedGeometry):
        ScenarioSpec(collar=2.0)
    with pytest.raises(UnsupportedGeometry):
        ScenarioSpec(action=ActionSpec("cover"))


def test_double_twist_and_degree():
    d = build_double(ScenarioSpec(a_minus=0.5, a_plus=-0.5))
    assert d.k == -2
    assert d.curvature_degree() == pytest.approx(-2, abs=1e-12)
    flat = build_double(ScenarioSpec(kind="hat", a_minus=0.25, a_plus=0.25))
    assert flat.k == 0 and flat.curvature_degree() == 0
    with pytest.raises(UnsupportedGeometry):
        build_double(ScenarioSpec(a_minus=0.3, a_plus=0.0))
    with pytest.raises(UnsupportedGeometry):
        build_double(ScenarioSpec(a_minus=0.5, a_plus=0.0, action=ActionSpec("rotation", 2)))


def test_double_profile_is_quasi_periodic():
    d = build_double(ScenarioSpec(a_minus=0.75, a_plus=0.25))
    x = np.linspace(d.x0, d.x0 + d.P, 500)
    assert np.allclose(d.profile(x + d.P) - d.profile(x), d.k * d.scenario.omega, atol=1e-12)


def test_cutoff_support_relations_exact():
    s = ScenarioSpec()
    for eps in (0.1, 0.2, 0.4):
        c = build_cutoffs(s, eps)
        grid = np.linspace(s.x_left - 1, s.x_right + 1, 10**4)
        cert = support_certificate(c, grid)
        assert all(v == 0 for v in cert.values()), cert


def test_cutoff_eps_validated():
    for bad in (0.0, 0.5, -0.1, 0.7):
        with pytest.raises(InvalidEpsilon):
            build_cutoffs(ScenarioSpec(), bad)


def test_chi_partitions():
    assert chi_partition_residual("cover", 1.0) < 1e-8
    assert chi_partition_residual("rotation", 2 * pi, 2) < 1e-8
    assert chi_partition_residual("rotation", 2 * pi, 3) < 1e-8
    assert chi_partition_residual("trivial") == 0.0
    x = np.linspace(0, 1, 101)
    assert np.all(cover_chi(x) >= 0)
