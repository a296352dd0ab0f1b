from math import pi

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apslab.errors import EpsilonTooLarge
from apslab.eta import (
    decay_diagnostic,
    eta_direct,
    eta_integrand,
    eta_invariant,
    perturb,
    projection_trace,
)
from apslab.geometry import ActionSpec, BoundaryOperator
from apslab.oracles import eta_cover_closed, eta_zeta

Z2 = ActionSpec("rotation", 2)


def circle(a, **kw):
    return BoundaryOperator(a=a, Ncut=kw.pop("Ncut", 1024), **kw)


def test_integrand_vanishes_for_symmetric_spectrum():
    for t in (0.1, 0.7, 3.0):
        assert abs(eta_integrand(circle(0.5), 0, t)) < 1e-12
    # Z2 with g=1 at a=0: the weights (-1)^n pair n with -n
    op = circle(0.0, action=Z2)
    assert abs(eta_integrand(op, 1, 0.4)) < 1e-12


def test_cover_integrand_closed_form():
    op = BoundaryOperator(L=1.0, a=0.0, action=ActionSpec("cover"))
    t = 0.8
    expect = -1j * 2 / (4 * np.sqrt(pi) * t**3) * np.exp(-4 / (4 * t * t))
    assert abs(eta_integrand(op, 2, t) - expect) < 1e-10


def test_integrand_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        eta_integrand(circle(0.25), 0, 0.0)


@pytest.mark.parametrize("a", [0.1, 0.25, 0.4, 0.5, 0.75])
def test_circle_eta_matches_zeta(a):
    r = eta_invariant(circle(a))
    assert abs(r.value - eta_zeta(a)) < 1e-8
    assert r.err < 1e-6


@pytest.mark.parametrize("a,g", [(0.25, 1), (0.0, 1), (0.75, 1)])
def test_z2_eta_matches_zeta(a, g):
    r = eta_invariant(circle(a, action=Z2), g)
    assert abs(r.value - eta_zeta(a, m=2, g=g)) < 1e-8


@pytest.mark.parametrize("n", [1, 2, 3, -1])
def test_cover_eta_closed_form(n):
    op = BoundaryOperator(L=1.0, a=0.0, action=ActionSpec("cover"))
    assert abs(eta_invariant(op, n).value - eta_cover_closed(n)) < 1e-8


def test_regularised_agrees_with_direct_quadrature():
    for a in (0.1, 0.3):
        op = circle(a, Ncut=4096)
        assert abs(eta_invariant(op).value - eta_direct(op, eps_t=1e-3)) < 1e-6


def test_negated_operator_flips_eta():
    op = circle(0.3, potential=(0.0, 0.1))
    assert abs(eta_invariant(op.negated()).value + eta_invariant(op).value) < 1e-8


def test_potential_moves_eta_within_the_gap():
    # a constant potential c shifts a -> a - c
    op = circle(0.2, potential=(0.1,))
    assert abs(eta_invariant(op).value - eta_zeta(0.1)) < 1e-8


def test_projection_trace_examples():
    p = projection_trace(circle(0.0, Ncut=64))
    assert abs(p.trP - 1) < 1e-10
    assert p.idempotency_residual < 1e-12 and p.annihilation_residual < 1e-12
    assert projection_trace(circle(0.25, Ncut=64)).trP == 0
    assert abs(projection_trace(circle(0.0, Ncut=64, action=Z2), 1).trP - 1) < 1e-10


def test_perturb_bracket():
    op = circle(0.0, Ncut=64)
    with pytest.raises(EpsilonTooLarge):
        perturb(op, 0.0)
    with pytest.raises(EpsilonTooLarge):
        perturb(op, 0.6)
    lam, n = perturb(op, 0.25).spectrum(4)
    assert np.allclose(lam, n + 0.25, atol=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.floats(1e-3, 0.12))
def test_shift_continuity_inside_bracket(eps):
    # no eigenvalue crosses zero, so eta(D + eps) is the zeta value at a - eps
    a = 0.25
    got = eta_invariant(perturb(circle(a), eps)).value
    assert abs(got - eta_zeta(a - eps)) < 1e-8


def test_decay_regimes():
    ts = np.linspace(2, 6, 9)
    r = decay_diagnostic(circle(0.25, Ncut=64), 0, ts)
    assert r.regime == "exponential" and r.holds and r.gap == 0.25
    cov = BoundaryOperator(L=1.0, a=0.0, action=ActionSpec("cover"))
    p = decay_diagnostic(cov, 1, ts)
    assert p.regime == "polynomial" and p.holds
    assert p.slope == pytest.approx(-3, abs=0.1)
    assert decay_diagnostic(cov, 0, ts).regime == "trivial"
