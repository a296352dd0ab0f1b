"""The reference computations, checked against frozen values and a second,
regularisation-independent evaluation before anything else relies on them."""
from math import pi, sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apslab.oracles import (
    eta_cover_closed,
    eta_zeta,
    kernel_projection_index,
    mode_flow,
    mode_index,
    mode_kernel,
    theta_sum,
)

# frozen from eta_zeta; cross-checked below by exponential-cutoff sums
ETA_CIRCLE = {0.1: -0.8, 0.25: -0.5, 0.4: -0.2, 0.5: 0.0, 0.75: 0.5}


def cutoff_eta(a, m=1, g=0, d=1e-5, nmax=3_000_000):
    """lim_{d->0} sum sgn(lam) e^{-d |lam|}, lam = n - a, at a small fixed d."""
    n = np.arange(-nmax, nmax + 1)
    lam = n - a
    w = np.exp(-2j * pi * n * g / m) if g else 1.0
    return complex(np.sum(w * np.sign(lam) * np.exp(-d * np.abs(lam))))


@pytest.mark.parametrize("a,value", sorted(ETA_CIRCLE.items()))
def test_circle_eta_frozen(a, value):
    assert eta_zeta(a) == pytest.approx(value, abs=1e-14)


@pytest.mark.parametrize("a", [0.1, 0.25, 0.4])
def test_circle_eta_cutoff_regularisation_agrees(a):
    assert abs(cutoff_eta(a) - eta_zeta(a)) < 1e-4


def test_equivariant_eta_cutoff_regularisation_agrees():
    for a, m, g in [(0.25, 2, 1), (0.0, 2, 1), (0.75, 3, 1), (0.3, 3, 2)]:
        assert abs(cutoff_eta(a, m, g) - eta_zeta(a, m=m, g=g)) < 1e-4


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3).filter(lambda a: abs(a - round(a)) > 1e-6))
def test_eta_sign_flip_is_negation(a):
    assert eta_zeta(a, sign=-1) == pytest.approx(-eta_zeta(a), abs=1e-12)
    # -D has spectrum -(n - a) = m - (-a)
    assert eta_zeta(-a) == pytest.approx(-eta_zeta(a), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3).filter(lambda a: abs(a - round(a)) > 1e-6), st.integers(-4, 4))
def test_eta_periodic_in_a(a, k):
    assert eta_zeta(a + k) == pytest.approx(eta_zeta(a), abs=1e-9)


def test_mode_index_truth_table():
    assert mode_index(0.5, -0.5) == 1
    assert mode_index(-0.5, 0.5) == -1
    assert mode_index(0.5, 0.5) == 0
    assert mode_index(-0.5, -0.5) == 0


def test_mode_flow_values():
    assert mode_flow(0.5, -0.5) == -1
    assert mode_flow(-0.5, 0.5) == 1
    assert mode_flow(0.25, 0.25) == 0
    assert mode_flow(0.5, -0.5, m=2, g=1) == pytest.approx(-1)
    assert mode_flow(1.5, 0.5, m=2, g=1) == pytest.approx(1)
    assert mode_flow(0.75, -0.75, m=3, g=1) == pytest.approx(-1)


def _profile(am, ap):
    def f(x):
        s = np.clip(np.asarray(x) + 1.0, 0, 1)
        return am + (ap - am) * s * s * (3 - 2 * s)
    return f


@pytest.mark.parametrize("am,ap,m,g", [(0.5, -0.5, 1, 0), (-0.5, 0.5, 1, 0), (0.75, 0.25, 1, 0),
                                       (1.5, 0.5, 2, 1), (0.5, -0.5, 2, 1), (0.75, -0.75, 3, 2)])
def test_kernel_projection_matches_flow(am, ap, m, g):
    k = kernel_projection_index(_profile(am, ap), am, ap, m=m, g=g)
    assert abs(k - mode_flow(am, ap, m=m, g=g)) < 1e-6


def test_mode_kernel_solves_equation():
    prof = _profile(0.5, -0.5)
    x = np.linspace(-20, 20, 40001)
    lam = -prof(x)
    # lam runs from -1/2 to +1/2: the adjoint solution decays, the kernel candidate does not
    f = mode_kernel(prof, 0, x, sgn=-1)
    resid = np.gradient(f, x) + lam * f
    assert np.abs(resid[5:-5]).max() / np.abs(f).max() < 1e-6
    assert f[0] < 1e-4 and f[-1] < 1e-4
    g = mode_kernel(prof, 0, x, sgn=1)
    assert g[0] > 1e4 and g[-1] > 1e4


def test_theta_sum_values():
    assert theta_sum(0.0, 1.0) == pytest.approx(1.7726372048266521, abs=1e-14)
    # Poisson: sum e^{-t n^2} = sqrt(pi/t) sum e^{-pi^2 k^2 / t}
    for t in (0.3, 1.0, 2.5):
        dual = sqrt(pi / t) * sum(np.exp(-pi**2 * k**2 / t) for k in range(-30, 31))
        assert theta_sum(0.0, t).real == pytest.approx(dual, abs=1e-13)
    assert theta_sum(0.0, 1.0, m=2, g=1).real == pytest.approx(
        sum((-1) ** n * np.exp(-(n**2)) for n in range(-40, 41)), abs=1e-14)


def test_cover_closed_form():
    for n in (1, 2, 3):
        assert eta_cover_closed(n) == pytest.approx(-1j / (pi * n))
        assert eta_cover_closed(-n) == pytest.approx(np.conj(eta_cover_closed(n)))
