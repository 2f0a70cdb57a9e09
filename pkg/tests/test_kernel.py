import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fracplap.errors import ParameterDomainError
from fracplap.fields import rational_field
from fracplap.kernel import (OperatorParams, RateRegime, a_pd, a_spd, dy_operator,
                             gamma_exponent, jp, kappa_pd, plap_closed_form, s_nu,
                             sphere_average_abs_y1_pow)

ps = st.floats(1.05, 8.0)
# keep clear of subnormals, where the power loses relative accuracy
xis = st.floats(-1e3, 1e3).filter(lambda v: v == 0 or abs(v) > 1e-100)


def test_jp_values():
    assert jp(2.0, 3) == 4.0
    assert jp(0.0, 1.5) == 0.0
    assert jp(-2.0, 3) == -4.0
    assert np.array_equal(jp(np.array([0.0, 1.0, -1.0]), 1.2), [0.0, 1.0, -1.0])


def test_jp_rejects_p_at_most_one():
    with pytest.raises(ParameterDomainError):
        jp(1.0, 1.0)


@settings(max_examples=10_000, deadline=None)
@given(xis, ps)
def test_jp_antisymmetric(xi, p):
    assert jp(-xi, p) == -jp(xi, p)


@settings(max_examples=10_000, deadline=None)
@given(xis, ps, st.floats(0.01, 100.0))
def test_jp_homogeneous(xi, p, lam):
    assert jp(lam * xi, p) == pytest.approx(lam ** (p - 1) * jp(xi, p), rel=1e-12, abs=1e-300)


def test_dy_examples():
    ident = lambda z: np.asarray(z)[:, 0]
    assert dy_operator(ident, [0.5], [0.25], 3) == 0.0
    assert dy_operator(ident, [0.3], [0.1], 3) == pytest.approx(0.0, abs=1e-13)
    sq = lambda z: np.asarray(z)[:, 0] ** 2
    r = 0.3
    assert dy_operator(sq, [0.0], [r], 3) == pytest.approx(2 * r, rel=1e-14)
    phi = rational_field()
    u = lambda t: 1.0 / (1.0 + t * t)
    direct = ((u(1.1) - u(1.0)) + (u(0.9) - u(1.0))) / 0.1 ** 2
    assert dy_operator(phi, [1.0], [0.1], 2) == pytest.approx(direct, rel=1e-13)


def test_dy_needs_nonzero_y():
    with pytest.raises(ParameterDomainError):
        dy_operator(rational_field(), [1.0], [0.0], 2)


@settings(max_examples=10_000, deadline=None)
@given(st.integers(1, 3), ps, st.data())
def test_dy_annihilates_affine(d, p, data):
    coord = st.floats(-5, 5).filter(lambda v: v == 0 or abs(v) > 1e-50)
    vec = st.lists(coord, min_size=d, max_size=d)
    b = np.array(data.draw(vec))
    x = np.array(data.draw(vec))
    y = np.array(data.draw(vec))
    c = data.draw(coord)
    if np.linalg.norm(y) < 1e-3:
        return
    phi = lambda z: np.asarray(z) @ b + c
    # rounding of the sampled values is the only source of a nonzero result;
    # for p < 2, J_p maps a rounding error e to e^(p-1)
    mag = np.abs(b).sum() * (np.abs(x).sum() + np.abs(y).sum()) + abs(c) + 1e-300
    tol = max(1e-12 * mag ** (p - 1), 2 * (4e-16 * mag) ** (p - 1))
    assert abs(dy_operator(phi, x, y, p)) <= tol / np.linalg.norm(y) ** p


def test_kappa_examples():
    for p in (1.5, 2.0, 3.7):
        assert kappa_pd(p, 1) == 2.0
        assert a_pd(p, 1) == 1.0
    for d in (1, 2, 3):
        assert kappa_pd(2.0, d) == pytest.approx(2 * d, rel=1e-12)
    avg = integrate.quad(lambda t: abs(math.cos(t)) ** 3, 0, 2 * math.pi, epsabs=1e-14)[0] / (2 * math.pi)
    assert avg == pytest.approx(4 / (3 * math.pi), rel=1e-13)
    assert kappa_pd(3.0, 2) == pytest.approx(2 / avg, rel=1e-12)


def test_sphere_average_three_d():
    # on S^2 the coordinate y1 is uniform on [-1, 1]
    for p in (1.5, 2.0, 3.0):
        assert sphere_average_abs_y1_pow(p, 3) == pytest.approx(1 / (p + 1), rel=1e-12)


def test_a_spd_examples():
    assert a_spd(0.5, 2, 1) == pytest.approx(0.5, rel=1e-15)
    avg = 4 / (3 * math.pi)
    assert a_spd(0.5, 3, 2) == pytest.approx(3 * 0.5 / (2 * math.pi * avg), rel=1e-12)


def test_gamma_table():
    assert gamma_exponent(4, RateRegime("Uniform")) == 2
    assert gamma_exponent(2, RateRegime("Uniform")) == 2
    assert gamma_exponent(2.5, RateRegime("Uniform")) == pytest.approx(0.5)
    assert gamma_exponent(2.5, RateRegime("NonvanishingGradient", 0.1)) == pytest.approx(1.4)
    assert gamma_exponent(3.5, RateRegime("NonvanishingGradient")) == 2
    assert gamma_exponent(1.5, RateRegime("NonvanishingGradient")) == pytest.approx(0.45)
    assert gamma_exponent(2.5, RateRegime("NonvanishingGradient"), dim_one=True) == 2
    with pytest.raises(ParameterDomainError):
        gamma_exponent(1.5, RateRegime("Uniform"))


def test_s_nu_branches():
    assert s_nu(1, 0.1, 0.5, 4) == pytest.approx(10.0, rel=1e-14)
    assert s_nu(2, 0.1, 0.5, 4) == pytest.approx(2.302585092994046, rel=1e-14)
    assert s_nu(3, 0.1, 0.5, 4) == 1.0
    with pytest.raises(ParameterDomainError):
        s_nu(1, 1.5, 0.5, 4)


def test_plap_closed_form():
    assert plap_closed_form([2.0], [[2.0]], 3) == pytest.approx(8.0)
    assert plap_closed_form([1.0, 0.0], np.eye(2), 3) == pytest.approx(3.0)
    assert plap_closed_form([0.0], [[2.0]], 3) == 0.0
    assert plap_closed_form([0.0, 0.0], np.eye(2), 2) == 2.0


def test_params_validation():
    with pytest.raises(ParameterDomainError):
        OperatorParams(1, 1.0, 0.5)
    with pytest.raises(ParameterDomainError):
        OperatorParams(1, 2.0, 1.0)
    with pytest.raises(ParameterDomainError):
        OperatorParams(0, 2.0, 0.5)
    assert OperatorParams(2, 3, 0.5).kernel_exponent == 3.5
