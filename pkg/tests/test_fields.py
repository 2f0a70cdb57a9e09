import numpy as np
import pytest

from fracplap.errors import ConfigurationError, ContractError, ParameterDomainError
from fracplap.fields import (BUILTINS, ScalarField, affine_field, builtin_field, const_field,
                             gauss_bump, heaviside_s_field, minexp_field, minx2_field,
                             rational_field)


def test_registry_names():
    assert set(BUILTINS) == {"const", "affine", "gauss-bump", "rational", "minx2", "minexp",
                             "heaviside-s"}
    with pytest.raises(ConfigurationError):
        builtin_field("nope")
    with pytest.raises(ConfigurationError):
        builtin_field("rational", width=2.0)


def test_values():
    assert rational_field()(1.0) == 0.5
    assert minx2_field()(np.array([0.5, 2.0])).tolist() == [0.25, 1.0]
    assert minexp_field()(np.array([0.0, 5.0])).tolist() == [1.0, 2.0]
    h = heaviside_s_field(0.5, cutoff=4.0)
    assert h(np.array([-1.0, 1.0, 9.0])).tolist() == [0.0, 1.0, 2.0]
    assert affine_field(2.0, 1.0, clip=3.0)(np.array([0.5, 5.0, -5.0])).tolist() == [2.0, 3.0, -3.0]
    assert gauss_bump(2)(np.zeros((1, 2))).tolist() == [1.0]


def test_dimension_mismatch():
    with pytest.raises(ParameterDomainError):
        rational_field(2)(np.zeros((3, 3)))


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_declared_bounds_hold(name, rng):
    kw = {"s": 0.5} if name == "heaviside-s" else {}
    phi = builtin_field(name, **kw)
    assert phi.check_sup(rng) <= phi.sup_bound * (1 + 1e-12)
    assert phi.check_holder(rng) <= 1 + 1e-9


def test_gradients_match_finite_differences(rng):
    for phi in (rational_field(2), gauss_bump(2), minx2_field(2)):
        x = rng.uniform(-0.6, 0.6, 2)
        e = 1e-6
        fd = np.array([(phi(x + e * v) - phi(x - e * v)) / (2 * e) for v in np.eye(2)])
        assert np.allclose(phi.grad(x), fd, atol=1e-8)
        hd = np.array([(phi.grad(x + e * v) - phi.grad(x - e * v)) / (2 * e) for v in np.eye(2)])
        assert np.allclose(phi.hess(x), hd, atol=1e-6)


def test_transformations():
    phi = rational_field()
    assert phi.scaled(3.0)(1.0) == 1.5
    assert phi.scaled(-2.0).sup_bound == 2.0
    assert phi.translated([1.0])(1.0) == 1.0
    shifted = phi.shifted_by(0.25)
    assert shifted(1.0) == 0.75
    assert shifted.sup_bound == 1.25


def test_missing_metadata():
    bare = ScalarField(lambda x: x[:, 0])
    with pytest.raises(ContractError):
        bare.require_sup_bound()
    with pytest.raises(ContractError):
        bare.grad(0.0)
    with pytest.raises(ContractError):
        bare.check_holder(np.random.default_rng(0))
    assert const_field(2.0).require_sup_bound() == 2.0
