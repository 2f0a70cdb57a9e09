import math

import numpy as np
import pytest
from scipy import integrate

from fracplap.errors import ConfigurationError, ParameterDomainError
from fracplap.kernel import OperatorParams, s_nu
from fracplap.lattice import (Extension, GridSpec, WeightKind, build_weights, load_weights,
                              save_weights, summability_ratios, summability_report,
                              table_from_dict, table_to_dict, tables_equal, tail_mass)

P4 = OperatorParams(1, 4, 0.5)


def test_w2_weight_example():
    t = build_weights(GridSpec(0.1, 1, 2.0), 0.4, P4, WeightKind.W2)
    assert t.outer[(5,)] == pytest.approx(0.8, rel=1e-13)


def test_w1_weight_example():
    t = build_weights(GridSpec(0.1, 1, 2.0), 0.4, P4, WeightKind.W1)
    exact = 0.5 * (0.45 ** -2 - 0.55 ** -2)
    assert exact == pytest.approx(0.816243, abs=5e-7)
    assert t.outer[(5,)] == pytest.approx(exact, rel=1e-13)


def test_inner_weight_example():
    t = build_weights(GridSpec(0.01, 1, 1.5), 0.1, P4)
    assert t.inner_weight == pytest.approx(25.0, rel=1e-13)
    assert len(t.inner_offsets) == 2 * 9


def test_w1_two_d_cube_mass():
    P = OperatorParams(2, 3, 0.5)
    h = 0.05
    t = build_weights(GridSpec(h, 2, 1.2), 0.2, P, WeightKind.W1)
    sigma = 2 + P.sp
    exact = integrate.dblquad(lambda y, x: (x * x + y * y) ** (-sigma / 2),
                              0.275, 0.325, 0.125, 0.175, epsabs=1e-14, epsrel=1e-12)[0]
    assert t.outer[(6, 3)] == pytest.approx(exact, rel=1e-9)


def test_weights_symmetric_and_positive():
    for kind, d in ((WeightKind.W1, 1), (WeightKind.W2, 2), (WeightKind.W1, 2)):
        P = OperatorParams(d, 3, 0.4)
        h = 0.05 if d == 1 else 0.02
        t = build_weights(GridSpec(h, d, 1.2), 0.2, P, kind)
        w = t.outer
        assert all(v > 0 for v in w.values())
        assert all(w[a] == w[tuple(-i for i in a)] for a in w)
        assert t.inner_weight > 0 and t.tail_mass > 0


def test_w1_one_d_conserves_kernel_mass():
    # explicit W1 weights plus the tail lump equal the kernel mass outside the first cell
    t = build_weights(GridSpec(0.05, 1, 3.0), 0.2, P4, WeightKind.W1)
    explicit = t.outer_weights.sum()
    # the outer sum starts at the cell of offset 4 (|y| = r = 0.2); two rays of y^-3
    start = (4 - 0.5) * 0.05
    assert explicit == pytest.approx(start ** -2 - t.tail_radius ** -2, rel=1e-12)
    assert t.tail_mass == pytest.approx(tail_mass(1, 2.0, t.tail_radius))


def test_mesh_violations():
    with pytest.raises(ConfigurationError, match="r/4"):
        build_weights(GridSpec(0.1, 1, 2.0), 0.2, P4, WeightKind.W1)
    with pytest.raises(ConfigurationError, match="sqrt"):
        build_weights(GridSpec(0.05, 2, 2.0), 0.2, OperatorParams(2, 4, 0.5), WeightKind.W2)
    with pytest.raises(ParameterDomainError):
        GridSpec(-0.1)
    with pytest.raises(ParameterDomainError):
        GridSpec(0.1, 1, rho_max=0.5)


def test_round_trip(tmp_path):
    t = build_weights(GridSpec(0.025, 1, 2.0), 0.1, P4)
    assert tables_equal(table_from_dict(table_to_dict(t)), t)
    path = tmp_path / "w.json"
    save_weights(t, path)
    assert tables_equal(load_weights(path), t)
    with pytest.raises(ConfigurationError):
        table_from_dict({"format": "other"})


def test_tables_are_read_only():
    t = build_weights(GridSpec(0.025, 1, 2.0), 0.1, P4)
    with pytest.raises(ValueError):
        t.outer_weights[0] = 1.0


@pytest.mark.parametrize("p,s", [(3.0, 0.5), (4.0, 0.25)])
def test_summability_ratios_bounded(p, s):
    P = OperatorParams(1, p, s)
    sp = P.sp
    nus = (sp / 2, sp, 2 * sp)
    rows = [summability_ratios(build_weights(GridSpec(r / 4, 1, 4.0), r, P), nus)
            for r in (0.2, 0.1, 0.05)]
    for key in ("total_scaled", "far"):
        col = [row[key] for row in rows]
        assert max(col) / min(col) < 2
    for nu in nus:
        col = [row["moment_scaled"][nu] for row in rows]
        assert max(col) / min(col) < 2


def test_summability_report_consistency():
    t = build_weights(GridSpec(0.025, 1, 4.0), 0.1, P4)
    rep = summability_report(t, (1.0,))
    assert rep["far"] < rep["total"]
    assert rep["moment"][1.0] > 0
    rat = summability_ratios(t, (1.0,))
    assert rat["moment_scaled"][1.0] == pytest.approx(rep["moment"][1.0] / s_nu(1.0, 0.1, 0.5, 4))
