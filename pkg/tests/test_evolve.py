import json
import math

import numpy as np
import pytest

from fracplap import evolve as ev
from fracplap.errors import CflViolation, ConfigurationError, ParameterDomainError
from fracplap.fields import Holder, ScalarField, const_field, gauss_bump
from fracplap.kernel import OperatorParams
from fracplap.lattice import Extension, GridSpec, WeightKind
from fracplap.study import refinement_cauchy

P3 = OperatorParams(1, 3, 0.5)


def config(h=1 / 8, r=0.5, far=0.0, box=4.0, **kw):
    return ev.SchemeConfig(GridSpec(h, 1, 2 * box, Extension.constant(far)), r,
                           box_radius=box, **kw)


def cosine():
    return ScalarField(lambda x: np.cos(x[:, 0]), sup_bound=1.0, holder=Holder(1.0, 1.0),
                       name="cos")


def test_constant_problem_stays_constant():
    prob = ev.EvolutionProblem(const_field(0.4), const_field(0.0), P3, 0.05)
    state = ev.run(prob, config(far=0.4))
    for S in state.snapshots:
        assert np.all(S == 0.4)
    assert ev.interpolate(state, [1.0], 0.0123) == 0.4
    tm = ev.time_modulus_check(state)
    assert tm["max_ratio"] == 0.0
    assert max(tm["max_modulus"]) == 0.0


def test_one_step_with_unit_source():
    prob = ev.EvolutionProblem(const_field(0.0), const_field(1.0), P3, 0.05)
    cfg = config()
    op, U, F = ev.prepare(prob, cfg)
    out = ev.step(U, op, F, 1e-3)
    assert np.allclose(out, 1e-3, rtol=0, atol=1e-18)


def test_one_step_sup_bound_cosine():
    prob = ev.EvolutionProblem(cosine(), const_field(0.0), P3, 0.05)
    cfg = config()
    tau, _, info = ev._resolve_tau(prob, cfg)
    op, U, F = ev.prepare(prob, cfg)
    out = ev.step(U, op, F, tau)
    assert np.max(np.abs(out)) <= np.max(np.abs(U)) + 1e-15
    assert info["cfl_satisfied"]


def test_cfl_branches():
    assert ev.cfl_exponent(OperatorParams(1, 3, 0.5), 0.5) == ("power", pytest.approx(1.0))
    assert ev.cfl_exponent(OperatorParams(1, 3, 0.4), 1.0) == ("log", 1.0)
    branch, e = ev.cfl_exponent(OperatorParams(1, 4, 0.5), 0.3)
    assert branch == "power" and e == pytest.approx(1.4)


def test_cfl_tau_log_branch_formula():
    params = OperatorParams(1, 3, 0.4)
    mode = ev.CflMode("UserValue", 0.01)
    r = 0.1
    assert ev.cfl_tau(r, params, 1.0, 1.0, 0.0, 1.0, mode) == pytest.approx(0.01 * r / math.log(10))
    # a = s: tau proportional to r^{2s}
    t1 = ev.cfl_tau(0.1, params, 0.4, 1.0, 0.0, 1.0, mode)
    t2 = ev.cfl_tau(0.05, params, 0.4, 1.0, 0.0, 1.0, mode)
    assert t1 / t2 == pytest.approx(2 ** 0.8)


def test_cfl_constant_formula():
    params = P3
    c = ev.cfl_constants(params, 1.0, 2.0, 0.5, 0.1, C=3.0)
    K2 = 1.0 * 2.0 ** 2 * 3.0
    K = 1 / (2 * 2 ** 3 * 3.0 * (2.0 + 0.1 * 0.5 + 3 * K2 + 1))
    assert c["K_tilde2"] == pytest.approx(K2)
    assert c["K"] == pytest.approx(K)


def test_gauss_run_invariants():
    prob = ev.EvolutionProblem(gauss_bump(), const_field(0.0), P3, 0.1)
    state = ev.run(prob, config())
    diag = state.diagnostics
    assert diag["sup_margin"] >= -1e-12
    assert diag["holder_margin"] >= -1e-12
    assert diag["max_principle_margin"] >= -1e-12
    assert state.cfl["branch"] == "log"


def test_interpolation_identities():
    prob = ev.EvolutionProblem(gauss_bump(), const_field(0.0), P3, 0.02)
    state = ev.run(prob, config(store_every=1))
    i = state.point_index([0.5])
    for j in (0, 3, state.N):
        assert ev.interpolate(state, [0.5], j * state.tau) == pytest.approx(state.snapshots[j][i],
                                                                            abs=1e-15)
    mid = ev.interpolate(state, [0.5], 2.5 * state.tau)
    assert mid == pytest.approx(0.5 * (state.snapshots[2][i] + state.snapshots[3][i]), abs=1e-15)
    with pytest.raises(ParameterDomainError):
        ev.interpolate(state, [0.5], 1.0)


def test_thinned_snapshots_are_recomputed():
    prob = ev.EvolutionProblem(gauss_bump(), const_field(0.0), P3, 0.02)
    dense = ev.run(prob, config(store_every=1))
    sparse = ev.run(prob, config(store_every=7))
    assert np.array_equal(sparse.snapshot_at_step(10), dense.snapshots[10])


def test_paired_run_continuous_dependence():
    prob = ev.EvolutionProblem(gauss_bump(), const_field(0.0), P3, 0.05)
    other = ev.EvolutionProblem(gauss_bump().shifted_by(1e-3), const_field(0.0), P3, 0.05)
    res = ev.paired_run(prob, other, config())
    assert res["delta_u0"] == pytest.approx(1e-3)
    assert res["margin"] >= -1e-12


def test_cfl_violation_needs_override():
    prob = ev.EvolutionProblem(gauss_bump(), const_field(0.0), P3, 0.05)
    with pytest.raises(CflViolation):
        ev.run(prob, config(tau=0.01))
    state = ev.run(prob, config(tau=0.01, allow_unstable=True))
    assert state.cfl["overridden"]


def test_problem_validation():
    with pytest.raises(ParameterDomainError):
        ev.EvolutionProblem(gauss_bump(), const_field(0.0), OperatorParams(1, 2, 0.5), 0.1)
    bare = ScalarField(lambda x: x[:, 0])
    with pytest.raises(ConfigurationError):
        ev.EvolutionProblem(bare, const_field(0.0), P3, 0.1)
    with pytest.raises(ConfigurationError):
        ev.SchemeConfig(GridSpec(0.125, 1, 4.0), 0.5, box_radius=4.0)
    with pytest.raises(ConfigurationError):
        ev.SchemeConfig(GridSpec(0.125, 1, 4.0, Extension.caller()), 0.5, box_radius=1.0)


def test_refinement_constant_problem():
    prob = ev.EvolutionProblem(const_field(0.3), const_field(0.0), P3, 0.01)
    res = refinement_cauchy(prob, config(far=0.3), levels=2)
    assert res["differences"] == [0.0]


def test_artifacts(tmp_path):
    prob = ev.EvolutionProblem(gauss_bump(), const_field(0.0), P3, 0.01)
    state = ev.run(prob, config())
    ev.write_metadata(state, tmp_path / "meta.json")
    ev.write_snapshots_csv(state, tmp_path / "snap.csv")
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["N"] == state.N and meta["cfl"]["branch"] == "log"
    lines = (tmp_path / "snap.csv").read_text().splitlines()
    assert len(lines) == 1 + len(state.coords)
    assert list(tmp_path.glob(".tmp-*")) == []
