"""The ten acceptance criteria, each at its stated tolerance.

Every test prints one ``[PASS]`` / ``[FAIL]`` line.  Run the file directly
(``python3 tests/test_acceptance.py``) for a plain summary.
"""

import sys
import time

import numpy as np
import pytest

from fracplap import cli, evolve as ev, study
from fracplap.discrete_op import FieldSample, apply_discrete
from fracplap.expansion import identity_check_J2
from fracplap.fields import const_field, gauss_bump, heaviside_s_field, minx2_field, rational_field
from fracplap.kernel import OperatorParams, RateRegime
from fracplap.lattice import Extension, GridSpec, WeightKind, build_weights, summability_ratios

RADII = (0.2, 0.1, 0.05, 0.025, 0.0125)
NONVANISHING = RateRegime("NonvanishingGradient")


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail}"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()
    return ok


# ---------------------------------------------------------------- shared evolution setup

def gauss_problem(T=0.1):
    return ev.EvolutionProblem(gauss_bump(), const_field(0.0), OperatorParams(1, 3, 0.5), T)


def gauss_config(h, r, **kw):
    return ev.SchemeConfig(GridSpec(h, 1, 8.0, Extension.constant(0.0)), r, WeightKind.W1,
                           box_radius=4.0, **kw)


# ---------------------------------------------------------------- criteria

def test_c01_zero_operator_surrogate():
    """max(0,x)^s frozen beyond 10; the exact value at x = 1 is the truncation effect."""
    t0 = time.time()
    params = OperatorParams(1, 4, 0.5)
    phi = heaviside_s_field(0.5, cutoff=10.0)
    exact = study.heaviside_reference(0.5, 4.0, 1.0, 10.0)
    hs = [2.0 ** -k for k in range(5, 10)]
    assert study.mu_select(params)["mu"] == 1.0
    errors = []
    for h in hs:
        table = build_weights(GridSpec(h, 1, 12.0, Extension.caller()), 4 * h, params)
        errors.append(abs(apply_discrete(FieldSample.from_field(phi, h), [1.0], table) - exact))
    rep = study.eoc(hs, errors)
    elapsed = time.time() - t0
    ok = rep.slope >= 0.8 and elapsed < 60
    assert report(1, "zero-operator slope >= 0.8 in < 1 min", ok,
                  f"slope {rep.slope:.4f}, {elapsed:.1f} s")


def test_c02_expansion_rate_nonvanishing_gradient():
    rep = study.consistency_sweep(rational_field(), [1.0], OperatorParams(1, 3, 0.5),
                                  "Fractional", RADII, regime=NONVANISHING)
    ok = abs(rep.slope - 3.5) <= 0.3
    assert report(2, "fractional expansion slope 3.5 +- 0.3", ok, f"slope {rep.slope:.4f}")


def test_c03_zero_gradient_optimality():
    params = OperatorParams(1, 2.5, 0.5)
    frac = study.consistency_sweep(minx2_field(), [0.0], params, "Fractional", RADII)
    surf = study.consistency_sweep(minx2_field(), [0.0], params, "LocalSurface", RADII)
    vol = study.consistency_sweep(minx2_field(), [0.0], params, "LocalVolume", RADII)
    ok = (abs(frac.slope - 1.75) <= 0.2 and abs(surf.slope - 0.5) <= 0.15
          and abs(vol.slope - 0.5) <= 0.15)
    assert report(3, "zero-gradient slopes 1.75 +- 0.2 and 0.5 +- 0.15", ok,
                  f"fractional {frac.slope:.4f}, surface {surf.slope:.4f}, "
                  f"volume {vol.slope:.4f}")


def test_c04_bucur_squassina_baseline():
    params = OperatorParams(1, 3, 0.5)
    bs = study.consistency_sweep(rational_field(), [1.0], params, "BucurSquassina", RADII,
                                 regime=NONVANISHING)
    mrs = study.consistency_sweep(rational_field(), [1.0], params, "Fractional", RADII,
                                  regime=NONVANISHING)
    in_band = abs(bs.slope - 1.0) <= 0.2
    below = bs.slope < mrs.slope
    assert report(4, "baseline slope 1.0 +- 0.2 and below the fractional slope", in_band and below,
                  f"baseline {bs.slope:.4f} (band {'met' if in_band else 'missed'}), "
                  f"fractional {mrs.slope:.4f} (ordering {'met' if below else 'missed'})")


def test_c05_exact_identities():
    rng = np.random.default_rng(20240501)
    worst_2d, worst_1d = 0.0, 0.0
    for _ in range(50):
        d = int(rng.integers(1, 3))
        p = rng.uniform(2.0, 5.0)
        g = rng.normal(size=d)
        A = rng.normal(size=(d, d))
        H = A + A.T
        r = rng.uniform(0.05, 0.95)
        out = identity_check_J2(g, H, r, p, d)
        # relative to |rhs|, or to the natural size of the terms when rhs nearly cancels
        scale = max(abs(out["rhs"]), np.linalg.norm(g) ** (p - 2) * np.linalg.norm(H) * r ** p)
        rel = abs(out["lhs"] - out["rhs"]) / scale
        if d == 1:
            worst_1d = max(worst_1d, rel)
        else:
            worst_2d = max(worst_2d, rel)
    ok = worst_2d <= 1e-8 and worst_1d <= 1e-14
    assert report(5, "sphere identity on 50 random cases", ok,
                  f"max relative gap d=2 {worst_2d:.2e}, d=1 {worst_1d:.2e}")


def test_c06_weight_summability():
    radii = (0.2, 0.1, 0.05, 0.025)
    spreads = {}
    for p, s in ((3.0, 0.5), (4.0, 0.25)):
        params = OperatorParams(1, p, s)
        sp = params.sp
        nus = (sp / 2, sp, 2 * sp)
        rows = [summability_ratios(build_weights(GridSpec(r / 4, 1, 4.0), r, params), nus)
                for r in radii]
        series = {"total": [r["total_scaled"] for r in rows], "far": [r["far"] for r in rows]}
        for nu in nus:
            series[f"moment({nu:g})"] = [r["moment_scaled"][nu] for r in rows]
        for name, col in series.items():
            spreads[(p, s, name)] = max(col) / min(col)
    worst = max(spreads.values())
    assert report(6, "summability ratios vary by < 2x", worst < 2,
                  f"largest max/min ratio {worst:.4f} ({max(spreads, key=spreads.get)})")


def test_c07_maximum_principle_and_holder():
    state = ev.run(gauss_problem(), gauss_config(1 / 32, 1 / 8))
    diag = state.diagnostics
    ok = (state.cfl["cfl_satisfied"] and diag["sup_margin"] >= -1e-12
          and diag["holder_margin"] >= -1e-12)
    assert report(7, "sup bound and Hölder propagation at every step", ok,
                  f"sup margin {diag['sup_margin']:.3e}, Hölder margin "
                  f"{diag['holder_margin']:.3e}, {state.N} steps")


def test_c08_continuous_dependence():
    prob = gauss_problem()
    other = ev.EvolutionProblem(gauss_bump().shifted_by(1e-3), const_field(0.0),
                                prob.params, prob.T)
    res = ev.paired_run(prob, other, gauss_config(1 / 32, 1 / 8))
    ok = res["max_gap"] <= 1e-3 + 1e-12 and res["cfl_satisfied"]
    assert report(8, "paired runs stay within delta", ok,
                  f"max gap {res['max_gap']:.15e} vs delta 1e-3")


def test_c09_refinement_surrogate():
    prob = gauss_problem()
    base = gauss_config(1 / 8, 1 / 2)
    stable = study.refinement_cauchy(prob, base, levels=3)
    unstable = study.refinement_cauchy(prob, base, levels=3, tau_factor=100.0)
    decreasing = stable["strictly_decreasing"]
    flagged = (not unstable["strictly_decreasing"]) or unstable["bound_exceeded"]
    diffs = ", ".join(f"{d:.3e}" for d in stable["differences"])
    udiffs = ", ".join(f"{d:.3e}" for d in unstable["differences"])
    assert report(9, "refinement decreases; 100x CFL step shows instability",
                  decreasing and flagged,
                  f"CFL step differences [{diffs}] "
                  f"({'decreasing' if decreasing else 'not decreasing'}); "
                  f"100x step differences [{udiffs}], sup {unstable['sup']:.4f} "
                  f"<= bound {unstable['sup_bound']:.4f}: instability "
                  f"{'shown' if flagged else 'not shown'}")


def test_c10_self_tests():
    res = cli.self_test(seed=0, n=10_000)
    ok = res["passed"]
    assert report(10, "EOC recovery and J_p / D_y properties on 1e4 samples", ok,
                  f"eoc deviation {res['eoc_synthetic']['max_abs_deviation']:.1e}, "
                  f"homogeneity {res['jp_homogeneity']['max_relative']:.1e}, "
                  f"affine/rounding {res['dy_affine_annihilation']['max_over_rounding_bound']:.1e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
