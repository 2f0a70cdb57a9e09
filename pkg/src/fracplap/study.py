"""Convergence studies: EOC fits, choice of the r-h coupling, consistency
sweeps, refinement checks for the time-dependent scheme, table recipes."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .discrete_op import consistency_error
from .errors import InsufficientDataError, ParameterDomainError
from .evolve import (EvolutionProblem, SchemeConfig, _atomic_write, cfl_tau,
                     interpolate_field, run)
from .expansion import (ExpansionKind, bs_expansion, mvp_fractional, mvp_local_surface,
                        mvp_local_volume, reference_fraclap, reference_plap)
from .fields import ScalarField, heaviside_s_field
from .kernel import OperatorParams, RateRegime, RegimeTag, gamma_exponent, jp
from .lattice import GridSpec, WeightKind
from .quad import DEFAULT_SPEC, QuadSpec


@dataclass
class EocReport:
    abscissae: list
    errors: list
    slope: float
    residual: float
    expected_slope: Optional[float] = None
    provenance: str = ""
    fitted: list = field(default_factory=list)      # indices used in the fit
    excluded: list = field(default_factory=list)    # indices with zero error

    def within(self, tol: float) -> bool:
        return self.expected_slope is not None and abs(self.slope - self.expected_slope) <= tol

    def to_dict(self) -> dict:
        return asdict(self)


def eoc(abscissae: Sequence[float], errors: Sequence[float], finest: Optional[int] = None,
        expected: Optional[float] = None, provenance: str = "") -> EocReport:
    """Least-squares slope of log(error) against log(abscissa).

    Zero errors are excluded and listed in ``excluded``.  ``finest`` limits
    the fit to that many of the smallest abscissae.
    """
    x = np.asarray(abscissae, dtype=float)
    e = np.asarray(errors, dtype=float)
    if x.shape != e.shape:
        raise ParameterDomainError("abscissae and errors differ in length")
    if np.any(np.diff(x) >= 0):
        raise ParameterDomainError("abscissae must be strictly decreasing")
    if np.any(e < 0) or np.any(x <= 0):
        raise ParameterDomainError("abscissae and errors must be nonnegative / positive")
    usable = np.flatnonzero(e > 0)
    excluded = np.flatnonzero(e == 0).tolist()
    if finest is not None:
        usable = usable[-finest:]
    if len(usable) < 3:
        raise InsufficientDataError(f"need at least 3 positive errors, have {len(usable)}")
    lx, le = np.log(x[usable]), np.log(e[usable])
    slope, icept = np.polyfit(lx, le, 1)
    resid = float(np.sqrt(np.mean((le - (slope * lx + icept)) ** 2)))
    return EocReport(x.tolist(), e.tolist(), float(slope), resid, expected, provenance,
                     usable.tolist(), excluded)


def mu_select(params: OperatorParams, regime: RateRegime = RateRegime(),
              dim_one: bool = False) -> dict:
    """Coupling exponent mu (r ~ h^mu) and the resulting order in h.

    p = 2 lies outside the three ranges of the error table; it is handled
    with the p in (2, 3] formulas.
    """
    p, s = params.p, params.s
    g = gamma_exponent(p, regime, dim_one)
    q = p * (1 - s)
    if p > 3:
        if q >= 2:
            mu, order, case = 1.0, 1.0, "p>3, p(1-s)>=2"
        else:
            mu, order, case = 1 / (g + 2), (g + q) / (g + 2), "p>3, p(1-s)<2"
    elif p >= 2:
        if q >= 2:
            mu, order, case = 1 / (g + q), 1.0, "2<p<=3, p(1-s)>=2"
        else:
            mu, order, case = 1 / (g + 2), (g + q) / (g + 2), "2<p<=3, p(1-s)<2"
    else:
        mu = (p - 1) / (g + p)
        order = (p - 1) * (1 - s * p / (g + p))
        case = "1<p<2"
    return {"mu": min(mu, 1.0), "expected_E_order_in_h": order, "gamma": g, "case": case}


def expected_expansion_slope(kind: ExpansionKind, params: OperatorParams,
                             regime: RateRegime) -> tuple:
    """Proven rate of each expansion and where it comes from."""
    kind = ExpansionKind(kind)
    p, s, d = params.p, params.s, params.d
    dim_one = d == 1 and regime.tag is RegimeTag.NONVANISHING_GRADIENT
    if kind is ExpansionKind.BUCUR_SQUASSINA:
        return 2 - 2 * s, "Bucur-Squassina expansion, order 2-2s"
    g = gamma_exponent(p, regime, dim_one)
    if kind is ExpansionKind.FRACTIONAL:
        return g + p * (1 - s), "fractional expansion, order gamma + p(1-s)"
    return g, "local expansion, order gamma"


_EXPANSIONS = {
    ExpansionKind.FRACTIONAL: mvp_fractional,
    ExpansionKind.BUCUR_SQUASSINA: bs_expansion,
}


def _tighten(spec: QuadSpec, target: float) -> QuadSpec:
    return spec.with_abs_tol(max(min(spec.abs_tol, target), 1e-15))


def consistency_sweep(phi: ScalarField, x, params: OperatorParams, kind, abscissae,
                      mu: Optional[float] = None, regime: RateRegime = RateRegime(),
                      spec: QuadSpec = DEFAULT_SPEC, finest: Optional[int] = 3,
                      reference: Optional[float] = None, r_scale: float = 4.0,
                      rho_max: float = 4.0, expected: Optional[float] = None) -> EocReport:
    """Error of an expansion (abscissae = r) or of the discrete operator
    (abscissae = h, r = r_scale * h^mu) against an exact value.

    The exact value is the principal value oracle (or the closed-form
    p-Laplacian for the local expansions) unless ``reference`` is given.
    The oracle tolerance is tightened to 1% of the smallest error before the
    fit.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    abscissae = [float(a) for a in abscissae]
    try:
        kind = ExpansionKind(kind)
    except ValueError:
        kind = WeightKind(kind)
    if isinstance(kind, ExpansionKind):
        local = kind in (ExpansionKind.LOCAL_SURFACE, ExpansionKind.LOCAL_VOLUME)
        exp_slope, prov = expected_expansion_slope(kind, params, regime)
        if local:
            fn = mvp_local_surface if kind is ExpansionKind.LOCAL_SURFACE else mvp_local_volume
            values = [fn(phi, x, r, params.p, spec).value for r in abscissae]
            if reference is None:
                reference = reference_plap(phi, x, params.p)
        else:
            fn = _EXPANSIONS[kind]
            values = [fn(phi, x, r, params, spec).value for r in abscissae]
    else:
        sel = mu_select(params, regime, params.d == 1
                        and regime.tag is RegimeTag.NONVANISHING_GRADIENT)
        if mu is None:
            mu = sel["mu"]
            exp_slope = sel["expected_E_order_in_h"]
        else:
            exp_slope = None
        prov = f"discrete operator, mu={mu:g} ({sel['case']})"
        values = []
        for h in abscissae:
            r = r_scale * h ** mu
            values.append(consistency_error(phi, x, params, h, r, kind, spec, rho_max,
                                            reference=0.0)["discrete"])
    if reference is None:
        ref = reference_fraclap(phi, x, params, spec)
        errs = [abs(v - ref.value) for v in values]
        floor = min([e for e in errs if e > 0], default=0.0)
        if floor and ref.error > 0.01 * floor:
            ref = reference_fraclap(phi, x, params, _tighten(spec, 0.01 * floor))
        reference = ref.value
    errs = [abs(v - reference) for v in values]
    if expected is not None:
        exp_slope = expected
    return eoc(abscissae, errs, finest, exp_slope, prov)


def heaviside_reference(s: float, p: float, x: float = 1.0, cutoff: float = 10.0) -> float:
    """Exact operator value at x > 0 of max(0, .)^s frozen beyond the cutoff.

    The untruncated function is annihilated at every x > 0, so only the
    change made by the truncation remains: the integral over y > cutoff - x
    of (J_p(cutoff^s - x^s) - J_p((x+y)^s - x^s)) y^{-(1+sp)}.
    """
    if not 0 < x < cutoff:
        raise ParameterDomainError("need 0 < x < cutoff")
    top = jp(cutoff ** s - x ** s, p)

    def g(y):
        return (top - jp((x + y) ** s - x ** s, p)) * y ** (-1 - s * p)

    val, _ = integrate.quad(g, cutoff - x, np.inf, epsabs=1e-15, epsrel=1e-13, limit=400)
    return float(val)


def refinement_cauchy(problem: EvolutionProblem, base: SchemeConfig, levels: int = 3,
                      tau_factor: float = 1.0, n_times: int = 11) -> dict:
    """Sup-differences between successive halvings of h (r halved with h).

    Each level takes tau = tau_factor * (CFL step).  Levels are compared on
    the coarser lattice at ``n_times`` equispaced times through the
    time-continuous interpolant.
    """
    if levels < 2:
        raise ParameterDomainError("refinement needs at least 2 levels")
    states = []
    for k in range(levels):
        h = base.grid.h / 2 ** k
        r = base.r / 2 ** k
        cfg = replace(base, grid=replace(base.grid, h=h), r=r, monitor_holder=False)
        if tau_factor != 1.0:
            tau0 = cfl_tau(r, problem.params, problem.a, problem.L_u0, problem.L_f,
                           problem.T, base.cfl_mode, base.kind)
            cfg = replace(cfg, tau=tau_factor * tau0, allow_unstable=True)
        states.append(run(problem, cfg))
    times = np.linspace(0.0, problem.T, n_times)
    diffs = []
    for a, b in zip(states, states[1:]):
        ib = np.array([b.point_index(x) for x in a.coords])
        diffs.append(max(float(np.max(np.abs(interpolate_field(a, t) - interpolate_field(b, t)[ib])))
                         for t in times))
    bound = max(abs(problem.u0.sup_bound), abs(base.grid.extension.value)) + \
        problem.T * problem.f.sup_bound
    sup = max(float(np.max(np.abs(S))) for st in states for S in st.snapshots)
    blew = any(st.diagnostics.get("blow_up_step") is not None for st in states)
    return {
        "h": [st.config.grid.h for st in states],
        "tau": [st.tau for st in states],
        "differences": diffs,
        "strictly_decreasing": all(b < a for a, b in zip(diffs, diffs[1:])),
        "sup": sup,
        "sup_bound": bound,
        "bound_exceeded": sup > bound * (1 + 1e-12) or blew,
        "blow_up": blew,
    }


# ---------------------------------------------------------------- recipes

def fig1_table(ps: Sequence[float], ss: Sequence[float],
               regime: RateRegime = RateRegime(), dim_one: bool = False) -> list:
    """Rate gamma + p(1-s) of the fractional expansion over a (p, s) grid."""
    rows = []
    for p in ps:
        for s in ss:
            try:
                g = gamma_exponent(p, regime, dim_one)
                nu = g + p * (1 - s)
            except ParameterDomainError:
                g = nu = float("nan")
            rows.append({"p": p, "s": s, "gamma": g, "nu": nu})
    return rows


FIG2_CASES = ((4.0, 0.5), (5.0, 0.5), (6.0, 0.6))


def fig2_study(cases=FIG2_CASES, hs=tuple(2.0 ** -k for k in range(5, 10)),
               x: float = 1.0, cutoff: float = 10.0, rho_max: float = 12.0,
               kind: WeightKind = WeightKind.W1) -> list:
    """Discrete operator error on max(0, x)^s (truncated) for p(1-s) >= 2, p >= 3."""
    out = []
    for p, s in cases:
        params = OperatorParams(1, p, s)
        phi = heaviside_s_field(s, cutoff)
        ref = heaviside_reference(s, p, x, cutoff)
        rep = consistency_sweep(phi, [x], params, kind, hs, reference=ref, rho_max=rho_max)
        out.append({"p": p, "s": s, "report": rep})
    return out


# ---------------------------------------------------------------- output

CSV_COLUMNS = ("abscissa", "error", "expected_order", "fitted_order", "residual")


def _fmt(v) -> str:
    return "nan" if v is None else f"{float(v):.16e}"


def eoc_rows(report: EocReport) -> list:
    return [[_fmt(a), _fmt(e), _fmt(report.expected_slope), _fmt(report.slope),
             _fmt(report.residual)] for a, e in zip(report.abscissae, report.errors)]


def write_eoc_csv(report: EocReport, path) -> None:
    def writer(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(eoc_rows(report))
    _atomic_write(path, writer)


def read_eoc_csv(path) -> dict:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != CSV_COLUMNS:
        raise ParameterDomainError(f"{path}: unexpected header {rows[0]}")
    cols = list(zip(*rows[1:])) if len(rows) > 1 else [()] * len(CSV_COLUMNS)
    return {name: [float(v) for v in col] for name, col in zip(CSV_COLUMNS, cols)}


def write_json(data, path) -> None:
    _atomic_write(path, lambda fh: json.dump(data, fh, indent=2, sort_keys=True, default=str))
