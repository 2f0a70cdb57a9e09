"""Mean value expansions of the p-Laplacian and the fractional p-Laplacian,
the Bucur-Squassina baseline, exact averaging identities and an independent
principal value oracle.

All tolerances in the ``QuadSpec`` passed to these functions refer to the
returned value, not to the raw integrals; the prefactors are folded into
the tolerances handed to :mod:`fracplap.quad`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ContractError, ParameterDomainError, QuadratureError
from .fields import ScalarField
from .kernel import (OperatorParams, a_pd, a_spd, jp, kappa_pd, plap_closed_form,
                     sphere_area)
from .quad import (DEFAULT_SPEC, QuadResult, QuadSpec, ball_volume, integrate_ball,
                   inner_sphere, integrate_interval, integrate_shell,
                   integrate_sphere, integrate_tail)


class ExpansionKind(str, Enum):
    LOCAL_SURFACE = "LocalSurface"
    LOCAL_VOLUME = "LocalVolume"
    FRACTIONAL = "Fractional"
    BUCUR_SQUASSINA = "BucurSquassina"


@dataclass(frozen=True)
class ExpansionResult:
    value: float
    quadrature_error: float
    r: float
    kind: ExpansionKind


def _centre(phi: ScalarField, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (phi.d,):
        raise ParameterDomainError(f"x must have shape ({phi.d},), got {x.shape}")
    return x, float(phi(x[None, :])[0])


def _increment(phi, x, u0, p):
    """y -> J_p(phi(x+y) - phi(x)) on an (n, d) batch."""
    def f(y):
        return jp(phi(x + y) - u0, p)
    return f


def _symmetrised(phi, x, u0, p):
    """y -> (J_p(phi(x+y)-phi(x)) + J_p(phi(x-y)-phi(x))) / 2."""
    def f(y):
        v = phi(np.concatenate([x + y, x - y]))
        n = y.shape[0]
        return 0.5 * (jp(v[:n] - u0, p) + jp(v[n:] - u0, p))
    return f


def _check_r(r):
    if not r > 0:
        raise ParameterDomainError("r must be positive")


def _tight(spec: QuadSpec, scale: float) -> QuadSpec:
    """Tolerances for a raw integral that will be multiplied by ``scale``."""
    return spec.with_abs_tol(spec.abs_tol / scale)


def mvp_local_surface(phi: ScalarField, x, r: float, p: float,
                      spec: QuadSpec = DEFAULT_SPEC) -> ExpansionResult:
    """kappa_{p,d} r^{-p} times the sphere average of J_p(phi(x+y) - phi(x))."""
    _check_r(r)
    x, u0 = _centre(phi, x)
    d = phi.d
    scale = kappa_pd(p, d) / (r ** p * sphere_area(d) * r ** (d - 1))
    res = integrate_sphere(_symmetrised(phi, x, u0, p), r, d, _tight(spec, scale))
    return ExpansionResult(scale * res.value, scale * res.error, r, ExpansionKind.LOCAL_SURFACE)


def mvp_local_volume(phi: ScalarField, x, r: float, p: float,
                     spec: QuadSpec = DEFAULT_SPEC) -> ExpansionResult:
    """(p+d) kappa_{p,d} / (d r^p) times the ball average of J_p(phi(x+y) - phi(x))."""
    _check_r(r)
    x, u0 = _centre(phi, x)
    d = phi.d
    scale = (p + d) * kappa_pd(p, d) / (d * r ** p) / (ball_volume(d) * r ** d)
    res = integrate_ball(_symmetrised(phi, x, u0, p), r, d, _tight(spec, scale))
    return ExpansionResult(scale * res.value, scale * res.error, r, ExpansionKind.LOCAL_VOLUME)


def _tail_bound(phi: ScalarField, p: float) -> float:
    if phi.sup_bound is None:
        raise ContractError(f"field {phi.name!r} needs a sup_bound for the tail integral")
    return 2.0 ** (p - 1) * phi.sup_bound ** (p - 1)


def mvp_fractional(phi: ScalarField, x, r: float, params: OperatorParams,
                   spec: QuadSpec = DEFAULT_SPEC) -> ExpansionResult:
    """Local ball term with weight (p+d)/(p(1-s) r^{d+sp}) plus the exact kernel tail."""
    _check_r(r)
    bound = _tail_bound(phi, params.p)
    x, u0 = _centre(phi, x)
    d, p, s = params.d, params.p, params.s
    if d != phi.d:
        raise ParameterDomainError("field and params disagree on the dimension")
    scale = (p + d) / (p * (1 - s) * r ** (d + s * p))
    half = spec.with_abs_tol(0.5 * spec.abs_tol)
    inner = integrate_ball(_symmetrised(phi, x, u0, p), r, d, _tight(half, scale))
    tail = integrate_tail(_symmetrised(phi, x, u0, p), r, d, s, p, bound, half)
    return ExpansionResult(scale * inner.value + tail.value,
                           scale * inner.error + tail.error, r, ExpansionKind.FRACTIONAL)


def bs_expansion(phi: ScalarField, x, r: float, params: OperatorParams,
                 spec: QuadSpec = DEFAULT_SPEC) -> ExpansionResult:
    """Integral of J_p(phi(x+y)-phi(x)) |y|^{-(d+(p-2)s)} (|y|^2 - r^2)^{-s} over |y| > r.

    On the shell r < |y| < 2r the variable t = (|y|^2 - r^2)^{1-s} removes
    the endpoint singularity; beyond 2r the weight is written as
    |y|^{-(d+sp)} (1 - r^2/|y|^2)^{-s} and handed to the tail integrator.
    """
    _check_r(r)
    bound = _tail_bound(phi, params.p)
    x, u0 = _centre(phi, x)
    d, p, s = params.d, params.p, params.s
    if d != phi.d:
        raise ParameterDomainError("field and params disagree on the dimension")
    g = _symmetrised(phi, x, u0, p)
    inv = 1.0 / (1.0 - s)
    t_max = (3.0 * r * r) ** (1.0 - s)

    def shell(t):
        rho = np.sqrt(r * r + t ** inv)
        w = rho ** (-1.0 - (p - 2.0) * s) / (2.0 * rho * (1.0 - s))
        if d == 1:
            vals = g(rho[:, None]) * 2.0
        else:
            vals = np.array([inner_sphere(g, rh, d, 0.05 * spec.abs_tol / (t_max * wi), spec)
                             for rh, wi in zip(rho, w)])
        return w * vals

    half = spec.with_abs_tol(0.5 * spec.abs_tol)
    near = integrate_interval(shell, 0.0, t_max, half)

    def factor(rho):
        return (1.0 - (r / rho) ** 2) ** (-s)

    far = integrate_tail(g, 2.0 * r, d, s, p, bound, half, radial_factor=factor,
                         factor_bound=(0.75) ** (-s))
    return ExpansionResult(near.value + far.value, near.error + far.error, r,
                           ExpansionKind.BUCUR_SQUASSINA)


DEFAULT_PV_RADIUS = 1e-3


ROUNDING_FLOOR = 1e-9


def taylor_radius(params: OperatorParams, abs_tol: float, delta: float) -> float:
    """Radius of the ball on which the second-order Taylor model replaces the
    integrand: its relative error is O(eps^2), so the neglected mass is about
    eps^{p(1-s)+2}."""
    eps = (0.1 * abs_tol) ** (1.0 / (params.p * (1 - params.s) + 2.0))
    return min(eps, 0.5 * delta)


def reference_fraclap(phi: ScalarField, x, params: OperatorParams,
                      spec: QuadSpec = DEFAULT_SPEC, delta: float | None = None,
                      use_taylor: bool = True) -> QuadResult:
    """Principal value integral of J_p(phi(x+y)-phi(x)) |y|^{-(d+sp)}, i.e. -(-Delta)^s_p phi(x).

    Inside B_delta the integrand is replaced by its even part, which is
    absolutely integrable for phi of class C^2 near x; outside B_delta the
    plain integrand is used.  ``delta`` defaults to
    ``spec.singular_split_radius``.

    Close to y = 0 the even part is a second difference of field values and
    drowns in rounding.  When the field carries analytic derivatives and
    the gradient at x is nonzero, the tiny ball B_eps is therefore
    integrated in closed form from the quadratic Taylor model,
    (p-1)|g.y|^{p-2} y^T H y / 2, whose weighted integral equals
    Delta_p phi(x) eps^{p(1-s)} / (2 a_{s,p,d}).
    """
    bound = _tail_bound(phi, params.p)
    x, u0 = _centre(phi, x)
    d, p, s = params.d, params.p, params.s
    if d != phi.d:
        raise ParameterDomainError("field and params disagree on the dimension")
    delta = spec.singular_split_radius if delta is None else delta
    if not delta > 0:
        delta = DEFAULT_PV_RADIUS
    sym = _symmetrised(phi, x, u0, p)
    sigma = d + s * p

    def weighted(y):
        return sym(y) * np.linalg.norm(y, axis=-1) ** (-sigma)

    half = spec.with_abs_tol(0.5 * spec.abs_tol)
    eps, patch = 0.0, 0.0
    if use_taylor and phi.gradient is not None and phi.hessian is not None:
        g = phi.grad(x)
        if np.any(g != 0):
            eps = taylor_radius(params, spec.abs_tol, delta)
            lap = plap_closed_form(g, phi.hess(x), p)
            patch = 0.5 * lap * eps ** (p * (1 - s)) / a_spd(s, p, d)
    # rounding in the second difference sets a floor on the attainable error
    inner = _floor_tolerant(integrate_shell, weighted, eps, delta, d, half)
    tail = integrate_tail(_increment(phi, x, u0, p), delta, d, s, p, bound, half)
    return QuadResult(patch + inner.value + tail.value, inner.error + tail.error)


def reference_plap(phi: ScalarField, x, p: float) -> float:
    """Closed form |grad|^(p-2) (Laplacian + (p-2) <D^2 phi e, e>), e = grad/|grad|."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if phi.gradient is None or phi.hessian is None:
        raise ContractError(f"field {phi.name!r} lacks analytic derivatives")
    return plap_closed_form(phi.grad(x), phi.hess(x), p)


def _quadratic_form_integrand(g, H, p):
    def f(y):
        gy = np.abs(y @ g)
        if p == 2:
            w = np.ones_like(gy)
        else:
            with np.errstate(divide="ignore"):
                w = np.where(gy > 0, gy ** (p - 2), 0.0)
        return (p - 1) * w * np.einsum("ni,ij,nj->n", y, H, y)
    return f


def _kinks(g, d):
    """Polar angles where g . y changes sign (d = 2)."""
    if d != 2 or not np.any(g):
        return ()
    th = math.atan2(g[1], g[0])
    return tuple((th + sgn * 0.5 * math.pi) % (2 * math.pi) for sgn in (1, -1))


def _identity_inputs(gradient, hessian, d):
    g = np.atleast_1d(np.asarray(gradient, dtype=float))
    H = np.atleast_2d(np.asarray(hessian, dtype=float))
    if g.shape != (d,) or H.shape != (d, d):
        raise ParameterDomainError("gradient/hessian shapes do not match d")
    return g, 0.5 * (H + H.T)


_IDENTITY_SPEC = QuadSpec(abs_tol=1e-15, rel_tol=1e-12)


def _floor_tolerant(rule, *args, **kwargs) -> QuadResult:
    """Run a quadrature rule; a stall at the rounding floor still returns its estimate."""
    try:
        return rule(*args, **kwargs)
    except QuadratureError as exc:
        if not exc.error <= ROUNDING_FLOOR * max(1.0, abs(exc.value)):
            raise
        return QuadResult(exc.value, exc.error)


def identity_check_J2(gradient, hessian, r: float, p: float, d: int,
                      spec: QuadSpec = _IDENTITY_SPEC, volume: bool = False) -> dict:
    """Both sides of the sphere (or ball) averaging identity for the p-Laplacian.

    lhs = a_{p,d} * avg over dB_r of (p-1)|g.y|^{p-2} y^T H y
    (ball version carries the extra factor (p+d)/d);
    rhs = Delta_p(g, H) * r^p.
    """
    _check_r(r)
    g, H = _identity_inputs(gradient, hessian, d)
    f = _quadratic_form_integrand(g, H, p)
    if volume:
        res = _floor_tolerant(integrate_ball, f, r, d, spec)
        factor = a_pd(p, d) * (p + d) / d / (ball_volume(d) * r ** d)
    else:
        res = _floor_tolerant(integrate_sphere, f, r, d, spec, breakpoints=_kinks(g, d))
        factor = a_pd(p, d) / (sphere_area(d) * r ** (d - 1))
    lhs = factor * res.value
    rhs = plap_closed_form(g, H, p) * r ** p
    err = factor * res.error
    return {"lhs": lhs, "rhs": rhs, "error": err}


def identity_check_J1(gradient, hessian, r: float, params: OperatorParams,
                      spec: QuadSpec = _IDENTITY_SPEC) -> dict:
    """Both sides of the singular-weight identity:

    a_{s,p,d} int_{B_r} (p-1)|g.y|^{p-2} y^T H y |y|^{-(d+sp)} dy = Delta_p(g, H) r^{p(1-s)}.
    """
    _check_r(r)
    d, p, s = params.d, params.p, params.s
    g, H = _identity_inputs(gradient, hessian, d)
    f = _quadratic_form_integrand(g, H, p)

    def weighted(y):
        return f(y) * np.linalg.norm(y, axis=-1) ** (-(d + s * p))

    res = _floor_tolerant(integrate_ball, weighted, r, d, spec)
    lhs = a_spd(s, p, d) * res.value
    rhs = plap_closed_form(g, H, p) * r ** (p * (1 - s))
    return {"lhs": lhs, "rhs": rhs, "error": a_spd(s, p, d) * res.error}
