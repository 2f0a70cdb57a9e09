"""Adaptive quadrature on intervals, spheres, balls and exterior regions.

Every integrand receives an ``(n, d)`` array of points and returns ``n``
values.  One-dimensional rules are globally adaptive Gauss-Kronrod (G7/K15)
with vectorised panel evaluation; spheres and balls in d = 2, 3 are nested
tensor products of that rule in polar / spherical coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ContractError, ParameterDomainError, QuadratureError
from .kernel import sphere_area

# Kronrod 15-point abscissae on [0, 1] half of [-1, 1]; odd indices are the
# Gauss 7-point nodes.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])            # 15 nodes, ascending
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5]] = _WG[:3]
_GW[7] = _WG[3]
_GW[[9, 11, 13]] = _WG[2::-1]

_EPS = np.finfo(float).eps

SUPPORTED_DIMS = (1, 2, 3)


class QuadResult(NamedTuple):
    value: float
    error: float


@dataclass(frozen=True)
class QuadSpec:
    """Tolerances for the adaptive rules.

    ``singular_split_radius`` is the inner radius below which principal
    value integrands are evaluated in symmetrised form.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 20000
    singular_split_radius: float = 1e-3

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ParameterDomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ParameterDomainError("max_subdivisions must be >= 1")
        if self.singular_split_radius < 0:
            raise ParameterDomainError("singular_split_radius must be >= 0")

    def scaled(self, factor: float) -> "QuadSpec":
        return QuadSpec(self.abs_tol * factor, self.rel_tol * factor,
                        self.max_subdivisions, self.singular_split_radius)

    def with_abs_tol(self, abs_tol: float) -> "QuadSpec":
        return QuadSpec(abs_tol, self.rel_tol, self.max_subdivisions,
                        self.singular_split_radius)


DEFAULT_SPEC = QuadSpec()


def ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _panels(f, a, b):
    """K15 value, |K15 - G7| and K15 of |f| for every panel [a_i, b_i]."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    k = half * (fx @ _KW)
    g = half * (fx @ _GW)
    absk = np.abs(half) * (np.abs(fx) @ _KW)
    return k, np.abs(k - g), absk


def gauss_kronrod(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                  abs_tol: float = 1e-12, rel_tol: float = 1e-10,
                  max_subdivisions: int = 20000,
                  breakpoints: Sequence[float] = ()) -> QuadResult:
    """Globally adaptive G7/K15 integration of a vectorised 1D integrand.

    Panels whose error estimate exceeds ``tol / n_panels`` are bisected in
    one batch per sweep, so each sweep costs a single call to ``f``.  The
    integrand is never evaluated at panel end points, which makes integrable
    end point singularities admissible.
    """
    if b == a:
        return QuadResult(0.0, 0.0)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ParameterDomainError("gauss_kronrod needs finite limits")
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    cuts = sorted({float(a), float(b), *(float(t) for t in breakpoints if a < t < b)})
    lo = np.array(cuts[:-1])
    hi = np.array(cuts[1:])
    val, err, absval = _panels(f, lo, hi)

    while True:
        err_eff = np.maximum(err, 50 * _EPS * absval)
        total = float(val.sum())
        total_err = float(err_eff.sum())
        tol = max(abs_tol, rel_tol * abs(total))
        if total_err <= tol:
            return QuadResult(sign * total, total_err)
        n = len(val)
        # panels may shrink towards any point, including an end point at 0
        resolvable = (hi - lo) > 64 * _EPS * np.maximum(np.abs(lo), np.abs(hi)) + 1e-300
        split = (err_eff > tol / n) & resolvable
        nsplit = int(split.sum())
        if nsplit == 0 or n + nsplit > max_subdivisions:
            raise QuadratureError(
                f"adaptive quadrature on [{a:g}, {b:g}] stalled at error "
                f"{total_err:.3e} > {tol:.3e} with {n} panels",
                sign * total, total_err)
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        v2, e2, a2 = _panels(f, new_lo, new_hi)
        keep = ~split
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        val = np.concatenate([val[keep], v2])
        err = np.concatenate([err[keep], e2])
        absval = np.concatenate([absval[keep], a2])


def integrate_interval(f, a, b, spec: QuadSpec = DEFAULT_SPEC, breakpoints=()) -> QuadResult:
    return gauss_kronrod(f, a, b, spec.abs_tol, spec.rel_tol,
                         spec.max_subdivisions, breakpoints)


def _check_dim(d):
    if d not in SUPPORTED_DIMS:
        raise ParameterDomainError(f"dimension d={d} not supported (use 1, 2 or 3)")


def _vectorise(values, shape):
    return np.asarray(values, dtype=float).reshape(shape)


def unit_sphere_integral(f, rho, d: int, spec: QuadSpec = DEFAULT_SPEC,
                         breakpoints=()) -> QuadResult:
    """Integral of ``omega -> f(rho * omega)`` over the unit sphere S^{d-1}.

    ``breakpoints`` are extra polar angles (d = 2) where the integrand has
    kinks; they are ignored in other dimensions.
    """
    _check_dim(d)
    if d == 1:
        pts = np.array([[rho], [-rho]])
        v = _vectorise(f(pts), (2,))
        return QuadResult(float(v[0] + v[1]), 0.0)
    if d == 2:
        def g(theta):
            pts = rho * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            return _vectorise(f(pts), theta.shape)

        brk = [0.5 * math.pi, math.pi, 1.5 * math.pi, *breakpoints]
        return integrate_interval(g, 0.0, 2 * math.pi, spec, brk)

    inner_spec = spec.scaled(0.1)

    def outer(theta):
        out = np.empty_like(theta)
        for i, th in enumerate(theta):
            st, ct = math.sin(th), math.cos(th)

            def g(phi):
                pts = rho * np.stack([ct * np.ones_like(phi), st * np.cos(phi),
                                      st * np.sin(phi)], axis=-1)
                return _vectorise(f(pts), phi.shape)

            out[i] = st * _best_effort(integrate_interval, g, 0.0, 2 * math.pi, inner_spec,
                                       [0.5 * math.pi, math.pi, 1.5 * math.pi])
        return out

    return integrate_interval(outer, 0.0, math.pi, spec, [0.5 * math.pi])


def _best_effort(rule, *args):
    """Value of a nested inner rule, keeping the best estimate if it stalls.

    Inner integrals near a singular point are dominated by rounding in the
    integrand; their contribution to the outer integral is negligible, so
    the outer rule's own error control stays meaningful.
    """
    try:
        return rule(*args).value
    except QuadratureError as exc:
        return exc.value


def inner_sphere(f, rho, d, abs_tol, spec: QuadSpec) -> float:
    """Best-effort unit sphere integral used inside outer radial rules."""
    return _best_effort(unit_sphere_integral, f, rho, d,
                        spec.with_abs_tol(min(abs_tol, 1e300)))


def integrate_sphere(f, r: float, d: int, spec: QuadSpec = DEFAULT_SPEC,
                     breakpoints=()) -> QuadResult:
    """Surface integral of f over the sphere of radius r (not averaged).

    In d = 1 the sphere is the two-point set {-r, r} with counting measure.
    """
    if r <= 0:
        raise ParameterDomainError("sphere radius must be positive")
    scale = r ** (d - 1)
    try:
        res = unit_sphere_integral(f, r, d, spec.with_abs_tol(spec.abs_tol / max(scale, 1e-300)),
                                   breakpoints)
    except QuadratureError as exc:
        raise QuadratureError(str(exc), exc.value * scale, exc.error * scale) from None
    return QuadResult(res.value * scale, res.error * scale)


def integrate_ball(f, r: float, d: int, spec: QuadSpec = DEFAULT_SPEC) -> QuadResult:
    """Volume integral of f over B_r; the origin may carry an integrable singularity."""
    return integrate_shell(f, 0.0, r, d, spec)


def integrate_shell(f, r_in: float, r_out: float, d: int,
                    spec: QuadSpec = DEFAULT_SPEC) -> QuadResult:
    """Volume integral of f over r_in < |y| < r_out."""
    _check_dim(d)
    if not 0 <= r_in < r_out:
        raise ParameterDomainError("need 0 <= r_in < r_out")
    if d == 1:
        def g(rho):
            v = f(np.concatenate([rho, -rho])[:, None])
            v = _vectorise(v, (2 * rho.size,))
            return v[:rho.size] + v[rho.size:]

        return integrate_interval(g, r_in, r_out, spec)

    # error budget c / rho^{d-1} for the sphere integral at radius rho
    c = 0.1 * spec.abs_tol / (r_out - r_in)

    def radial(rho):
        out = np.empty_like(rho)
        for i, rh in enumerate(rho):
            out[i] = rh ** (d - 1) * inner_sphere(f, rh, d, c / rh ** (d - 1), spec)
        return out

    return integrate_interval(radial, r_in, r_out, spec)


def tail_radius(r_in: float, d: int, sigma: float, bound: float, abs_tol: float) -> float:
    """Radius beyond which ``bound * |y|^{-(d+sigma)}`` integrates below abs_tol / 2."""
    if bound <= 0:
        return 2.0 * r_in
    rho = (2.0 * bound * sphere_area(d) / (sigma * abs_tol)) ** (1.0 / sigma)
    return float(min(max(rho, 2.0 * r_in), 1e150))


def integrate_tail(f, r_in: float, d: int, s: float, p: float, bound_f: float | None,
                   spec: QuadSpec = DEFAULT_SPEC, radial_factor=None,
                   factor_bound: float = 1.0) -> QuadResult:
    """Integral of ``f(y) * radial_factor(|y|) * |y|^{-(d+sp)}`` over |y| > r_in.

    The region r_in < |y| < rho_max is integrated adaptively after the
    substitution ``|y| = r_in * t^{-1/(sp)}``, which turns the radial measure
    into Lebesgue measure on t.  rho_max is chosen so that the analytic bound
    ``bound_f * factor_bound * |S^{d-1}| * rho_max^{-sp} / (sp)`` of the
    neglected part is at most abs_tol / 2; that bound is added to the error.
    """
    _check_dim(d)
    if bound_f is None:
        raise ContractError("integrate_tail needs a sup bound for the integrand")
    if r_in <= 0:
        raise ParameterDomainError("inner radius must be positive")
    sigma = s * p
    bound = float(bound_f) * float(factor_bound)
    rho_max = tail_radius(r_in, d, sigma, bound, spec.abs_tol)
    remainder = bound * sphere_area(d) * rho_max ** (-sigma) / sigma
    pref = r_in ** (-sigma) / sigma
    t_min = (r_in / rho_max) ** sigma
    t_spec = QuadSpec(0.5 * spec.abs_tol / pref, spec.rel_tol,
                      spec.max_subdivisions, spec.singular_split_radius)
    inner_tol = 0.1 * t_spec.abs_tol / (1.0 - t_min)

    def g(t):
        rho = r_in * t ** (-1.0 / sigma)
        out = np.empty_like(t)
        if d == 1:
            v = _vectorise(f(np.concatenate([rho, -rho])[:, None]), (2 * t.size,))
            out = v[:t.size] + v[t.size:]
        else:
            for i, rh in enumerate(rho):
                out[i] = inner_sphere(f, rh, d, inner_tol, spec)
        if radial_factor is not None:
            out = out * radial_factor(rho)
        return out

    res = integrate_interval(g, t_min, 1.0, t_spec)
    return QuadResult(pref * res.value, pref * res.error + remainder)
