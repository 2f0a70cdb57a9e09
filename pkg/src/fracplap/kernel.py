"""Scalar building blocks: J_p, the two-sided difference quotient D_y,
normalisation constants, rate exponents and the summability scale S_nu."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import ParameterDomainError


@dataclass(frozen=True)
class OperatorParams:
    """Space dimension ``d``, nonlinearity ``p`` and fractional order ``s``."""

    d: int
    p: float
    s: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ParameterDomainError(f"d must be a positive integer, got {self.d}")
        if not self.p > 1:
            raise ParameterDomainError(f"p must exceed 1, got {self.p}")
        if not 0 < self.s < 1:
            raise ParameterDomainError(f"s must lie in (0, 1), got {self.s}")

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def kernel_exponent(self) -> float:
        """Exponent d + sp of the singular kernel."""
        return self.d + self.s * self.p


class RegimeTag(str, Enum):
    UNIFORM = "Uniform"
    NONVANISHING_GRADIENT = "NonvanishingGradient"


@dataclass(frozen=True)
class RateRegime:
    """Which rate result applies at the evaluation point.

    ``epsilon`` is the margin subtracted from the supremum of an open range
    of admissible exponents.
    """

    tag: RegimeTag = RegimeTag.UNIFORM
    epsilon: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "tag", RegimeTag(self.tag))
        if not self.epsilon > 0:
            raise ParameterDomainError("epsilon must be positive")


def _check_p(p):
    if not p > 1:
        raise ParameterDomainError(f"p must exceed 1, got {p}")


def jp(xi, p):
    """|xi|^(p-2) xi, extended by 0 at xi = 0.  Works on scalars and arrays."""
    _check_p(p)
    xi = np.asarray(xi, dtype=float)
    if p == 2:
        out = xi.copy()
    elif p == 3:
        out = np.abs(xi) * xi
    elif p > 2:
        out = np.abs(xi) ** (p - 2) * xi
    else:
        a = np.abs(xi)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(a > 0, np.sign(xi) * a ** (p - 1), 0.0)
    return float(out) if out.ndim == 0 else out


def _as_point(x, d=None):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if d is not None and x.shape[-1] != d:
        raise ParameterDomainError(f"point has dimension {x.shape[-1]}, expected {d}")
    return x


def dy_operator(phi, x, y, p):
    """(J_p(phi(x+y) - phi(x)) + J_p(phi(x-y) - phi(x))) / |y|^p.

    ``phi`` is a ScalarField or any callable taking an ``(n, d)`` array.
    """
    x = _as_point(x)
    y = _as_point(y, x.size)
    ny = float(np.linalg.norm(y))
    if ny == 0:
        raise ParameterDomainError("dy_operator needs y != 0")
    vals = np.asarray(phi(np.stack([x, x + y, x - y])), dtype=float).reshape(3)
    return (jp(vals[1] - vals[0], p) + jp(vals[2] - vals[0], p)) / ny ** p


@lru_cache(maxsize=256)
def sphere_average_abs_y1_pow(p: float, d: int) -> float:
    """Average of |y_1|^p over the unit sphere of R^d."""
    _check_p(p)
    if d < 1:
        raise ParameterDomainError("d must be >= 1")
    if d == 1:
        return 1.0
    k = d - 2

    def num(t):
        return abs(math.cos(t)) ** p * math.sin(t) ** k

    def den(t):
        return math.sin(t) ** k

    opts = dict(epsabs=1e-13, epsrel=1e-13, limit=200)
    top = 2 * integrate.quad(num, 0.0, 0.5 * math.pi, **opts)[0]
    bottom = math.pi if k == 0 else integrate.quad(den, 0.0, math.pi, **opts)[0]
    return top / bottom


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d; counting measure (2) for d = 1."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def kappa_pd(p: float, d: int) -> float:
    return 2.0 / sphere_average_abs_y1_pow(p, d)


def a_pd(p: float, d: int) -> float:
    return 1.0 / sphere_average_abs_y1_pow(p, d)


def a_spd(s: float, p: float, d: int) -> float:
    if not 0 < s < 1:
        raise ParameterDomainError("s must lie in (0, 1)")
    total = sphere_average_abs_y1_pow(p, d) * sphere_area(d)
    return p * (1.0 - s) / total


def gamma_exponent(p: float, regime: RateRegime = RateRegime(), dim_one: bool = False) -> float:
    """Rate exponent of the local expansions.

    ``dim_one`` applies the one-dimensional result (order 2 at points of
    nonvanishing gradient for every p > 1).
    """
    _check_p(p)
    tag = RegimeTag(regime.tag)
    if tag is RegimeTag.UNIFORM:
        if p < 2:
            raise ParameterDomainError("no uniform rate is available for p < 2")
        if p == 2 or p >= 4:
            return 2.0
        return p - 2.0
    if dim_one or p == 2 or p >= 3:
        return 2.0
    g = p - 1.0 - regime.epsilon
    if g <= 0:
        raise ParameterDomainError(
            f"epsilon={regime.epsilon} leaves no positive exponent below p-1={p - 1:g}")
    return g


def s_nu(nu: float, r: float, s: float, p: float) -> float:
    """Summability scale: r^(nu-sp) below sp, |log r| at sp, 1 above."""
    if not nu > 0:
        raise ParameterDomainError("nu must be positive")
    if not 0 < r < 1:
        raise ParameterDomainError("r must lie in (0, 1)")
    sp = s * p
    if math.isclose(nu, sp, rel_tol=1e-12, abs_tol=1e-14):
        return abs(math.log(r))
    if nu < sp:
        return r ** (nu - sp)
    return 1.0


def plap_closed_form(gradient, hessian, p: float) -> float:
    """|g|^(p-2) (tr H + (p-2) <H g/|g|, g/|g|>), zero when g = 0."""
    g = np.atleast_1d(np.asarray(gradient, dtype=float))
    H = np.atleast_2d(np.asarray(hessian, dtype=float))
    ng = float(np.linalg.norm(g))
    if ng == 0:
        if p > 2:
            return 0.0
        if p == 2:
            return float(np.trace(H))
        raise ParameterDomainError("p-Laplacian undefined at a zero gradient for p < 2")
    e = g / ng
    return ng ** (p - 2) * (float(np.trace(H)) + (p - 2) * float(e @ H @ e))
