"""Rapidly decaying test functions and their Fourier transforms.

Convention:  Fu(xi) = integral e^{-i t xi} u(t) dt,  with the inverse
carrying the 1/(2 pi) factor.  Under it the Gaussian exp(-t^2/2) maps to
sqrt(2 pi) exp(-xi^2/2) and the Hermite functions h_j = H_j(t) e^{-t^2/2}
are eigenfunctions with eigenvalue sqrt(2 pi) (-i)^j.

The catalog carries closed-form transforms; the numeric paths (full-line
and half-line) are panel quadratures with oscillation-resolving panel
counts, used both as fallbacks and as cross-oracles for the analytic
formulas.  Half-line transforms of smooth decaying functions fall off to
first order at infinity; measured_decay_exponent fits that exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .exceptions import DerivativeUnavailableError
from .quadrature import integrate_fixed

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass
class SchwartzFn:
    """A test function given in closed form on the line (or half-line).

    analytic_ft / analytic_half_ft are optional closed-form transforms;
    decay certificates (sup |t^l u^(s)| on |t| <= 40) are computed on
    demand and cached.
    """

    name: str
    expr: ex.Expr
    analytic_ft: object | None = None
    analytic_half_ft: object | None = None
    l2_norm: float | None = None
    _deriv_cache: dict = field(default_factory=dict, repr=False)
    _cert: dict = field(default_factory=dict, repr=False)

    def __call__(self, t):
        return ex.eval_array(self.expr, {"t": np.asarray(t, dtype=float)})

    def derivative(self, s: int) -> ex.Expr:
        if s not in self._deriv_cache:
            d = self.expr
            for _ in range(s):
                d = ex.differentiate(d, "t")
            self._deriv_cache[s] = d
        return self._deriv_cache[s]

    def deriv_values(self, s: int, t):
        return ex.eval_array(self.derivative(s),
                             {"t": np.asarray(t, dtype=float)})

    def decay_certificate(self, l_max: int = 6, s_max: int = 6,
                          t_max: float = 40.0) -> dict:
        key = (l_max, s_max, t_max)
        if key not in self._cert:
            t = np.linspace(-t_max, t_max, 3201)
            out = {}
            for s in range(s_max + 1):
                ds = np.abs(self.deriv_values(s, t))
                for l in range(l_max + 1):
                    out[(l, s)] = float(np.max(np.abs(t) ** l * ds))
            self._cert[key] = out
        return self._cert[key]

    def ft_radius(self, tol: float = 1e-16, weight_order: float = 0.0,
                  cap: float = 120.0) -> float:
        """Smallest radius beyond which the (weighted) transform modulus
        stays below tol; used to truncate frequency integrals."""
        xi = np.linspace(0.0, cap, 1201)
        vals = np.abs(self.ft_values(xi))
        w = (1.0 + xi * xi) ** (max(weight_order, 0.0) / 2.0)
        g = vals * w
        above = np.nonzero(g > tol)[0]
        if len(above) == 0:
            return 4.0
        return float(min(cap, xi[above[-1]] + 2.0))

    def ft_values(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.analytic_ft is not None:
            return self.analytic_ft(xi)
        return fourier_transform(self, xi)

    def half_ft_values(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.analytic_half_ft is not None:
            return self.analytic_half_ft(xi)
        return half_line_ft(self, xi)


def _hermite_poly_expr(j: int, t: ex.Expr) -> ex.Expr:
    hm2, hm1 = ex.const(1.0), ex.mul(ex.const(2.0), t)
    if j == 0:
        return hm2
    if j == 1:
        return hm1
    for n in range(1, j):
        cur = ex.sub(ex.mul(ex.const(2.0), t, hm1),
                     ex.mul(ex.const(2.0 * n), hm2))
        hm2, hm1 = hm1, cur
    return hm1


def hermite_fn(j: int) -> SchwartzFn:
    """h_j(t) = H_j(t) exp(-t^2/2) with its eigenfunction transform."""
    t = ex.var("t")
    gauss = ex.exp_(ex.neg(ex.quot(ex.mul(t, t), ex.const(2.0))))
    expr = ex.mul(_hermite_poly_expr(j, t), gauss)

    def ft(xi, _j=j):
        hj = ex.eval_array(expr, {"t": np.asarray(xi, dtype=float)})
        return SQRT_2PI * (-1j) ** _j * hj

    # ||h_j||^2 = 2^j j! sqrt(pi)
    l2 = math.sqrt(2.0**j * math.factorial(j) * math.sqrt(math.pi))
    return SchwartzFn(f"h{j}", expr, analytic_ft=ft, l2_norm=l2)


def exp_decay() -> SchwartzFn:
    """u(t) = exp(-t), used on the half-line; F(e+ u)(xi) = 1/(1 + i xi)."""
    expr = ex.exp_(ex.neg(ex.var("t")))

    def half_ft(xi):
        return 1.0 / (1.0 + 1j * np.asarray(xi, dtype=float))

    return SchwartzFn("exp-decay", expr, analytic_half_ft=half_ft)


def catalog() -> dict[str, SchwartzFn]:
    out = {f"h{j}": hermite_fn(j) for j in range(5)}
    out["exp-decay"] = exp_decay()
    return out


def _support_radius(u: SchwartzFn, tol: float = 1e-18) -> float:
    t = np.linspace(0.0, 45.0, 901)
    vals = np.maximum(np.abs(u(t)), np.abs(u(-t)))
    above = np.nonzero(vals > tol)[0]
    if len(above) == 0:
        return 1.0
    return float(t[above[-1]] + 1.0)


def fourier_transform(u: SchwartzFn, xi, order: int = 12):
    """Numeric Fu(xi) by oscillation-resolving panels on [-T, T]."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    T = _support_radius(u)
    out = np.empty(len(xi), dtype=complex)
    for i, x in enumerate(xi):
        n = max(24, int(np.ceil(2 * T * (abs(x) + 1.0) / (2 * np.pi) * 3)))

        def f(t, _x=x):
            return u(t) * np.exp(-1j * _x * t)

        out[i] = integrate_fixed(f, -T, T, n, order)
    return out


def half_line_ft(u: SchwartzFn, xi, order: int = 12):
    """Numeric F(e+ u)(xi) = integral_0^T e^{-i t xi} u(t) dt."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    T = _support_radius(u)
    out = np.empty(len(xi), dtype=complex)
    for i, x in enumerate(xi):
        n = max(24, int(np.ceil(T * (abs(x) + 1.0) / (2 * np.pi) * 3)))

        def f(t, _x=x):
            return u(t) * np.exp(-1j * _x * t)

        out[i] = integrate_fixed(f, 0.0, T, n, order)
    return out


def measured_decay_exponent(u: SchwartzFn, lo: float = 10.0,
                            hi: float = 1000.0, count: int = 12
                            ) -> tuple[float, float]:
    """Least-squares log-log slope of |F(e+ u)| on [lo, hi], numeric path.

    Returns (slope, limit_constant) where limit_constant is the median of
    |xi| * |F(e+ u)(xi)| over the fit window (the first-order decay
    coefficient, equal to |u(0)| for smooth u).
    """
    xi = np.geomspace(lo, hi, count)
    vals = np.abs(half_line_ft(u, xi))
    A = np.vstack([np.log(xi), np.ones_like(xi)]).T
    sol, *_ = np.linalg.lstsq(A, np.log(vals), rcond=None)
    return float(sol[0]), float(np.median(xi * vals))


def _golden_max(f, a: float, b: float, iters: int = 90) -> float:
    """Golden-section maximum of a scalar function on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        else:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
    return max(fc, fd)


def schwartz_seminorm_expr(u: SchwartzFn, l: int, s: int,
                           t_max: float = 40.0, count: int = 1601) -> float:
    """sup over |t| <= t_max of |t^l u^(s)(t)| for closed-form u.

    A grid scan brackets the maximum and a golden-section refinement pins
    it, so the result matches a high-resolution recomputation to well
    below 1e-6.
    """
    if s > 12:
        raise DerivativeUnavailableError(f"derivative order {s} too high")
    t = np.linspace(-t_max, t_max, count)
    vals = np.abs(t) ** l * np.abs(u.deriv_values(s, t))
    i = int(np.argmax(vals))
    lo = t[max(i - 1, 0)]
    hi = t[min(i + 1, count - 1)]

    def f(x):
        return abs(x) ** l * abs(float(u.deriv_values(s, np.array([x]))[0]))

    return max(float(vals[i]), _golden_max(f, lo, hi))
