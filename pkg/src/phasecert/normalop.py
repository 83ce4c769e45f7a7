"""Application of the frozen normal-direction operators by quadrature.

With (x', xi') frozen, the operator acts on one variable:

    (A u)(x_n)  = 1/(2 pi) integral e^{i phi(x_n, xi_n)} a(x_n, xi_n)
                  Fu(xi_n) d xi_n,
    (A+ u)(x_n) = the same with F(e+ u) in place of Fu, evaluated only at
                  x_n > 0,

where phi = psi - psi_b.  Schwartz transforms give absolutely convergent
integrands handled by direct adaptive panels; half-line transforms decay
only to first order, so unless the amplitude supplies decay of order
<= -1.5 in total, the integral runs through the smooth-cutoff Richardson
mode.  Evaluation at x_n = 0 is excluded for the truncated operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .exceptions import DecayClassError
from .phase import GeneratingPhase
from .quadrature import cutoff_richardson, integrate_adaptive
from .schwartz import SchwartzFn
from .symbols import SymbolFn


@dataclass
class QuadratureSpec:
    mode: str = "auto"            # auto | direct | cutoff
    panel_tol: float = 1e-9
    order: int = 12
    max_doubles: int = 12
    cutoff_radius: float = 256.0
    direct_radius_cap: float = 4096.0


@dataclass
class NormalOperatorSpec:
    """Frozen normal-direction operator: phase + amplitude + (x', xi').

    A declared amplitude support box must sit inside the phase's collar
    (the region where the nondegenerate mixed derivative is certified).
    """

    phase: GeneratingPhase
    amplitude: SymbolFn
    xprime: float = 0.3
    xi_prime: float = 1.0
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    name: str = ""

    def __post_init__(self):
        sup = self.amplitude.support
        if sup is not None:
            lo, hi = sup[1]
            h = self.phase.collar_halfwidth
            if lo < -h - 1e-12 or hi > h + 1e-12:
                raise ValueError(
                    f"amplitude support [{lo}, {hi}] exceeds the collar "
                    f"half-width {h}")

    def frozen_phi(self) -> ex.Expr:
        return ex.substitute(self.phase.phi,
                             {"x1": self.xprime, "k1": self.xi_prime})

    def frozen_amplitude(self) -> ex.Expr:
        return ex.substitute(self.amplitude.expr,
                             {"x1": self.xprime, "k1": self.xi_prime})


def decay_order(spec: NormalOperatorSpec, half_line: bool) -> float:
    """Total integrand decay order: amplitude order plus transform decay
    (-inf for Schwartz, -1 for half-line transforms)."""
    if not half_line:
        return -math.inf
    return spec.amplitude.order - 1.0


def _choose_mode(spec: NormalOperatorSpec, half_line: bool) -> str:
    mode = spec.quadrature.mode
    if mode != "auto":
        return mode
    return "direct" if decay_order(spec, half_line) <= -1.5 else "cutoff"


def _integrand_factory(spec: NormalOperatorSpec, ft,
                       xn_grid: np.ndarray):
    phi = spec.frozen_phi()
    amp = spec.frozen_amplitude()
    xn = np.asarray(xn_grid, dtype=float)[:, None]

    def f(nodes: np.ndarray) -> np.ndarray:
        env = {"xn": xn, "kn": nodes[None, :]}
        shape = (len(xn_grid), len(nodes))
        ph = np.broadcast_to(ex.eval_array(phi, env), shape)
        am = np.broadcast_to(ex.eval_array(amp, env), shape)
        return np.exp(1j * ph) * am * ft(nodes)[None, :] / (2.0 * np.pi)

    return f


def apply_normal_op(spec: NormalOperatorSpec, u: SchwartzFn,
                    xn_grid) -> tuple[np.ndarray, np.ndarray]:
    """Sample (A u) on xn_grid; returns (values, per-point error estimate).

    u must have a full-line transform (catalog analytic or numeric); the
    integrand is then absolutely convergent and handled directly, with the
    truncation radius taken from the transform's decay against the
    amplitude's growth order.
    """
    q = spec.quadrature
    xn_grid = np.asarray(xn_grid, dtype=float)
    R = u.ft_radius(tol=1e-16, weight_order=spec.amplitude.order)
    f = _integrand_factory(spec, u.ft_values, xn_grid)
    n0 = max(16, int(np.ceil(
        2 * R * (np.max(np.abs(xn_grid)) + 2.0) / (2 * np.pi))))
    val, err, _ = integrate_adaptive(f, -R, R, q.panel_tol, n0, q.order,
                                     q.max_doubles)
    return val, err


def apply_truncated_op(spec: NormalOperatorSpec, u: SchwartzFn,
                       xn_grid) -> tuple[np.ndarray, np.ndarray]:
    """Sample (A+ u) = restriction of the half-line-transform integral.

    Requires every x_n > 0 (the jump at 0 is not certified).  Mode is
    selected from the total decay order unless pinned by the spec.
    """
    q = spec.quadrature
    xn_grid = np.asarray(xn_grid, dtype=float)
    if np.any(xn_grid <= 0.0):
        raise ValueError("truncated operator evaluates on x_n > 0 only")
    mode = _choose_mode(spec, half_line=True)
    f = _integrand_factory(spec, u.half_ft_values, xn_grid)
    if mode == "direct":
        d = decay_order(spec, half_line=True)
        if d > -1.5:
            raise DecayClassError(
                f"direct mode needs decay <= -1.5, got {d:g}")
        # truncation so that the algebraic tail sits below the panel tol
        R = min(q.direct_radius_cap,
                max(64.0, (10.0 / q.panel_tol) ** (-1.0 / (d + 1.0))))
        n0 = max(32, int(np.ceil(
            2 * R * (np.max(xn_grid) + 2.0) / (2 * np.pi))))
        val, err, _ = integrate_adaptive(f, -R, R, q.panel_tol, n0, q.order,
                                         q.max_doubles)
        return val, err
    if mode != "cutoff":
        raise DecayClassError(f"unknown quadrature mode {mode!r}")
    rate = (np.max(np.abs(xn_grid)) + 2.0) / (2.0 * np.pi)
    val, err, _ = cutoff_richardson(f, q.cutoff_radius,
                                    panels_per_unit=1.5 * rate,
                                    order=q.order)
    return val, err


def l2_growth_factor(spec: NormalOperatorSpec) -> float:
    """Worst normal dilation factor of the frozen phase at the boundary.

    |q+(x')| is the boundary stretching rate in the normal direction; the
    L2 norm of a unit-Jacobian dilation by c scales by c^(-1/2), so the
    smoke bound uses max(sqrt(q), 1/sqrt(q)).
    """
    from .phase import normal_coeffs
    nc = normal_coeffs(spec.phase,
                       xprime_samples=np.array([spec.xprime]))
    qv = abs(ex.evaluate(nc.q_plus, {"x1": spec.xprime}))
    return max(math.sqrt(qv), 1.0 / math.sqrt(qv))


def l2_smoke_check(spec: NormalOperatorSpec, u: SchwartzFn,
                   slack: float = 0.05) -> dict:
    """Discrete L2 bound: ||A u||_2 over |x_n| <= 6 against
    (1 + slack) ||u||_2 times the dilation factor."""
    xn = np.linspace(-6.0, 6.0, 241)
    vals, _ = apply_normal_op(spec, u, xn)
    h = xn[1] - xn[0]
    out_norm = float(np.sqrt(np.sum(np.abs(vals) ** 2) * h))
    t = np.linspace(-40.0, 40.0, 4001)
    in_norm = float(np.sqrt(np.trapezoid(np.abs(u(t)) ** 2, t)))
    bound = (1.0 + slack) * in_norm * l2_growth_factor(spec)
    return {"output_norm": out_norm, "input_norm": in_norm,
            "bound": bound, "passed": out_norm <= bound}
