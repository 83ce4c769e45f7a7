"""Generating phases on the collar and their boundary structure.

A generating phase is a degree-1 fiber-homogeneous function
psi(x', x_n, xi', xi_n) whose graph relation
    y = grad_xi psi(x, eta),   xi = grad_x psi(x, eta)
encodes a boundary-preserving map.  This module extracts the boundary
phase psi_b(x', xi') = psi(x', 0, xi', *), forms phi = psi - psi_b,
certifies the nondegenerate mixed derivative on the collar, computes the
normal coefficients q+/q- with their sign symmetry, and checks the
transmission condition on all first derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .exceptions import (BoundaryFlatnessError, GraphMismatchError,
                         SignChangeError, SingularAxisError,
                         SingularLocusError)
from .symbols import SymbolFn, TransmissionReport, check_transmission
from .symplectic import (SymplectoMap, CheckReport, collar_samples,
                         cotangential_vars, tangential_vars)


@dataclass
class GeneratingPhase:
    """psi with its derived boundary phase and collar remainder phi.

    Construction runs the boundary-flatness diagnostics: psi restricted to
    x_n = 0 must be independent of xi_n and linear in xi'; the remainder
    phi = psi - psi_b then vanishes identically at x_n = 0.
    """

    psi: ex.Expr
    n: int = 2
    collar_halfwidth: float = 1.0
    name: str = ""
    psi_boundary: ex.Expr = field(init=False)
    phi: ex.Expr = field(init=False)
    boundary_diagnostics: dict = field(init=False)

    def __post_init__(self):
        self.psi_boundary, self.boundary_diagnostics = boundary_phase(
            self.psi, self.n)
        self.phi = ex.sub(self.psi, self.psi_boundary)

    def grad_xi(self) -> list[ex.Expr]:
        names = cotangential_vars(self.n) + ["kn"]
        return [ex.differentiate(self.psi, v) for v in names]

    def grad_x(self) -> list[ex.Expr]:
        names = tangential_vars(self.n) + ["xn"]
        return [ex.differentiate(self.psi, v) for v in names]


def boundary_phase(psi: ex.Expr, n: int = 2, tol: float = 1e-10,
                   xprime_samples: np.ndarray | None = None
                   ) -> tuple[ex.Expr, dict]:
    """psi_b(x', xi') := psi(x', 0, xi', 1), with boundary diagnostics.

    xi_n-independence is verified by re-evaluating psi(x', 0, xi', s) at
    s in {-3, -1, 2, 5}; dependence signals a map that moves the boundary
    and raises BoundaryFlatnessError.  Linearity in xi' (vanishing second
    xi'-derivatives) is verified on the same samples.
    """
    if xprime_samples is None:
        xprime_samples = np.linspace(-1.0, 1.0, 9)
    psi_b = ex.substitute(psi, {"xn": 0.0, "kn": 1.0})
    cvars = cotangential_vars(n)
    restricted = ex.substitute(psi, {"xn": 0.0})

    kn_resid = 0.0
    base = {f"x{i}": xprime_samples for i in range(1, n)}
    xi_samples = np.array([-1.5, -0.4, 0.8, 2.0])
    for kv in np.array([-3.0, -1.0, 2.0, 5.0]):
        env = dict(base)
        for c in cvars:
            env[c] = xi_samples[:, None] if n == 2 else xi_samples[:, None]
        env["kn"] = kv
        envb = {k: v for k, v in env.items() if k != "kn"}
        shape = (len(xi_samples), len(xprime_samples))
        a = np.broadcast_to(ex.eval_array(restricted, env), shape)
        b = np.broadcast_to(ex.eval_array(psi_b, envb), shape)
        kn_resid = max(kn_resid, float(np.max(np.abs(a - b))))
    if kn_resid > tol:
        raise BoundaryFlatnessError(
            f"boundary restriction depends on xi_n (residual {kn_resid:.2e})")

    lin_resid = 0.0
    for c1 in cvars:
        for c2 in cvars:
            d2 = ex.differentiate(ex.differentiate(psi_b, c1), c2)
            env = dict(base)
            for c in cvars:
                env[c] = xi_samples[:, None]
            vals = np.broadcast_to(
                ex.eval_array(d2, env),
                (len(xi_samples), len(xprime_samples)))
            lin_resid = max(lin_resid, float(np.max(np.abs(vals))))

    # psi(x', 0, 0, xi_n) must vanish identically
    zero_resid = 0.0
    at_zero = ex.substitute(restricted, {c: 0.0 for c in cvars})
    for kv in (-2.0, 1.0, 3.0):
        vals = np.abs(np.broadcast_to(
            ex.eval_array(at_zero, {**base, "kn": kv}),
            xprime_samples.shape))
        zero_resid = max(zero_resid, float(np.max(vals)))

    diag = {"xi_n_residual": kn_resid, "linearity_residual": lin_resid,
            "zero_section_residual": zero_resid, "tol": tol,
            "passed": kn_resid <= tol and lin_resid <= tol
            and zero_resid <= tol}
    return psi_b, diag


def check_generating(phase: GeneratingPhase, chi: SymplectoMap,
                     samples=None, tol: float = 1e-8) -> CheckReport:
    """Graph consistency: with y := grad_xi psi(x, eta), the map must send
    (y, eta) to (x, grad_x psi(x, eta)) within tol."""
    if samples is None:
        samples = collar_samples(chi, count=200, seed=13, eta_top=6.0)
    n = phase.n
    tv = tangential_vars(n)
    cv = cotangential_vars(n)
    gxi = phase.grad_xi()
    gx = phase.grad_x()
    worst, worst_p = 0.0, None
    for p in samples:
        # p carries (x, eta) in the shared names
        y = [ex.evaluate(g, p) for g in gxi]
        xi = [ex.evaluate(g, p) for g in gx]
        src = {tv[i]: y[i] for i in range(n - 1)}
        src["xn"] = y[-1]
        for c in cv + ["kn"]:
            src[c] = p[c]
        got = chi.eval_at(src)
        res = 0.0
        for i, t in enumerate(tv):
            res = max(res, abs(got[t] - p[t]))
        res = max(res, abs(got["xn"] - p["xn"]))
        for i, c in enumerate(cv):
            res = max(res, abs(got[c] - xi[i]))
        res = max(res, abs(got["kn"] - xi[-1]))
        if res > worst:
            worst, worst_p = res, p
    rep = CheckReport("generating", worst, tol, worst_p)
    if not rep.passed:
        raise GraphMismatchError(
            f"graph relation fails: residual {worst:.2e} at {worst_p}")
    return rep


def check_nondegeneracy(phase: GeneratingPhase, grid=None,
                        floor: float = 1e-3) -> CheckReport:
    """min |d2 psi / dx_n dxi_n| over a collar grid avoiding xi = 0.

    The mixed derivative must also keep one sign on the grid; a sign
    change raises SignChangeError.
    """
    mixed = ex.differentiate(ex.differentiate(phase.psi, "xn"), "kn")
    if grid is None:
        grid = _collar_grid(phase)
    vals = np.array([ex.evaluate(mixed, p) for p in grid])
    if vals.max() > 0.0 and vals.min() < 0.0:
        raise SignChangeError(
            "mixed normal derivative changes sign on the collar grid")
    m = float(np.min(np.abs(vals)))
    worst = grid[int(np.argmin(np.abs(vals)))]
    rep = CheckReport("nondegeneracy", floor - m, 0.0, worst,
                      details={"min_abs": m, "floor": floor,
                               "sign": float(np.sign(vals[0]))})
    return rep


def _collar_grid(phase: GeneratingPhase, nx: int = 13, nxi: int = 12):
    pts = []
    h = phase.collar_halfwidth
    x1v = np.linspace(-2.0, 2.0, nx)
    xnv = np.linspace(-h, h, 7)
    theta = (np.arange(nxi) + 0.5) * (2 * np.pi / nxi)
    for x1 in x1v:
        for xn in xnv:
            for t in theta:
                for r in (1.0, 4.0, 64.0):
                    pts.append({"x1": float(x1), "xn": float(xn),
                                "k1": float(r * np.cos(t)),
                                "kn": float(r * np.sin(t))})
    return pts


@dataclass
class NormalCoeffs:
    """Normal derivative coefficients of psi on the two covariable rays.

    q_plus/q_minus are expressions in x' equal to d psi/d x_n at
    (x', 0, 0, +-1); kappa is a positive margin with min |q_plus| >= 4k.
    The first-order Taylor remainder in x_n is not computed.
    """

    q_plus: ex.Expr
    q_minus: ex.Expr
    kappa: float
    symmetry_residual: float
    euler_residual: float
    degenerate: bool
    tol: float = 1e-10

    @property
    def passed(self) -> bool:
        return (self.symmetry_residual <= self.tol and self.kappa > 0.0
                and not self.degenerate)


def normal_coeffs(phase: GeneratingPhase,
                  xprime_samples: np.ndarray | None = None,
                  tol: float = 1e-10) -> NormalCoeffs:
    """q+-(x') := d psi/d x_n (x', 0, 0, +-1), with symmetry q+ = -q-.

    Also cross-checks q+- against +-d2 psi/dx_n dxi_n at the same points,
    which is what degree-1 homogeneity in xi_n forces through the Euler
    relation.  Raises SingularAxisError when psi is not smooth on the
    rays (xi' = 0, xi_n = +-1).
    """
    if xprime_samples is None:
        xprime_samples = np.linspace(-1.0, 1.0, 21)
    dpsi = ex.differentiate(phase.psi, "xn")
    zero_prime = {c: 0.0 for c in cotangential_vars(phase.n)}
    try:
        qp = ex.substitute(dpsi, {"xn": 0.0, **zero_prime, "kn": 1.0})
        qm = ex.substitute(dpsi, {"xn": 0.0, **zero_prime, "kn": -1.0})
        base = {f"x{i}": xprime_samples for i in range(1, phase.n)}
        qpv = np.broadcast_to(ex.eval_array(qp, base), xprime_samples.shape)
        qmv = np.broadcast_to(ex.eval_array(qm, base), xprime_samples.shape)
        mixed = ex.differentiate(dpsi, "kn")
        mp = np.broadcast_to(ex.eval_array(
            ex.substitute(mixed, {"xn": 0.0, **zero_prime, "kn": 1.0}), base),
            xprime_samples.shape)
        mm = np.broadcast_to(ex.eval_array(
            ex.substitute(mixed, {"xn": 0.0, **zero_prime, "kn": -1.0}), base),
            xprime_samples.shape)
    except SingularLocusError as err:
        raise SingularAxisError(
            f"psi is not smooth at (xi', xi_n) = (0, +-1): {err}") from err
    sym = float(np.max(np.abs(qpv + qmv)))
    euler = max(float(np.max(np.abs(qpv - mp))),
                float(np.max(np.abs(qmv + mm))))
    kappa = float(np.min(np.abs(qpv))) / 4.0
    degenerate = sym <= tol and float(np.max(np.abs(qpv - qmv))) <= tol
    return NormalCoeffs(qp, qm, kappa, sym, euler, degenerate, tol)


@dataclass
class AdmissibilityReport:
    reports: dict[str, TransmissionReport]
    max_residual: float
    passed: bool


def check_admissibility(phase: GeneratingPhase,
                        max_orders: int = 2) -> AdmissibilityReport:
    """Transmission condition on every first derivative of psi.

    x-derivatives of a degree-1 phase are homogeneous symbols of degree 1,
    xi-derivatives of degree 0; each runs the parity check at orders up to
    max_orders and the results are aggregated.
    """
    reports = {}
    worst = 0.0
    ok = True
    for v in tangential_vars(phase.n) + ["xn"]:
        sym = SymbolFn(ex.differentiate(phase.psi, v), order=1.0,
                       homogeneous_degree=1.0, name=f"d/d{v} psi")
        r = check_transmission(sym, max_orders)
        reports[f"d{v}"] = r
        worst = max(worst, r.max_residual)
        ok = ok and r.passed
    for v in cotangential_vars(phase.n) + ["kn"]:
        sym = SymbolFn(ex.differentiate(phase.psi, v), order=0.0,
                       homogeneous_degree=0.0, name=f"d/d{v} psi")
        r = check_transmission(sym, max_orders)
        reports[f"d{v}"] = r
        worst = max(worst, r.max_residual)
        ok = ok and r.passed
    return AdmissibilityReport(reports, worst, ok)
