"""Validation of boundary-preserving homogeneous maps in collar coordinates.

A map chi sends source collar coordinates (y', y_n, eta', eta_n) to
(x', x_n, xi', xi_n).  Component expressions are written in the shared
variable names x1..x{n-1}, xn (positions) and k1..k{n-1}, kn (covariables),
read as the source point.  Checks: the symplectic matrix identity
J^T O J = O, vanishing of x_n on the boundary, the structural zero blocks
and unimodular sub-blocks of the boundary Jacobian, and extraction of the
induced boundary map with its linear cotangent action.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .exceptions import (BoundaryPreservationError, FiberLinearityError)


def tangential_vars(n: int) -> list[str]:
    return [f"x{i}" for i in range(1, n)]


def cotangential_vars(n: int) -> list[str]:
    return [f"k{i}" for i in range(1, n)]


def source_order(n: int) -> list[str]:
    """Column order of the Jacobian: (y', eta', y_n, eta_n)."""
    return tangential_vars(n) + cotangential_vars(n) + ["xn", "kn"]


@dataclass
class SymplectoMap:
    """Explicit component form of a fiber-homogeneous collar map.

    components maps target names (same naming scheme) to expressions in
    the source variables.  Fiber components must be positively homogeneous
    of degree 1 in the covariables, base components of degree 0.
    """

    components: dict[str, ex.Expr]
    n: int = 2
    collar_halfwidth: float = 1.0
    name: str = ""

    def __post_init__(self):
        need = set(source_order(self.n))
        have = set(self.components)
        if have != need:
            raise ValueError(f"map components must be exactly {sorted(need)}")

    def target_order(self) -> list[str]:
        """Row order of the Jacobian: (x', xi', x_n, xi_n)."""
        return source_order(self.n)

    def eval_at(self, point: dict[str, float]) -> dict[str, float]:
        return {name: ex.evaluate(comp, point)
                for name, comp in self.components.items()}

    def homogeneity_residual(self, points: list[dict[str, float]]) -> float:
        fiber = set(cotangential_vars(self.n)) | {"kn"}
        worst = 0.0
        for name, comp in self.components.items():
            degree = 1.0 if name in fiber else 0.0
            worst = max(worst, ex.homogeneity_residual(
                comp, fiber, degree, points))
        return worst


def collar_samples(chi: SymplectoMap, count: int = 200, seed: int = 7,
                   boundary: bool = False, eta_top: float = 8.0):
    """Deterministic jittered samples in the collar with eta != 0."""
    rng = np.random.default_rng(seed)
    n = chi.n
    pts = []
    for _ in range(count):
        p = {}
        for v in tangential_vars(n):
            p[v] = float(rng.uniform(-1.0, 1.0))
        p["xn"] = 0.0 if boundary else float(
            rng.uniform(-chi.collar_halfwidth, chi.collar_halfwidth))
        scale = float(rng.uniform(0.5, eta_top))
        theta = float(rng.uniform(0.0, 2.0 * np.pi))
        if n == 2:
            p["k1"] = scale * np.cos(theta)
            p["kn"] = scale * np.sin(theta)
            if abs(p["kn"]) < 1e-6 and abs(p["k1"]) < 1e-6:
                p["k1"] = scale
        else:
            vec = rng.normal(size=n)
            vec /= np.linalg.norm(vec)
            for i, v in enumerate(cotangential_vars(n)):
                p[v] = float(scale * vec[i])
            p["kn"] = float(scale * vec[-1])
        pts.append(p)
    return pts


def jacobian(chi: SymplectoMap, point: dict[str, float]) -> np.ndarray:
    """Matrix of first partials, rows (x', xi', x_n, xi_n) by columns
    (y', eta', y_n, eta_n)."""
    cols = source_order(chi.n)
    rows = chi.target_order()
    J = np.empty((len(rows), len(cols)))
    for i, rname in enumerate(rows):
        comp = chi.components[rname]
        for j, cname in enumerate(cols):
            J[i, j] = ex.evaluate(ex.differentiate(comp, cname), point)
    return J


def symplectic_form(n: int) -> np.ndarray:
    """Canonical form matrix in the (q', p', q_n, p_n) ordering used here."""
    m = 2 * n
    O = np.zeros((m, m))
    for i in range(n - 1):
        O[i, n - 1 + i] = -1.0
        O[n - 1 + i, i] = 1.0
    O[m - 2, m - 1] = -1.0
    O[m - 1, m - 2] = 1.0
    return O


@dataclass
class CheckReport:
    name: str
    residual: float
    tol: float
    worst_point: dict[str, float] | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


def check_symplectic(chi: SymplectoMap, samples=None,
                     tol: float = 1e-10) -> CheckReport:
    """Max over samples of ||J^T O J - O||_max."""
    if samples is None:
        samples = collar_samples(chi)
    O = symplectic_form(chi.n)
    worst, worst_p = 0.0, None
    for p in samples:
        J = jacobian(chi, p)
        res = float(np.max(np.abs(J.T @ O @ J - O)))
        if res > worst:
            worst, worst_p = res, p
    return CheckReport("symplectic", worst, tol, worst_p)


def check_boundary_preserving(chi: SymplectoMap, samples=None,
                              tol: float = 1e-12) -> CheckReport:
    """sup |x_n(y', 0, eta)| over boundary samples."""
    if samples is None:
        samples = collar_samples(chi, boundary=True)
    worst, worst_p = 0.0, None
    for p in samples:
        v = abs(ex.evaluate(chi.components["xn"], p))
        if v > worst:
            worst, worst_p = v, p
    return CheckReport("boundary_preserving", worst, tol, worst_p)


@dataclass
class BoundaryMap:
    """Induced boundary map: base diffeo b and linear cotangent action.

    b holds one expression per tangential target in the y' variables only;
    cotangent is the (n-1) x (n-1) matrix of expressions M with
    xi'_boundary = M(y') eta'.
    """

    b: dict[str, ex.Expr]
    cotangent: list[list[ex.Expr]]
    n: int = 2

    def eval_b(self, point: dict[str, float]) -> list[float]:
        return [ex.evaluate(self.b[v], point) for v in tangential_vars(self.n)]

    def eval_cotangent(self, point: dict[str, float]) -> np.ndarray:
        k = self.n - 1
        M = np.empty((k, k))
        for i in range(k):
            for j in range(k):
                M[i, j] = ex.evaluate(self.cotangent[i][j], point)
        return M


def induced_boundary_map(chi: SymplectoMap, samples=None,
                         lin_tol: float = 1e-10,
                         det_tol: float = 1e-8) -> tuple[BoundaryMap, CheckReport]:
    """Restrict (x', xi') to y_n = 0 and package the boundary symplectomorphism.

    Verifies eta_n-independence of both parts, eta'-independence of x',
    linearity of xi' in eta', and unimodularity of the boundary Jacobian.
    Requires check_boundary_preserving to have passed.
    """
    bp = check_boundary_preserving(chi)
    if not bp.passed:
        raise BoundaryPreservationError(
            f"x_n does not vanish on the boundary (sup {bp.residual:.2e})")
    if samples is None:
        samples = collar_samples(chi, boundary=True)
    n = chi.n
    tvars = tangential_vars(n)
    cvars = cotangential_vars(n)

    worst = 0.0
    worst_what = ""
    for tname in tvars:
        xb = ex.substitute(chi.components[tname], {"xn": 0.0})
        for fib in cvars + ["kn"]:
            d = ex.differentiate(xb, fib)
            r = max(abs(ex.evaluate(d, p)) for p in samples)
            if r > worst:
                worst, worst_what = r, f"d{tname}/d{fib} at boundary"
    for cname in cvars:
        xib = ex.substitute(chi.components[cname], {"xn": 0.0})
        r = max(abs(ex.evaluate(ex.differentiate(xib, "kn"), p))
                for p in samples)
        if r > worst:
            worst, worst_what = r, f"d{cname}/dkn at boundary"
        for f1 in cvars:
            for f2 in cvars:
                d2 = ex.differentiate(ex.differentiate(xib, f1), f2)
                r = max(abs(ex.evaluate(d2, p)) for p in samples)
                if r > worst:
                    worst, worst_what = r, f"second eta'-derivative of {cname}"
    if worst > lin_tol:
        raise FiberLinearityError(
            f"boundary map not fiber-trivial: {worst_what} = {worst:.2e}")

    b = {t: ex.substitute(chi.components[t], {"xn": 0.0}) for t in tvars}
    cot = [[ex.substitute(ex.differentiate(chi.components[ci], kj),
                          {"xn": 0.0})
            for kj in cvars] for ci in cvars]
    bm = BoundaryMap(b, cot, n)

    # unimodularity of the composed boundary Jacobian in (y', eta')
    det_worst = 0.0
    det_point = None
    allv = tvars + cvars
    for p in samples:
        k = n - 1
        Jb = np.empty((2 * k, 2 * k))
        for i, t in enumerate(tvars):
            for j, s in enumerate(allv):
                Jb[i, j] = ex.evaluate(
                    ex.differentiate(b[t], s) if s in ex.free_vars(b[t])
                    else ex.const(0.0), p)
        for i, ci in enumerate(cvars):
            xib = ex.substitute(chi.components[ci], {"xn": 0.0})
            for j, s in enumerate(allv):
                Jb[k + i, j] = ex.evaluate(ex.differentiate(xib, s), p)
        r = abs(np.linalg.det(Jb) - 1.0)
        if r > det_worst:
            det_worst, det_point = r, p
    rep = CheckReport("boundary_map", max(worst, det_worst),
                      det_tol, det_point,
                      details={"linearity_residual": worst,
                               "det_residual": det_worst})
    return bm, rep


def check_jacobian_structure(chi: SymplectoMap, samples=None,
                             zero_tol: float = 1e-10,
                             det_tol: float = 1e-8) -> CheckReport:
    """Structural zero blocks and unimodular factors of J at y_n = 0.

    Verifies |dx'/deta_n|, |dxi'/deta_n|, |dx_n/dy'|, |dx_n/deta'|,
    |dx_n/deta_n| <= zero_tol, det of the boundary (y', eta') block
    = 1 +- det_tol, and dx_n/dy_n * dxi_n/deta_n = 1 +- det_tol; reports
    min |dx_n/dy_n| over the collar.
    """
    bp = check_boundary_preserving(chi)
    if not bp.passed:
        raise BoundaryPreservationError(
            f"structure check needs a boundary-preserving map "
            f"(sup |x_n| = {bp.residual:.2e})")
    if samples is None:
        samples = collar_samples(chi, boundary=True)
    n = chi.n
    cols = source_order(n)
    rows = chi.target_order()
    k = n - 1
    zero_pairs = []
    for i in range(k):          # x' rows vs eta_n column
        zero_pairs.append((i, 2 * k + 1))
    for i in range(k):          # xi' rows vs eta_n column
        zero_pairs.append((k + i, 2 * k + 1))
    for j in range(2 * k):      # x_n row vs (y', eta') columns
        zero_pairs.append((2 * k, j))
    zero_pairs.append((2 * k, 2 * k + 1))   # x_n row vs eta_n column

    zmax = 0.0
    det_res = 0.0
    prod_res = 0.0
    worst_p = None
    for p in samples:
        J = jacobian(chi, p)
        z = max(abs(J[i, j]) for i, j in zero_pairs)
        d = abs(np.linalg.det(J[:2 * k, :2 * k]) - 1.0)
        pr = abs(J[2 * k, 2 * k] * J[2 * k + 1, 2 * k + 1] - 1.0)
        if max(z, d, pr) > max(zmax, det_res, prod_res):
            worst_p = p
        zmax = max(zmax, z)
        det_res = max(det_res, d)
        prod_res = max(prod_res, pr)

    dxn = ex.differentiate(chi.components["xn"], "xn")
    interior = collar_samples(chi, count=200, seed=11)
    min_dxn = min(abs(ex.evaluate(dxn, p)) for p in interior)

    residual = max(zmax / zero_tol, det_res / det_tol, prod_res / det_tol)
    return CheckReport("jacobian_structure", residual, 1.0, worst_p,
                       details={"zero_blocks": zmax,
                                "boundary_det_residual": det_res,
                                "normal_product_residual": prod_res,
                                "min_normal_derivative": min_dxn,
                                "row_order": rows, "col_order": cols})
