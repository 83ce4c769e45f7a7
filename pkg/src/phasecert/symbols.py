"""Symbol-class membership estimation on grids.

Three checks live here:

* Hoermander seminorms  sup |d_xi^alpha d_x^beta a| * <xi>^(|alpha| - m),
  estimated as suprema over pinned grids with refinement cross-checks.
* The transmission (symmetry) condition for positively homogeneous
  symbols: parity relation between the rescaled symbol's derivative
  values at (xi', xi_n) = (0, +1) and (0, -1).
* Membership in the mixed collar classes: after the anisotropic rescale
  (x_n -> x_n/<xi'>, xi_n -> xi_n <xi'>), one-dimensional symbol seminorms
  must grow at most like <xi'>^(m - |alpha|); growth exponents are fitted
  by least squares on geometric ladders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .exceptions import RegressionError, SingularLocusError
from .grids import GridSpec, bracket_ladder, grid_digest

XI_VARS = ("k1", "kn")
X_VARS = ("x1", "xn")


@dataclass
class SymbolFn:
    """A smooth symbol a(x', x_n, xi', xi_n) with a declared class order.

    homogeneous_degree is declared only when a is positively homogeneous in
    (xi', xi_n) away from 0; the declaration is verified on sampled rays at
    construction time, not assumed.  support is an optional box in (x1, xn)
    outside which the symbol vanishes.
    """

    expr: ex.Expr
    order: float
    homogeneous_degree: float | None = None
    support: tuple[tuple[float, float], tuple[float, float]] | None = None
    name: str = ""

    def __post_init__(self):
        if self.homogeneous_degree is not None:
            pts = [{"x1": 0.3, "xn": 0.2, "k1": c, "kn": s}
                   for c, s in _ray_samples(20)]
            res = ex.homogeneity_residual(
                self.expr, {"k1", "kn"}, self.homogeneous_degree, pts)
            if res > 1e-10:
                raise ValueError(
                    f"declared homogeneity degree {self.homogeneous_degree} "
                    f"fails on sampled rays (residual {res:.2e})")

    def derivative(self, alpha: dict[str, int], beta: dict[str, int]) -> ex.Expr:
        orders = {**alpha, **beta}
        return ex.derivative_multi(self.expr, orders)


def _ray_samples(count: int):
    theta = (np.arange(count) + 0.5) * (2 * np.pi / count)
    return zip(np.cos(theta), np.sin(theta))


@dataclass
class SeminormReport:
    alpha: dict[str, int]
    beta: dict[str, int]
    grid: str
    constant: float
    worst_point: dict[str, float]
    budget: float | None = None

    @property
    def passed(self) -> bool:
        return self.budget is None or self.constant <= self.budget

    def as_record(self) -> dict:
        """JSON record in the report schema."""
        return {"check": "seminorm",
                "params": {"alpha": self.alpha, "beta": self.beta,
                           "grid": self.grid, "budget": self.budget},
                "constant": self.constant,
                "worst_point": self.worst_point,
                "pass": self.passed}


def estimate_seminorm(a: SymbolFn, alpha: dict[str, int],
                      beta: dict[str, int], g: GridSpec,
                      budget: float | None = None) -> SeminormReport:
    """Grid supremum of |d_xi^alpha d_x^beta a| * <xi>^(|alpha| - m).

    alpha indexes covariable derivatives (k1, kn), beta position
    derivatives (x1, xn).  The returned worst point attains the supremum.
    """
    bad_a = set(alpha) - set(XI_VARS)
    bad_b = set(beta) - set(X_VARS)
    if bad_a or bad_b:
        raise ValueError(f"misplaced derivative indices: {bad_a | bad_b}")
    d = a.derivative(alpha, beta)
    x1v = g.x1_values()
    xnv = g.xn_values()
    xi = g.xi_points()
    X1 = x1v[:, None, None]
    XN = xnv[None, :, None]
    K1 = xi[None, None, :, 0]
    KN = xi[None, None, :, 1]
    vals = np.abs(np.broadcast_to(
        ex.eval_array(d, {"x1": X1, "xn": XN, "k1": K1, "kn": KN}),
        (len(x1v), len(xnv), len(xi))))
    tot_alpha = sum(alpha.values())
    weight = np.sqrt(1.0 + K1**2 + KN**2) ** (tot_alpha - a.order)
    weighted = vals * weight
    flat = int(np.argmax(weighted))
    i, j, k = np.unravel_index(flat, weighted.shape)
    worst = {"x1": float(x1v[i]), "xn": float(xnv[j]),
             "k1": float(xi[k, 0]), "kn": float(xi[k, 1])}
    return SeminormReport(dict(alpha), dict(beta), g.digest(),
                          float(weighted[i, j, k]), worst, budget)


# ---------------------------------------------------------------------------
# transmission / symmetry condition
# ---------------------------------------------------------------------------

@dataclass
class TransmissionReport:
    order: float
    max_residual: float
    table: list[dict] = field(default_factory=list)
    singular_at_axis: bool = False
    tol: float = 1e-10

    @property
    def passed(self) -> bool:
        return (not self.singular_at_axis) and self.max_residual <= self.tol


def check_transmission(a: SymbolFn, max_orders: int = 2,
                       xprime_samples: np.ndarray | None = None,
                       tol: float = 1e-10) -> TransmissionReport:
    """Parity relation at (xi', xi_n) = (0, +-1) for homogeneous symbols.

    For every x_n-order k, xi'-order al and x'-order be up to max_orders,
    the derivative at (x', 0, 0, +1) must equal (-1)^(m - al) times its
    value at (x', 0, 0, -1), on sampled x'.  Normal derivatives in the
    second copy of the collar variable are not taken: symbols here are
    left-quantized and x-only.  A symbol that is not smooth at the axis
    points is reported as a transmission failure mode (singular_at_axis).
    """
    if a.homogeneous_degree is None:
        raise ValueError("transmission check requires declared homogeneity")
    m = a.homogeneous_degree
    if abs(m - round(m)) > 1e-12:
        raise ValueError("transmission parity needs an integer degree")
    m = int(round(m))
    if xprime_samples is None:
        xprime_samples = np.linspace(-1.0, 1.0, 11)
    report = TransmissionReport(order=m, max_residual=0.0, tol=tol)
    for k in range(max_orders + 1):
        for al in range(max_orders + 1):
            for be in range(max_orders + 1):
                d = ex.derivative_multi(
                    a.expr, {"xn": k, "k1": al, "x1": be})
                sign = -1.0 if (m - al) % 2 else 1.0
                try:
                    plus = ex.eval_array(
                        d, {"x1": xprime_samples, "xn": 0.0,
                            "k1": 0.0, "kn": 1.0})
                    minus = ex.eval_array(
                        d, {"x1": xprime_samples, "xn": 0.0,
                            "k1": 0.0, "kn": -1.0})
                except SingularLocusError:
                    report.singular_at_axis = True
                    report.table.append(
                        {"k": k, "alpha": al, "beta": be,
                         "residual": float("inf"), "singular": True})
                    report.max_residual = float("inf")
                    continue
                resid = float(np.max(np.abs(
                    np.broadcast_to(plus, xprime_samples.shape)
                    - sign * np.broadcast_to(minus, xprime_samples.shape))))
                report.table.append(
                    {"k": k, "alpha": al, "beta": be, "residual": resid,
                     "singular": False})
                report.max_residual = max(report.max_residual, resid)
    return report


# ---------------------------------------------------------------------------
# collar-rescaled class membership
# ---------------------------------------------------------------------------

@dataclass
class BsReport:
    """Fitted growth exponents of the collar-rescaled symbol.

    Membership sweeps internal derivative orders: for every (alpha, beta)
    up to ab_bound, the <xi'>-ladder sups of the rescaled derivative must
    grow no faster than <xi'>^(m - alpha) and its one-dimensional order in
    <xi_n> must stay at most l.  xi_slope and xin_order report the
    (0, 0)-derivative fits; slopes carries the whole table.
    """

    m: float
    l: float
    ab_bound: int
    xi_slope: float | None
    xin_order: float | None
    slopes: dict
    xin_orders: dict
    rung_sups: dict
    tol: float
    identically_zero: bool = False
    grid: str = ""

    @property
    def passed(self) -> bool:
        if self.identically_zero:
            return True
        for (al, be), slope in self.slopes.items():
            if slope is not None and slope > self.m - al + self.tol:
                return False
        for order in self.xin_orders.values():
            if order is not None and order > self.l + self.tol:
                return False
        return True

    def csv_rows(self) -> list[dict]:
        """One row per (alpha, beta, rung) with the fitted context."""
        rows = []
        rungs = self.rung_sups.get("rungs", [])
        sups = self.rung_sups.get("V", [])
        for al, be in sorted(self.slopes):
            slope = self.slopes[(al, be)]
            for i, r in enumerate(rungs):
                rows.append({"alpha": al, "beta": be, "rung": r,
                             "sup": sups[i] if (al, be) == (0, 0) and
                             i < len(sups) else "",
                             "slope": "" if slope is None else slope,
                             "target": self.m - al})
        return rows


def _lstsq_slope(logx: np.ndarray, logy: np.ndarray) -> float:
    A = np.vstack([logx, np.ones_like(logx)]).T
    sol, *_ = np.linalg.lstsq(A, logy, rcond=None)
    return float(sol[0])


def check_bs_membership(a, m: float, l: float,
                        ab_bound: int = 1,
                        rung_top: float = 256.0,
                        xin_top: float = 64.0,
                        deriv_bound: int = 2,
                        xprime_samples: np.ndarray | None = None,
                        xn_box: tuple[float, float] = (-1.0, 1.0),
                        xn_count: int = 33,
                        tol: float = 0.1,
                        direction_sign: int = 1) -> BsReport:
    """Fit growth exponents of the rescaled symbol on geometric ladders.

    `a` is a SymbolFn, a bare Expr, or an (re, im) pair of Exprs (the
    modulus is swept).  For each <xi'> rung r the symbol is evaluated at
    (x', x_n/r, xi', xi_n r) with xi' = sign * sqrt(r^2 - 1); normal
    derivatives of the rescale pick up the exact factor r^(gamma - delta),
    and tangential derivative orders (alpha, beta) each run up to ab_bound.
    """
    if isinstance(a, SymbolFn):
        parts = [a.expr]
    elif isinstance(a, ex.Expr):
        parts = [a]
    else:
        parts = list(a)
    rungs = bracket_ladder(rung_top)
    if len(rungs) < 4:
        raise RegressionError("need at least 4 <xi'> rungs for the fit")
    xin_rungs = bracket_ladder(xin_top)
    if xprime_samples is None:
        xprime_samples = np.linspace(-1.0, 1.0, 7)

    xn_vals = np.linspace(*xn_box, xn_count)
    # shell values of xi_n with <xi_n> equal to each rung (both signs)
    shells = []
    for R in xin_rungs:
        rho = np.sqrt(max(R * R - 1.0, 0.0))
        shells.append(np.array([rho, -rho]) if rho else np.array([0.0]))

    combos = [(al, be) for al in range(ab_bound + 1)
              for be in range(ab_bound + 1)]
    derivs = {}
    for al, be in combos:
        for g in range(deriv_bound + 1):
            for dlt in range(deriv_bound + 1):
                derivs[(al, be, g, dlt)] = [
                    ex.derivative_multi(
                        p, {"kn": g, "xn": dlt, "k1": al, "x1": be})
                    for p in parts]

    sups = {key: np.zeros((len(rungs), len(xin_rungs))) for key in derivs}
    X1 = xprime_samples[:, None, None]
    XN = xn_vals[None, :, None]
    for i, r in enumerate(rungs):
        k1v = direction_sign * float(np.sqrt(max(r * r - 1.0, 0.0)))
        for j, shell in enumerate(shells):
            KN = shell[None, None, :] * r
            env = {"x1": X1, "xn": XN / r, "k1": k1v, "kn": KN}
            shape = (len(xprime_samples), len(xn_vals), len(shell))
            for key, dparts in derivs.items():
                g, dlt = key[2], key[3]
                mods = [np.abs(np.broadcast_to(ex.eval_array(p, env), shape))
                        for p in dparts]
                mod = np.sqrt(sum(v * v for v in mods)) if len(mods) > 1 \
                    else mods[0]
                sups[key][i, j] = float(np.max(mod)) * r ** (g - dlt)

    floor = 1e-14
    slopes: dict = {}
    xin_orders: dict = {}
    rung_sups: dict = {"rungs": rungs.tolist()}
    all_zero = True
    for al, be in combos:
        V = np.zeros(len(rungs))
        for g in range(deriv_bound + 1):
            for dlt in range(deriv_bound + 1):
                S = sups[(al, be, g, dlt)]
                V = np.maximum(V, (S * xin_rungs[None, :] ** (g - l)
                                   ).max(axis=1))
        live = V > floor
        if not live.any():
            slopes[(al, be)] = None
            xin_orders[(al, be)] = None
            continue
        all_zero = False
        if live.sum() < 4:
            raise RegressionError(
                f"fewer than 4 non-vanishing rungs at orders {(al, be)}")
        slopes[(al, be)] = _lstsq_slope(np.log(rungs[live]),
                                        np.log(V[live]))
        if (al, be) == (0, 0):
            rung_sups["V"] = V.tolist()
        # <xi_n>-order: per gamma, normalize out the certified growth
        order = None
        for g in range(deriv_bound + 1):
            W = np.zeros(len(xin_rungs))
            for dlt in range(deriv_bound + 1):
                S = sups[(al, be, g, dlt)] / rungs[:, None] ** (m - al)
                W = np.maximum(W, S.max(axis=0))
            ok = W > floor
            if ok.sum() >= 4:
                sl = _lstsq_slope(np.log(xin_rungs[ok]), np.log(W[ok])) + g
                order = sl if order is None else max(order, sl)
        xin_orders[(al, be)] = order

    if all_zero:
        return BsReport(m, l, ab_bound, None, None, slopes, xin_orders,
                        {}, tol, identically_zero=True)
    return BsReport(m, l, ab_bound, slopes.get((0, 0)),
                    xin_orders.get((0, 0)), slopes, xin_orders, rung_sups,
                    tol, grid=grid_digest(rungs=rungs, xin=xin_rungs,
                                          x1=xprime_samples, xn=xn_vals))
