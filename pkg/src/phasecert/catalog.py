"""Built-in scenarios: positive examples and constructed violations.

Scenario files are plain JSON; expression strings use the grammar from
:mod:`phasecert.grammar`.  Map components are written in the shared
variable names (x1, xn, k1, kn) read as the source point of the map.

Positive entries:
  identity          flat phase x.k with the identity map
  dilation          normal dilation by exp(g(x')), g = sin(x1)/2, with its
                    matched map in closed form
  quadratic-collar  normal direction distorted quadratically in x_n,
                    c = 0.2 cos(x1), matched map via the resolvent form
                    x_n = 2 y_n / (1 + sqrt(1 + 4 c y_n))
  boundary-shear    tangential shear generated by x1 + 0.3 tanh(x1); the
                    phase-side entry only, since the generated map's first
                    component has no closed form

Negative entries (each fails exactly its intended check):
  bad-boundary-shift  map translating x_n off the boundary
  bad-transmission    phase with a 0.1 x_n |xi| term breaking parity
  bad-symplectic      dilation map with an inconsistent exp(2g) fiber factor
"""

from __future__ import annotations

import json

from .exceptions import UnknownScenarioError

G = "sin(x1)/2"
GP = "cos(x1)/2"            # derivative of g
TANH = "(exp(2*x1) - 1) / (exp(2*x1) + 1)"
_XQ = "2*xn / (1 + sqrt(1 + 0.8*cos(x1)*xn))"   # x_n(y) for the quadratic map

# smooth collar cutoff amplitude for the quadratic scenario (plateau
# |xn| <= 0.25, support |xn| <= 0.5)
_CUT = ("bump(1 - (2*xn)^2) / "
        "(bump(1 - (2*xn)^2) + bump((2*xn)^2 - 0.25))")

SCENARIOS: dict[str, dict] = {
    "identity": {
        "name": "identity",
        "n": 2,
        "collar_halfwidth": 1.0,
        "phase": "x1*k1 + xn*kn",
        "map": {"x1": "x1", "xn": "xn", "k1": "k1", "kn": "kn"},
        "amplitude": {"expr": "1", "order": 0.0, "homogeneous_degree": 0.0},
        "sg": {"k": 0.5, "K": 1.0},
        "checks": ["symplecto", "phase", "generating", "sg", "operator", "opsymb"],
        "seed": 7,
    },
    "dilation": {
        "name": "dilation",
        "n": 2,
        "collar_halfwidth": 1.0,
        "phase": f"x1*k1 + xn*kn*exp({G})",
        "map": {
            "x1": "x1",
            "xn": f"xn*exp(-({G}))",
            "k1": f"k1 + xn*kn*({GP})",
            "kn": f"kn*exp({G})",
        },
        "amplitude": {"expr": "1", "order": 0.0, "homogeneous_degree": 0.0},
        "checks": ["symplecto", "phase", "generating", "sg", "operator", "opsymb"],
        "seed": 7,
    },
    "quadratic-collar": {
        "name": "quadratic-collar",
        "n": 2,
        "collar_halfwidth": 0.5,
        "phase": "x1*k1 + xn*kn*(1 + xn*0.2*cos(x1))",
        "map": {
            "x1": "x1",
            "xn": _XQ,
            "k1": f"k1 - ({_XQ})^2 * kn * 0.2*sin(x1)",
            "kn": f"kn*(1 + 2*({_XQ})*0.2*cos(x1))",
        },
        "amplitude": {"expr": _CUT, "order": 0.0,
                      "support_xn": [-0.5, 0.5]},
        "checks": ["symplecto", "phase", "generating", "sg", "operator", "opsymb"],
        "seed": 7,
    },
    "boundary-shear": {
        "name": "boundary-shear",
        "n": 2,
        "collar_halfwidth": 1.0,
        "phase": f"(x1 + 0.3*{TANH})*k1 + xn*kn",
        "amplitude": {"expr": "1", "order": 0.0, "homogeneous_degree": 0.0},
        "checks": ["phase", "sg", "operator", "opsymb"],
        "seed": 7,
    },
    "bad-boundary-shift": {
        "name": "bad-boundary-shift",
        "n": 2,
        "collar_halfwidth": 1.0,
        "map": {"x1": "x1", "xn": "xn + 0.1", "k1": "k1", "kn": "kn"},
        "checks": ["symplecto"],
        "intended_failures": ["symplecto.boundary_preserving"],
        "seed": 7,
    },
    "bad-transmission": {
        "name": "bad-transmission",
        "n": 2,
        "collar_halfwidth": 1.0,
        "phase": "x1*k1 + xn*kn + 0.1*xn*norm(k1, kn)",
        "checks": ["phase"],
        "intended_failures": ["phase.normal_coeffs", "phase.admissibility"],
        "seed": 7,
    },
    "bad-symplectic": {
        "name": "bad-symplectic",
        "n": 2,
        "collar_halfwidth": 1.0,
        "map": {
            "x1": "x1",
            "xn": f"xn*exp(-({G}))",
            "k1": f"k1 + xn*kn*({GP})",
            "kn": "kn*exp(sin(x1))",
        },
        "checks": ["symplecto"],
        "intended_failures": ["symplecto.symplectic"],
        "seed": 7,
    },
}


def names() -> list[str]:
    return list(SCENARIOS)


def emit(name: str) -> dict:
    if name not in SCENARIOS:
        raise UnknownScenarioError(
            f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    return json.loads(json.dumps(SCENARIOS[name]))  # deep copy
