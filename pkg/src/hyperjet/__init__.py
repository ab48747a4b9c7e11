"""hyperjet: a numerical laboratory for extrinsic conformal hypersurface geometry.

Layers, bottom to top:

* :mod:`hyperjet.jets` / :mod:`hyperjet.expr` — truncated Taylor arithmetic
  over float and exact-rational backends, fed by an analytic expression DSL.
* :mod:`hyperjet.tensors` / :mod:`hyperjet.riemann` — tensors of jets with
  variance checking; ambient curvature frames (Weyl, Schouten, Cotton, Bach).
* :mod:`hyperjet.hypersurface` — extrinsic and intrinsic geometry of an
  embedded hypersurface at a point.
* :mod:`hyperjet.tractor` — conformal densities and standard tractors in a
  scale; Thomas-type and Laplace–Robin operators.
* :mod:`hyperjet.yamabe` — order-by-order asymptotic defining-density solver
  and the holographic operator oracles built from it.
* :mod:`hyperjet.operators` / :mod:`hyperjet.willmore` — explicit
  closed-form curvature operators and energy integrands.
* :mod:`hyperjet.harness` / :mod:`hyperjet.cli` — scenarios, quadrature,
  JSON reports, command line.
"""

from .backend import F64, RATIONAL, ExactnessError
from .jets import DegreeExhaustedError, Jet
from .expr import ParseError, jet_eval, parse_expr, print_expr

__all__ = [
    "F64",
    "RATIONAL",
    "ExactnessError",
    "DegreeExhaustedError",
    "Jet",
    "ParseError",
    "jet_eval",
    "parse_expr",
    "print_expr",
]

__version__ = "0.1.0"
