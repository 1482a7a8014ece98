"""averlim: exact averaging-method engine for limit cycles of planar centers.

The pipeline: parse a perturbed planar system, transform it to the averaging
normal form dr/dtheta = sum_i eps^i F_i(theta, r), compute the averaged
functions f_1..f_k in closed form, bound their positive simple zeros, and
numerically confirm the predicted limit cycles via the Poincare return map.
"""

__version__ = "0.1.0"
SCHEMA_VERSION = 1

from .symcore import (  # noqa: F401
    FactoredDen,
    FracSeries,
    ParamFrac,
    ParamPoly,
    PiPoly,
    TrigSeries,
    TrigTerm,
    XYPoly,
    parse_assignment,
    parse_param_expr,
    parse_poly,
)
