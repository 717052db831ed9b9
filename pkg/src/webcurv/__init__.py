"""Curvature of planar webs given by first integrals.

Jets carry exact partial derivatives through every step, from parsing the
integrals to the connection matrices, trace elements and Blaschke curvatures.
"""

from .connection import (ConnectionAtPoint, KernelBasis, WebAtPoint, build_MM, build_Delta,
                         build_rows, curvature, kernel_basis, omega_matrices)
from .errors import *  # noqa: F401,F403
from .expr import (WebDefinition, check_transversality, eval_jet, evaluate, load_web, parse,
                   parse_web, to_text)
from .jetlinalg import JetArray, last_row_of_inverse, lu_solve, nullspace_vector
from .jets import Jet, jet_compose, jet_partial, jet_var
from .traceforms import (TraceElement, TwoForm, blaschke, check_point, gamma,
                         gamma_additivity_check, subweb_curvatures, sum_subweb_curvatures,
                         trace_formula_check, trace_via_proposition)

__version__ = "0.1.0"
