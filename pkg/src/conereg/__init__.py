"""Regularity of Schrödinger solutions on metric cones and graphs."""

from .errors import (
    BracketNotFoundError, CoercivityFailure, ConeregError, DisconnectedLinkError,
    EigensolveError, EmptyBallError, InsufficientRadiiError, MorreyHypothesisError,
    ResolutionWarning, SingularMassError,
)
from .exponents import (
    UNBOUNDED, ExponentReport, Regime, check_suspension_invariance, exponent_report,
    holder_exponent, nu1_from_lambda1, nu_of_space, suspension_lambda1,
)
from .links import (
    Circle, Discretized, RoundSphere, Spectrum, SturmLiouvilleGrid, Suspension,
    link_from_config, link_spectrum, parse_link, poincare_constant, poincare_constants,
)

__version__ = "0.1.0"
