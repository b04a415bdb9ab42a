"""From link spectra to regularity exponents.

Covers the clamped first indicial exponent ``nu_1`` of a link, the
Hölder exponent ``mu = min(nu, 1 - n/(2p))`` with its regime, and the
invariance of ``nu_1`` under spherical suspension.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

from ._roots import positive_root
from .errors import DisconnectedLinkError

UNBOUNDED = math.inf
"""Integrability exponent of a bounded potential (``V`` in ``L^inf``)."""


class Regime(str, Enum):
    LOG_LIPSCHITZ = "LogLipschitz"
    HOLDER_NU = "Holder_nu"
    HOLDER_MU = "Holder_mu"


def parse_p(p):
    """Accept a number or the strings ``"inf"``/``"infinity"``."""
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "unbounded"):
            return UNBOUNDED
        return float(p)
    return float(p)


def nu1_from_lambda1(lambda1, ell):
    """First indicial exponent of a link, clamped to 1.

    Returns 1 when ``lambda1 >= ell``, otherwise the root in ``(0, 1)`` of
    ``nu (ell - 1 + nu) = lambda1``.
    """
    if not lambda1 > 0:
        raise DisconnectedLinkError("lambda1 must be positive (link disconnected?)")
    if ell < 1:
        raise ValueError("link dimension must be >= 1")
    if lambda1 >= ell:
        return 1.0
    return positive_root(ell - 1.0, lambda1)


def indicial_exponent(lam, n):
    """``nu >= 0`` with ``lam = nu (n - 2 + nu)``; vectorized over ``lam``."""
    return positive_root(n - 2.0, lam)


def indicial_exponents(spectrum):
    """Indicial exponents of every mode of a :class:`~conereg.links.Spectrum`."""
    return indicial_exponent(spectrum.lambdas, spectrum.n_ambient)


@dataclass(frozen=True)
class ExponentReport:
    nu1: float
    lambda1: float
    ell: int
    n: int
    mu: float
    p_potential: float
    regime: Regime
    gamma_bar: float
    delta: float
    limited_by: str

    def to_dict(self):
        d = asdict(self)
        d["regime"] = self.regime.value
        if math.isinf(self.p_potential):
            d["p_potential"] = "inf"
        return d


def holder_exponent(nu, n, p=UNBOUNDED, *, lambda1=None, metric_gamma=1.0):
    """Optimal Hölder exponent and regime for ``(Delta_g + V) u = 0``.

    ``p`` is the integrability exponent of ``V``; use :data:`UNBOUNDED` for a
    bounded potential. ``metric_gamma`` is the Hölder order of the metric
    perturbation and only enters ``gamma_bar``.
    """
    p = parse_p(p)
    if not 0 < nu <= 1:
        raise ValueError("nu must lie in (0, 1]")
    if n < 2:
        raise ValueError("n must be >= 2")
    if not p > n / 2:
        raise ValueError(f"need p > n/2 = {n / 2:g}, got p = {p:g}")
    unbounded = math.isinf(p)
    potential_cap = 1.0 if unbounded else 1.0 - n / (2.0 * p)
    if unbounded:
        mu = nu
        regime = Regime.LOG_LIPSCHITZ if nu == 1.0 else Regime.HOLDER_NU
    else:
        mu = min(nu, potential_cap)
        regime = Regime.HOLDER_MU
    limited_by = "geometry" if nu <= potential_cap else "potential"
    n_over_p = 0.0 if unbounded else n / p
    if lambda1 is None:
        lambda1 = nu * (n - 2.0 + nu)
    return ExponentReport(
        nu1=float(nu), lambda1=float(lambda1), ell=n - 1, n=n, mu=float(mu),
        p_potential=p, regime=regime,
        gamma_bar=min(metric_gamma, 2.0 - n_over_p), delta=1.0 - n_over_p,
        limited_by=limited_by)


def exponent_report(link, p=UNBOUNDED, metric_gamma=1.0):
    """Compute ``lambda1`` of ``link`` and feed it through :func:`holder_exponent`."""
    from .links import link_spectrum

    spec = link_spectrum(link, count=2)
    ell = link.dim_ell
    nu = nu1_from_lambda1(spec.lambda1, ell)
    return holder_exponent(nu, ell + 1, p, lambda1=spec.lambda1, metric_gamma=metric_gamma)


def nu_of_space(links):
    """Infimum of ``nu_1`` over a finite catalogue of links."""
    from .links import link_spectrum

    values = [nu1_from_lambda1(link_spectrum(z, count=2).lambda1, z.dim_ell) for z in links]
    if not values:
        raise ValueError("empty link catalogue")
    return min(values)


def suspension_lambda1(mu1_base, n, k):
    """First nonzero eigenvalue of the ``k``-fold suspension of a link with
    first eigenvalue ``mu1_base``; the cone has dimension ``n``."""
    if not 1 <= k <= n - 2:
        raise ValueError(f"need 1 <= k <= n - 2, got k={k}, n={n}")
    if not mu1_base > 0:
        raise DisconnectedLinkError("base link must be connected (mu1 > 0)")
    if mu1_base >= n - k - 1:
        return float(n - 1)
    g = positive_root(n - k - 2.0, mu1_base)
    return g * (n - 2.0 + g)


@dataclass(frozen=True)
class SuspensionCheck:
    nu_base: float
    nu_susp: float
    gap: float
    lambda1_base: float
    lambda1_susp: float


def check_suspension_invariance(base, k, n=None, method="closed", n_nodes=400):
    """Compare ``nu_1`` of a link and of its ``k``-fold suspension.

    ``method="closed"`` uses :func:`suspension_lambda1`; ``"discretized"``
    solves the suspension spectrum numerically on ``n_nodes`` points.
    """
    from .links import Suspension, link_spectrum

    if n is None:
        n = base.dim_ell + k + 1
    if n != base.dim_ell + k + 1:
        raise ValueError(f"cone dimension {n} inconsistent with base dim "
                         f"{base.dim_ell} and k={k}")
    lam_b = link_spectrum(base, count=2).lambda1
    nu_b = nu1_from_lambda1(lam_b, base.dim_ell)
    if method == "closed":
        lam_s = suspension_lambda1(lam_b, n, k)
    elif method == "discretized":
        lam_s = link_spectrum(Suspension(base, k, n_nodes), count=2).lambda1
    else:
        raise ValueError(f"unknown method {method!r}")
    nu_s = nu1_from_lambda1(lam_s, n - 1)
    return SuspensionCheck(nu_b, nu_s, abs(nu_b - nu_s), lam_b, lam_s)


__all__ = [
    "UNBOUNDED", "Regime", "ExponentReport", "SuspensionCheck",
    "nu1_from_lambda1", "indicial_exponent", "indicial_exponents",
    "holder_exponent", "exponent_report", "nu_of_space",
    "suspension_lambda1", "check_suspension_invariance",
    "parse_p",
]
