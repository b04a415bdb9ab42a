"""Link geometries, their Laplace spectra and the Bessel Poincaré constants.

A link is the compact cross-section of a metric cone. Closed forms cover
circles and round spheres; spherical suspensions are reduced to a family of
one-dimensional weighted Sturm-Liouville operators in the polar angle
``psi`` and solved by finite differences.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.special import beta as beta_fn
from scipy.special import comb

from ._parallel import pmap
from ._roots import positive_root
from .errors import (
    BracketNotFoundError,
    DisconnectedLinkError,
    EigensolveError,
    ResolutionWarning,
    SingularMassError,
)

MULTIPLICITY_RTOL = 1e-8
DEFAULT_SL_NODES = 400


# ---------------------------------------------------------------------------
# Link models


class LinkModel:
    """Base class for compact connected links of dimension ``dim_ell``."""

    dim_ell: int

    @property
    def volume(self) -> float:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Circle(LinkModel):
    circumference: float

    def __post_init__(self):
        if not self.circumference > 0:
            raise ValueError("circumference must be positive")

    @property
    def dim_ell(self):
        return 1

    @property
    def volume(self):
        return float(self.circumference)

    def to_config(self):
        return {"kind": "circle", "circumference": self.circumference}


@dataclass(frozen=True)
class RoundSphere(LinkModel):
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("sphere dimension must be an integer >= 1")

    @property
    def dim_ell(self):
        return int(self.dim)

    @property
    def volume(self):
        return sphere_volume(self.dim)

    def to_config(self):
        return {"kind": "sphere", "dim": self.dim}


@dataclass(frozen=True)
class Suspension(LinkModel):
    """The ``k``-fold spherical suspension of ``base``.

    Carries the metric ``dpsi^2 + sin^2(psi) g_{S^{k-1}} + cos^2(psi) k_Z``
    on ``[0, pi/2] x S^{k-1} x Z``; its cone is ``R^k x C(Z)``.
    """

    base: LinkModel
    k: int
    n_nodes: int = DEFAULT_SL_NODES

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("suspension order k must be an integer >= 1")

    @property
    def dim_ell(self):
        return int(self.k) + self.base.dim_ell

    @property
    def volume(self):
        d = self.base.dim_ell
        angular = 0.5 * beta_fn(self.k / 2.0, (d + 1) / 2.0)
        sphere = 2.0 if self.k == 1 else sphere_volume(self.k - 1)
        return float(angular * sphere * self.base.volume)

    def to_config(self):
        return {"kind": "suspension", "k": self.k, "base": self.base.to_config(),
                "n_nodes": self.n_nodes}


@dataclass(frozen=True)
class Discretized(LinkModel):
    """A link whose Laplacian is a single weighted Sturm-Liouville operator."""

    grid: "SturmLiouvilleGrid"
    dim_ell: int = 1

    @property
    def volume(self):
        return float(np.sum(self.grid.weight(self.grid.psi_nodes)) * self.grid.spacing)

    def to_config(self):
        g = self.grid
        return {"kind": "discretized", "dim_ell": self.dim_ell, "n_nodes": g.n_nodes,
                "k": g.k, "n": g.n, "mu": g.mu, "lam": g.lam, "odd": g.odd}


def sphere_volume(d):
    """Volume of the unit round sphere ``S^d``."""
    return 2.0 * math.pi ** ((d + 1) / 2.0) / math.gamma((d + 1) / 2.0)


def sphere_multiplicity(d, m):
    """Dimension of degree-``m`` spherical harmonics on ``S^d``."""
    if m == 0:
        return 1
    return int(comb(m + d, d, exact=True) - comb(m + d - 2, d, exact=True))


# ---------------------------------------------------------------------------
# Spectra


@dataclass
class Spectrum:
    """Laplace eigenvalues (with multiplicity) and their indicial exponents.

    ``nus[j]`` solves ``lambdas[j] = nus[j] * (n_ambient - 2 + nus[j])``.
    """

    lambdas: np.ndarray
    n_ambient: int
    nus: np.ndarray = field(default=None)

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        if self.n_ambient < 2:
            raise ValueError("n_ambient must be >= 2")
        if np.any(np.diff(self.lambdas) < 0):
            raise ValueError("eigenvalues must be nondecreasing")
        if self.lambdas.size < 2:
            raise ValueError("a spectrum needs at least two eigenvalues")
        scale = max(1.0, abs(self.lambdas[1]))
        if abs(self.lambdas[0]) > 1e-9 * scale or self.lambdas[1] <= 1e-9 * scale:
            raise DisconnectedLinkError(
                "link must be connected: need lambda_0 = 0 < lambda_1, got "
                f"{self.lambdas[0]:.3g}, {self.lambdas[1]:.3g}")
        self.lambdas[0] = 0.0
        if self.nus is None:
            self.nus = positive_root(self.n_ambient - 2.0, self.lambdas)
        self.nus = np.atleast_1d(np.asarray(self.nus, dtype=float))

    def __len__(self):
        return self.lambdas.size

    @property
    def lambda1(self):
        return float(self.lambdas[1])

    def groups(self, rtol=MULTIPLICITY_RTOL):
        """Distinct eigenvalues as ``(lambda, nu, multiplicity)`` tuples."""
        out = []
        for lam, nu in zip(self.lambdas, self.nus):
            if out and abs(lam - out[-1][0]) <= rtol * max(1.0, abs(lam)):
                prev = out[-1]
                out[-1] = (prev[0], prev[1], prev[2] + 1)
            else:
                out.append((float(lam), float(nu), 1))
        return out

    def to_json(self):
        return [{"lambda": lam, "nu": nu, "multiplicity": m}
                for lam, nu, m in self.groups()]


def _circle_eigenvalues(link, count):
    j = (np.arange(count) + 1) // 2
    return (2.0 * math.pi * j / link.circumference) ** 2


def _sphere_eigenvalues(d, count):
    out = []
    m = 0
    while len(out) < count:
        out.extend([m * (m + d - 1.0)] * sphere_multiplicity(d, m))
        m += 1
    return np.array(out[:count])


def link_spectrum(link, n_ambient=None, count=8):
    """First ``count`` Laplace eigenvalues of ``link`` with indicial exponents.

    Closed forms are used for circles and round spheres; suspensions and
    discretized links go through the weighted Sturm-Liouville solver.
    """
    if n_ambient is None:
        n_ambient = link.dim_ell + 1
    if n_ambient != link.dim_ell + 1:
        raise ValueError(f"n_ambient={n_ambient} inconsistent with link dimension "
                         f"{link.dim_ell} (cone dimension is dim_ell + 1)")
    if count < 2:
        raise ValueError("count must be >= 2")
    if isinstance(link, Circle):
        lambdas = _circle_eigenvalues(link, count)
    elif isinstance(link, RoundSphere):
        lambdas = _sphere_eigenvalues(link.dim, count)
    elif isinstance(link, Suspension):
        lambdas = _suspension_eigenvalues(link, count)
    elif isinstance(link, Discretized):
        if count > link.grid.n_nodes:
            raise EigensolveError(
                f"requested {count} modes but the grid only has {link.grid.n_nodes}")
        lambdas = suspension_operator_spectrum(link.grid, count)
    else:
        raise TypeError(f"unsupported link type {type(link).__name__}")
    return Spectrum(np.sort(lambdas), n_ambient)


# ---------------------------------------------------------------------------
# Weighted Sturm-Liouville operator of the suspension


@dataclass(frozen=True)
class SturmLiouvilleGrid:
    """Uniform cell-centred grid on ``(0, pi/2)`` for the operator

        L = -d^2/dpsi^2 - ((k-1) cot psi - (n-k-1) tan psi) d/dpsi
            + mu / cos^2 psi + lam / sin^2 psi

    acting on ``L^2((0, pi/2), sin^{k-1} psi cos^{n-k-1} psi dpsi)``.

    For ``k = 1`` the sphere factor ``S^0`` is a pair of points; ``odd=True``
    selects its odd mode, which vanishes at ``psi = 0``.
    """

    n_nodes: int
    k: int
    n: int
    mu: float = 0.0
    lam: float = 0.0
    odd: bool = False

    def __post_init__(self):
        if self.n_nodes < 8:
            raise ValueError("need at least 8 nodes")
        if self.k < 1 or self.n - self.k - 1 < 1:
            raise ValueError(f"need 1 <= k <= n - 2, got k={self.k}, n={self.n}")
        if self.mu < 0 or self.lam < 0:
            raise ValueError("potential parameters must be >= 0")
        if self.odd and self.k != 1:
            raise ValueError("odd parity only applies to k = 1")
        if self.k == 1 and self.lam != 0:
            raise ValueError("S^0 has no nonzero Laplace eigenvalue; use odd=True")

    @property
    def spacing(self):
        return 0.5 * math.pi / self.n_nodes

    @property
    def psi_nodes(self):
        return (np.arange(self.n_nodes) + 0.5) * self.spacing

    @property
    def weight_exponents(self):
        return self.k - 1, self.n - self.k - 1

    def weight(self, psi):
        a, b = self.weight_exponents
        return np.sin(psi) ** a * np.cos(psi) ** b

    @property
    def degree(self):
        """Exponent ``m`` of ``sin^m psi`` at ``psi = 0``; ``lam = m(m+k-2)``."""
        if self.k == 1:
            return 1.0 if self.odd else 0.0
        return positive_root(self.k - 2.0, self.lam)

    @property
    def gamma(self):
        """Exponent of ``cos^gamma psi`` at ``psi = pi/2``; ``mu = gamma(gamma+n-k-2)``."""
        return positive_root(self.n - self.k - 2.0, self.mu)

    @property
    def ground_energy(self):
        s = self.degree + self.gamma
        return s * (s + self.n - 2.0)

    def exact_eigenvalues(self, count):
        """Closed-form spectrum ``(m + gamma + 2j)(m + gamma + 2j + n - 2)``."""
        s = self.degree + self.gamma + 2.0 * np.arange(count)
        return s * (s + self.n - 2.0)

    def assemble(self, method="factored"):
        """Tridiagonal stiffness ``(diag, offdiag)`` and diagonal mass.

        ``method="factored"`` discretizes the ground-state-factored unknown
        ``v = u / (sin^m psi cos^gamma psi)``, whose weight absorbs both
        inverse-square potentials; the returned eigenvalues are shifted by
        ``ground_energy``. ``method="direct"`` discretizes ``u`` itself with
        the potentials sampled at nodes.
        """
        h = self.spacing
        psi = self.psi_nodes
        faces = np.arange(1, self.n_nodes) * h
        if method == "factored":
            a, b = self.weight_exponents
            m, g = self.degree, self.gamma

            def w(x):
                return np.sin(x) ** (a + 2 * m) * np.cos(x) ** (b + 2 * g)

            wn = w(psi)
            potential = np.zeros_like(psi)
        elif method == "direct":
            w = self.weight
            wn = w(psi)
            potential = self.mu / np.cos(psi) ** 2
            if self.lam:
                potential = potential + self.lam / np.sin(psi) ** 2
        else:
            raise ValueError(f"unknown method {method!r}")
        wf = w(faces)
        diag = np.zeros(self.n_nodes)
        diag[:-1] += wf / h
        diag[1:] += wf / h
        off = -wf / h
        if method == "direct" and self.odd:
            # ghost value u(-h/2) = -u(h/2)
            diag[0] += 2.0 * float(w(0.0)) / h
        mass = wn * h
        diag += potential * mass
        if not np.all(np.isfinite(mass)) or np.any(mass <= 0):
            raise SingularMassError("weighted mass matrix is singular; "
                                    "the weight underflows on this grid")
        return diag, off, mass


def _resolution_check(grid):
    a, _ = grid.weight_exponents
    first = math.sin(grid.spacing / 2.0) ** (a + 2 * grid.degree)
    if grid.degree > 0 and first < 1e-200:
        warnings.warn(f"sphere degree {grid.degree:g} is under-resolved near psi=0 "
                      f"with {grid.n_nodes} nodes", ResolutionWarning, stacklevel=3)


def _sl_eigs(grid, method, count=None, ceiling=None):
    _resolution_check(grid)
    diag, off, mass = grid.assemble(method)
    s = 1.0 / np.sqrt(mass)
    d = diag * s * s
    e = off * s[:-1] * s[1:]
    shift = grid.ground_energy if method == "factored" else 0.0
    if count is not None:
        if count > grid.n_nodes:
            raise EigensolveError(f"requested {count} modes from {grid.n_nodes} nodes")
        vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1))
    else:
        hi = ceiling - shift
        if hi < 0:
            return np.empty(0)
        vals, vecs = eigh_tridiagonal(d, e, select="v", select_range=(-1.0, hi))
        if vals.size == 0:
            return vals
    # residual of the symmetric tridiagonal problem
    tv = d[:, None] * vecs
    tv[:-1] += e[:, None] * vecs[1:]
    tv[1:] += e[:, None] * vecs[:-1]
    resid = np.max(np.abs(tv - vecs * vals)) / max(1.0, np.max(np.abs(vals)))
    if not resid < 1e-8:
        raise EigensolveError("tridiagonal eigensolve failed its residual check", resid)
    return vals + shift


def suspension_operator_spectrum(grid, count, method="factored"):
    """Lowest ``count`` eigenvalues of the weighted operator on ``grid``."""
    return _sl_eigs(grid, method, count=count)


def _sphere_degrees(k, ceiling, n):
    """``(degree, multiplicity, odd)`` for the ``S^{k-1}`` factor."""
    if k == 1:
        return [(0, 1, False), (1, 1, True)]
    out = []
    m = 0
    while m * (m + n - 2.0) <= ceiling:
        out.append((m, sphere_multiplicity(k - 1, m), False))
        m += 1
    return out


def _base_groups(base, mu_max):
    count = 8
    while True:
        spec = link_spectrum(base, count=count)
        if spec.lambdas[-1] > mu_max or count >= 4096:
            return [(lam, mult) for lam, _, mult in spec.groups() if lam <= mu_max]
        count *= 2


def suspension_eigenvalues_below(link, ceiling, method="factored"):
    """All eigenvalues ``<= ceiling`` of a suspension, with multiplicity.

    Uses the direct-sum splitting over base modes ``mu`` and sphere modes
    ``m``; each block's lowest eigenvalue is ``(m + gamma)(m + gamma + n - 2)``
    so blocks above the ceiling are skipped.
    """
    k = int(link.k)
    n = link.dim_ell + 1
    # largest gamma with gamma (gamma + n - 2) <= ceiling
    g_max = positive_root(n - 2.0, ceiling)
    mu_max = g_max * (g_max + n - k - 2.0)
    blocks = []
    for mu, mult_b in _base_groups(link.base, mu_max):
        for m, mult_s, odd in _sphere_degrees(k, ceiling, n):
            grid = SturmLiouvilleGrid(link.n_nodes, k, n, mu=mu,
                                      lam=0.0 if k == 1 else m * (m + k - 2.0), odd=odd)
            if grid.ground_energy <= ceiling * (1 + 1e-12):
                blocks.append((grid, mult_b * mult_s))

    def solve(block):
        grid, mult = block
        vals = _sl_eigs(grid, method, ceiling=ceiling * (1 + 1e-12))
        return np.repeat(vals, mult)

    parts = pmap(solve, blocks)
    return np.sort(np.concatenate(parts)) if parts else np.empty(0)


def _suspension_eigenvalues(link, count):
    n = link.dim_ell + 1
    ceiling = max(2.0 * n, 4.0)
    while True:
        vals = suspension_eigenvalues_below(link, ceiling)
        if vals.size >= count:
            return vals[:count]
        ceiling *= 2.0


# ---------------------------------------------------------------------------
# Bessel functions and the Poincaré constant of a truncated cone


def _series_terms(order, r):
    """Yield ``(m, t_m)`` with ``t_m = (-1)^m (r^2/4)^m / (m! Gamma(m+order+1))``
    scaled by ``Gamma(order + 1)``."""
    q = 0.25 * r * r
    t = 1.0
    m = 0
    while True:
        yield m, t
        t *= -q / ((m + 1.0) * (m + order + 1.0))
        m += 1


def _series_sum(order, r, coef):
    total = 0.0
    for m, t in _series_terms(order, r):
        term = coef(m) * t
        total += term
        # terms decrease monotonically once m exceeds r/2
        if m > r and abs(term) <= 1e-16 * max(abs(total), 1e-300):
            return total


def bessel_j(order, r):
    """Bessel function ``J_order(r)`` from its ascending power series."""
    if r == 0:
        return 1.0 if order == 0 else 0.0
    s = _series_sum(order, r, lambda m: 1.0)
    return s * (0.5 * r) ** order / math.gamma(order + 1.0)


def bessel_jp(order, r):
    """Derivative ``J'_order(r)`` from the differentiated series."""
    s = _series_sum(order, r, lambda m: 2.0 * m + order)
    return s * (0.5 * r) ** order / math.gamma(order + 1.0) / r


def _cone_radial_derivative(n_ambient, order):
    """``r -> (r^{1-n/2} J_order(r))'`` up to a positive factor."""
    c = order + 1.0 - 0.5 * n_ambient

    def g(r):
        return _series_sum(order, r, lambda m: 2.0 * m + c)

    return g


def bessel_deriv_first_zero(n_ambient, bessel_order, upper=12.0, step=0.02, xtol=1e-14):
    """Smallest ``r > 0`` where ``d/dr [r^{1-n/2} J_order(r)]`` vanishes.

    The derivative is evaluated by its ascending series (divided by the
    positive factor ``r^{order - n/2} / 2^order``), bracketed by scanning
    from the origin in steps of ``step`` and refined with Brent's method.
    """
    if not bessel_order > 0:
        raise ValueError("Bessel order must be positive")
    if n_ambient < 2:
        raise ValueError("n_ambient must be >= 2")
    g = _cone_radial_derivative(n_ambient, bessel_order)
    lo = step
    g_lo = g(lo)
    while lo < upper:
        hi = min(lo + step, upper)
        g_hi = g(hi)
        if g_lo == 0.0:
            return lo
        if g_lo * g_hi < 0:
            return brentq(g, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
        lo, g_lo = hi, g_hi
    raise BracketNotFoundError("no zero of the radial derivative below the bound",
                               (0.0, upper))


@dataclass(frozen=True)
class PoincareConstants:
    A: float
    B: float
    nu: float
    C_poin: float


def poincare_constants(n_ambient, lambda1, **kwargs):
    """Neumann eigenvalues ``A`` (order ``n/2``) and ``B`` (order ``nu``).

    ``nu = sqrt(lambda1 + ((n-2)/2)^2)``; the scale-invariant Poincaré
    constant of the truncated cone is ``max(1/A, 1/B)``.
    """
    if not lambda1 > 0:
        raise ValueError("lambda1 must be positive")
    nu = math.sqrt(lambda1 + (0.5 * (n_ambient - 2)) ** 2)
    a = bessel_deriv_first_zero(n_ambient, 0.5 * n_ambient, **kwargs) ** 2
    b = bessel_deriv_first_zero(n_ambient, nu, **kwargs) ** 2
    return PoincareConstants(A=a, B=b, nu=nu, C_poin=max(1.0 / a, 1.0 / b))


def poincare_constant(n_ambient, lambda1, **kwargs):
    return poincare_constants(n_ambient, lambda1, **kwargs).C_poin


# ---------------------------------------------------------------------------
# Config documents


def link_from_config(doc):
    """Build a link from ``{"kind": "circle", "circumference": ...}`` etc."""
    kind = doc.get("kind")
    if kind == "circle":
        return Circle(float(doc["circumference"]))
    if kind == "sphere":
        return RoundSphere(int(doc["dim"]))
    if kind == "suspension":
        return Suspension(link_from_config(doc["base"]), int(doc["k"]),
                          int(doc.get("n_nodes", DEFAULT_SL_NODES)))
    if kind == "discretized":
        grid = SturmLiouvilleGrid(int(doc["n_nodes"]), int(doc["k"]), int(doc["n"]),
                                  float(doc.get("mu", 0.0)), float(doc.get("lam", 0.0)),
                                  bool(doc.get("odd", False)))
        return Discretized(grid, int(doc.get("dim_ell", 1)))
    raise ValueError(f"unknown link kind {kind!r}")


def parse_link(text):
    """Parse the compact CLI form: ``circle:12.566``, ``sphere:2``,
    ``suspension:2:circle:12.566``."""
    head, _, rest = text.partition(":")
    if head == "circle":
        return Circle(float(rest))
    if head == "sphere":
        return RoundSphere(int(rest))
    if head == "suspension":
        k, _, base = rest.partition(":")
        return Suspension(parse_link(base), int(k))
    raise ValueError(f"cannot parse link {text!r}")
