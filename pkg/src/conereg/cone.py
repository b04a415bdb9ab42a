"""Truncated metric cones: harmonic extensions, Dirichlet-to-Neumann maps,
Schrödinger solves, energy profiles and the energy monotonicity check.

Discretization
--------------
Fields are expanded in link eigenfunctions ``phi_j`` (orthonormal in
``L^2(S, h)``) and discretized in the log-radius ``t = log(r / rho)`` on a
uniform grid over ``[log(r_min / rho), 0]``. In ``t`` the separated modes
``(r/rho)^nu = exp(nu t)`` are smooth, so the vertex-centred three-point
scheme (midpoint faces, trapezoid nodes) is second order. The apex ball
``r < r_min`` is closed off by the exact homogeneous solution of each mode,
which contributes a Robin term to the quadratic form.

Unknowns are ordered radial-node-major, ``index = i * n_modes + j``, so the
interior system is banded with half-bandwidth ``n_modes``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.linalg import LinAlgError, cholesky, eigh

from ._banded import NotPositiveDefinite, cho_solve_banded, cholesky_banded, to_lower_banded
from ._roots import positive_root
from .errors import CoercivityFailure
from .exponents import UNBOUNDED, parse_p
from .links import Circle, RoundSphere, link_spectrum


# ---------------------------------------------------------------------------
# Perturbations and potentials


@dataclass(frozen=True)
class MetricPerturbation:
    """``g = a(r) dr^2 + b(r) r^2 h`` with ``a, b = 1 +/- Lambda r^gamma``.

    Equal signs give the conformal family ``(1 + Lambda r^gamma) g_0``.
    """

    Lambda: float = 0.0
    gamma: float = 1.0
    radial_sign: float = 1.0
    tangential_sign: float = 1.0

    def __post_init__(self):
        if self.Lambda < 0:
            raise ValueError("Lambda must be >= 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")

    @property
    def trivial(self):
        return self.Lambda == 0.0

    def factors(self, r):
        eps = self.Lambda * np.asarray(r, dtype=float) ** self.gamma
        return 1.0 + self.radial_sign * eps, 1.0 + self.tangential_sign * eps

    def deviation(self, r):
        """``|g - g_0|_{g_0}`` at radius ``r``."""
        a, b = self.factors(r)
        return np.maximum(np.abs(a - 1.0), np.abs(b - 1.0))


@dataclass(frozen=True)
class Potential:
    """``V(r, theta) = coef * r**exponent * profile(theta)``.

    ``p`` is the declared integrability exponent; it feeds the exponent
    formulas only and is never checked by quadrature. ``link_profile``
    holds samples at the link quadrature nodes (circle links only); when it
    is absent the potential is radial and does not couple modes.
    """

    coef: float = 0.0
    exponent: float = 0.0
    p: float = UNBOUNDED
    link_profile: tuple | None = None

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def constant(cls, value, p=UNBOUNDED):
        return cls(coef=float(value), exponent=0.0, p=p)

    @classmethod
    def power(cls, coef, exponent, p=UNBOUNDED):
        return cls(coef=float(coef), exponent=float(exponent), p=p)

    @property
    def is_zero(self):
        return self.coef == 0.0

    @property
    def radial_only(self):
        return self.link_profile is None

    def radial(self, r):
        return self.coef * np.asarray(r, dtype=float) ** self.exponent


def potential_from_config(doc, spectrum=None, n=None):
    """``{"kind": "zero" | "constant" | "power" | "manufactured", ...}``.

    ``manufactured`` takes ``{"a": ..., "mode": j}`` and returns
    ``V = -(a (a + n - 2) - lambda_j) / r^2``, for which ``r^a phi_j``
    solves the equation. Arguments may sit at the top level or inside a
    ``"params"`` object.
    """
    if doc is None:
        return Potential.zero()
    doc = {**doc, **(doc.get("params") or {})}
    kind = doc.get("kind", "zero")
    p = parse_p(doc.get("p", "inf"))
    profile = doc.get("link_profile")
    profile = tuple(float(x) for x in profile) if profile is not None else None
    if kind == "zero":
        return Potential(p=p)
    if kind == "constant":
        return Potential(float(doc["value"]), 0.0, p, profile)
    if kind == "power":
        return Potential(float(doc["coef"]), float(doc["exponent"]), p, profile)
    if kind == "manufactured":
        a = float(doc["a"])
        lam = float(spectrum.lambdas[int(doc.get("mode", 1))])
        return Potential(-(a * (a + n - 2.0) - lam), -2.0, p)
    raise ValueError(f"unknown potential kind {kind!r}")


# ---------------------------------------------------------------------------
# Link modes


@dataclass
class LinkModes:
    """Selected link eigenpairs, with a nodal basis when one is available."""

    indices: np.ndarray
    lambdas: np.ndarray
    nus: np.ndarray
    volume: float
    nodes: np.ndarray | None = None
    weights: np.ndarray | None = None
    basis: np.ndarray | None = None  # (n_nodes, n_modes)

    @property
    def nodal(self):
        return self.basis is not None


def circle_basis(circumference, indices, n_angular):
    """Real Fourier basis orthonormal in ``L^2`` of the circle, sampled at
    ``n_angular`` equispaced nodes (exact quadrature below Nyquist)."""
    freqs = (np.asarray(indices) + 1) // 2
    if 2 * freqs.max(initial=0) >= n_angular:
        raise ValueError(f"{n_angular} angular nodes cannot resolve frequency {freqs.max()}")
    L = float(circumference)
    theta = np.arange(n_angular) * L / n_angular
    w = np.full(n_angular, L / n_angular)
    cols = []
    for idx, f in zip(indices, freqs):
        if idx == 0:
            cols.append(np.full(n_angular, 1.0 / math.sqrt(L)))
        elif idx % 2 == 1:
            cols.append(math.sqrt(2.0 / L) * np.cos(2 * math.pi * f * theta / L))
        else:
            cols.append(math.sqrt(2.0 / L) * np.sin(2 * math.pi * f * theta / L))
    return theta, w, np.column_stack(cols)


def link_modes(link, modes=9, n_angular=64):
    """Eigenpairs for the mode indices ``modes`` (an int means ``range``)."""
    indices = np.arange(modes) if np.isscalar(modes) else np.asarray(modes, dtype=int)
    if np.any(np.diff(indices) <= 0) or indices.min() < 0:
        raise ValueError("mode indices must be increasing and nonnegative")
    spec = link_spectrum(link, count=max(int(indices.max()) + 1, 2))
    out = LinkModes(indices, spec.lambdas[indices], spec.nus[indices], link.volume)
    circumference = None
    if isinstance(link, Circle):
        circumference = link.circumference
    elif isinstance(link, RoundSphere) and link.dim == 1:
        circumference = 2 * math.pi
    if circumference is not None and n_angular:
        out.nodes, out.weights, out.basis = circle_basis(circumference, indices, n_angular)
    return out


# ---------------------------------------------------------------------------
# Grid


class ConeGrid:
    """Tensor discretization of the truncated cone ``C_rho(S)``.

    Parameters
    ----------
    link : LinkModel
    n : int, optional
        Cone dimension; defaults to ``link.dim_ell + 1``.
    rho : float
        Outer radius.
    radial_nodes : int
        Number of log-uniform radial nodes in ``[r_min, rho]``.
    modes : int or sequence of int
        Link modes kept (an int keeps the first ``modes``). Radial potentials
        and perturbations preserve every mode, so any subset is invariant.
    r_min_ratio : float
        Inner cutoff ``r_min / rho``.
    inner : {"cap", "dirichlet"}
        ``"cap"`` closes the apex ball with the exact homogeneous solution of
        each mode; ``"dirichlet"`` treats ``r = r_min`` as a second boundary
        (an annulus) whose values are prescribed at solve time.
    """

    def __init__(self, link, n=None, rho=1.0, radial_nodes=256, modes=9,
                 r_min_ratio=1e-3, perturbation=None, potential=None,
                 inner="cap", angular_nodes=64):
        if n is None:
            n = link.dim_ell + 1
        if n != link.dim_ell + 1:
            raise ValueError("cone dimension must equal link dimension + 1")
        if not rho > 0:
            raise ValueError("rho must be positive")
        if radial_nodes < 4:
            raise ValueError("need at least 4 radial nodes")
        if not 0 < r_min_ratio < 1:
            raise ValueError("r_min_ratio must lie in (0, 1)")
        if inner not in ("cap", "dirichlet"):
            raise ValueError("inner must be 'cap' or 'dirichlet'")
        self.link = link
        self.n = int(n)
        self.rho = float(rho)
        self.inner = inner
        self.perturbation = perturbation or MetricPerturbation()
        self.potential = potential or Potential.zero()
        self.modes = link_modes(link, modes, angular_nodes)
        if not self.potential.radial_only:
            if not self.modes.nodal:
                raise ValueError("angular potential profiles need a circle link")
            if len(self.potential.link_profile) != self.modes.nodes.size:
                raise ValueError("link_profile length must match angular_nodes")
        self.t = np.linspace(math.log(r_min_ratio), 0.0, int(radial_nodes))
        self.h = float(self.t[1] - self.t[0])
        self.r = self.rho * np.exp(self.t)
        self.r_min = float(self.r[0])

    # -- basic sizes ------------------------------------------------------

    @property
    def n_radial(self):
        return self.t.size

    @property
    def n_modes(self):
        return self.modes.indices.size

    @property
    def size(self):
        return self.n_radial * self.n_modes

    @property
    def nus(self):
        return self.modes.nus

    @property
    def lambdas(self):
        return self.modes.lambdas

    @cached_property
    def trapezoid(self):
        w = np.full(self.n_radial, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    @property
    def boundary_measure(self):
        """``sigma_g(dB) / vol_h(S)``; modes are ``L^2(h)``-orthonormal."""
        _, b = self.perturbation.factors(self.rho)
        return float(self.rho ** (self.n - 1) * b ** ((self.n - 1) / 2.0))

    def total_measure(self):
        """Riemannian volume of the truncated cone (trapezoid in ``t``)."""
        a, b = self.perturbation.factors(self.r)
        dens = self.r ** self.n * np.sqrt(a) * b ** ((self.n - 1) / 2.0)
        inner = self.r_min ** self.n / self.n if self.inner == "cap" else 0.0
        return self.modes.volume * (float(self.trapezoid @ dens) + inner)

    # -- cap closure ------------------------------------------------------

    @cached_property
    def cap_exponents(self):
        """Growth exponent of each mode inside ``r < r_min``.

        An inverse-square radial potential ``coef / r^2`` shifts the
        indicial equation to ``a (a + n - 2) = lambda_j - coef``; otherwise
        the model exponents ``nu_j`` are used.
        """
        pot = self.potential
        if pot.exponent == -2.0 and pot.radial_only and not pot.is_zero:
            shifted = self.lambdas - pot.coef
            if np.any(shifted < 0):
                raise CoercivityFailure(
                    "inverse-square potential exceeds the Hardy threshold of some mode")
            return positive_root(self.n - 2.0, shifted)
        return self.nus.copy()

    def _cap_terms(self):
        """Gradient and potential Robin contributions of the apex ball."""
        if self.inner != "cap":
            return None, None
        a = self.cap_exponents
        n, rm = self.n, self.r_min
        denom = 2 * a + n - 2
        with np.errstate(invalid="ignore", divide="ignore"):
            grad = np.where(denom > 0, (a * a + self.lambdas) / denom, 0.0) * rm ** (n - 2)
        pot = None
        if not self.potential.is_zero:
            e = self.potential.exponent
            s = a[:, None] + a[None, :] + n + e
            pot = self.potential.coef * rm ** (n + e) / s * self.coupling
        return grad, pot

    # -- assembly ---------------------------------------------------------

    @cached_property
    def coupling(self):
        """Angular coupling ``int phi_j phi_k profile`` (identity when radial)."""
        J = self.n_modes
        if self.potential.radial_only:
            return np.eye(J)
        B = self.modes.basis
        prof = np.asarray(self.potential.link_profile) * self.modes.weights
        return B.T @ (prof[:, None] * B)

    def gradient_weights(self, metric=True):
        """Radial face weights (already divided by ``h``) and tangential densities per node."""
        n, h = self.n, self.h
        tf = 0.5 * (self.t[:-1] + self.t[1:])
        rf = self.rho * np.exp(tf)
        pert = self.perturbation if metric else MetricPerturbation()
        af, bf = pert.factors(rf)
        an, bn = pert.factors(self.r)
        w_face = rf ** (n - 2) / np.sqrt(af) * bf ** ((n - 1) / 2.0) / h
        tan_density = self.r ** (n - 2) * np.sqrt(an) * bn ** ((n - 3) / 2.0)
        return w_face, tan_density

    def _gradient_form(self, metric=True):
        J, N = self.n_modes, self.n_radial
        w_face, tan_density = self.gradient_weights(metric)
        w_tan = self.trapezoid * tan_density
        idx = np.arange(self.size).reshape(N, J)
        rows, cols, vals = [], [], []
        lo, hi = idx[:-1].ravel(), idx[1:].ravel()
        wf = np.repeat(w_face, J)
        rows += [lo, hi, lo, hi]
        cols += [lo, hi, hi, lo]
        vals += [wf, wf, -wf, -wf]
        diag = (w_tan[:, None] * self.lambdas[None, :]).ravel()
        rows.append(idx.ravel())
        cols.append(idx.ravel())
        vals.append(diag)
        grad, _ = self._cap_terms()
        if grad is not None:
            rows.append(idx[0])
            cols.append(idx[0])
            vals.append(grad)
        K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.size, self.size))
        return K.tocsr()

    def _potential_form(self):
        J, N = self.n_modes, self.n_radial
        if self.potential.is_zero:
            return sp.csr_matrix((self.size, self.size))
        an, bn = self.perturbation.factors(self.r)
        dens = (self.trapezoid * self.r ** self.n * np.sqrt(an) * bn ** ((self.n - 1) / 2.0)
                * self.potential.radial(self.r))
        blocks = sp.kron(sp.diags(dens), sp.csr_matrix(self.coupling))
        _, cap = self._cap_terms()
        if cap is not None:
            first = sp.lil_matrix((self.size, self.size))
            first[:J, :J] = cap
            blocks = blocks + first.tocsr()
        return sp.csr_matrix(blocks)

    @cached_property
    def stiffness(self):
        """Gradient form ``int |du|_g^2 dvol_g`` (including the apex cap)."""
        return self._gradient_form(metric=True)

    @cached_property
    def stiffness_model(self):
        """Gradient form of the exact cone metric ``g_0``."""
        return self._gradient_form(metric=False)

    @cached_property
    def potential_form(self):
        """``int V u^2 dvol_g``."""
        return self._potential_form()

    @cached_property
    def form(self):
        """Schrödinger quadratic form ``int (|du|_g^2 - V u^2) dvol_g``."""
        return (self.stiffness - self.potential_form).tocsr()

    @cached_property
    def volume_weights(self):
        """Nodal ``dvol_g`` weights (per unit link volume), length ``n_radial``."""
        a, b = self.perturbation.factors(self.r)
        return self.trapezoid * self.r ** self.n * np.sqrt(a) * b ** ((self.n - 1) / 2.0)

    # -- index sets -------------------------------------------------------

    @property
    def outer(self):
        J = self.n_modes
        return np.arange(self.size - J, self.size)

    @property
    def inner_boundary(self):
        if self.inner == "dirichlet":
            return np.arange(self.n_modes)
        return np.arange(0)

    @property
    def interior(self):
        J = self.n_modes
        start = J if self.inner == "dirichlet" else 0
        return np.arange(start, self.size - J)

    @cached_property
    def _interior_factor(self):
        I = self.interior
        Q = self.form[I][:, I]
        try:
            return cholesky_banded(to_lower_banded(Q, self.n_modes))
        except NotPositiveDefinite as exc:
            raise CoercivityFailure(
                "Schrödinger form is not positive definite on interior unknowns; "
                "rho is too large for the given potential") from exc

    def check_coercive(self):
        """Raise :class:`CoercivityFailure` unless the interior form is SPD."""
        self._interior_factor
        return True

    def solve_interior(self, rhs):
        return cho_solve_banded(self._interior_factor, rhs)


def grid_from_config(doc):
    """Scene document -> :class:`ConeGrid`."""
    from .links import link_from_config

    link = link_from_config(doc["link"])
    n = int(doc.get("n", link.dim_ell + 1))
    pert_doc = doc.get("perturbation") or {}
    pert = MetricPerturbation(float(pert_doc.get("Lambda", 0.0)),
                              float(pert_doc.get("gamma", 1.0)),
                              float(pert_doc.get("radial_sign", 1.0)),
                              float(pert_doc.get("tangential_sign", 1.0)))
    modes = doc.get("modes", 9)
    spec = None
    pot_doc = doc.get("potential")
    if pot_doc and pot_doc.get("kind") == "manufactured":
        count = max(int(pot_doc.get("mode", 1)) + 1, 2)
        spec = link_spectrum(link, count=count)
    potential = potential_from_config(pot_doc, spec, n)
    return ConeGrid(link, n, rho=float(doc.get("rho", 1.0)),
                    radial_nodes=int(doc.get("radial_nodes", 256)), modes=modes,
                    r_min_ratio=float(doc.get("r_min_ratio", 1e-3)),
                    perturbation=pert, potential=potential,
                    inner=doc.get("inner", "cap"),
                    angular_nodes=int(doc.get("angular_nodes", 64)))


# ---------------------------------------------------------------------------
# Fields


@dataclass
class Field:
    """Samples on a :class:`ConeGrid`.

    ``values`` has shape ``(n_radial, n_modes)`` in the spectral
    representation and ``(n_radial, n_angular)`` in the nodal one.
    ``powers`` optionally records an exact separable form
    ``sum_j c_j (r/rho)^{a_j} phi_j`` as ``(c, a)``.
    """

    grid: ConeGrid
    values: np.ndarray
    representation: str = "spectral"
    residual: float | None = None
    powers: tuple | None = field(default=None, repr=False)

    def to_spectral(self):
        if self.representation == "spectral":
            return self
        m = self.grid.modes
        vals = self.values @ (m.basis * m.weights[:, None])
        return Field(self.grid, vals, "spectral", self.residual, self.powers)

    def to_nodal(self):
        if self.representation == "nodal":
            return self
        m = self.grid.modes
        if not m.nodal:
            raise ValueError("this link has no nodal basis")
        return Field(self.grid, self.values @ m.basis.T, "nodal", self.residual, self.powers)

    @property
    def coefficients(self):
        return self.to_spectral().values

    @property
    def trace(self):
        return self.coefficients[-1].copy()

    def flat(self):
        return self.coefficients.ravel()

    def apex_value(self):
        """Limit at the cone tip: only modes with zero growth exponent survive."""
        g = self.grid
        c = self.coefficients[0]
        if g.inner != "cap":
            raise ValueError("apex value needs a capped grid")
        keep = g.cap_exponents == 0
        if g.modes.nodal:
            return float((g.modes.basis[0] * c * keep).sum())
        return float(c[keep].sum() / math.sqrt(g.modes.volume)) if keep.any() else 0.0

    def to_csv(self, path):
        """Write ``(r, mode, value)`` rows in the spectral representation."""
        g = self.grid
        vals = self.coefficients
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["r", "mode", "value"])
            for i, r in enumerate(g.r):
                for j, mode in enumerate(g.modes.indices):
                    out.writerow([repr(float(r)), int(mode), repr(float(vals[i, j]))])


def _check_trace(grid, trace):
    trace = np.asarray(trace, dtype=float)
    if trace.shape != (grid.n_modes,):
        raise ValueError(f"trace must have {grid.n_modes} coefficients, got {trace.shape}")
    return trace


def harmonic_extension_model(trace_coeffs, grid):
    """Exact harmonic extension ``sum_j c_j (r/rho)^{nu_j} phi_j`` for ``g_0``."""
    c = _check_trace(grid, trace_coeffs)
    vals = (grid.r[:, None] / grid.rho) ** grid.nus[None, :] * c[None, :]
    return Field(grid, vals, powers=(c, grid.nus.copy()))


def dtn_model_spectrum(spectrum, rho):
    """Eigenvalues ``nu_j / rho`` of the model Dirichlet-to-Neumann map."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    nus = spectrum.nus if hasattr(spectrum, "nus") else np.asarray(spectrum, dtype=float)
    return np.asarray(nus, dtype=float) / rho


def solve_schrodinger(grid, trace, inner_trace=None):
    """Minimize ``int (|du|_g^2 - V u^2) dvol_g`` with boundary trace fixed.

    Returns the discrete solution of ``(Delta_g + V) u = 0``. For
    ``inner="dirichlet"`` grids ``inner_trace`` gives the values at
    ``r_min``. Raises :class:`CoercivityFailure` when the interior form is
    indefinite.
    """
    trace = _check_trace(grid, trace)
    J = grid.n_modes
    u = np.zeros(grid.size)
    u[grid.outer] = trace
    if grid.inner == "dirichlet":
        if inner_trace is None:
            raise ValueError("dirichlet inner boundary needs inner_trace")
        u[grid.inner_boundary] = _check_trace(grid, inner_trace)
    I = grid.interior
    Q = grid.form
    bnd = np.setdiff1d(np.arange(grid.size), I)
    rhs = -(Q[I][:, bnd] @ u[bnd])
    x = grid.solve_interior(rhs)
    u[I] = x
    res = Q[I] @ u
    scale = max(np.linalg.norm(rhs), np.linalg.norm(Q[I][:, bnd] @ u[bnd]), 1e-300)
    return Field(grid, u.reshape(grid.n_radial, J), residual=float(np.linalg.norm(res) / scale))


def dtn_perturbed(grid):
    """Dirichlet-to-Neumann matrix in the trace basis, orthonormal for ``sigma_g``.

    Entry ``(i, j)`` is the Schrödinger form of the extensions of the
    ``i``-th and ``j``-th trace basis vectors, divided by the boundary
    measure (Schur complement onto the outer boundary).
    """
    I, G = grid.interior, grid.outer
    Q = grid.form
    QIG = Q[I][:, G].toarray()
    X = grid.solve_interior(-QIG)
    S = Q[G][:, G].toarray() + QIG.T @ X
    return S / grid.boundary_measure


def dtn_eigenvalues(grid):
    """Sorted eigenvalues ``mu_0 <= mu_1 <= ...`` of :func:`dtn_perturbed`."""
    N = dtn_perturbed(grid)
    return np.linalg.eigvalsh(0.5 * (N + N.T))


def minmax_dtn_eigenvalues(grid, max_size=6000):
    """Steklov eigenvalues from the full-space Rayleigh quotient.

    Solves the pencil ``M_bd x = theta (Q + s M_bd) x`` on every unknown
    (interior and boundary), with ``s`` raised until ``Q + s M_bd`` is
    positive definite; the Steklov values are ``1/theta - s``. This is the
    discrete max-min characterization and shares no code with the Schur
    complement in :func:`dtn_perturbed`.
    """
    keep = np.setdiff1d(np.arange(grid.size), grid.inner_boundary)
    if keep.size > max_size:
        raise ValueError(f"dense min-max route limited to {max_size} unknowns")
    Q = grid.form[keep][:, keep].toarray()
    M = np.zeros_like(Q)
    pos = np.searchsorted(keep, grid.outer)
    M[pos, pos] = grid.boundary_measure
    shift = 1.0
    for _ in range(60):
        try:
            cholesky(Q + shift * M)
            break
        except LinAlgError:
            shift *= 2.0
    else:
        raise CoercivityFailure("could not shift the Steklov pencil to definiteness")
    theta = eigh(M, Q + shift * M, eigvals_only=True)
    theta = np.sort(theta)[::-1][: grid.n_modes]
    return np.sort(1.0 / theta - shift)


# ---------------------------------------------------------------------------
# Discrete calculus on the grid


def quadratic_form(u):
    """Schrödinger form ``Q(u)`` of a field."""
    x = u.flat()
    return float(x @ (u.grid.form @ x))


def discrete_laplacian(u):
    """``Delta_h u`` on interior nodes: ``-M^{-1} K u`` (model-free, metric ``g``)."""
    g = u.grid
    Ku = g.stiffness @ u.flat()
    mass = np.repeat(g.volume_weights, g.n_modes)
    I = g.interior
    out = np.zeros(g.size)
    out[I] = -Ku[I] / mass[I]
    return out.reshape(g.n_radial, g.n_modes)


def discrete_normal_derivative(u):
    """Variational normal flux ``(K u)_boundary / sigma`` at ``r = rho``."""
    g = u.grid
    Ku = g.stiffness @ u.flat()
    return Ku[g.outer] / g.boundary_measure


def normal_derivative(u):
    """One-sided second-order ``du/dn_g`` at ``r = rho``."""
    g = u.grid
    c = u.coefficients
    dt = (3 * c[-1] - 4 * c[-2] + c[-3]) / (2 * g.h)
    a, _ = g.perturbation.factors(g.rho)
    return dt / g.rho / math.sqrt(float(a))


def discrete_green_identity(u, v):
    """Relative residual of the discrete Green formula

        <Delta_h u, v>_vol + <du, dv>_g = <dn u, v>_boundary

    where boundary terms include the inner boundary of annular grids.
    Exact up to rounding by construction of the discrete operators.
    """
    g = u.grid
    if v.grid is not g:
        raise ValueError("fields live on different grids")
    K = g.stiffness
    x, y = u.flat(), v.flat()
    Kx = K @ x
    mass = np.repeat(g.volume_weights, g.n_modes)
    I = g.interior
    lap = np.zeros(g.size)
    lap[I] = -Kx[I] / mass[I]
    volume_term = float(np.sum(mass[I] * lap[I] * y[I]))
    energy = float(y @ Kx)
    bnd = np.concatenate([g.inner_boundary, g.outer])
    boundary_term = float(np.sum(Kx[bnd] * y[bnd]))
    scale = max(abs(volume_term), abs(energy), abs(boundary_term), 1e-300)
    return abs(volume_term + energy - boundary_term) / scale


# ---------------------------------------------------------------------------
# Energy profiles and monotonicity


@dataclass
class EnergyProfile:
    radii: np.ndarray
    E0: np.ndarray
    Eg: np.ndarray
    phi: np.ndarray
    n: int
    nu1: float
    gamma_bar: float
    C: float = 0.0

    def normalized(self, C=None):
        """``exp(-C r^gamma_bar) r^{-(n-2+2 nu1)} E_g(r)``."""
        C = self.C if C is None else C
        return (np.exp(-C * self.radii ** self.gamma_bar)
                * self.radii ** (-(self.n - 2 + 2 * self.nu1)) * self.Eg)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["rho", "E0", "Eg", "phi"])
            for row in zip(self.radii, self.E0, self.Eg, self.phi):
                out.writerow([repr(float(x)) for x in row])


def _exact_energies(u, radii, metric):
    g = u.grid
    c, a = u.powers
    lam = g.lambdas
    n, rho = g.n, g.rho
    out = np.zeros(len(radii))
    for j in np.nonzero(c)[0]:
        if a[j] == 0 and lam[j] == 0:
            continue
        if not metric or g.perturbation.trivial:
            out += (c[j] ** 2 * (a[j] ** 2 + lam[j]) / (2 * a[j] + n - 2)
                    * radii ** (2 * a[j] + n - 2) / rho ** (2 * a[j]))
            continue

        def dens(r, j=j):
            A, B = g.perturbation.factors(r)
            wr = B ** ((n - 1) / 2.0) / math.sqrt(A)
            wt = math.sqrt(A) * B ** ((n - 3) / 2.0)
            return (a[j] ** 2 * wr + lam[j] * wt) * r ** (2 * a[j] + n - 3)

        for i, R in enumerate(radii):
            val, _ = quad(dens, 0.0, R, epsabs=0.0, epsrel=1e-13, limit=200)
            out[i] += c[j] ** 2 * val / rho ** (2 * a[j])
    return out


def _grid_energies(u, radii, metric):
    g = u.grid
    c = u.coefficients
    w_face, tan_density = g.gradient_weights(metric)
    face = w_face * (np.diff(c, axis=0) ** 2).sum(axis=1)
    dens = tan_density * ((c * c) @ g.lambdas)
    cap = 0.0
    if g.inner == "cap":
        grad, _ = g._cap_terms()
        cap = float(np.sum(grad * c[0] ** 2))
    # trapezoid partial integrals of the node densities over [t_0, t_i]
    cum_nodes = g.h * (np.cumsum(dens) - 0.5 * (dens[0] + dens))
    cumulative = cap + cum_nodes + np.concatenate([[0.0], np.cumsum(face)])
    t = np.log(np.asarray(radii) / g.rho)
    return np.interp(t, g.t, cumulative)


def energy_profile(u, radii, nu1=None, gamma_bar=1.0, C=0.0):
    """Dirichlet energies of ``u`` on the balls ``B_0(R)`` for each ``R``.

    Fields with a recorded separable form are integrated exactly per mode;
    other fields use the discrete form restricted to ``r <= R`` (linear
    interpolation in ``log r`` between nodes).
    """
    g = u.grid
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < g.r_min * (1 - 1e-12)) or np.any(radii > g.rho * (1 + 1e-12)):
        raise ValueError("radii must lie within [r_min, rho]")
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be increasing")
    if nu1 is None:
        positive = g.nus[g.nus > 0]
        nu1 = float(min(positive.min(), 1.0)) if positive.size else 1.0
    if u.powers is not None and g.inner == "cap":
        E0 = _exact_energies(u, radii, metric=False)
        Eg = _exact_energies(u, radii, metric=True)
    else:
        E0 = _grid_energies(u, radii, metric=False)
        Eg = _grid_energies(u, radii, metric=True)
    prof = EnergyProfile(radii, E0, Eg, np.zeros_like(radii), g.n, float(nu1),
                         float(gamma_bar), float(C))
    prof.phi = prof.normalized()
    return prof


def psi_correction(rho_plus, rho_minus, n, nu1, p):
    """Error term ``Psi(rho_+, rho_-)`` of the monotonicity inequality."""
    n_over_p = 0.0 if math.isinf(p) else n / p
    if abs(1.0 - 0.5 * n_over_p - nu1) < 1e-12:
        return math.log(rho_plus / rho_minus)
    e = 2.0 - n_over_p - 2.0 * nu1
    return abs(rho_plus ** e - rho_minus ** e)


@dataclass
class MonotonicityReport:
    max_violation: float
    worst_pair: tuple
    C: float
    holds: bool


def monotonicity_check(profile, p=UNBOUNDED, C=None, tol=0.0):
    """Largest ``Phi(rho_-) - Phi(rho_+) - C Psi(rho_+, rho_-)`` over radius pairs."""
    if len(profile.radii) < 3:
        raise ValueError("need at least 3 radii")
    p = parse_p(p)
    C = profile.C if C is None else float(C)
    phi = profile.normalized(C)
    worst, pair = -math.inf, None
    for i, j in combinations(range(len(profile.radii)), 2):
        lo, hi = profile.radii[i], profile.radii[j]
        v = phi[i] - phi[j] - C * psi_correction(hi, lo, profile.n, profile.nu1, p)
        if v > worst:
            worst, pair = v, (float(lo), float(hi))
    return MonotonicityReport(float(worst), pair, C, worst <= tol)


def fit_monotonicity_constant(profile, p=UNBOUNDED, tol=0.0, c_max=1e8, rtol=1e-6):
    """Smallest sampled ``C`` making the monotonicity inequality hold."""
    if monotonicity_check(profile, p, 0.0, tol).holds:
        return 0.0
    hi = 1.0
    while not monotonicity_check(profile, p, hi, tol).holds:
        hi *= 2.0
        if hi > c_max:
            return math.inf
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if monotonicity_check(profile, p, mid, tol).holds:
            hi = mid
        else:
            lo = mid
    return hi
