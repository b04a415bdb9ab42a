"""Morrey-type energy decay on metric-measure graphs and Hölder exponent fits.

A :class:`MetricMeasureGraph` carries vertex measures, edge lengths (which
define the shortest-path metric) and edge conductances (which define the
Dirichlet energy ``sum_e c_e (f(u) - f(v))^2``). Balls are closed metric
balls; an edge contributes to a ball's energy when both endpoints lie inside.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import EmptyBallError, InsufficientRadiiError, MorreyHypothesisError


class MetricMeasureGraph:
    """Weighted graph with vertex measures.

    Parameters
    ----------
    measures : array_like, shape (V,)
        Positive vertex masses.
    edges : array_like of int, shape (E, 2)
    lengths : array_like, shape (E,)
        Positive edge lengths.
    conductances : array_like, shape (E,), optional
        Energy weights; default ``1 / length``.
    positions : array_like, shape (V, d), optional
    """

    def __init__(self, measures, edges, lengths, conductances=None, positions=None):
        self.measures = np.asarray(measures, dtype=float)
        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.lengths = np.asarray(lengths, dtype=float)
        if conductances is None:
            conductances = 1.0 / self.lengths
        self.conductances = np.asarray(conductances, dtype=float)
        self.positions = None if positions is None else np.asarray(positions, dtype=float)
        nv = self.measures.size
        if np.any(self.measures <= 0):
            raise ValueError("vertex measures must be positive")
        if np.any(self.lengths <= 0):
            raise ValueError("edge lengths must be positive")
        if np.any(self.conductances < 0):
            raise ValueError("conductances must be nonnegative")
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= nv):
            raise ValueError("edge endpoint out of range")
        if not (self.edges.shape[0] == self.lengths.size == self.conductances.size):
            raise ValueError("edges, lengths and conductances must align")
        u, v = self.edges.T
        self.adjacency = sp.csr_matrix(
            (np.concatenate([self.lengths, self.lengths]),
             (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(nv, nv))

    @property
    def n_vertices(self):
        return self.measures.size

    @property
    def total_measure(self):
        return float(self.measures.sum())

    @property
    def min_edge_length(self):
        return float(self.lengths.min())

    def is_connected(self):
        return connected_components(self.adjacency, directed=False)[0] == 1

    def distances(self, sources, limit=np.inf):
        """Shortest-path distances, shape ``(len(sources), V)``."""
        return np.atleast_2d(dijkstra(self.adjacency, directed=False,
                                      indices=np.asarray(sources), limit=limit))

    def energy(self, f, edge_mask=None):
        f = np.asarray(f, dtype=float)
        u, v = self.edges.T
        e = self.conductances * (f[u] - f[v]) ** 2
        return float(e.sum() if edge_mask is None else e[edge_mask].sum())

    def rescaled(self, s, n):
        """Dilate by ``s`` as an ``n``-dimensional space: lengths ``* s``,
        measures ``* s^n`` and conductances ``* s^(n - 2)``."""
        pos = None if self.positions is None else self.positions * s
        return MetricMeasureGraph(self.measures * s ** n, self.edges, self.lengths * s,
                                  self.conductances * s ** (n - 2), pos)

    @classmethod
    def from_csv(cls, edge_path, vertex_path):
        """Read ``(u, v, length, conductance)`` and ``(id, measure[, x, y, ...])`` tables."""
        with open(vertex_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        ids = [r["id"] for r in rows]
        index = {k: i for i, k in enumerate(ids)}
        measures = [float(r["measure"]) for r in rows]
        coord_keys = [k for k in rows[0].keys() if k not in ("id", "measure")] if rows else []
        positions = None
        if coord_keys:
            positions = [[float(r[k]) for k in coord_keys] for r in rows]
        edges, lengths, cond = [], [], []
        with open(edge_path, newline="") as fh:
            for r in csv.DictReader(fh):
                edges.append((index[r["u"]], index[r["v"]]))
                lengths.append(float(r["length"]))
                c = r.get("conductance")
                cond.append(float(c) if c not in (None, "") else 1.0 / float(r["length"]))
        g = cls(measures, edges, lengths, cond, positions)
        g.ids = ids
        return g

    def to_csv(self, edge_path, vertex_path):
        ids = getattr(self, "ids", [str(i) for i in range(self.n_vertices)])
        with open(edge_path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["u", "v", "length", "conductance"])
            for (a, b), ln, c in zip(self.edges, self.lengths, self.conductances):
                out.writerow([ids[a], ids[b], repr(float(ln)), repr(float(c))])
        with open(vertex_path, "w", newline="") as fh:
            out = csv.writer(fh)
            dims = 0 if self.positions is None else self.positions.shape[1]
            out.writerow(["id", "measure"] + [f"x{k}" for k in range(dims)])
            for i in range(self.n_vertices):
                coords = [] if dims == 0 else [repr(float(x)) for x in self.positions[i]]
                out.writerow([ids[i], repr(float(self.measures[i]))] + coords)


def read_vertex_field(path, graph):
    """Read ``(id, value)`` rows into a vertex array ordered like ``graph``."""
    ids = getattr(graph, "ids", [str(i) for i in range(graph.n_vertices)])
    index = {k: i for i, k in enumerate(ids)}
    f = np.full(graph.n_vertices, np.nan)
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            f[index[r["id"]]] = float(r["value"])
    if np.isnan(f).any():
        raise ValueError("field file does not cover every vertex")
    return f


# ---------------------------------------------------------------------------
# Graph builders


def cone_graph(circumference, ring_radii, n_angular):
    """Polar graph on the flat cone with cone angle ``circumference``.

    Vertex 0 is the apex; ring ``i`` (radius ``ring_radii[i]``) carries
    ``n_angular`` equispaced vertices. Conductances discretize
    ``int |grad f|^2 dA`` and measures are the exact areas of the dual
    annular sectors, so they sum to ``circumference * R^2 / 2``.
    """
    r = np.asarray(ring_radii, dtype=float)
    if r[0] <= 0 or np.any(np.diff(r) <= 0):
        raise ValueError("ring radii must be positive and increasing")
    L, M, R = float(circumference), int(n_angular), r.size
    dth = L / M
    mid = np.concatenate([[0.5 * r[0]], 0.5 * (r[:-1] + r[1:]), [r[-1]]])
    ring_area = 0.5 * dth * (mid[1:] ** 2 - mid[:-1] ** 2)
    measures = np.concatenate([[0.5 * L * mid[0] ** 2], np.repeat(ring_area, M)])

    def vid(i, q):
        return 1 + i * M + q % M

    q = np.arange(M)
    edges, lengths, cond = [], [], []
    # apex spokes
    edges.append(np.column_stack([np.zeros(M, dtype=int), vid(0, q)]))
    lengths.append(np.full(M, r[0]))
    cond.append(np.full(M, dth * 0.5))
    for i in range(R):
        if i + 1 < R:
            dr = r[i + 1] - r[i]
            edges.append(np.column_stack([vid(i, q), vid(i + 1, q)]))
            lengths.append(np.full(M, dr))
            cond.append(np.full(M, dth * mid[i + 1] / dr))
        width = mid[i + 1] - mid[i]
        edges.append(np.column_stack([vid(i, q), vid(i, q + 1)]))
        lengths.append(np.full(M, r[i] * dth))
        cond.append(np.full(M, width / (r[i] * dth)))
    theta = q * dth
    pos = np.vstack([[0.0, 0.0]] + [np.column_stack([np.full(M, ri), theta]) for ri in r])
    g = MetricMeasureGraph(measures, np.vstack(edges), np.concatenate(lengths),
                           np.concatenate(cond), pos)
    g.circumference = L
    return g


def geometric_cone_graph(circumference=4 * math.pi, rho=1.0, r_min=1e-4, rings=200,
                         n_angular=128):
    """:func:`cone_graph` with log-uniform rings, self-similar toward the apex."""
    return cone_graph(circumference, np.geomspace(r_min, rho, rings), n_angular)


def cone_graph_from_grid(grid):
    """Cone graph on the radial nodes and angular quadrature of a circle-link grid."""
    if not grid.modes.nodal:
        raise ValueError("grid link has no nodal representation")
    return cone_graph(grid.modes.weights.sum(), grid.r, grid.modes.nodes.size)


def sample_on_cone_graph(graph, func):
    """Evaluate ``func(r, theta)`` at the vertices of a :func:`cone_graph`."""
    r, th = graph.positions.T
    return np.asarray(func(r, th), dtype=float)


def field_on_cone_graph(u, graph):
    """Vertex values of a cone :class:`~conereg.cone.Field` (apex from the cap)."""
    nodal = u.to_nodal().values
    return np.concatenate([[u.apex_value()], nodal.ravel()])


def grid_graph(nx, ny, spacing=1.0):
    """Uniform square lattice; measures are the dual-cell areas."""
    idx = np.arange(nx * ny).reshape(ny, nx)
    h = float(spacing)
    wx = np.full(nx, h)
    wx[[0, -1]] = h / 2
    wy = np.full(ny, h)
    wy[[0, -1]] = h / 2
    measures = (wy[:, None] * wx[None, :]).ravel()
    horiz = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    vert = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    # conductance = dual face length / edge length
    ch = np.repeat(wy, nx - 1) / h
    cv = np.tile(wx, ny - 1) / h
    xs, ys = np.meshgrid(np.arange(nx) * h, np.arange(ny) * h)
    pos = np.column_stack([xs.ravel(), ys.ravel()])
    return MetricMeasureGraph(measures, np.vstack([horiz, vert]),
                              np.full(len(horiz) + len(vert), h),
                              np.concatenate([ch, cv]), pos)


def path_graph(n_vertices, length=1.0):
    """Interval ``[0, length]`` as a path with trapezoid measures."""
    h = length / (n_vertices - 1)
    m = np.full(n_vertices, h)
    m[[0, -1]] = h / 2
    edges = np.column_stack([np.arange(n_vertices - 1), np.arange(1, n_vertices)])
    return MetricMeasureGraph(m, edges, np.full(n_vertices - 1, h), None,
                              (np.arange(n_vertices) * h)[:, None])


# ---------------------------------------------------------------------------
# Ball statistics


@dataclass
class _BallTables:
    """Cumulative ball quantities for one center, indexed by sorted distance."""
    vdist: np.ndarray
    mass: np.ndarray
    first: np.ndarray
    second: np.ndarray
    edist: np.ndarray
    energy: np.ndarray
    value: float

    def _vcount(self, r):
        return np.searchsorted(self.vdist, r * (1 + 1e-12), side="right")

    def measure(self, r):
        k = self._vcount(r)
        return np.where(k > 0, self.mass[np.maximum(k - 1, 0)], 0.0)

    def mean(self, r):
        k = self._vcount(r)
        return self.value + self.first[k - 1] / self.mass[k - 1]

    def variance_mass(self, r):
        """``int_B (f - f_B)^2``."""
        k = self._vcount(r)
        m, s1, s2 = self.mass[k - 1], self.first[k - 1], self.second[k - 1]
        return np.maximum(s2 - s1 * s1 / m, 0.0)

    def ball_energy(self, r):
        k = np.searchsorted(self.edist, r * (1 + 1e-12), side="right")
        return np.where(k > 0, self.energy[np.maximum(k - 1, 0)], 0.0)


def _tables(graph, f, dist, center):
    order = np.argsort(dist, kind="stable")
    d = dist[order]
    finite = np.isfinite(d)
    order, d = order[finite], d[finite]
    g = f[order] - f[center]
    m = graph.measures[order]
    u, v = graph.edges.T
    ed = np.maximum(dist[u], dist[v])
    eorder = np.argsort(ed, kind="stable")
    ed = ed[eorder]
    keep = np.isfinite(ed)
    en = (graph.conductances * (f[u] - f[v]) ** 2)[eorder][keep]
    return _BallTables(d, np.cumsum(m), np.cumsum(m * g), np.cumsum(m * g * g),
                       ed[keep], np.cumsum(en), float(f[center]))


def _all_tables(graph, f, centers, limit):
    f = np.asarray(f, dtype=float)
    if f.shape != (graph.n_vertices,):
        raise ValueError("field must have one value per vertex")
    D = graph.distances(centers, limit)
    return [_tables(graph, f, D[k], c) for k, c in enumerate(centers)]


@dataclass
class MorreyReport:
    radii: np.ndarray
    centers: np.ndarray
    energies: np.ndarray  # (centers, radii) normalized energies
    measures: np.ndarray
    alpha_hat: float | None = None
    alpha_stderr: float | None = None
    residual: float | None = None
    log_corrected: bool | None = None
    gamma_hat: float | None = None
    residual_log: float | None = None
    kappa_hat: float | None = None

    def sup_energies(self):
        """Worst case over centers at each radius."""
        return self.energies.max(axis=0)

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, np.ndarray):
                d[k] = v.tolist()
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def ball_energies(f, graph, radii, centers):
    """Normalized Dirichlet energies ``(1/mu(B)) sum_{e in B} c_e (df)^2``.

    Raises :class:`EmptyBallError` when a ball has zero measure (cannot
    happen for closed balls around a vertex, kept for ingested data).
    """
    radii = np.asarray(radii, dtype=float)
    centers = np.atleast_1d(np.asarray(centers, dtype=np.int64))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    tables = _all_tables(graph, f, centers, radii.max() * (1 + 1e-9))
    E = np.empty((centers.size, radii.size))
    Mu = np.empty_like(E)
    for k, t in enumerate(tables):
        Mu[k] = t.measure(radii)
        if np.any(Mu[k] <= 0):
            raise EmptyBallError(f"empty ball at center {centers[k]}")
        E[k] = t.ball_energy(radii) / Mu[k]
    return MorreyReport(radii, centers, E, Mu)


# ---------------------------------------------------------------------------
# Exponent fits


@dataclass
class HolderFit:
    alpha_hat: float
    gamma_hat: float | None
    regime: str
    alpha_power: float
    alpha_stderr: float
    residual_power: float
    residual_log: float | None

    @property
    def band(self):
        return (self.alpha_power - 1.96 * self.alpha_stderr,
                self.alpha_power + 1.96 * self.alpha_stderr)


POWER = "power"
LOG_CORRECTED = "log_corrected"


def _lstsq(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    dof = max(x.size - 2, 1)
    rms = float(np.sqrt(np.mean(res ** 2)))
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = float(np.sqrt(np.sum(res ** 2) / dof / sxx)) if sxx > 0 else math.inf
    return coef, rms, stderr


def fit_holder_exponent(report_or_radii, energies=None, tol=0.05, tie_ratio=1.2):
    """Fit ``energy ~ Lambda r^(2 alpha - 2)`` and the log model
    ``energy ~ Lambda |log r|^(2 gamma)``.

    Accepts a :class:`MorreyReport` (its sup over centers is fitted) or
    ``(radii, energies)``. The log-corrected regime is chosen when the power
    fit gives ``|alpha - 1| <= tol`` or when the log model's RMS residual
    beats the power model's by the factor ``tie_ratio``; it reports
    ``alpha_hat = 1``. The log model needs every radius below 1.
    """
    if isinstance(report_or_radii, MorreyReport):
        rep = report_or_radii
        radii, E = rep.radii, rep.sup_energies()
    else:
        rep = None
        radii = np.asarray(report_or_radii, dtype=float)
        E = np.asarray(energies, dtype=float)
    if radii.shape != E.shape:
        raise ValueError("radii and energies must have the same shape")
    distinct = np.unique(radii)
    if distinct.size < 4 or distinct.max() / distinct.min() < 10 * (1 - 1e-9):
        raise InsufficientRadiiError("need >= 4 distinct radii spanning a decade")
    if np.any(E <= 0):
        raise ValueError("energies must be positive for a log-log fit")
    x, y = np.log(radii), np.log(E)
    (slope, _), res_pow, se = _lstsq(x, y)
    alpha = 0.5 * (slope + 2.0)
    gamma, res_log = None, None
    if np.all(radii < 1):
        (s_log, _), res_log, _ = _lstsq(np.log(-x), y)
        gamma = 0.5 * s_log
    log_regime = gamma is not None and (
        abs(alpha - 1.0) <= tol or res_log * tie_ratio < res_pow)
    fit = HolderFit(1.0 if log_regime else alpha, gamma if log_regime else None,
                    LOG_CORRECTED if log_regime else POWER, alpha, 0.5 * se,
                    res_pow, res_log)
    if rep is not None:
        rep.alpha_hat, rep.alpha_stderr, rep.residual = fit.alpha_hat, fit.alpha_stderr, res_pow
        rep.log_corrected, rep.gamma_hat, rep.residual_log = log_regime, fit.gamma_hat, res_log
    return fit


def morrey_constant(report, alpha):
    """Smallest ``Lambda`` with ``energy <= Lambda r^(2 alpha - 2)`` on the report."""
    return float(np.max(report.energies / report.radii[None, :] ** (2 * alpha - 2)))


# ---------------------------------------------------------------------------
# Doubling, Poincaré and chaining


@dataclass
class Diagnostics:
    V_est: float
    C_poin_est: float
    A: float
    excluded: list = field(default_factory=list)
    doubling_by_radius: np.ndarray | None = None


def doubling_and_poincare_diagnostics(graph, f_samples, centers=None, radii=None, A=2.0):
    """Empirical doubling constant and Poincaré constant with dilation ``A``.

    ``V_est`` is the largest ``mu(B(p, 2r)) / mu(B(p, r))``; ``C_poin_est``
    the largest ``int_B (f - f_B)^2 / (r^2 int_{B(p, A r)} |df|^2)`` over the
    fields. Balls with zero energy but positive variance (disconnected balls)
    are listed in ``excluded`` instead of producing an infinite constant.
    """
    if A < 1:
        raise ValueError("A must be >= 1")
    if not graph.is_connected():
        raise ValueError("graph must be connected")
    if centers is None:
        rng = np.random.default_rng(0)
        centers = rng.choice(graph.n_vertices, size=min(16, graph.n_vertices), replace=False)
    centers = np.atleast_1d(np.asarray(centers, dtype=np.int64))
    if radii is None:
        diam = graph.distances([0]).max()
        radii = np.geomspace(graph.min_edge_length, diam / (2 * A), 10)
    radii = np.asarray(radii, dtype=float)
    limit = 2 * A * radii.max() * (1 + 1e-9)
    D = graph.distances(centers, limit)
    doubling = np.zeros(radii.size)
    c_est, excluded = 0.0, []
    samples = [np.asarray(f, dtype=float) for f in f_samples] or [np.zeros(graph.n_vertices)]
    for k, c in enumerate(centers):
        for s, f in enumerate(samples):
            t = _tables(graph, f, D[k], c)
            if s == 0:
                doubling = np.maximum(doubling, t.measure(2 * radii) / t.measure(radii))
            var = t.variance_mass(radii)
            en = t.ball_energy(A * radii)
            for i, r in enumerate(radii):
                if var[i] <= 1e-14 * max(t.second[-1], 1e-300):
                    continue
                if en[i] <= 0:
                    excluded.append((int(c), float(r), s))
                    continue
                c_est = max(c_est, var[i] / (r * r * en[i]))
    return Diagnostics(float(doubling.max()), float(c_est), float(A), excluded, doubling)


@dataclass
class ChainingReport:
    ratio: float
    measured: float
    bound_coefficient: float
    kappa_hat: float
    kappa_measured: float
    kappa_prime_measured: float
    K: float
    V_est: float
    C_poin_est: float
    A: float
    Lambda: float
    alpha: float


def chaining_modulus(f, graph, alpha, Lambda=None, eta=None, centers=None, radii=None,
                     A=2.0, poincare_fields=None):
    """Compare the dyadic chaining bound with measured oscillations.

    Each dyadic step costs at most ``K r^alpha`` with
    ``K = sqrt(8 V^(l+1) C Lambda) (2A)^(alpha-1)`` and ``A <= 2^l``, so
    summing over ``r = rho/2^k`` bounds ``|f(p) - f_B(p, rho)|`` by
    ``K rho^alpha / (2^alpha - 1)``. ``ratio`` is the measured supremum of
    ``|f(p) - f_B(p, rho)| / rho^alpha`` divided by that coefficient.

    ``Lambda`` defaults to the smallest Morrey constant on the sampled
    scales. A supplied ``Lambda`` is checked on every radius ``< eta`` and
    :class:`MorreyHypothesisError` reports the smallest violating scale.
    """
    f = np.asarray(f, dtype=float)
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if centers is None:
        centers = np.arange(min(graph.n_vertices, 16))
    centers = np.atleast_1d(np.asarray(centers, dtype=np.int64))
    if eta is None:
        eta = graph.distances([centers[0]]).max()
    if radii is None:
        radii = np.geomspace(graph.min_edge_length, eta, 16)
    radii = np.asarray(radii, dtype=float)
    radii = radii[radii < eta]
    rep = ball_energies(f, graph, radii, centers)
    scale = radii ** (2 * alpha - 2)
    if Lambda is None:
        Lambda = morrey_constant(rep, alpha)
    else:
        bad = np.nonzero((rep.energies > Lambda * scale * (1 + 1e-9)).any(axis=0))[0]
        if bad.size:
            r_bad = float(radii[bad[0]])
            raise MorreyHypothesisError(
                f"Morrey bound with Lambda={Lambda:g}, alpha={alpha:g} fails at r={r_bad:g}",
                r_bad)
    chain = radii[radii < eta / (2 * A)]
    fields = [f] + list(poincare_fields or [])
    diag = doubling_and_poincare_diagnostics(graph, fields, centers, radii, A)
    ell = max(0, math.ceil(math.log2(A) - 1e-12))
    K = math.sqrt(8 * diag.V_est ** (ell + 1) * diag.C_poin_est * Lambda) * (2 * A) ** (alpha - 1)
    coef = K / (2 ** alpha - 1)
    tables = _all_tables(graph, f, centers, eta)
    measured = 0.0
    for t in tables:
        if chain.size:
            osc = np.abs(t.value - t.mean(chain)) / chain ** alpha
            measured = max(measured, float(osc.max()))
    # pairwise comparison of ball averages at scale d(x, y)
    kp = 0.0
    D = graph.distances(centers, eta)
    for a in range(centers.size):
        for b in range(a + 1, centers.size):
            d = D[a, centers[b]]
            if not (0 < d and 4 * A * d <= eta) or Lambda <= 0:
                continue
            diff = abs(tables[a].mean(np.array([d]))[0] - tables[b].mean(np.array([d]))[0])
            kp = max(kp, diff / (Lambda * d ** alpha * diag.V_est ** (ell + 2)))
    ratio = measured / coef if coef > 0 else (0.0 if measured == 0 else math.inf)
    return ChainingReport(ratio, measured, coef, coef / Lambda if Lambda > 0 else math.inf,
                          measured / Lambda if Lambda > 0 else 0.0, kp, K, diag.V_est,
                          diag.C_poin_est, A, float(Lambda), float(alpha))


def _pairs(graph, f, sources, max_distance, chunk):
    f = np.asarray(f, dtype=float)
    if sources is None:
        sources = np.arange(graph.n_vertices)
    sources = np.asarray(sources)
    for s in range(0, sources.size, chunk):
        block = sources[s: s + chunk]
        D = graph.distances(block, max_distance)
        diff = np.abs(f[block][:, None] - f[None, :])
        yield D, diff


def holder_seminorm(f, graph, alpha, sources=None, max_distance=np.inf, chunk=256):
    """``sup |f(x) - f(y)| / d(x, y)^alpha`` over vertex pairs."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    best = 0.0
    for D, diff in _pairs(graph, f, sources, max_distance, chunk):
        ok = np.isfinite(D) & (D > 0)
        if ok.any():
            best = max(best, float((diff[ok] / D[ok] ** alpha).max()))
    return best


def log_holder_seminorm(f, graph, gamma, sources=None, chunk=256):
    """``sup |f(x) - f(y)| / (|log d|^gamma d)`` over pairs with ``d <= 1/2``."""
    best = 0.0
    for D, diff in _pairs(graph, f, sources, 0.5, chunk):
        ok = np.isfinite(D) & (D > 0) & (D <= 0.5)
        if ok.any():
            d = D[ok]
            best = max(best, float((diff[ok] / (np.abs(np.log(d)) ** gamma * d)).max()))
    return best
