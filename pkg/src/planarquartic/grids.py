"""
Radial grid, quadrature and finite Hilbert transform on [0, Lambda^2].

Every correlation function of the planar model lives on a half-line
truncated at a cutoff Lambda^2.  We discretize with composite
Gauss-Legendre panels whose interior edges are geometrically graded
toward zero,

    edges = [0, L*r^(P-1), L*r^(P-2), ..., L*r, L],   L = Lambda^2, r < 1,

so that the unit-scale region (where the boundary correlator varies)
and the far tail are resolved with one fixed node budget.  Within a
panel a sampled function is represented by the Lagrange interpolant on
the panel's own nodes, evaluated in barycentric form; this reproduces
any polynomial of degree <= nodes_per_panel - 1 exactly (up to
rounding) at off-node points.

The finite Hilbert transform with principal value at a in (0, Lambda^2),

    H_a[f] = (1/pi) PV int_0^{Lambda^2} f(p)/(p-a) dp,

is computed by singularity subtraction,

    H_a[f] = (1/pi) [ int_0^{Lambda^2} (f(p)-f(a))/(p-a) dp
                      + f(a) * log((Lambda^2-a)/a) ],

where the subtracted integrand is smooth and handled by the panel rule.
At a = 0 the transform degenerates to the ordinary integral of f(p)/p,
which exists only when f vanishes at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = [
    "RadialGrid",
    "SampledFunction",
    "build_grid",
    "integrate",
    "hilbert_transform",
    "hilbert_matrix",
]

# |p - a| below this fraction of the panel width switches the divided
# difference (f(p)-f(a))/(p-a) to the interpolant derivative at the node.
_NEAR_HIT_FRACTION = 1.0e-6


@lru_cache(maxsize=32)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(n)
    return x, w


def _barycentric_weights(x: np.ndarray) -> np.ndarray:
    """Barycentric weights for the nodes x, capacity-scaled for stability."""
    n = x.size
    cap = (x[-1] - x[0]) / 4.0
    lam = np.empty(n)
    for q in range(n):
        d = (x[q] - x) / cap
        d[q] = 1.0
        lam[q] = 1.0 / np.prod(d)
    return lam


@dataclass(frozen=True)
class RadialGrid:
    """Composite Gauss-Legendre grid on [0, lambda_cut].

    Attributes
    ----------
    nodes : ndarray, shape (n,)
        Strictly increasing abscissae, all in the open interval
        (0, lambda_cut).
    weights : ndarray, shape (n,)
        Positive quadrature weights; their sum equals lambda_cut.
    lambda_cut : float
        Upper end of the radial domain (the squared cutoff).
    interp_order : int
        Degree up to which off-node interpolation is exact.
    """

    nodes: np.ndarray
    weights: np.ndarray
    lambda_cut: float
    interp_order: int
    panel_edges: np.ndarray = field(repr=False)
    panel_starts: np.ndarray = field(repr=False)
    bary_weights: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def n_panels(self) -> int:
        return self.panel_edges.size - 1

    def panel_of(self, x) -> np.ndarray:
        """Index of the panel containing each point of x (0-based)."""
        j = np.searchsorted(self.panel_edges, np.atleast_1d(x), side="right") - 1
        return np.clip(j, 0, self.n_panels - 1)

    def panel_slice(self, j: int) -> slice:
        return slice(int(self.panel_starts[j]), int(self.panel_starts[j + 1]))

    def panel_width_per_node(self) -> np.ndarray:
        """Width of the panel containing each node, shape (n,)."""
        widths = np.diff(self.panel_edges)
        out = np.empty(self.n)
        for j in range(self.n_panels):
            out[self.panel_slice(j)] = widths[j]
        return out

    def interior(self, exclude_panels: int = 1) -> np.ndarray:
        """Boolean mask of nodes away from the upper cutoff.

        The last `exclude_panels` panels are masked out; the log term of
        the principal value degenerates as a -> Lambda^2 and defect
        suprema are taken over this mask.
        """
        mask = np.ones(self.n, dtype=bool)
        if exclude_panels > 0:
            mask[self.panel_slice(self.n_panels - exclude_panels).start:] = False
        return mask

    def diff_blocks(self) -> list[np.ndarray]:
        """Per-panel differentiation matrices of the local interpolant."""
        blocks = []
        for j in range(self.n_panels):
            s = self.panel_slice(j)
            x = self.nodes[s]
            lam = self.bary_weights[s]
            m = x.size
            D = np.zeros((m, m))
            for q in range(m):
                for r in range(m):
                    if r != q:
                        D[q, r] = (lam[r] / lam[q]) / (x[q] - x[r])
                D[q, q] = -np.sum(D[q, :q]) - np.sum(D[q, q + 1:])
            blocks.append(D)
        return blocks


def build_grid(n_nodes: int, lambda_cut: float = 1.0e6, *,
               nodes_per_panel: int = 8,
               grading_decades: float | None = None) -> RadialGrid:
    """Build the log-graded composite Gauss-Legendre grid.

    Parameters
    ----------
    n_nodes : int
        Total node count, at least 16.
    lambda_cut : float
        Squared cutoff Lambda^2 > 0.  An infinite value is replaced by
        the default truncation 1e6; integrands of the model decay at
        least like 1/p^2, so the tail error is O(1/Lambda^2).
    nodes_per_panel : int
        Gauss-Legendre points per panel (panels absorb any remainder of
        n_nodes by growing, never shrinking, so the interpolation order
        is at least nodes_per_panel - 1).
    grading_decades : float, optional
        Number of decades between the first interior panel edge and
        lambda_cut.  Default places the first edge at
        min(1e-2, lambda_cut * 1e-2).
    """
    n_nodes = int(n_nodes)
    if n_nodes < 16:
        raise ValueError(f"node count must be >= 16, got {n_nodes}")
    lambda_cut = float(lambda_cut)
    if math.isinf(lambda_cut) and lambda_cut > 0:
        lambda_cut = 1.0e6
    if not lambda_cut > 0.0:
        raise ValueError(f"lambda_cut must be positive, got {lambda_cut}")
    if nodes_per_panel < 4:
        raise ValueError("nodes_per_panel must be >= 4")

    n_panels = n_nodes // nodes_per_panel
    sizes = [nodes_per_panel] * n_panels
    rem = n_nodes - nodes_per_panel * n_panels
    for k in range(rem):
        sizes[-1 - k] += 1

    if grading_decades is None:
        grading_decades = max(2.0, math.log10(lambda_cut) + 2.0)
    if grading_decades <= 0:
        raise ValueError("grading_decades must be positive")

    ratio = 10.0 ** (-grading_decades / (n_panels - 1))
    edges = np.empty(n_panels + 1)
    edges[0] = 0.0
    edges[1:] = lambda_cut * ratio ** np.arange(n_panels - 1, -1, -1)
    edges[-1] = lambda_cut

    nodes = np.empty(n_nodes)
    weights = np.empty(n_nodes)
    bary = np.empty(n_nodes)
    starts = np.zeros(n_panels + 1, dtype=np.int64)
    pos = 0
    for j, m in enumerate(sizes):
        x, w = _gauss_legendre(m)
        c = 0.5 * (edges[j] + edges[j + 1])
        h = 0.5 * (edges[j + 1] - edges[j])
        nodes[pos:pos + m] = c + h * x
        weights[pos:pos + m] = h * w
        bary[pos:pos + m] = _barycentric_weights(nodes[pos:pos + m])
        pos += m
        starts[j + 1] = pos

    for arr in (nodes, weights, edges, starts, bary):
        arr.setflags(write=False)

    return RadialGrid(nodes=nodes, weights=weights, lambda_cut=lambda_cut,
                      interp_order=nodes_per_panel - 1, panel_edges=edges,
                      panel_starts=starts, bary_weights=bary)


def prefix_grid(grid: RadialGrid, n_panels: int) -> RadialGrid:
    """Restriction of a grid to its first n_panels panels.

    The result is a well-formed grid for the interval [0, edge] with
    edge = panel_edges[n_panels]: weights sum to the new cutoff and all
    panel machinery carries over, so transforms on the sub-interval
    reuse the same code paths.  Views, not copies.
    """
    if not 1 <= n_panels <= grid.n_panels:
        raise ValueError(f"n_panels must be in [1, {grid.n_panels}]")
    cut = int(grid.panel_starts[n_panels])
    return RadialGrid(nodes=grid.nodes[:cut], weights=grid.weights[:cut],
                      lambda_cut=float(grid.panel_edges[n_panels]),
                      interp_order=grid.interp_order,
                      panel_edges=grid.panel_edges[:n_panels + 1],
                      panel_starts=grid.panel_starts[:n_panels + 1],
                      bary_weights=grid.bary_weights[:cut])


@dataclass(frozen=True)
class SampledFunction:
    """A function of one radial index, sampled on a RadialGrid.

    `value_at_zero` carries the b -> 0 boundary value separately; zero
    itself is never a quadrature node.
    """

    grid: RadialGrid
    values: np.ndarray
    value_at_zero: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.nodes.shape:
            raise ValueError(
                f"values shape {values.shape} does not match grid "
                f"({self.grid.nodes.shape})")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "value_at_zero", float(self.value_at_zero))

    def __call__(self, x):
        """Evaluate at x in [0, lambda_cut] (scalar or array).

        Node hits return the stored sample exactly; x = 0 returns
        value_at_zero; elsewhere the panel-local barycentric
        interpolant is used.
        """
        scalar = np.isscalar(x) or np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        grid = self.grid
        if np.any(xs < 0.0) or np.any(xs > grid.lambda_cut):
            raise ValueError("evaluation point outside [0, lambda_cut]")
        out = np.empty(xs.shape)

        zero = xs == 0.0
        out[zero] = self.value_at_zero

        pos = np.searchsorted(grid.nodes, xs)
        inb = pos < grid.n
        hit = np.zeros(xs.shape, dtype=bool)
        hit[inb] = grid.nodes[pos[inb]] == xs[inb]
        out[hit] = self.values[pos[hit]]

        rest = ~(zero | hit)
        if np.any(rest):
            out[rest] = self._bary_eval(xs[rest])
        return float(out[0]) if scalar else out

    def _bary_eval(self, xs: np.ndarray) -> np.ndarray:
        grid = self.grid
        out = np.empty(xs.shape)
        panels = grid.panel_of(xs)
        for j in np.unique(panels):
            sel = panels == j
            s = grid.panel_slice(int(j))
            d = xs[sel, None] - grid.nodes[None, s]
            c = grid.bary_weights[s] / d
            out[sel] = (c @ self.values[s]) / c.sum(axis=1)
        return out

    def node_derivatives(self) -> np.ndarray:
        """Derivative of the panel interpolant at every node."""
        out = np.empty(self.grid.n)
        for j, D in enumerate(self.grid.diff_blocks()):
            s = self.grid.panel_slice(j)
            out[s] = D @ self.values[s]
        return out

    def derivative_at(self, x):
        """Derivative of the panel interpolant at arbitrary points."""
        scalar = np.isscalar(x) or np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        grid = self.grid
        if np.any(xs < 0.0) or np.any(xs > grid.lambda_cut):
            raise ValueError("evaluation point outside [0, lambda_cut]")
        out = np.empty(xs.shape)
        panels = grid.panel_of(xs)
        blocks = None
        for j in np.unique(panels):
            sel = panels == j
            s = grid.panel_slice(int(j))
            xq = grid.nodes[s]
            lam = grid.bary_weights[s]
            fq = self.values[s]
            for i in np.nonzero(sel)[0]:
                xi = xs[i]
                k = np.searchsorted(xq, xi)
                if k < xq.size and xq[k] == xi:
                    if blocks is None:
                        blocks = grid.diff_blocks()
                    out[i] = blocks[int(j)][k] @ fq
                    continue
                d = xi - xq
                c = lam / d
                den = c.sum()
                p = (c @ fq) / den
                out[i] = (c / d) @ (p - fq) / den
        return float(out[0]) if scalar else out


def integrate(grid: RadialGrid, f) -> float:
    """Quadrature of f over [0, lambda_cut].

    f may be a SampledFunction, an array of node values, or a callable.
    """
    if isinstance(f, SampledFunction):
        values = f.values
    elif callable(f):
        values = np.asarray(f(grid.nodes), dtype=np.float64)
    else:
        values = np.asarray(f, dtype=np.float64)
    if values.shape != grid.nodes.shape:
        raise ValueError("integrand not aligned with the grid")
    return float(grid.weights @ values)


def hilbert_transform(f: SampledFunction, a):
    """Finite Hilbert transform H_a[f], a scalar or array in [0, lambda_cut).

    Interior points use singularity subtraction with the analytic log
    term; a = 0 requires f.value_at_zero == 0 and returns the ordinary
    integral of f(p)/p.
    """
    scalar = np.isscalar(a) or np.ndim(a) == 0
    av = np.atleast_1d(np.asarray(a, dtype=np.float64))
    grid = f.grid
    if np.any(av < 0.0) or np.any(av >= grid.lambda_cut):
        raise ValueError(
            f"transform point must lie in [0, {grid.lambda_cut}), got "
            f"{av[(av < 0.0) | (av >= grid.lambda_cut)][0]}")

    out = np.empty(av.shape)
    zero = av == 0.0
    if np.any(zero):
        if f.value_at_zero != 0.0:
            raise ValueError(
                "H_0[f] requires f(0) = 0; the integral of f(p)/p "
                "diverges otherwise")
        out[zero] = (grid.weights / grid.nodes) @ f.values / math.pi

    inner = ~zero
    if np.any(inner):
        out[inner] = _subtracted_transform(f, av[inner])
    return float(out[0]) if scalar else out


def _subtracted_transform(f: SampledFunction, av: np.ndarray) -> np.ndarray:
    grid = f.grid
    fa = np.asarray(f(av))
    diff = grid.nodes[None, :] - av[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (f.values[None, :] - fa[:, None]) / diff
    near = np.abs(diff) < _NEAR_HIT_FRACTION * grid.panel_width_per_node()[None, :]
    if np.any(near):
        d_nodes = f.node_derivatives()
        rows, cols = np.nonzero(near)
        ratio[rows, cols] = d_nodes[cols]
    log_term = np.log((grid.lambda_cut - av) / av)
    return (ratio @ grid.weights + fa * log_term) / math.pi


def hilbert_matrix(grid: RadialGrid) -> np.ndarray:
    """Dense matrix M with (M @ f.values)[i] = H_{nodes[i]}[f].

    Row i encodes the subtracted principal value at node i, including
    the interpolant-derivative replacement of the coincident term, so
    the matrix agrees with hilbert_transform at the nodes to rounding.
    """
    n = grid.n
    nodes = grid.nodes
    w = grid.weights
    diff = nodes[None, :] - nodes[:, None]
    with np.errstate(divide="ignore"):
        R = w[None, :] / diff
    np.fill_diagonal(R, 0.0)
    M = R.copy()
    log_term = np.log((grid.lambda_cut - nodes) / nodes)
    idx = np.arange(n)
    M[idx, idx] += log_term - R.sum(axis=1)
    for j, D in enumerate(grid.diff_blocks()):
        s = grid.panel_slice(j)
        M[s, s] += w[s, None] * D
    M /= math.pi
    return M


def _edge_rule(grid: RadialGrid, *, order: int = 8, depth: int = 32
               ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sub-quadrature of the outermost panel, graded toward the cutoff.

    Several fields of the solved class carry log or power boundary
    layers in (lambda_cut - p) that a single Gauss panel cannot resolve;
    integrals whose near-cutoff accuracy matters swap the last panel's
    rule for this one.  Returns (nodes, weights, gaps) where gaps =
    lambda_cut - nodes, built without cancellation so log terms can be
    fed the exact gap.
    """
    left = float(grid.panel_edges[-2])
    right = float(grid.panel_edges[-1])
    width = right - left
    x, w = _gauss_legendre(order)
    hi = width * 0.5 ** np.arange(depth + 1)
    lo = np.append(hi[1:], 0.0)                    # final sliver reaches the cutoff
    mid = 0.5 * (hi + lo)[:, None]
    half = 0.5 * (hi - lo)[:, None]
    gaps = (mid + half * x[None, :]).ravel()
    wts = (half * np.broadcast_to(w, (depth + 1, order))).ravel()
    return right - gaps, wts, gaps
