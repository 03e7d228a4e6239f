"""Planar correlators supported on two boundary cycles.

The sector splits by cycle-length parity.  Two odd cycles reduce to the
closed (1+1) form, a single Carleman inversion of the boundary equation
whose inhomogeneity is a divided difference of pair values.  Two even
cycles need one extra dense solve per trailing pair (c, d): the moment
X of the (2+2) family obeys a linear singular integral equation whose
kernel couples the outer index through the pair function, so the
discretized operator is a full matrix, not a Carleman triangle.  Longer
cycles of either parity reduce by head-index recursions that mirror the
one-cycle ones, carrying the second cycle along as a passive factor.

The even assembly evaluates one-cycle functions at coinciding indices
(the auxiliary helper F needs the six-point function on the doubly
coincident pattern (a, b, c, d, c, b)).  Those values come from closed
limit formulas in the pair function and its first and mixed second
derivatives, never from numerical extrapolation, because the dense
solve consumes them on the whole node-pair lattice.

Three or more cycles are out of scope and rejected explicitly.
"""

from __future__ import annotations

import math

import numpy as np

from .grids import (RadialGrid, SampledFunction, hilbert_matrix,
                    hilbert_transform, integrate)
from .npoint import DegenerateIndicesError, NPointRequest, _PairTable, n_point
from .solver import BoundaryFunction, ModelParams
from .twopoint import (TwoPointField, build_two_point_field, theta, two_point,
                       two_point_b_derivative)

__all__ = [
    "TwoCycleFields",
    "build_two_cycle_fields",
    "one_plus_one",
    "odd_odd_recursion",
    "solve_X",
    "x_equation_residual",
    "two_plus_two",
    "even_even_recursion",
    "boundary_correlator",
]

#: Same coincidence guard as the one-cycle recursion.
_TOL_FRACTION = 1.0e-8


class TwoCycleFields:
    """Shared node tables for the two-cycle evaluators.

    Thin cache over the solved boundary data, not a new domain type:
    it bundles the pair table with the angle lattice and memoizes the
    derivative columns and X solutions that the even sector reuses
    across calls.  Caches are keyed by the float index value.
    """

    def __init__(self, boundary: BoundaryFunction, params: ModelParams, *,
                 table: TwoPointField | None = None,
                 hilbert: np.ndarray | None = None):
        grid = boundary.samples.grid
        if hilbert is None:
            hilbert = hilbert_matrix(grid)
        if table is None:
            table = build_two_point_field(boundary, params, hilbert=hilbert)
        self.boundary = boundary
        self.params = params
        self.grid = grid
        self.hilbert = hilbert
        self.table = table
        self.coupling = params.coupling
        self.slope_excess = table.slope_excess
        #: coefficient coupling / (1 + slope_excess)^2 of the two-cycle
        #: equations; the one-cycle recursion prefactor is its negative.
        self.kappa = self.coupling / (1.0 + self.slope_excess) ** 2
        f = boundary.samples.values
        self.hilbert_g = SampledFunction(grid, hilbert @ f, math.nan)
        lam = self.coupling
        p = grid.nodes
        self.num = lam * math.pi * p * f
        self.den0 = 1.0 + lam * math.pi * p * self.hilbert_g.values
        self.theta0 = np.arctan2(self.num, self.den0)
        self.theta_diag = np.arctan2(self.num, self.den0 + p * f)
        self.theta_diag_sf = SampledFunction(grid, self.theta_diag, 0.0)
        # Ward-consistent normalization: Z (1+Y) = 1 / (1 - lambda int G)
        self.z_integral = 1.0 - lam * integrate(grid, boundary.samples)
        self._pairs = _PairTable(table)
        self._theta_nodes = None
        self._d01 = None
        self._g_cols: dict = {}
        self._d_cols: dict = {}
        self._rows: dict = {}
        self._x_cache: dict = {}

    # -- lattice tables -------------------------------------------------

    @property
    def theta_nodes(self) -> np.ndarray:
        """theta_{p_j}(p_i) on the node lattice, [i, j] = (point, index)."""
        if self._theta_nodes is None:
            f = self.boundary.samples.values
            t = np.arctan2(self.num[:, None],
                           self.den0[:, None] + np.outer(f, self.grid.nodes))
            t.flags.writeable = False
            self._theta_nodes = t
        return self._theta_nodes

    @property
    def d01_table(self) -> np.ndarray:
        """Second-index derivative of the pair function on the lattice."""
        if self._d01 is None:
            lam = self.coupling
            p = self.grid.nodes
            t = self.theta_nodes
            kern = np.sin(t) ** 2 / (lam * math.pi * p[:, None])
            trans = self.hilbert @ kern
            gn = self.table.values[1:, 1:]
            d = gn * (-np.sin(t) * np.cos(t) / (lam * math.pi * p[:, None])
                      - trans)
            d.flags.writeable = False
            self._d01 = d
        return self._d01

    # -- scalar accessors ----------------------------------------------

    def pair(self, x: float, y: float) -> float:
        return self._pairs.pair(x, y)

    def pair_derivative(self, x: float, y: float) -> float:
        """d G(x, b) / d b at b = y."""
        return two_point_b_derivative(x, y, self.boundary, self.params,
                                      hilbert_g=self.hilbert_g)

    def angle(self, b: float, a: float) -> float:
        return theta(b, a, self.boundary, self.params,
                     hilbert_g=self.hilbert_g)

    # -- columns and rows ----------------------------------------------

    def g_column(self, y: float) -> SampledFunction:
        """Pair function G(., y) over the nodes, with its value at 0."""
        key = float(y)
        col = self._g_cols.get(key)
        if col is None:
            f = self.boundary.samples.values
            grid = self.grid
            ty = np.arctan2(self.num, self.den0 + key * f)
            diff = ty - self.theta0
            vals = (f * np.sin(ty) / np.sin(self.theta0)
                    * np.exp(self.hilbert @ diff))
            v0 = math.exp(float((grid.weights / grid.nodes) @ diff)
                          / math.pi) / (1.0 + key)
            col = SampledFunction(grid, vals, v0)
            self._g_cols[key] = col
        return col

    def d_column(self, y: float) -> SampledFunction:
        """Second-index derivative dG(., b)/db at b = y over the nodes."""
        key = float(y)
        col = self._d_cols.get(key)
        if col is None:
            lam = self.coupling
            grid = self.grid
            p = grid.nodes
            f = self.boundary.samples.values
            ty = np.arctan2(self.num, self.den0 + key * f)
            kern = np.sin(ty) ** 2 / (lam * math.pi * p)
            trans = self.hilbert @ kern
            gc = self.g_column(key)
            vals = gc.values * (-np.sin(ty) * np.cos(ty) / (lam * math.pi * p)
                                - trans)
            v0 = gc.value_at_zero * (-1.0 / (1.0 + key)
                                     - float((grid.weights / p) @ kern)
                                     / math.pi)
            col = SampledFunction(grid, vals, v0)
            self._d_cols[key] = col
        return col

    def mixed_row(self, y: float) -> np.ndarray:
        """Mixed second derivative of the pair function at (nodes, y).

        Symmetry of the mixed partial turns it into the grid derivative
        of the first-derivative column, which the panel interpolant
        differentiates accurately.
        """
        return self.d_column(y).node_derivatives()

    def _columns_at(self, table: np.ndarray, x: float) -> np.ndarray:
        """Panel interpolant of every lattice column at the point x."""
        grid = self.grid
        pos = int(np.searchsorted(grid.nodes, x))
        if pos < grid.n and grid.nodes[pos] == x:
            return table[pos, :].copy()
        j = int(grid.panel_of(x)[0])
        s = grid.panel_slice(j)
        d = x - grid.nodes[s]
        c = grid.bary_weights[s] / d
        return (c @ table[s, :]) / c.sum()

    def _transform_columns(self, table: np.ndarray, x: float) -> np.ndarray:
        """Finite Hilbert transform of every lattice column at x."""
        grid = self.grid
        p = grid.nodes
        fx = self._columns_at(table, x)
        diff = p - x
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (table - fx[None, :]) / diff[:, None]
        near = np.abs(diff) < 1.0e-6 * grid.panel_width_per_node()
        if np.any(near):
            blocks = grid.diff_blocks()
            for i in np.nonzero(near)[0]:
                j = int(grid.panel_of(p[i])[0])
                s = grid.panel_slice(j)
                ratio[i, :] = blocks[j][i - s.start] @ table[s, :]
        log_term = math.log((grid.lambda_cut - x) / x)
        return (grid.weights @ ratio + fx * log_term) / math.pi

    def _point_data(self, x: float) -> tuple[float, float, float]:
        """(f(x), H_x[f], theta_0(x)) for an off-grid point."""
        lam = self.coupling
        fx = float(self.boundary.samples(x))
        hx = float(hilbert_transform(self.boundary.samples, x))
        t0 = math.atan2(lam * math.pi * x * fx,
                        1.0 + lam * math.pi * x * hx)
        return fx, hx, t0

    def theta_row(self, x: float) -> np.ndarray:
        """theta_{p_j}(x) over the second-index nodes, x off the grid."""
        key = ("theta", float(x))
        row = self._rows.get(key)
        if row is None:
            lam = self.coupling
            fx, hx, _ = self._point_data(x)
            row = np.arctan2(lam * math.pi * x * fx,
                             1.0 + self.grid.nodes * fx
                             + lam * math.pi * x * hx)
            self._rows[key] = row
        return row

    def g_row(self, x: float) -> np.ndarray:
        """Pair function G(x, p_j) over the second-index nodes."""
        key = ("g", float(x))
        row = self._rows.get(key)
        if row is None:
            fx, _, t0x = self._point_data(x)
            diff = self.theta_nodes - self.theta0[:, None]
            trans = self._transform_columns(diff, x)
            row = fx * np.sin(self.theta_row(x)) / math.sin(t0x) \
                * np.exp(trans)
            self._rows[key] = row
        return row

    def d_row(self, x: float) -> np.ndarray:
        """dG(x, b)/db at b = p_j over the second-index nodes."""
        key = ("d", float(x))
        row = self._rows.get(key)
        if row is None:
            lam = self.coupling
            tr = self.theta_row(x)
            kern = np.sin(self.theta_nodes) ** 2 \
                / (lam * math.pi * self.grid.nodes[:, None])
            trans = self._transform_columns(kern, x)
            row = self.g_row(x) * (-np.sin(tr) * np.cos(tr)
                                   / (lam * math.pi * x) - trans)
            self._rows[key] = row
        return row

    # -- cached X solves ------------------------------------------------

    def x_solution(self, c: float, d: float) -> SampledFunction:
        key = (float(c), float(d))
        sol = self._x_cache.get(key)
        if sol is None:
            sol = solve_X(c, d, self)
            self._x_cache[key] = sol
        return sol


def build_two_cycle_fields(boundary: BoundaryFunction, params: ModelParams, *,
                           table: TwoPointField | None = None,
                           hilbert: np.ndarray | None = None
                           ) -> TwoCycleFields:
    return TwoCycleFields(boundary, params, table=table, hilbert=hilbert)


def _coincidence_tolerance(fields: TwoCycleFields) -> float:
    return _TOL_FRACTION * fields.grid.lambda_cut


def _check_distinct(x: float, y: float, positions, tol: float) -> float:
    d = x - y
    if abs(d) < tol:
        raise DegenerateIndicesError(positions, (x, y))
    return d


# ---------------------------------------------------------------------------
# (1+1)
# ---------------------------------------------------------------------------

def one_plus_one(a: float, c: float, fields: TwoCycleFields, *,
                 limit_mode: bool = False) -> float:
    """Connected correlator of two length-one cycles at indices a, c.

    Closed form from inverting the boundary equation: the diagonal
    angle theta(x) := theta_x(x) enters through its exponentiated
    transforms, and the inhomogeneity is the divided difference of pair
    values against the second index.  The a = c point is a removable
    0/0; `limit_mode` evaluates it by a symmetric sweep.
    """
    a = float(a)
    c = float(c)
    if a <= 0.0 or c <= 0.0:
        raise ValueError("cycle indices must be positive in the closed form")
    lam = fields.coupling
    if lam == 0.0:
        return 0.0
    if abs(c - a) < _coincidence_tolerance(fields):
        if not limit_mode:
            raise DegenerateIndicesError((0, 1), (a, c))
        return _one_plus_one_limit(0.5 * (a + c), fields)
    return _one_plus_one_core(a, c, fields)


def _one_plus_one_core(a: float, c: float, fields: TwoCycleFields) -> float:
    """(1+1) closed form without the coincidence gate (limit sweeps)."""
    grid = fields.grid
    td = fields.theta_diag_sf
    tha = fields.angle(a, a)
    thc = fields.angle(c, c)
    ha = float(hilbert_transform(td, a))
    hc = float(hilbert_transform(td, c))
    exp_neg = np.exp(-(fields.hilbert @ td.values))
    gcol = fields.g_column(c)
    u = SampledFunction(grid, exp_neg * np.sin(fields.theta_diag)
                        * gcol.values, 0.0)
    gcc = fields.pair(c, c)
    gac = fields.pair(a, c)
    bracket = (gcc * math.cos(thc) * math.exp(-hc)
               - gac * math.cos(tha) * math.exp(-ha)
               - float(hilbert_transform(u, a))
               + float(hilbert_transform(u, c)))
    pre = math.sin(tha) * math.exp(ha) \
        / ((1.0 + fields.slope_excess) ** 2 * math.pi * a * (c - a))
    return pre * bracket


def _one_plus_one_limit(m: float, fields: TwoCycleFields) -> float:
    """Richardson limit of the (1+1) form onto the diagonal at m."""
    h0 = 0.02 * (1.0 + m)
    h0 = min(h0, 0.45 * m)
    levels = 4
    hs = [h0 / 2 ** k for k in range(levels)]
    vals = [_one_plus_one_core(m - h, m + h, fields) for h in hs]
    xs = [h * h for h in hs]
    for step in range(1, levels):
        for i in range(levels - step):
            vals[i] = vals[i + 1] + (vals[i + 1] - vals[i]) \
                * xs[i + 1] / (xs[i] - xs[i + 1])
    return vals[0]


# ---------------------------------------------------------------------------
# coincident one-cycle patterns
# ---------------------------------------------------------------------------

def _cp4(fields: TwoCycleFields, b0: float, b1: float, b2: float) -> float:
    """Four-point function on the odd-coincident pattern (b0, b1, b2, b1).

    Limit of the closed four-point form as the two odd indices merge;
    the divided difference becomes the second-index derivative.
    """
    num = (fields.pair(b2, b1) * fields.pair_derivative(b0, b1)
           - fields.pair(b0, b1) * fields.pair_derivative(b2, b1))
    return -fields.kappa * num / (b0 - b2)


def _p6_scalar(fields: TwoCycleFields, a: float, b: float, c: float,
               d: float) -> float:
    """Six-point function on the doubly coincident pattern (a,b,c,d,c,b).

    Closed limit of the algebraic recursion; derived by collapsing the
    fifth index onto b first (odd merge), then the fourth onto c (even
    merge).  Verified against extrapolated generic evaluations.
    """
    kap = -fields.kappa
    g_ab = fields.pair(a, b)
    g_cb = fields.pair(c, b)
    g_cd = fields.pair(c, d)
    g_ad = fields.pair(a, d)
    d_cb = fields.pair_derivative(c, b)
    d_dc = fields.pair_derivative(d, c)
    d_bc = fields.pair_derivative(b, c)
    d_ab = fields.pair_derivative(a, b)
    m_cb = fields.d_column(c).derivative_at(b)
    a1p = (g_cd * m_cb - d_cb * d_dc) * (d - b) + g_cd * d_bc - g_cb * d_dc
    a2 = (g_ad * d_cb - d_ab * g_cd) * (d - b) + g_ad * g_cb - g_ab * g_cd
    b1p = d_bc * g_cd - d_dc * g_cb
    g4 = kap * (g_ab * g_cd - g_ad * g_cb) / ((a - c) * (b - d))
    return (kap ** 2 * g_ab * a1p / ((a - c) * (d - b) ** 2)
            + kap ** 2 * g_cb * a2 / ((a - c) ** 2 * (d - b) ** 2)
            - kap * g4 * d_cb / (a - c)
            + kap ** 2 * d_ab * b1p / ((b - d) * (a - c)))


def _f_scalar(fields: TwoCycleFields, a: float, b: float, c: float,
              d: float) -> float:
    """Auxiliary helper F_{ab|cdcb} by the division-subtraction scheme."""
    g_bc = fields.pair(b, c)
    inner = _cp4(fields, c, b, a)  # (a, b, c, b) rotated by two
    return (_p6_scalar(fields, a, b, c, d)
            - _cp4(fields, b, c, d) * inner / g_bc) / g_bc


# ---------------------------------------------------------------------------
# the dense X solve
# ---------------------------------------------------------------------------

def _f_lattice(fields: TwoCycleFields, c: float, d: float) -> np.ndarray:
    """F_{a q | c d c q} over the (a, q) node lattice."""
    kap = -fields.kappa
    p = fields.grid.nodes
    gn = fields.table.values[1:, 1:]
    d01 = fields.d01_table
    colc = fields.g_column(c).values      # G(q, c) = G(c, q)
    cold = fields.g_column(d).values      # G(a, d)
    dcol_c = fields.d_column(c).values    # dG(q, b)/db at b = c
    drow_c = fields.d_row(c)              # dG(c, b)/db at b = q
    mrow_c = fields.mixed_row(c)          # mixed second derivative at (q, c)
    g_cd = fields.pair(c, d)
    d_dc = fields.pair_derivative(d, c)

    a1p = (g_cd * mrow_c - drow_c * d_dc) * (d - p) \
        + g_cd * dcol_c - colc * d_dc
    b1p = dcol_c * g_cd - d_dc * colc
    ac = p[:, None] - c
    qd = p[None, :] - d
    a2 = (cold[:, None] * drow_c[None, :] - d01 * g_cd) * (d - p)[None, :] \
        + cold[:, None] * colc[None, :] - gn * g_cd
    g4 = kap * (gn * g_cd - cold[:, None] * colc[None, :]) / (ac * qd)
    p6 = (kap ** 2 * gn * a1p[None, :] / (ac * qd ** 2)
          + kap ** 2 * colc[None, :] * a2 / (ac ** 2 * qd ** 2)
          - kap * g4 * drow_c[None, :] / ac
          + kap ** 2 * d01 * b1p[None, :] / (qd * ac))

    cp4_q = kap * b1p / (p - d)                       # G_{q c d c}
    cp4_aq = kap * (gn * drow_c[None, :]
                    - colc[None, :] * d01) / (c - p)[:, None]  # G_{a q c q}
    return (p6 - cp4_q[None, :] * cp4_aq / colc[None, :]) / colc[None, :]


def _x_system(fields: TwoCycleFields, c: float, d: float
              ) -> tuple[np.ndarray, np.ndarray]:
    """Dense operator and right-hand side of the X equation."""
    lam = fields.coupling
    grid = fields.grid
    p = grid.nodes
    w = grid.weights
    gn = fields.table.values[1:, 1:]
    grow0 = fields.table.values[0, 1:]
    t = fields.theta_nodes
    s = np.sin(t)
    s0 = np.sin(fields.theta0)

    phi = (1.0 + lam * ((gn - grow0[None, :]) @ w)
           - lam * ((gn * s * np.cos(t - fields.theta0[:, None]))
                    @ w) / s0)
    moments = gn @ ((s ** 2 * (w * p)[None, :]).T)   # int q dq sin^2(t_q(y)) G(a, q)
    kernel = moments / (math.pi * p[None, :])
    op = fields.hilbert * kernel
    op[np.diag_indices_from(op)] += phi

    kap = -fields.kappa
    colc = fields.g_column(c).values
    cold = fields.g_column(d).values
    dcol_c = fields.d_column(c).values
    dcol_d = fields.d_column(d).values
    g_cd = fields.pair(c, d)
    d_dc = fields.pair_derivative(d, c)
    d_cd = fields.pair_derivative(c, d)
    cp4_acdc = kap * (g_cd * dcol_c - colc * d_dc) / (p - d)
    cp4_adcd = kap * (g_cd * dcol_d - cold * d_cd) / (p - c)
    f_sum = _f_lattice(fields, c, d) + _f_lattice(fields, d, c)
    rhs = lam * (f_sum @ (w * p)) + fields.kappa * (cp4_acdc + cp4_adcd)
    return op, rhs


def solve_X(c: float, d: float, fields: TwoCycleFields) -> SampledFunction:
    """Solve the even-sector moment equation for X_{.|cd} on the nodes.

    The equation couples the unknown at the outer point both through a
    multiplier and through the singular transform of a kernel that
    itself depends on the outer point, so the discretization is a full
    matrix: subtracted-transform rows times the kernel lattice plus the
    multiplier on the diagonal.  A solve that leaves a relative defect
    above 1e-7 reports the condition number and fails.
    """
    c = float(c)
    d = float(d)
    grid = fields.grid
    if not (0.0 <= c <= grid.lambda_cut and 0.0 <= d <= grid.lambda_cut):
        raise ValueError("trailing indices must lie in [0, lambda_cut]")
    if fields.coupling == 0.0:
        return SampledFunction(grid, np.zeros(grid.n), 0.0)
    for y in (c, d):
        pos = int(np.searchsorted(grid.nodes, y))
        if pos < grid.n and grid.nodes[pos] == y:
            raise ValueError(
                f"trailing index {y} sits exactly on a grid node; the "
                "coincident-pattern denominators degenerate there")
    op, rhs = _x_system(fields, c, d)
    try:
        x = np.linalg.solve(op, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            "singular discretized X operator; condition number "
            f"{np.linalg.cond(op):.3e}") from exc
    scale = max(1.0, float(np.max(np.abs(rhs))))
    defect = float(np.max(np.abs(op @ x - rhs))) / scale
    if not defect <= 1.0e-7:
        raise RuntimeError(
            f"X solve left relative defect {defect:.3e}; condition number "
            f"{np.linalg.cond(op):.3e}")
    return SampledFunction(grid, x, math.nan)


def x_equation_residual(x: SampledFunction, c: float, d: float,
                        fields: TwoCycleFields) -> float:
    """Sup defect of the X equation for a candidate solution.

    Evaluates the equation with this fields' discretization, away from
    the cutoff edge; `x` may come from a different (coarser) grid, in
    which case its interpolant is sampled here.
    """
    op, rhs = _x_system(fields, c, d)
    vals = x.values if x.grid is fields.grid else x(fields.grid.nodes)
    keep = fields.grid.interior()
    return float(np.max(np.abs((op @ vals - rhs)[keep])))


# ---------------------------------------------------------------------------
# (2+2)
# ---------------------------------------------------------------------------

def two_plus_two(a: float, b: float, c: float, d: float,
                 fields: TwoCycleFields) -> float:
    """Connected correlator of the even cycles (a b) and (c d).

    Assembled from the two coincident F helpers, the cached X solution
    for the trailing pair, and one transform of the X column against
    the angle weight.  Symmetry under pair exchange and within-pair
    swaps is a measured property, not an identity of the assembly.
    """
    a = float(a)
    b = float(b)
    c = float(c)
    d = float(d)
    if min(a, b, c, d) <= 0.0:
        raise ValueError("even-sector indices must be positive")
    lam = fields.coupling
    if lam == 0.0:
        return 0.0
    x = fields.x_solution(c, d)
    grid = fields.grid
    p = grid.nodes
    f = fields.boundary.samples.values
    tb = np.arctan2(fields.num, fields.den0 + b * f)
    u = SampledFunction(grid, np.sin(tb) ** 2 * x.values / (lam * math.pi * p),
                        0.0)
    g_ab = fields.pair(a, b)
    th_ab = fields.angle(b, a)
    helpers = (_f_scalar(fields, a, b, c, d)
               + _f_scalar(fields, a, b, d, c))
    return (helpers
            - math.sin(th_ab) * math.cos(th_ab) / (lam * math.pi * a)
            * g_ab * float(x(a))
            - g_ab * float(hilbert_transform(u, a)))


# ---------------------------------------------------------------------------
# cycle recursions
# ---------------------------------------------------------------------------

def _single(fields: TwoCycleFields, idx: tuple) -> float:
    return n_point(NPointRequest(idx), fields.table)


def _two_cycle(fields: TwoCycleFields, bs: tuple, cs: tuple) -> float:
    if len(bs) % 2 != len(cs) % 2:
        return 0.0
    if len(bs) % 2:
        return _odd_pair(fields, bs, cs)
    return _even_pair(fields, bs, cs)


def _odd_pair(fields: TwoCycleFields, bs: tuple, cs: tuple) -> float:
    if len(bs) == 1:
        if len(cs) == 1:
            return one_plus_one(bs[0], cs[0], fields)
        return _odd_pair(fields, cs, bs)
    tol = _coincidence_tolerance(fields)
    ell = (len(bs) - 1) // 2
    edge = _check_distinct(bs[1], bs[-1], (1, len(bs) - 1), tol)
    total = 0.0
    for k in range(1, len(cs) + 1):
        ck = cs[k - 1]
        den = _check_distinct(bs[0], ck, (0, len(bs) + k - 1), tol)
        merged = _single(fields, cs[:k - 1] + bs + cs[k - 1:])
        swapped = _single(fields, cs[:k] + bs[1:] + (bs[0],) + cs[k:])
        total += (merged - swapped) / (edge * den)
    for j in range(1, ell + 1):
        den = _check_distinct(bs[0], bs[2 * j - 1], (0, 2 * j - 1), tol)
        t1 = _two_cycle(fields, bs[:2 * j - 1], cs) \
            * _single(fields, bs[2 * j - 1:])
        t2 = _two_cycle(fields, (bs[2 * j - 1],) + bs[1:2 * j - 1], cs) \
            * _single(fields, (bs[0],) + bs[2 * j:])
        total += (t1 - t2) / (edge * den)
    for j in range(1, ell + 1):
        den = _check_distinct(bs[0], bs[2 * j], (0, 2 * j), tol)
        t1 = _single(fields, bs[:2 * j]) * _two_cycle(fields, bs[2 * j:], cs)
        t2 = _single(fields, (bs[2 * j],) + bs[1:2 * j]) \
            * _two_cycle(fields, (bs[0],) + bs[2 * j + 1:], cs)
        total += (t1 - t2) / (edge * den)
    return -fields.kappa * total


def _even_pair(fields: TwoCycleFields, bs: tuple, cs: tuple) -> float:
    if len(bs) == 2:
        if len(cs) == 2:
            return two_plus_two(bs[0], bs[1], cs[0], cs[1], fields)
        return _even_pair(fields, cs, bs)
    tol = _coincidence_tolerance(fields)
    ell = len(bs) // 2
    head = bs[0]
    edge = _check_distinct(bs[1], bs[-1], (1, len(bs) - 1), tol)
    total = 0.0
    for j in range(1, ell):
        den = _check_distinct(head, bs[2 * j], (0, 2 * j), tol)
        t1 = _two_cycle(fields, bs[1:2 * j] + (head,), cs) \
            * _single(fields, bs[2 * j:])
        t2 = _two_cycle(fields, bs[1:2 * j + 1], cs) \
            * _single(fields, (head,) + bs[2 * j + 1:])
        total += (t1 - t2) / (edge * den)
        t3 = _single(fields, bs[1:2 * j] + (head,)) \
            * _two_cycle(fields, bs[2 * j:], cs)
        t4 = _single(fields, bs[1:2 * j + 1]) \
            * _two_cycle(fields, (head,) + bs[2 * j + 1:], cs)
        total += (t3 - t4) / (edge * den)
    for k in range(1, len(cs) + 1):
        ck = cs[k - 1]
        den = _check_distinct(head, ck, (0, len(bs) + k - 1), tol)
        merged = _single(fields, cs[:k - 1] + (head,) + bs[1:] + cs[k - 1:])
        swapped = _single(fields, cs[:k] + bs[1:] + (head,) + cs[k:])
        total += (merged - swapped) / (edge * den)
    return -fields.kappa * total


def _as_cycle(indices) -> tuple:
    cyc = tuple(float(v) for v in indices)
    if not cyc:
        raise ValueError("cycle must not be empty")
    if any(v < 0.0 for v in cyc):
        raise ValueError("cycle indices must be nonnegative")
    return cyc


def _canonical_cycle(cyc: tuple) -> tuple:
    """Lexicographic minimum over rotations and the reversal.

    The correlator depends on an index cycle only through its dihedral
    class, but the head-index recursion breaks that symmetry at finite
    grid resolution.  Normalizing the input makes equivalent cycles
    evaluate through the identical arithmetic.
    """
    m = len(cyc)
    rev = tuple(reversed(cyc))
    reps = [cyc[i:] + cyc[:i] for i in range(m)]
    reps += [rev[i:] + rev[:i] for i in range(m)]
    return min(reps)


def _canonical_pair(bs: tuple, cs: tuple) -> tuple:
    bs = _canonical_cycle(bs)
    cs = _canonical_cycle(cs)
    if (len(cs), cs) < (len(bs), bs):
        return cs, bs
    return bs, cs


def odd_odd_recursion(b_cycle, c_cycle, fields: TwoCycleFields) -> float:
    """Correlator of two odd cycles by the head-index recursion.

    The first b index is pulled out against every c position (merging
    the cycles into one) and against every odd split of its own cycle
    (factorizing into shorter two-cycle times one-cycle functions).
    The pure (1+1) case routes to the closed form; a length-one b cycle
    against a longer c cycle uses the exchange symmetry of the pair.
    """
    bs = _as_cycle(b_cycle)
    cs = _as_cycle(c_cycle)
    if len(bs) % 2 == 0 or len(cs) % 2 == 0:
        raise ValueError("both cycle lengths must be odd")
    if fields.coupling == 0.0:
        return 0.0
    bs, cs = _canonical_pair(bs, cs)
    return _odd_pair(fields, bs, cs)


def even_even_recursion(b_cycle, c_cycle, fields: TwoCycleFields) -> float:
    """Correlator of two even cycles by the head-index recursion.

    Reduces to (2+2) blocks, one-cycle functions, and shorter even
    two-cycle functions; the b cycle must have length at least four
    (the base case lives in `two_plus_two`).
    """
    bs = _as_cycle(b_cycle)
    cs = _as_cycle(c_cycle)
    if len(bs) % 2 or len(cs) % 2:
        raise ValueError("both cycle lengths must be even")
    if len(bs) < 4:
        raise ValueError("b cycle must have length >= 4; the (2+2) base "
                         "case is two_plus_two")
    if fields.coupling == 0.0:
        return 0.0
    bs, cs = _canonical_pair(bs, cs)
    return _even_pair(fields, bs, cs)


def boundary_correlator(cycles, fields: TwoCycleFields) -> float:
    """Dispatch a correlator given as a list of index cycles.

    One cycle goes to the one-cycle evaluator, two cycles to this
    module (zero when the parities differ), three or more cycles are
    unimplemented: no closed recursion is available for them here.
    """
    parts = [_as_cycle(c) for c in cycles]
    if not parts:
        raise ValueError("need at least one cycle")
    if len(parts) >= 3:
        raise NotImplementedError(
            "correlators with three or more boundary cycles are not "
            "implemented; only the one- and two-cycle sectors have "
            "closed evaluations here")
    if len(parts) == 1:
        return _single(fields, parts[0])
    bs, cs = _canonical_pair(*parts)
    if len(bs) % 2 != len(cs) % 2:
        return 0.0
    if fields.coupling == 0.0:
        return 0.0
    if len(bs) % 2:
        return _odd_pair(fields, bs, cs)
    return _even_pair(fields, bs, cs)
