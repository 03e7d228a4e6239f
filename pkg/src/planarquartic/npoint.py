"""Planar single-boundary N-point functions.

Two independent evaluation paths from the two-point table:

* an algebraic recursion that splits the cyclic index tuple at even
  positions, with prefactor (-coupling)/(1 + slope_excess)^2 per level;
* explicit chord-diagram sums: non-crossing even-odd pairings (Catalan
  many) decorated by an oriented tree on the even positions and one on
  the odd positions, each tree edge contributing an inverse index
  difference.

The diagram tables for N in {4, 6, 8} are pinned data; agreement of the
two paths on random inputs is the correctness criterion for both.
Coinciding indices are rejected by default; an opt-in limit mode
resolves them by symmetric perturbation plus Richardson extrapolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import hilbert_matrix, integrate
from .solver import BoundaryFunction, ModelParams
from .twopoint import TwoPointField

__all__ = [
    "DegenerateIndicesError",
    "NPointRequest",
    "ChordDiagramTerm",
    "n_point",
    "four_point",
    "enumerate_chord_terms",
    "n_point_via_diagrams",
    "check_bijk_identity",
    "check_ward_four_point",
    "fit_index_scaling",
]


class DegenerateIndicesError(ValueError):
    """A needed index difference fell below the coincidence tolerance."""

    def __init__(self, positions: tuple[int, int], values: tuple[float, float]):
        self.positions = positions
        self.values = values
        super().__init__(
            f"indices at positions {positions[0]} and {positions[1]} "
            f"coincide ({values[0]!r} vs {values[1]!r}); rerun with the "
            "limit mode to take the divided-difference limit")


@dataclass(frozen=True)
class NPointRequest:
    """Cyclic index tuple b_0 ... b_{N-1} (N even) plus degeneracy policy.

    `coincidence_tolerance` defaults to 1e-8 * lambda_cut at evaluation
    time; `allow_limits` routes coincident indices to the perturbative
    limit evaluator instead of raising.
    """

    indices: tuple
    coincidence_tolerance: float | None = None
    allow_limits: bool = False

    def __post_init__(self):
        idx = tuple(float(b) for b in self.indices)
        if len(idx) < 2 or len(idx) % 2:
            raise ValueError("index tuple length must be even and >= 2")
        if any(b < 0.0 for b in idx):
            raise ValueError("indices must be nonnegative")
        object.__setattr__(self, "indices", idx)


@dataclass(frozen=True)
class ChordDiagramTerm:
    """One summand of the diagrammatic N-point expansion.

    `pairing` holds the chords (even position, odd position); the trees
    hold oriented edges (tail, head), each standing for the reciprocal
    of (index at tail - index at head).
    """

    pairing: tuple
    even_tree: tuple
    odd_tree: tuple
    sign: int = 1

    def planar(self) -> bool:
        """No crossings within each family or between trees and chords.

        The even tree and the odd tree are drawn on opposite sides of
        the boundary circle, so even-odd interleavings are allowed;
        everything else must be non-crossing except at shared vertices.
        """
        n = 2 * len(self.pairing)

        def crosses(e1, e2):
            a, b = e1
            lo, hi = min(a, b), max(a, b)
            if set(e1) & set(e2):
                return False
            return sum(lo < v < hi for v in e2) == 1

        chords = list(self.pairing)
        for i, c in enumerate(chords):
            if c[0] % 2 == c[1] % 2 or not (0 <= c[0] < n and 0 <= c[1] < n):
                return False
            for other in chords[i + 1:]:
                if crosses(c, other):
                    return False
        for tree in (self.even_tree, self.odd_tree):
            for i, e in enumerate(tree):
                for c in chords:
                    if crosses(e, c):
                        return False
                for other in tree[i + 1:]:
                    if crosses(e, other):
                        return False
        return True


# Diagram tables: (pairing, even tree, odd tree) with implicit sign +1.
# The two N = 4 terms are mapped into each other by a quarter rotation
# with both arrows reversed.

_DIAGRAMS_4 = (
    (((0, 1), (2, 3)), ((0, 2),), ((1, 3),)),
    (((0, 3), (1, 2)), ((0, 2),), ((3, 1),)),
)

_DIAGRAMS_6 = (
    (((0, 1), (2, 5), (4, 3)), ((0, 2), (2, 4)), ((1, 5), (5, 3))),
    (((0, 3), (2, 1), (4, 5)), ((4, 0), (0, 2)), ((5, 3), (3, 1))),
    (((0, 5), (2, 3), (4, 1)), ((2, 4), (4, 0)), ((3, 1), (1, 5))),
    (((0, 1), (2, 3), (4, 5)), ((0, 2), (2, 4)), ((1, 3), (3, 5))),
    (((0, 1), (2, 3), (4, 5)), ((0, 4), (4, 2)), ((1, 3), (3, 5))),
    (((0, 1), (2, 3), (4, 5)), ((0, 4), (4, 2)), ((1, 5), (5, 3))),
    (((0, 5), (2, 1), (4, 3)), ((0, 4), (4, 2)), ((5, 3), (3, 1))),
    (((0, 5), (2, 1), (4, 3)), ((0, 2), (2, 4)), ((5, 3), (3, 1))),
    (((0, 5), (2, 1), (4, 3)), ((0, 2), (2, 4)), ((5, 1), (1, 3))),
)

_DIAGRAMS_8 = (
    (((0, 1), (2, 7), (4, 5), (6, 3)),
     ((0, 2), (2, 6), (6, 4)), ((1, 7), (7, 3), (3, 5))),
    (((0, 3), (2, 1), (4, 7), (6, 5)),
     ((2, 0), (0, 4), (4, 6)), ((1, 3), (3, 7), (7, 5))),
    (((0, 5), (2, 3), (4, 1), (6, 7)),
     ((2, 4), (4, 0), (0, 6)), ((3, 1), (1, 5), (5, 7))),
    (((0, 7), (2, 5), (4, 3), (6, 1)),
     ((4, 2), (2, 6), (6, 0)), ((3, 5), (5, 1), (1, 7))),

    (((0, 1), (2, 7), (4, 3), (6, 5)),
     ((0, 2), (2, 4), (4, 6)), ((1, 7), (7, 3), (3, 5))),
    (((0, 1), (2, 7), (4, 3), (6, 5)),
     ((0, 2), (2, 4), (4, 6)), ((1, 7), (7, 5), (5, 3))),
    (((0, 1), (2, 7), (4, 3), (6, 5)),
     ((0, 2), (2, 6), (6, 4)), ((1, 7), (7, 5), (5, 3))),

    (((0, 3), (2, 1), (4, 5), (6, 7)),
     ((2, 0), (0, 4), (4, 6)), ((1, 3), (3, 5), (5, 7))),
    (((0, 3), (2, 1), (4, 5), (6, 7)),
     ((2, 0), (0, 6), (6, 4)), ((1, 3), (3, 5), (5, 7))),
    (((0, 3), (2, 1), (4, 5), (6, 7)),
     ((2, 0), (0, 6), (6, 4)), ((1, 3), (3, 7), (7, 5))),

    (((0, 7), (2, 3), (4, 1), (6, 5)),
     ((2, 4), (4, 6), (6, 0)), ((3, 1), (1, 5), (5, 7))),
    (((0, 7), (2, 3), (4, 1), (6, 5)),
     ((2, 4), (4, 6), (6, 0)), ((3, 1), (1, 7), (7, 5))),
    (((0, 7), (2, 3), (4, 1), (6, 5)),
     ((2, 4), (4, 0), (0, 6)), ((3, 1), (1, 7), (7, 5))),

    (((0, 1), (2, 5), (4, 3), (6, 7)),
     ((4, 2), (2, 6), (6, 0)), ((3, 5), (5, 7), (7, 1))),
    (((0, 1), (2, 5), (4, 3), (6, 7)),
     ((4, 2), (2, 0), (0, 6)), ((3, 5), (5, 7), (7, 1))),
    (((0, 1), (2, 5), (4, 3), (6, 7)),
     ((4, 2), (2, 0), (0, 6)), ((3, 5), (5, 1), (1, 7))),

    (((0, 7), (2, 1), (4, 5), (6, 3)),
     ((4, 6), (6, 0), (0, 2)), ((5, 3), (3, 7), (7, 1))),
    (((0, 7), (2, 1), (4, 5), (6, 3)),
     ((4, 6), (6, 0), (0, 2)), ((5, 3), (3, 1), (1, 7))),
    (((0, 7), (2, 1), (4, 5), (6, 3)),
     ((4, 6), (6, 2), (2, 0)), ((5, 3), (3, 1), (1, 7))),

    (((0, 1), (2, 3), (4, 7), (6, 5)),
     ((6, 4), (4, 0), (0, 2)), ((5, 7), (7, 1), (1, 3))),
    (((0, 1), (2, 3), (4, 7), (6, 5)),
     ((6, 4), (4, 2), (2, 0)), ((5, 7), (7, 1), (1, 3))),
    (((0, 1), (2, 3), (4, 7), (6, 5)),
     ((6, 4), (4, 2), (2, 0)), ((5, 7), (7, 3), (3, 1))),

    (((0, 5), (2, 1), (4, 3), (6, 7)),
     ((6, 0), (0, 2), (2, 4)), ((7, 5), (5, 1), (1, 3))),
    (((0, 5), (2, 1), (4, 3), (6, 7)),
     ((6, 0), (0, 2), (2, 4)), ((7, 5), (5, 3), (3, 1))),
    (((0, 5), (2, 1), (4, 3), (6, 7)),
     ((6, 0), (0, 4), (4, 2)), ((7, 5), (5, 3), (3, 1))),

    (((0, 7), (2, 3), (4, 5), (6, 1)),
     ((0, 6), (6, 2), (2, 4)), ((7, 1), (1, 3), (3, 5))),
    (((0, 7), (2, 3), (4, 5), (6, 1)),
     ((0, 6), (6, 4), (4, 2)), ((7, 1), (1, 3), (3, 5))),
    (((0, 7), (2, 3), (4, 5), (6, 1)),
     ((0, 6), (6, 4), (4, 2)), ((7, 1), (1, 5), (5, 3))),

    (((0, 1), (2, 3), (4, 5), (6, 7)),
     ((0, 6), (6, 4), (4, 2)), ((1, 7), (7, 5), (5, 3))),
    (((0, 1), (2, 3), (4, 5), (6, 7)),
     ((0, 6), (6, 4), (4, 2)), ((1, 7), (7, 3), (3, 5))),
    (((0, 1), (2, 3), (4, 5), (6, 7)),
     ((0, 6), (6, 4), (4, 2)), ((1, 3), (3, 7), (7, 5))),
    (((0, 1), (2, 3), (4, 5), (6, 7)),
     ((0, 2), (2, 4), (4, 6)), ((1, 3), (3, 5), (5, 7))),
    (((0, 1), (2, 3), (4, 5), (6, 7)),
     ((0, 2), (2, 6), (6, 4)), ((1, 3), (3, 5), (5, 7))),
    (((0, 1), (2, 3), (4, 5), (6, 7)),
     ((0, 6), (6, 2), (2, 4)), ((1, 3), (3, 5), (5, 7))),
    (((0, 1), (2, 3), (4, 5), (6, 7)),
     ((0, 2), (2, 6), (6, 4)), ((1, 3), (3, 7), (7, 5))),
    (((0, 1), (2, 3), (4, 5), (6, 7)),
     ((0, 6), (6, 2), (2, 4)), ((1, 7), (7, 3), (3, 5))),
    (((0, 1), (2, 3), (4, 5), (6, 7)),
     ((0, 6), (6, 2), (2, 4)), ((1, 3), (3, 7), (7, 5))),
    (((0, 1), (2, 3), (4, 5), (6, 7)),
     ((0, 6), (0, 4), (4, 2)), ((1, 3), (1, 5), (5, 7))),

    (((0, 7), (2, 1), (4, 3), (6, 5)),
     ((0, 6), (6, 4), (4, 2)), ((7, 5), (5, 3), (3, 1))),
    (((0, 7), (2, 1), (4, 3), (6, 5)),
     ((0, 6), (6, 2), (2, 4)), ((7, 5), (5, 3), (3, 1))),
    (((0, 7), (2, 1), (4, 3), (6, 5)),
     ((0, 2), (2, 6), (6, 4)), ((7, 5), (5, 3), (3, 1))),
    (((0, 7), (2, 1), (4, 3), (6, 5)),
     ((0, 2), (2, 4), (4, 6)), ((7, 1), (1, 3), (3, 5))),
    (((0, 7), (2, 1), (4, 3), (6, 5)),
     ((0, 2), (2, 4), (4, 6)), ((7, 1), (1, 5), (5, 3))),
    (((0, 7), (2, 1), (4, 3), (6, 5)),
     ((0, 2), (2, 4), (4, 6)), ((7, 5), (5, 1), (1, 3))),
    (((0, 7), (2, 1), (4, 3), (6, 5)),
     ((0, 2), (2, 6), (6, 4)), ((7, 1), (1, 5), (5, 3))),
    (((0, 7), (2, 1), (4, 3), (6, 5)),
     ((0, 6), (6, 2), (2, 4)), ((7, 5), (5, 1), (1, 3))),
    (((0, 7), (2, 1), (4, 3), (6, 5)),
     ((0, 2), (2, 6), (6, 4)), ((7, 5), (5, 1), (1, 3))),
    (((0, 7), (2, 1), (4, 3), (6, 5)),
     ((0, 2), (0, 4), (4, 6)), ((7, 5), (7, 3), (3, 1))),
)


def enumerate_chord_terms(n: int, *,
                          experimental: bool = False) -> list[ChordDiagramTerm]:
    """Diagram term list for the N-point expansion, N <= 10.

    N in {2, 4, 6, 8} returns the pinned tables (several tree
    decorations may share one pairing; the distinct pairings number the
    Catalan count).  N = 10 requires experimental=True: its 42 pairings
    are enumerated programmatically but the attached trees are
    placeholder paths, not validated decorations (which trees arise is
    an open question).
    """
    if n % 2 or not 2 <= n <= 10:
        raise ValueError("only even N with 2 <= N <= 10 are supported")
    if n == 2:
        return [ChordDiagramTerm(((0, 1),), (), ())]
    if n == 4:
        table = _DIAGRAMS_4
    elif n == 6:
        table = _DIAGRAMS_6
    elif n == 8:
        table = _DIAGRAMS_8
    else:
        if not experimental:
            raise ValueError(
                "N = 10 tree decorations are unvalidated; pass "
                "experimental=True to enumerate pairings anyway")
        evens = tuple(range(0, 10, 2))
        odds = tuple(range(1, 10, 2))
        even_path = tuple(zip(evens[:-1], evens[1:]))
        odd_path = tuple(zip(odds[:-1], odds[1:]))
        return [ChordDiagramTerm(p, even_path, odd_path)
                for p in _noncrossing_pairings(10)]
    return [ChordDiagramTerm(p, ev, od) for p, ev, od in table]


def _noncrossing_pairings(n: int) -> list[tuple]:
    # Chords may not span the split, so the two arcs recurse separately.
    def rec(points):
        if not points:
            return [()]
        first = points[0]
        out = []
        for j in range(1, len(points), 2):
            for left in rec(points[1:j]):
                for right in rec(points[j + 1:]):
                    out.append(((first, points[j]),) + left + right)
        return out

    return rec(list(range(n)))


class _PairTable:
    """Memoized two-point values at arbitrary index pairs.

    Off-node indices are evaluated by the tensor-product panel
    interpolant of the tabulated field; index 0 uses the dedicated
    boundary row/column.
    """

    def __init__(self, field: TwoPointField):
        self.field = field
        self._memo: dict = {}

    def _weights(self, x: float):
        grid = self.field.grid
        if x == 0.0:
            return slice(0, 1), np.ones(1)
        pos = int(np.searchsorted(grid.nodes, x))
        if pos < grid.n and grid.nodes[pos] == x:
            return slice(pos + 1, pos + 2), np.ones(1)
        j = int(grid.panel_of(x)[0])
        s = grid.panel_slice(j)
        c = grid.bary_weights[s] / (x - grid.nodes[s])
        return slice(s.start + 1, s.stop + 1), c / c.sum()

    def pair(self, x: float, y: float) -> float:
        key = (x, y) if x <= y else (y, x)
        val = self._memo.get(key)
        if val is None:
            sx, wx = self._weights(key[0])
            sy, wy = self._weights(key[1])
            val = float(wx @ self.field.values[sx, sy] @ wy)
            self._memo[key] = val
        return val


def _canonical(idx: tuple) -> tuple:
    n = len(idx)
    best = None
    rev = (idx[0],) + tuple(reversed(idx[1:]))
    for base in (idx, rev):
        for r in range(0, n, 2):
            cand = base[r:] + base[:r]
            if best is None or cand < best:
                best = cand
    return best


def _recurse(idx: tuple, pairs: _PairTable, prefactor: float, tol: float,
             memo: dict) -> float:
    n = len(idx)
    if n == 2:
        return pairs.pair(idx[0], idx[1])
    key = _canonical(idx)
    val = memo.get(key)
    if val is not None:
        return val
    odd_diff = idx[1] - idx[n - 1]
    if abs(odd_diff) < tol:
        raise DegenerateIndicesError((1, n - 1), (idx[1], idx[n - 1]))
    total = 0.0
    for l in range(1, n // 2):
        even_diff = idx[0] - idx[2 * l]
        if abs(even_diff) < tol:
            raise DegenerateIndicesError((0, 2 * l), (idx[0], idx[2 * l]))
        t1 = _recurse(idx[:2 * l], pairs, prefactor, tol, memo) \
            * _recurse(idx[2 * l:], pairs, prefactor, tol, memo)
        t2 = _recurse((idx[2 * l],) + idx[1:2 * l], pairs, prefactor, tol,
                      memo) \
            * _recurse((idx[0],) + idx[2 * l + 1:], pairs, prefactor, tol,
                       memo)
        total += (t1 - t2) / (even_diff * odd_diff)
    val = prefactor * total
    memo[key] = val
    return val


def _resolve_tolerance(req: NPointRequest, field: TwoPointField) -> float:
    if req.coincidence_tolerance is not None:
        return req.coincidence_tolerance
    return 1e-8 * field.grid.lambda_cut


def n_point(req: NPointRequest, field: TwoPointField) -> float:
    """Planar N-point function by the algebraic recursion.

    Invariant (to rounding) under rotation of the index tuple by two
    positions and under reversal that fixes the first entry.  The memo
    table is created per call, so concurrent evaluations never share
    mutable state.
    """
    idx = req.indices
    cut = field.grid.lambda_cut
    if any(b > cut for b in idx):
        raise ValueError("indices must lie within [0, lambda_cut]")
    if field.coupling == 0.0 and len(idx) > 2:
        return 0.0
    pairs = _PairTable(field)
    prefactor = -field.coupling / (1.0 + field.slope_excess) ** 2
    tol = _resolve_tolerance(req, field)
    try:
        return _recurse(idx, pairs, prefactor, tol, {})
    except DegenerateIndicesError:
        if not req.allow_limits:
            raise
        return _limit_evaluate(idx, pairs, prefactor, tol)


def _neville(xs, ys) -> float:
    p = list(ys)
    for level in range(1, len(p)):
        for i in range(len(p) - level):
            x0, x1 = xs[i], xs[i + level]
            p[i] = (x1 * p[i] - x0 * p[i + 1]) / (x1 - x0)
    return p[0]


def _limit_evaluate(idx: tuple, pairs: _PairTable, prefactor: float,
                    tol: float) -> float:
    """Coincidence limit by cluster perturbation plus extrapolation.

    Equal indices get offsets proportional to h and the recursion value
    is polynomial-extrapolated to h = 0.  Clusters in the interior use
    symmetric offsets so odd orders drop out of the half-sum over the
    two signs of h; a cluster too close to 0 forces one-sided offsets
    (indices must stay nonnegative) and plain extrapolation in h.
    """
    idx_arr = np.asarray(idx, dtype=np.float64)
    order = np.argsort(idx_arr, kind="stable")
    clusters: list[list[int]] = [[int(order[0])]]
    for k in order[1:]:
        if abs(idx_arr[k] - idx_arr[clusters[-1][-1]]) < tol:
            clusters[-1].append(int(k))
        else:
            clusters.append([int(k)])

    top = float(np.max(idx_arr))
    h0 = 0.02 * (1.0 + top)
    one_sided = False
    offsets = np.zeros(len(idx))
    for members in clusters:
        m = len(members)
        if m == 1:
            continue
        value = float(idx_arr[members[0]])
        if value - 0.5 * (m - 1) * h0 < 0.0:
            one_sided = True
            shift = 0.0
        else:
            shift = 0.5 * (m - 1)
        for rank, k in enumerate(members):
            offsets[k] = rank - shift

    max_off = float(np.max(np.abs(offsets)))
    centers = sorted(float(idx_arr[m[0]]) for m in clusters)
    gaps = [b - a for a, b in zip(centers, centers[1:])]
    if gaps:
        h0 = min(h0, 0.2 * min(gaps) / max_off)
    cut = pairs.field.grid.lambda_cut
    headroom = cut - top
    if headroom < max_off * h0:
        h0 = 0.45 * headroom / max_off
    # One-sided extrapolation gains no parity cancellation, so it runs
    # deeper; its clusters sit near 0 where the graded panels keep the
    # interpolation noise far below the extra truncation levels.
    levels = 5 if one_sided else 4
    if one_sided:
        h0 *= 0.25
    tol_inner = min(tol, 0.05 * h0 / 2.0 ** (levels - 1))

    def perturbed(h: float) -> float:
        shifted = tuple(idx_arr + h * offsets)
        return _recurse(shifted, pairs, prefactor, tol_inner, {})

    steps = [h0 / 2.0 ** k for k in range(levels)]
    if one_sided:
        return _neville(steps, [perturbed(h) for h in steps])
    values = [0.5 * (perturbed(h) + perturbed(-h)) for h in steps]
    return _neville([h * h for h in steps], values)


def four_point(a: float, b: float, c: float, d: float,
               field: TwoPointField, *, limit_mode: bool = False) -> float:
    """Planar four-point function, closed form.

    -coupling/(1+slope_excess)^2 times (G_ab G_cd - G_ad G_bc) over
    ((a-c)(b-d)); coincidences a = c or b = d either raise or, with
    limit_mode, fall back to the perturbative limit evaluator.
    """
    if field.coupling == 0.0:
        return 0.0
    tol = 1e-8 * field.grid.lambda_cut
    if abs(a - c) < tol or abs(b - d) < tol:
        req = NPointRequest((a, b, c, d), allow_limits=limit_mode)
        return n_point(req, field)
    pairs = _PairTable(field)
    kappa = -field.coupling / (1.0 + field.slope_excess) ** 2
    num = pairs.pair(a, b) * pairs.pair(c, d) \
        - pairs.pair(a, d) * pairs.pair(b, c)
    return kappa * num / ((a - c) * (b - d))


def n_point_via_diagrams(req: NPointRequest, field: TwoPointField) -> float:
    """N-point function summed over the pinned chord-diagram terms.

    Independent of the recursion except for the shared two-point table;
    N <= 8 and pairwise distinct same-parity indices required.
    """
    idx = req.indices
    n = len(idx)
    if n > 8:
        raise ValueError("diagram tables are pinned for N <= 8 only")
    if field.coupling == 0.0 and n > 2:
        return 0.0
    pairs = _PairTable(field)
    if n == 2:
        return pairs.pair(idx[0], idx[1])
    tol = _resolve_tolerance(req, field)
    base = -field.coupling / (1.0 + field.slope_excess) ** 2
    prefactor = base ** (n // 2 - 1)
    total = 0.0
    for term in enumerate_chord_terms(n):
        g_prod = 1.0
        for i, j in term.pairing:
            g_prod *= pairs.pair(idx[i], idx[j])
        e_prod = 1.0
        for m, k in term.even_tree + term.odd_tree:
            diff = idx[m] - idx[k]
            if abs(diff) < tol:
                raise DegenerateIndicesError((m, k), (idx[m], idx[k]))
            e_prod *= diff
        total += term.sign * g_prod / e_prod
    return prefactor * total


def check_bijk_identity(x: float, y: float, z: float) -> float:
    """Absolute defect of the three-term partial-fraction identity.

    1/((x-y)(y-z)) + 1/((y-z)(z-x)) + 1/((z-x)(x-y)) vanishes for
    pairwise distinct arguments; the return value is |sum|, bounded in
    tests by 1e-12 times the largest term magnitude.
    """
    if x == y or y == z or z == x:
        raise ValueError("arguments must be pairwise distinct")
    t1 = 1.0 / ((x - y) * (y - z))
    t2 = 1.0 / ((y - z) * (z - x))
    t3 = 1.0 / ((z - x) * (x - y))
    return abs(t1 + t2 + t3)


def check_ward_four_point(g: BoundaryFunction, params: ModelParams,
                          b: float, d: float, *,
                          margin_fraction: float = 0.01) -> float:
    """Sup defect of the index-swap identity at N = 4.

    (1/z) lambda pi (G_bc H_c[. G_{.d}] - G_dc H_c[. G_{.b}])
    + (1/z)(b - d) G_bc G_cd - (G_dc - G_bc) over nodes c below the
    cutoff margin.  The normalization is the integral form
    z = 1 - coupling * int g; the exponential surrogate splits from it
    by a non-perturbative margin at strong coupling and would leave a
    grid-independent floor here.  Pure discretization defect; must
    shrink under grid refinement.
    """
    lam = params.coupling
    grid = g.samples.grid
    p = grid.nodes
    f = g.samples.values
    hilbert = hilbert_matrix(grid)
    h = hilbert @ f
    num = lam * math.pi * p * f
    den0 = 1.0 + lam * math.pi * p * h

    def column(bb: float) -> np.ndarray:
        tb = np.arctan2(num, den0 + bb * f)
        t0 = np.arctan2(num, den0)
        return f * np.sin(tb) / np.sin(t0) * np.exp(hilbert @ (tb - t0))

    gb = column(b)
    gd = column(d)
    inv_z = 1.0 / (1.0 - lam * integrate(grid, g.samples))
    defect = inv_z * lam * math.pi * (gb * (hilbert @ (p * gd))
                                      - gd * (hilbert @ (p * gb))) \
        + inv_z * (b - d) * gb * gd - (gd - gb)
    keep = p <= margin_fraction * grid.lambda_cut
    return float(np.max(np.abs(defect[keep])))


def fit_index_scaling(field: TwoPointField, *, base: float = 50.0,
                      factors=(1.0, 2.0, 4.0, 8.0)) -> float:
    """Exploratory fit of G(s a, s b) ~ s^eta G(a, b) at large indices.

    Least-squares slope of log G(s base, s base) against log s.  Purely
    exploratory output for the sweep script; nothing in the model
    asserts this scaling.
    """
    pairs = _PairTable(field)
    s = np.asarray(factors, dtype=np.float64)
    vals = np.array([pairs.pair(base * si, base * si) for si in s])
    if np.any(vals <= 0.0):
        raise ValueError("two-point values must stay positive for the fit")
    slope = np.polyfit(np.log(s), np.log(vals), 1)[0]
    return float(slope)
