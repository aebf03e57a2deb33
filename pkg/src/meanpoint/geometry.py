"""Finite point-set geometry for the mean-point problem.

Separated subsets and the covers they induce, packing-number estimates
(greedy and exact), nearest-point rounding maps, multi-resolution
chaining decompositions, support functions, and Monte-Carlo Gaussian
mean width.

All operations are pure functions of their inputs plus an explicit
seed, so they are safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

# Absolute per-sqrt(m) tolerance for decomposition identities; the
# reconstruction is a short chain of additions of universe coordinates.
RECONSTRUCTION_TOL = 1e-9

# Default cap for exact packing (branch and bound on the conflict graph).
EXACT_PACKING_CAP = 24

# Ratio of consecutive scales in sup-evaluation grids.
GRID_RATIO = 2.0 ** 0.25


class Metric(Enum):
    """Distance conventions behind the two separation-number families."""

    NORMALIZED_L2 = "normalized_l2"  # d(x, y) = ||x - y||_2 / sqrt(m)
    LINF = "linf"                    # d(x, y) = ||x - y||_inf


class Norm(Enum):
    """Plain vector norms used by rounding maps and decompositions."""

    L2 = "l2"
    LINF = "linf"


def _row_norms(a: np.ndarray, norm: Norm) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if norm is Norm.L2:
        return np.sqrt(np.einsum("...i,...i->...", a, a))
    return np.abs(a).max(axis=-1)


def _metric_factor(metric: Metric, m: int) -> tuple[Norm, float]:
    """Norm and divisor realizing a metric's distance on R^m."""
    if metric is Metric.NORMALIZED_L2:
        return Norm.L2, math.sqrt(m)
    return Norm.LINF, 1.0


@dataclass(eq=False)
class Universe:
    """Explicit finite point set in R^m, one point per row.

    The standard query-release setting has every coordinate in [0, 1];
    ``in_unit_box`` records whether that holds so mechanisms that need
    it can check.
    """

    points: np.ndarray
    labels: list[str] | None = None

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError("points must form a 2-d matrix")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("universe needs at least one point and one dimension")
        if not np.all(np.isfinite(pts)):
            raise ValueError("universe coordinates must be finite")
        if self.labels is not None and len(self.labels) != pts.shape[0]:
            raise ValueError("need exactly one label per point")
        self.points = pts

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @cached_property
    def in_unit_box(self) -> bool:
        return bool((self.points >= 0.0).all() and (self.points <= 1.0).all())


@dataclass
class SeparatedSet:
    """Subset of universe rows with pairwise distances strictly above t.

    When ``maximal`` is set the selection is inclusion-maximal, which by
    the packing/covering duality makes it a (closed) t-cover of the
    universe.
    """

    indices: np.ndarray
    t: float
    metric: Metric
    maximal: bool
    order: str = "index"
    seed: int | None = None

    @property
    def size(self) -> int:
        return int(np.asarray(self.indices).size)


class WidthEstimate(NamedTuple):
    value: float
    std_error: float
    samples: int


@dataclass
class Decomposition:
    """Multi-resolution additive split of a universe.

    Every universe point equals the sum of one component per level plus
    a remainder of norm at most ``remainder_radius``.  ``levels[j]`` is
    the matrix of level components, ``assignments[i, j]`` the component
    row used by universe point ``i``, and ``generator_indices[j]`` the
    universe rows of the separated set that generated level ``j``.
    """

    levels: list[np.ndarray]
    assignments: np.ndarray
    generator_indices: list[np.ndarray]
    remainder_radius: float
    norm: Norm
    level_radii: list[float]
    delta: float
    alpha: float

    @property
    def k(self) -> int:
        return len(self.levels)

    def component_sums(self, points: np.ndarray) -> np.ndarray:
        """Sum of assigned components for each row of ``points``."""
        total = np.zeros_like(np.asarray(points, dtype=float))
        for j, lvl in enumerate(self.levels):
            total += lvl[self.assignments[:, j]]
        return total

    def remainders(self, u: "Universe") -> np.ndarray:
        return u.points - self.component_sums(u.points)


# ---------------------------------------------------------------------------
# distances


def pairwise_distance(u: Universe, i: int, j: int,
                      metric: Metric = Metric.NORMALIZED_L2) -> float:
    """Distance between universe rows i and j under the given metric."""
    n = u.size
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"point index out of range for universe of size {n}")
    norm, scale = _metric_factor(metric, u.dim)
    return float(_row_norms(u.points[i] - u.points[j], norm) / scale)


def diameter(u: Universe, norm: Norm = Norm.L2) -> float:
    """Largest pairwise distance under a plain norm; 0 for a singleton."""
    pts = u.points
    n = pts.shape[0]
    if n == 1:
        return 0.0
    block = max(1, int(4_000_000 // max(1, n * pts.shape[1])))
    worst = 0.0
    for i0 in range(0, n, block):
        diff = pts[i0:i0 + block, None, :] - pts[None, :, :]
        worst = max(worst, float(_row_norms(diff, norm).max()))
    return worst


def metric_diameter(u: Universe, metric: Metric) -> float:
    """Diameter expressed in the metric's own scale convention."""
    norm, scale = _metric_factor(metric, u.dim)
    return diameter(u, norm) / scale


# ---------------------------------------------------------------------------
# separated sets, covers, packing numbers


def _greedy_extend(pts: np.ndarray, selected: Sequence[int],
                   candidates: np.ndarray, raw_t: float, norm: Norm) -> list[int]:
    """Grow ``selected`` into an inclusion-maximal strictly-separated set.

    Candidates are scanned in the given order; a point joins when its
    distance to everything already selected exceeds ``raw_t`` strictly.
    """
    sel = list(selected)
    for i in candidates:
        i = int(i)
        if not sel:
            sel.append(i)
            continue
        d = _row_norms(pts[sel] - pts[i], norm)
        if bool((d > raw_t).all()):
            sel.append(i)
    return sel


def greedy_separated_set(u: Universe, t: float,
                         metric: Metric = Metric.NORMALIZED_L2,
                         order: str = "index",
                         seed: int | None = None) -> SeparatedSet:
    """Inclusion-maximal strictly t-separated subset, grown greedily.

    Args:
        u: the universe.
        t: separation scale in the metric's convention (> 0).
        metric: distance convention.
        order: "index" for ascending row order (the default, reproducible
            without a seed) or "random" for a seeded shuffle.
        seed: permutation seed when order is "random".

    Returns:
        A maximal SeparatedSet; by duality its points form a t-cover of
        the universe.
    """
    if not t > 0:
        raise ValueError("separation scale t must be positive")
    norm, scale = _metric_factor(metric, u.dim)
    if order == "index":
        candidates = np.arange(u.size)
    elif order == "random":
        candidates = np.random.default_rng(seed).permutation(u.size)
    else:
        raise ValueError(f"unknown iteration order {order!r}")
    sel = _greedy_extend(u.points, [], candidates, t * scale, norm)
    return SeparatedSet(indices=np.array(sel, dtype=int), t=float(t),
                        metric=metric, maximal=True, order=order, seed=seed)


def covering_radius(u: Universe, indices: np.ndarray, metric: Metric) -> float:
    """Largest distance from any universe point to the selected rows."""
    norm, scale = _metric_factor(metric, u.dim)
    centers = u.points[np.asarray(indices, dtype=int)]
    _, dist = _nearest(u.points, centers, norm)
    return float(dist.max() / scale)


def _pairwise_matrix(pts: np.ndarray, norm: Norm) -> np.ndarray:
    n = pts.shape[0]
    out = np.zeros((n, n))
    block = max(1, int(4_000_000 // max(1, n * pts.shape[1])))
    for i0 in range(0, n, block):
        diff = pts[i0:i0 + block, None, :] - pts[None, :, :]
        out[i0:i0 + block] = _row_norms(diff, norm)
    return out


def _mis_size(adj: list[int], n: int, lower: int = 0) -> int:
    """Maximum independent set size by branch and bound on bitmasks."""
    best = lower

    def rec(cand: int, size: int) -> None:
        nonlocal best
        if size + cand.bit_count() <= best:
            return
        if cand == 0:
            best = size
            return
        v = (cand & -cand).bit_length() - 1
        rec(cand & ~(adj[v] | (1 << v)), size + 1)
        rec(cand & ~(1 << v), size)

    rec((1 << n) - 1, 0)
    return best


def packing_number(u: Universe, t: float,
                   metric: Metric = Metric.NORMALIZED_L2,
                   mode: str = "greedy",
                   exact_cap: int = EXACT_PACKING_CAP) -> int:
    """Separation-number value or estimate at scale t.

    Greedy mode returns the size of a maximal separated set, which is
    sandwiched between the covering and packing numbers.  Exact mode
    solves maximum independent set on the distance-at-most-t conflict
    graph and is capped at ``exact_cap`` points.
    """
    if mode == "greedy":
        return greedy_separated_set(u, t, metric).size
    if mode != "exact":
        raise ValueError(f"unknown packing mode {mode!r}")
    n = u.size
    if n > exact_cap:
        raise ValueError(
            f"exact packing capped at {exact_cap} points (universe has {n})")
    norm, scale = _metric_factor(metric, u.dim)
    dmat = _pairwise_matrix(u.points, norm)
    conflict = dmat <= t * scale
    adj = []
    for i in range(n):
        mask = 0
        for j in range(n):
            if j != i and conflict[i, j]:
                mask |= 1 << j
        adj.append(mask)
    lower = greedy_separated_set(u, t, metric).size
    return _mis_size(adj, n, lower=lower)


def t_grid(t_min: float, t_max: float, ratio: float = GRID_RATIO) -> np.ndarray:
    """Geometric scale grid spanning [t_min, t_max], endpoints included.

    Anchored at t_max and descending by ``ratio`` so that grids for
    different lower endpoints share their upper scales.  Returns an
    ascending array; empty when t_min exceeds t_max.
    """
    if not t_min > 0:
        raise ValueError("t_min must be positive")
    if t_max <= 0 or t_min > t_max * (1 + 1e-12):
        return np.array([])
    ts = [float(t_max)]
    while ts[-1] / ratio > t_min * (1 + 1e-9):
        ts.append(ts[-1] / ratio)
    if ts[-1] > t_min * (1 + 1e-12):
        ts.append(float(t_min))
    return np.array(ts[::-1])


def packing_profile(u: Universe, ts: np.ndarray,
                    metric: Metric = Metric.NORMALIZED_L2) -> np.ndarray:
    """Greedy packing estimates across scales, on one nested evaluation.

    Scales are processed from coarsest to finest while growing a single
    separated set (a set separated at a coarse scale stays separated at
    any finer one), so the estimates are non-increasing in t by
    construction and every scale still gets an inclusion-maximal set.
    """
    ts = np.asarray(ts, dtype=float)
    sizes = np.zeros(ts.size, dtype=int)
    norm, scale = _metric_factor(metric, u.dim)
    candidates = np.arange(u.size)
    sel: list[int] = []
    for pos in np.argsort(-ts, kind="stable"):
        sel = _greedy_extend(u.points, sel, candidates, ts[pos] * scale, norm)
        sizes[pos] = len(sel)
    return sizes


# ---------------------------------------------------------------------------
# rounding maps and decompositions


def _nearest(points: np.ndarray, centers: np.ndarray,
             norm: Norm) -> tuple[np.ndarray, np.ndarray]:
    n, m = points.shape
    k = centers.shape[0]
    idx = np.empty(n, dtype=int)
    dist = np.empty(n)
    block = max(1, int(4_000_000 // max(1, k * m)))
    for i0 in range(0, n, block):
        diff = points[i0:i0 + block, None, :] - centers[None, :, :]
        d = _row_norms(diff, norm)
        ii = d.argmin(axis=1)  # argmin keeps the lowest index on ties
        idx[i0:i0 + block] = ii
        dist[i0:i0 + block] = d[np.arange(d.shape[0]), ii]
    return idx, dist


def nearest_point_map(u: Universe, centers: np.ndarray,
                      norm: Norm = Norm.L2) -> np.ndarray:
    """Index of the nearest center for every universe point.

    Ties break toward the lowest center index.
    """
    centers = np.asarray(centers, dtype=float)
    if centers.ndim == 1:
        centers = centers[:, None]
    if centers.shape[0] < 1:
        raise ValueError("centers must be nonempty")
    if centers.shape[1] != u.dim:
        raise ValueError("centers must match the universe dimension")
    idx, _ = _nearest(u.points, centers, norm)
    return idx


def chaining_decomposition(u: Universe, alpha: float,
                           norm: Norm = Norm.L2,
                           delta_cap: float | None = None) -> Decomposition:
    """Split the universe into halving-scale summands plus a small ball.

    Builds maximal separated subsets at scales 2^-1, 2^-2, ... (in the
    norm scaled by delta), takes the coarsest as the first level, and
    for each finer level stores the offsets from the previous level's
    rounding map.  Summing one component per level reconstructs every
    universe point up to a remainder of norm at most (alpha/2) * delta.

    Args:
        u: the universe.
        alpha: target remainder scale in (0, 1].
        norm: L2 or LINF.
        delta_cap: radius delta of a ball containing the universe;
            defaults to sqrt(m) for L2 and 1 for LINF.

    Returns:
        A Decomposition with ceil(log2(2/alpha)) levels.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    m = u.dim
    delta = float(delta_cap) if delta_cap is not None else (
        math.sqrt(m) if norm is Norm.L2 else 1.0)
    if delta <= 0:
        raise ValueError("delta_cap must be positive")
    max_norm = float(_row_norms(u.points, norm).max())
    if max_norm > delta * (1 + 1e-12):
        raise ValueError(
            f"universe has a point of norm {max_norm:.6g} outside the "
            f"stated ball of radius {delta:.6g}")
    k = max(1, math.ceil(math.log2(2.0 / alpha)))
    pts = u.points
    candidates = np.arange(u.size)
    gen: list[np.ndarray] = []
    proj: list[np.ndarray] = []
    for j in range(k):
        raw_t = 2.0 ** (-(j + 1)) * delta
        sel = _greedy_extend(pts, [], candidates, raw_t, norm)
        gen.append(np.array(sel, dtype=int))
        idx, _ = _nearest(pts, pts[gen[j]], norm)
        proj.append(idx)
    levels = [pts[gen[0]].copy()]
    for j in range(1, k):
        parents = gen[j - 1][proj[j - 1][gen[j]]]
        levels.append(pts[gen[j]] - pts[parents])
    assign = np.empty((u.size, k), dtype=int)
    assign[:, k - 1] = proj[k - 1]
    for j in range(k - 2, -1, -1):
        assign[:, j] = proj[j][gen[j + 1][assign[:, j + 1]]]
    level_radii = [2.0 ** (-j) * delta for j in range(k)]
    return Decomposition(levels=levels, assignments=assign,
                         generator_indices=gen,
                         remainder_radius=0.5 * alpha * delta,
                         norm=norm, level_radii=level_radii,
                         delta=delta, alpha=float(alpha))


def identity_decomposition(u: Universe, norm: Norm = Norm.L2) -> Decomposition:
    """Trivial one-level decomposition: the level is the universe itself.

    A convenience for exercising level combinators; it bypasses the
    separation invariant (use ``verify_decomposition`` with
    ``check_separation=False``).
    """
    n = u.size
    max_norm = float(_row_norms(u.points, norm).max())
    return Decomposition(levels=[u.points.copy()],
                         assignments=np.arange(n, dtype=int)[:, None],
                         generator_indices=[np.arange(n, dtype=int)],
                         remainder_radius=0.0, norm=norm,
                         level_radii=[max_norm],
                         delta=max(max_norm, 1.0), alpha=1.0)


def verify_decomposition(u: Universe, dec: Decomposition,
                         tol: float | None = None,
                         check_separation: bool = True) -> None:
    """Check all decomposition invariants, raising ValueError on failure.

    Verifies the reconstruction identity within tol (default
    1e-9 * sqrt(m) absolute), the per-level norm radii, and the strict
    separation of each generating set at its scale.
    """
    m = u.dim
    if tol is None:
        tol = RECONSTRUCTION_TOL * math.sqrt(m)
    res = _row_norms(dec.remainders(u), dec.norm)
    worst = float(res.max())
    if worst > dec.remainder_radius + tol:
        raise ValueError(
            f"reconstruction remainder {worst:.3e} exceeds "
            f"{dec.remainder_radius:.3e} + tol")
    for j, lvl in enumerate(dec.levels):
        r = float(_row_norms(lvl, dec.norm).max())
        if r > dec.level_radii[j] + tol:
            raise ValueError(
                f"level {j} radius {r:.3e} exceeds {dec.level_radii[j]:.3e}")
    if not check_separation:
        return
    for j, g in enumerate(dec.generator_indices):
        if g.size <= 1:
            continue
        sub = u.points[g]
        dmat = _pairwise_matrix(sub, dec.norm)
        off = dmat[~np.eye(g.size, dtype=bool)]
        raw_t = 2.0 ** (-(j + 1)) * dec.delta
        if not bool((off > raw_t).all()):
            raise ValueError(f"generating set {j} is not strictly "
                             f"{raw_t:.3e}-separated")


def decomposition_to_json(dec: Decomposition) -> dict:
    """JSON-ready export of a decomposition (levels, assignments, radii)."""
    return {
        "alpha": dec.alpha,
        "norm": dec.norm.value,
        "delta": dec.delta,
        "k": dec.k,
        "remainder_radius": dec.remainder_radius,
        "level_radii": list(dec.level_radii),
        "levels": [lvl.tolist() for lvl in dec.levels],
        "assignments": dec.assignments.tolist(),
        "generator_indices": [g.tolist() for g in dec.generator_indices],
    }


# ---------------------------------------------------------------------------
# width and entropy-style bounds


def support_function(u: Universe, direction: np.ndarray) -> float:
    """Largest inner product of a universe point with ``direction``."""
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (u.dim,):
        raise ValueError("direction must have length m")
    return float((u.points @ direction).max())


def gaussian_mean_width(u: Universe, samples: int = 10_000,
                        seed: int | None = None) -> WidthEstimate:
    """Monte-Carlo estimate of the Gaussian mean width of the universe.

    Averages the support function over iid standard normal directions;
    deterministic given the seed.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    block = max(1, int(2_000_000 // max(1, u.size + u.dim)))
    while done < samples:
        b = min(block, samples - done)
        z = rng.standard_normal((b, u.dim))
        h = (z @ u.points.T).max(axis=1)
        total += float(h.sum())
        total_sq += float((h * h).sum())
        done += b
    mean = total / samples
    if samples > 1:
        var = max(total_sq - samples * mean * mean, 0.0) / (samples - 1)
        se = math.sqrt(var / samples)
    else:
        se = 0.0
    return WidthEstimate(value=mean, std_error=se, samples=samples)


def coarse_dudley_bound(u: Universe, alpha: float,
                        packing_mode: str = "greedy",
                        exact_cap: int = EXACT_PACKING_CAP) -> float:
    """Entropy-style width estimate from the packing profile.

    Evaluates sqrt(m) * log(4 * diam / alpha) * sup_t t*sqrt(log P(t))
    over the geometric grid of scales in [alpha/4, diam], with the
    absolute constant taken as 1.  A shape for comparisons, never a
    certified bound.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    norm_diam = metric_diameter(u, Metric.NORMALIZED_L2)
    ts = t_grid(alpha / 4.0, norm_diam)
    if ts.size == 0:
        return 0.0
    if packing_mode == "greedy":
        sizes = packing_profile(u, ts, Metric.NORMALIZED_L2)
    else:
        sizes = np.array([packing_number(u, t, Metric.NORMALIZED_L2,
                                         mode=packing_mode,
                                         exact_cap=exact_cap) for t in ts])
    sup = max((t * math.sqrt(math.log(p)) for t, p in zip(ts, sizes)),
              default=0.0)
    if sup <= 0.0:
        return 0.0
    return math.sqrt(u.dim) * math.log(4.0 * norm_diam / alpha) * sup


# ---------------------------------------------------------------------------
# universe file format


def universe_to_csv(u: Universe) -> str:
    """Serialize: header line ``m=<dim>``, then one point per row."""
    lines = [f"m={u.dim}"]
    for row in u.points:
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def universe_from_csv(text: str) -> Universe:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("m="):
        raise ValueError("universe CSV must start with an 'm=<int>' line")
    try:
        m = int(lines[0][2:])
    except ValueError as exc:
        raise ValueError("malformed dimension header") from exc
    rows = []
    for ln in lines[1:]:
        vals = [float(tok) for tok in ln.split(",")]
        if len(vals) != m:
            raise ValueError(f"row has {len(vals)} coordinates, expected {m}")
        rows.append(vals)
    if not rows:
        raise ValueError("universe CSV has no points")
    return Universe(points=np.array(rows, dtype=float))


def read_universe_csv(path) -> Universe:
    with open(path, "r", encoding="utf-8") as fh:
        return universe_from_csv(fh.read())


def write_universe_csv(path, u: Universe) -> None:
    import os
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(universe_to_csv(u))
    os.replace(tmp, path)
