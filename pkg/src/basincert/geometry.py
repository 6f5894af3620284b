"""Compact state spaces, regions, and the set-level minimizations the certifier is built on.

Exact minima of continuous functions over compact sets are realized as grid
minima with quantified error bounds: a grid of per-axis spacing h covers the
domain with radius at most sqrt(A)*h, so a minimum of an L-Lipschitz field is
overestimated by at most L*sqrt(A)*h.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import EmptyRegion, EmptyTarget, NonpositiveResult, NotStrictSubset

# Closure-membership tolerance: separates "on the boundary" from "outside"
# robustly at double precision.
EPS_BD = 1e-9
# Simplex membership tolerance.
EPS_SIMPLEX = 1e-12
# Default per-axis grid spacing.
DEFAULT_H = 0.01


def as_points(x) -> np.ndarray:
    """Coerce to a (N, A) float array; a single point becomes one row."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


class CompactDomain:
    """Axis-aligned box or probability simplex in R^A with the Euclidean metric."""

    def __init__(self, kind: str, dim: int, bounds: np.ndarray | None = None):
        if kind not in ("box", "simplex"):
            raise ValueError(f"unknown domain kind {kind!r}")
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.kind = kind
        self.dim = int(dim)
        if kind == "box":
            b = np.asarray(bounds, dtype=float).reshape(dim, 2)
            if not np.all(b[:, 0] < b[:, 1]):
                raise ValueError("box bounds need lo < hi on every axis")
            self.bounds = b
        else:
            self.bounds = np.repeat([[0.0, 1.0]], dim, axis=0)
        self._grids: dict[float, np.ndarray] = {}

    @classmethod
    def box(cls, bounds) -> "CompactDomain":
        bounds = np.asarray(bounds, dtype=float)
        return cls("box", bounds.shape[0], bounds)

    @classmethod
    def simplex(cls, dim: int) -> "CompactDomain":
        return cls("simplex", dim)

    def __repr__(self):
        if self.kind == "box":
            return f"CompactDomain(box, bounds={self.bounds.tolist()})"
        return f"CompactDomain(simplex, dim={self.dim})"

    def contains(self, points, tol: float = EPS_BD) -> np.ndarray:
        pts = as_points(points)
        if self.kind == "box":
            lo, hi = self.bounds[:, 0], self.bounds[:, 1]
            return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=-1)
        ok_nonneg = np.all(pts >= -max(tol, EPS_SIMPLEX), axis=-1)
        ok_sum = np.abs(pts.sum(axis=-1) - 1.0) <= max(tol, EPS_SIMPLEX)
        return ok_nonneg & ok_sum

    def grid(self, h: float = DEFAULT_H, jitter_rng: np.random.Generator | None = None) -> np.ndarray:
        """Finite sample of the domain with covering radius <= sqrt(A)*h.

        Box: per-axis spacing <= h including endpoints. Simplex: the regular
        mesh {x : x_i = k_i/m, sum k_i = m} with m = ceil(1/h).
        With jitter_rng, points are perturbed inside their cells (membership
        is preserved); used for randomized refinement only, never cached.
        """
        if h <= 0:
            raise ValueError("grid spacing h must be positive")
        key = float(h)
        if jitter_rng is None and key in self._grids:
            return self._grids[key]
        if self.kind == "box":
            axes = []
            for lo, hi in self.bounds:
                n = int(np.ceil((hi - lo) / h)) + 1
                axes.append(np.linspace(lo, hi, n))
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
            if jitter_rng is not None:
                pts = pts + jitter_rng.uniform(-h / 2, h / 2, size=pts.shape)
                pts = self.project(pts)
        else:
            m = int(np.ceil(1.0 / h))
            pts = _simplex_mesh(self.dim, m)
            if jitter_rng is not None:
                noise = jitter_rng.uniform(-h / 2, h / 2, size=pts.shape)
                noise -= noise.mean(axis=-1, keepdims=True)
                pts = self.project(pts + noise)
        if jitter_rng is None:
            self._grids[key] = pts
        return pts

    def covering_radius(self, h: float) -> float:
        return float(np.sqrt(self.dim) * h)

    def project(self, points) -> np.ndarray:
        """Exact Euclidean projection onto the domain."""
        pts = as_points(points)
        if self.kind == "box":
            return np.clip(pts, self.bounds[:, 0], self.bounds[:, 1])
        return project_simplex(pts)

    def tangent_dirs(self) -> np.ndarray:
        """Unit directions spanning the tangent space, used for boundary probes."""
        if self.kind == "box":
            return np.eye(self.dim)
        dirs = []
        for i, j in itertools.combinations(range(self.dim), 2):
            d = np.zeros(self.dim)
            d[i], d[j] = 1.0, -1.0
            dirs.append(d / np.sqrt(2.0))
        return np.array(dirs)

    def random_points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "box":
            lo, hi = self.bounds[:, 0], self.bounds[:, 1]
            return rng.uniform(lo, hi, size=(n, self.dim))
        return rng.dirichlet(np.ones(self.dim), size=n)


def _simplex_mesh(dim: int, m: int) -> np.ndarray:
    """All compositions k/m of m into dim nonnegative parts."""
    combos = itertools.combinations(range(m + dim - 1), dim - 1)
    dividers = np.array(list(combos), dtype=int)
    if dividers.size == 0:  # dim == 1
        return np.ones((1, 1))
    full = np.hstack(
        [
            dividers[:, :1],
            np.diff(dividers, axis=1) - 1,
            m + dim - 2 - dividers[:, -1:],
        ]
    )
    return full / float(m)


def project_simplex(points) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    pts = as_points(points)
    n, dim = pts.shape
    u = np.sort(pts, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, dim + 1)
    cond = u - css / idx > 0
    rho = dim - np.argmax(cond[:, ::-1], axis=1) - 1
    theta = css[np.arange(n), rho] / (rho + 1.0)
    return np.maximum(pts - theta[:, None], 0.0)


# ---------------------------------------------------------------------------
# Regions


class Region:
    """A subset of a compact domain given by a membership description.

    `contains` is the set as described (strict inequalities for open sets);
    `closure_contains` relaxes all boundaries by EPS_BD. `sample` filters the
    domain grid, so every sampled point passes membership by construction.
    """

    is_open: bool = False

    def __init__(self, domain: CompactDomain):
        self.domain = domain

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def closure_contains(self, points, tol: float = EPS_BD) -> np.ndarray:
        return self.contains(points, tol=tol)

    def sample(self, h: float = DEFAULT_H, closure: bool = False) -> np.ndarray:
        grid = self.domain.grid(h)
        mask = self.closure_contains(grid) if closure else self.contains(grid)
        return grid[mask]

    def boundary_adjacent(self, h: float, probe: float | None = None) -> np.ndarray:
        """Member grid points with a probe neighbor outside the region."""
        members = self.sample(h)
        if len(members) == 0:
            return members
        probe = 2.0 * h if probe is None else probe
        near = np.zeros(len(members), dtype=bool)
        for d in self.domain.tangent_dirs():
            for sgn in (1.0, -1.0):
                shifted = members + sgn * probe * d
                near |= ~self.contains(shifted)
        return members[near]


class WholeDomain(Region):
    is_open = False

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        return self.domain.contains(points, tol=max(tol, EPS_BD))


class PointSet(Region):
    """Finite set of points; closed."""

    is_open = False

    def __init__(self, domain: CompactDomain, points):
        super().__init__(domain)
        self.points = as_points(points)
        if len(self.points) == 0:
            raise EmptyTarget("point set region needs at least one point")

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = as_points(points)
        d = cdist(pts, self.points).min(axis=1)
        return d <= max(tol, EPS_BD)

    def sample(self, h: float = DEFAULT_H, closure: bool = False) -> np.ndarray:
        return self.points.copy()


class BallSet(Region):
    """Union of balls of a common radius around anchor points."""

    def __init__(self, domain: CompactDomain, centers, radius: float, open_flag: bool = True):
        super().__init__(domain)
        self.centers = as_points(centers)
        self.radius = float(radius)
        self.is_open = bool(open_flag)
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = as_points(points)
        d = cdist(pts, self.centers).min(axis=1)
        in_dom = self.domain.contains(pts)
        if self.is_open and tol == 0.0:
            return in_dom & (d < self.radius)
        return in_dom & (d <= self.radius + tol)

    def sample(self, h: float = DEFAULT_H, closure: bool = False) -> np.ndarray:
        pts = super().sample(h, closure=closure)
        anchors = self.centers[self.domain.contains(self.centers)]
        if len(pts) == 0:
            return anchors
        return np.vstack([pts, anchors])


class BoxRegion(Region):
    """Axis-aligned sub-box of the domain."""

    def __init__(self, domain: CompactDomain, bounds, open_flag: bool = True):
        super().__init__(domain)
        self.bounds = np.asarray(bounds, dtype=float).reshape(domain.dim, 2)
        self.is_open = bool(open_flag)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = as_points(points)
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        in_dom = self.domain.contains(pts)
        if self.is_open and tol == 0.0:
            return in_dom & np.all((pts > lo) & (pts < hi), axis=-1)
        return in_dom & np.all((pts >= lo - tol) & (pts <= hi + tol), axis=-1)


class SublevelSet(Region):
    """{x in domain : f(x) < c}; open by convention, closure uses f <= c + EPS_BD."""

    is_open = True

    def __init__(self, domain: CompactDomain, f, level: float):
        super().__init__(domain)
        self.f = f
        self.level = float(level)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = as_points(points)
        vals = np.asarray(self.f(pts), dtype=float)
        in_dom = self.domain.contains(pts)
        if tol == 0.0:
            return in_dom & (vals < self.level)
        return in_dom & (vals <= self.level + tol)


class SuperlevelSet(Region):
    """{x in domain : f(x) >= c}; closed by convention."""

    is_open = False

    def __init__(self, domain: CompactDomain, f, level: float):
        super().__init__(domain)
        self.f = f
        self.level = float(level)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = as_points(points)
        vals = np.asarray(self.f(pts), dtype=float)
        return self.domain.contains(pts) & (vals >= self.level - tol)


class Intersection(Region):
    def __init__(self, *regions: Region):
        if not regions:
            raise ValueError("intersection needs at least one region")
        super().__init__(regions[0].domain)
        self.regions = regions
        self.is_open = all(r.is_open for r in regions)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        mask = self.regions[0].contains(points, tol=tol)
        for r in self.regions[1:]:
            mask = mask & r.contains(points, tol=tol)
        return mask

    def closure_contains(self, points, tol: float = EPS_BD) -> np.ndarray:
        mask = self.regions[0].closure_contains(points, tol=tol)
        for r in self.regions[1:]:
            mask = mask & r.closure_contains(points, tol=tol)
        return mask


class Complement(Region):
    """Domain points not in the inner region; closed when the inner set is open."""

    def __init__(self, inner: Region):
        super().__init__(inner.domain)
        self.inner = inner
        self.is_open = not inner.is_open

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = as_points(points)
        return self.domain.contains(pts) & ~self.inner.contains(pts, tol=-tol if tol else 0.0)


class ClosureOf(Region):
    """Closed hull of a region, realized as membership-with-tolerance."""

    is_open = False

    def __init__(self, inner: Region):
        super().__init__(inner.domain)
        self.inner = inner

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        return self.inner.closure_contains(points, tol=max(tol, EPS_BD))


class PredicateRegion(Region):
    """Membership by arbitrary vectorized predicate; closure equals membership."""

    def __init__(self, domain: CompactDomain, predicate, open_flag: bool = False):
        super().__init__(domain)
        self.predicate = predicate
        self.is_open = bool(open_flag)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = as_points(points)
        return self.domain.contains(pts) & np.asarray(self.predicate(pts), dtype=bool)


# ---------------------------------------------------------------------------
# Set-level minimizations


def _target_points(target: Region, h: float) -> np.ndarray:
    pts = target.sample(h, closure=True)
    if len(pts) == 0:
        raise EmptyTarget("target region has no points or samples")
    return pts


def distance_to_set(x, target: Region, h: float = DEFAULT_H) -> np.ndarray | float:
    """Shortest Euclidean distance from x to the target region.

    Exact for point-set and ball targets. Any other target is replaced by its
    grid sample, and the returned minimum overestimates the true distance by
    at most the covering radius sqrt(A)*h (see `distance_error_bound`).
    """
    pts = as_points(x)
    if isinstance(target, PointSet):
        d = cdist(pts, target.points).min(axis=1)
    elif isinstance(target, BallSet):
        d = np.maximum(cdist(pts, target.centers).min(axis=1) - target.radius, 0.0)
    else:
        d = cdist(pts, _target_points(target, h)).min(axis=1)
    if np.ndim(x) == 1:
        return float(d[0])
    return d


def distance_error_bound(target: Region, h: float = DEFAULT_H) -> float:
    """Worst-case overestimate of distance_to_set for this target representation."""
    if isinstance(target, (PointSet, BallSet)):
        return 0.0
    return target.domain.covering_radius(h)


def escape_distance(xprime: Region, target: Region, h: float = DEFAULT_H) -> float:
    """Shortest distance from the complement of the neighborhood to the target.

    Returns the grid minimum d_bar of the distance-to-target over sampled
    points outside `xprime`; every sampled x with distance below d_bar then
    lies inside `xprime`. Accurate to within sqrt(A)*h of the true minimum.
    """
    grid = xprime.domain.grid(h)
    outside = grid[~xprime.contains(grid)]
    if len(outside) == 0:
        raise NotStrictSubset(
            "complement sampling found no points: the neighborhood covers the whole domain"
        )
    d_bar = float(np.min(distance_to_set(outside, target, h=h)))
    if d_bar <= EPS_BD:
        raise NonpositiveResult(
            f"escape distance {d_bar:.3e} is not positive: "
            "the target touches the complement, so the set is not a neighborhood of it"
        )
    return d_bar


@dataclass
class RegionMinimum:
    """Grid minimum of a scalar field over a region, with refinement metadata."""

    value: float
    argmin: np.ndarray
    error: float | None  # L * sqrt(A) * h when a Lipschitz estimate is known
    n_samples: int = 0


def min_over_region(
    f,
    region: Region,
    h: float = DEFAULT_H,
    lipschitz: float | None = None,
    refine: bool = True,
) -> RegionMinimum:
    """Grid minimum of f over the region with one local refinement pass.

    The refinement halves h in the cell around the coarse argmin; refined
    candidates are re-filtered through region membership, so the reported
    minimum never leaves the region.
    """
    samples = region.sample(h, closure=not region.is_open)
    if len(samples) == 0:
        raise EmptyRegion(f"region has no samples at h={h}")
    vals = np.asarray(f(samples), dtype=float)
    i = int(np.argmin(vals))
    best_val, best_arg = float(vals[i]), samples[i]
    if refine:
        cands = _local_refinement(region.domain, best_arg, h)
        if len(cands):
            keep = (
                region.closure_contains(cands)
                if not region.is_open
                else region.contains(cands)
            )
            cands = cands[keep]
        if len(cands):
            cvals = np.asarray(f(cands), dtype=float)
            j = int(np.argmin(cvals))
            if cvals[j] < best_val:
                best_val, best_arg = float(cvals[j]), cands[j]
    err = None if lipschitz is None else float(lipschitz) * region.domain.covering_radius(h)
    return RegionMinimum(best_val, np.array(best_arg, dtype=float), err, len(samples))


def _local_refinement(domain: CompactDomain, center: np.ndarray, h: float) -> np.ndarray:
    """Half-spacing candidates inside the coarse cell around `center`."""
    if domain.kind == "box":
        offsets = np.array(
            list(itertools.product((-h, -h / 2, 0.0, h / 2, h), repeat=domain.dim))
        )
        cands = center[None, :] + offsets
        return cands[domain.contains(cands)]
    # Simplex: tangent offsets on the half mesh, projected exactly back on.
    dirs = domain.tangent_dirs()
    steps = np.concatenate([dirs * (h / 2), -dirs * (h / 2), dirs * h, -dirs * h])
    cands = project_simplex(center[None, :] + steps)
    return cands
