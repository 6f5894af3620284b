"""Lyapunov candidates W, decay-rate candidates W_tilde, and their derivatives.

Evaluators are vectorized: they accept a single point (A,) or a batch (N, A)
and return a scalar / (N,) array. Decay-rate fields are tagged "lsc" and are
only ever evaluated, never differentiated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist

from .errors import EmptyRegion, NondifferentiableAt
from .geometry import BallSet, PointSet, Region, as_points

# Central finite-difference step and agreement tolerances.
DELTA_FD = 1e-5
TOL_GRAD = 1e-6  # relative agreement of closed-form vs central differences
TOL_KINK = 1e-3  # one-sided difference disagreement that flags a kink
LIPSCHITZ_INFLATION = 1.2


@dataclass
class ScalarField:
    """A scalar field with optional closed-form gradient and smoothness tag.

    smoothness is one of "c1", "lipschitz", "lsc". Fields tagged "lsc"
    (decay-rate candidates) refuse gradient queries.
    """

    fn: "callable"
    grad_fn: "callable | None" = None
    smoothness: str = "lipschitz"
    lipschitz: float | None = None
    name: str = "field"

    def __post_init__(self):
        if self.smoothness not in ("c1", "lipschitz", "lsc"):
            raise ValueError(f"unknown smoothness tag {self.smoothness!r}")

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        out = np.asarray(self.fn(as_points(pts)), dtype=float)
        return float(out[0]) if pts.ndim == 1 else out

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return combine([self, other], [1.0, 1.0], name=f"{self.name}+{other.name}")

    def __mul__(self, factor: float) -> "ScalarField":
        return combine([self], [float(factor)], name=f"{factor}*{self.name}")

    __rmul__ = __mul__


def combine(fields: list[ScalarField], weights: list[float], name: str = "combo") -> ScalarField:
    """Weighted sum of fields; the gradient exists where every term's does."""
    weights = [float(w) for w in weights]

    def fn(pts):
        return sum(w * np.asarray(f.fn(pts), dtype=float) for f, w in zip(fields, weights))

    grad_fn = None
    if all(f.grad_fn is not None for f in fields):
        def grad_fn(pts):
            return sum(w * np.asarray(f.grad_fn(pts), dtype=float) for f, w in zip(fields, weights))

    if any(f.smoothness == "lsc" for f in fields):
        smooth = "lsc"
    elif all(f.smoothness == "c1" for f in fields):
        smooth = "c1"
    else:
        smooth = "lipschitz"
    lip = None
    if all(f.lipschitz is not None for f in fields):
        lip = sum(abs(w) * f.lipschitz for f, w in zip(fields, weights))
    return ScalarField(fn, grad_fn, smooth, lip, name)


# ---------------------------------------------------------------------------
# Differentiation


def grad_batch(f: ScalarField, points, delta: float = DELTA_FD):
    """Gradients at a batch of points plus a mask of where they exist.

    Closed-form gradient when available; otherwise central differences with
    a kink filter: a point is flagged (mask False) when forward and backward
    one-sided differences disagree by more than TOL_KINK on some axis.
    """
    if f.smoothness == "lsc":
        raise ValueError(f"field {f.name!r} is lower-semicontinuous-only; no gradient")
    pts = as_points(points)
    n, dim = pts.shape
    if f.grad_fn is not None:
        g = np.asarray(f.grad_fn(pts), dtype=float).reshape(n, dim)
        return g, np.ones(n, dtype=bool)
    base = np.asarray(f.fn(pts), dtype=float)
    grads = np.empty((n, dim))
    ok = np.ones(n, dtype=bool)
    for a in range(dim):
        step = np.zeros(dim)
        step[a] = delta
        fp = np.asarray(f.fn(pts + step), dtype=float)
        fm = np.asarray(f.fn(pts - step), dtype=float)
        fwd = (fp - base) / delta
        bwd = (base - fm) / delta
        grads[:, a] = (fp - fm) / (2 * delta)
        scale = 1.0 + np.abs(grads[:, a])
        ok &= np.abs(fwd - bwd) <= TOL_KINK * scale
    return grads, ok


def grad(f: ScalarField, x, delta: float = DELTA_FD) -> np.ndarray:
    """Gradient at one point; raises NondifferentiableAt on a detected kink."""
    g, ok = grad_batch(f, x, delta=delta)
    if not ok[0]:
        raise NondifferentiableAt(x, "one-sided differences disagree")
    return g[0]


def directional_decrease(f: ScalarField, x, v) -> float:
    """<grad f(x), v>: the instantaneous change of f along velocity v."""
    return float(np.dot(grad(f, x), np.asarray(v, dtype=float)))


# ---------------------------------------------------------------------------
# Lipschitz estimation


def _pair_slopes(f: ScalarField, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(xs - ys, axis=1)
    keep = d > 1e-12
    fv = np.abs(np.asarray(f.fn(xs), dtype=float) - np.asarray(f.fn(ys), dtype=float))
    return fv[keep] / d[keep]


def _probe_directions(domain) -> np.ndarray:
    """Axis/tangent directions plus pairwise diagonals: corner gradients of
    smooth fields are only visible along diagonal probes."""
    base = domain.tangent_dirs()
    dirs = [base]
    if domain.kind == "box" and domain.dim >= 2:
        import itertools

        diag = []
        for i, j in itertools.combinations(range(domain.dim), 2):
            for s in (1.0, -1.0):
                d = np.zeros(domain.dim)
                d[i], d[j] = 1.0, s
                diag.append(d / np.sqrt(2.0))
        dirs.append(np.array(diag))
    return np.concatenate(dirs)


def raw_max_slope(
    f: ScalarField,
    region: Region,
    h: float = 0.01,
    n_random: int = 2048,
    rng: np.random.Generator | None = None,
    step: float | None = None,
) -> float:
    """Max sampled difference quotient over grid-neighbor and random pairs."""
    rng = rng or np.random.default_rng(0)
    samples = region.sample(h, closure=True)
    if len(samples) == 0:
        raise EmptyRegion("cannot estimate a Lipschitz constant on an empty region")
    slopes = [np.array([0.0])]
    step = h if step is None else step
    # Short steps along probe directions, kept when they stay in the closure.
    for d in _probe_directions(region.domain):
        for sgn in (1.0, -1.0):
            ys = samples + sgn * step * d
            keep = region.closure_contains(ys, tol=1e-9) & region.domain.contains(ys)
            if keep.any():
                slopes.append(_pair_slopes(f, samples[keep], ys[keep]))
    # Random long-range pairs.
    if len(samples) >= 2 and n_random > 0:
        i = rng.integers(0, len(samples), size=n_random)
        j = rng.integers(0, len(samples), size=n_random)
        slopes.append(_pair_slopes(f, samples[i], samples[j]))
    return float(np.max(np.concatenate(slopes)))


def estimate_lipschitz(
    f: ScalarField,
    region: Region,
    h: float = 0.01,
    n_random: int = 2048,
    rng: np.random.Generator | None = None,
) -> float:
    """Sampled Lipschitz constant of f on the region, inflated by a 1.2 safety factor."""
    return LIPSCHITZ_INFLATION * raw_max_slope(f, region, h=h, n_random=n_random, rng=rng)


def estimate_gradient_lipschitz(
    f: ScalarField,
    region: Region,
    h: float = 0.01,
    n_pairs: int = 512,
    rng: np.random.Generator | None = None,
) -> float:
    """Sampled Lipschitz constant of the gradient map (curvature bound for step tolerances)."""
    rng = rng or np.random.default_rng(1)
    samples = region.sample(h, closure=True)
    if len(samples) == 0:
        raise EmptyRegion("cannot estimate a gradient Lipschitz constant on an empty region")
    idx = rng.integers(0, len(samples), size=min(n_pairs, 4 * len(samples)))
    xs = samples[idx]
    ys = xs + rng.normal(scale=max(h, 1e-3), size=xs.shape)
    ys = region.domain.project(ys)
    gx, okx = grad_batch(f, xs)
    gy, oky = grad_batch(f, ys)
    d = np.linalg.norm(xs - ys, axis=1)
    keep = okx & oky & (d > 1e-12)
    if not keep.any():
        return 0.0
    ratios = np.linalg.norm(gx[keep] - gy[keep], axis=1) / d[keep]
    return LIPSCHITZ_INFLATION * float(np.max(ratios))


# ---------------------------------------------------------------------------
# Built-in field library


def quadratic_form(Q, center=None, name: str = "quadratic") -> ScalarField:
    """x -> (x - c)^T Q (x - c) with its closed-form gradient."""
    Q = np.asarray(Q, dtype=float)
    dim = Q.shape[0]
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    S = Q + Q.T

    def fn(pts):
        z = pts - c
        return np.einsum("ni,ij,nj->n", z, Q, z)

    def grad_fn(pts):
        return (pts - c) @ S.T

    lip = None
    return ScalarField(fn, grad_fn, "c1", lip, name)


def sqnorm(center=None, dim: int | None = None, name: str = "sqnorm") -> ScalarField:
    """Squared Euclidean distance to a center point."""
    if center is None and dim is None:
        raise ValueError("need center or dim")
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def fn(pts):
        z = pts - c
        return np.einsum("ni,ni->n", z, z)

    def grad_fn(pts):
        return 2.0 * (pts - c)

    return ScalarField(fn, grad_fn, "c1", None, name)


def norm2(center=None, dim: int | None = None, name: str = "norm") -> ScalarField:
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def fn(pts):
        return np.linalg.norm(pts - c, axis=-1)

    return ScalarField(fn, None, "lipschitz", 1.0, name)


def norm1(center=None, dim: int | None = None, name: str = "norm1") -> ScalarField:
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def fn(pts):
        return np.abs(pts - c).sum(axis=-1)

    return ScalarField(fn, None, "lipschitz", None, name)


def linear_field(slope, offset: float = 0.0, name: str = "linear") -> ScalarField:
    g = np.asarray(slope, dtype=float)

    def fn(pts):
        return pts @ g + offset

    def grad_fn(pts):
        return np.broadcast_to(g, pts.shape).copy()

    return ScalarField(fn, grad_fn, "c1", float(np.linalg.norm(g)), name)


def constant_field(value: float, name: str = "constant") -> ScalarField:
    v = float(value)

    def fn(pts):
        return np.full(len(pts), v)

    def grad_fn(pts):
        return np.zeros_like(pts)

    return ScalarField(fn, grad_fn, "c1", 0.0, name)


def radial_hinge(coef_r2: float, coef_hr: float, coef_h2: float, knot: float,
                 center=None, dim: int | None = None, coef_h1: float = 0.0,
                 name: str = "radial_hinge") -> ScalarField:
    """Radial field a*r^2 + b*r*(r-k)_+ + c*(r-k)_+^2 + e*(r-k)_+ around a center.

    C^1 in x when b = e = 0 (the squared hinge joins smoothly); the r*(r-k)_+
    and linear hinge terms put a kink on the sphere r = k, which is fine for
    decay-rate candidates (they are never differentiated).
    """
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def fn(pts):
        r = np.linalg.norm(pts - c, axis=-1)
        hinge = np.maximum(r - knot, 0.0)
        return (coef_r2 * r ** 2 + coef_hr * r * hinge
                + coef_h2 * hinge ** 2 + coef_h1 * hinge)

    grad_fn = None
    if coef_hr == 0.0 and coef_h1 == 0.0:
        # d/dx [a r^2 + c (r-k)_+^2] = (2 a + 2 c (r-k)_+ / r) x, continuous.
        def grad_fn(pts):
            z = pts - c
            r = np.linalg.norm(z, axis=-1)
            hinge = np.maximum(r - knot, 0.0)
            safe_r = np.where(r > 0, r, 1.0)
            scale = 2.0 * coef_r2 + 2.0 * coef_h2 * hinge / safe_r
            return scale[..., None] * z

    smooth = "c1" if (coef_hr == 0.0 and coef_h1 == 0.0) else "lipschitz"
    return ScalarField(fn, grad_fn, smooth, None, name)


def distance_field(target: Region, h: float = 0.01, name: str = "dist_to_target") -> ScalarField:
    """Distance-to-target as a field; closed-form gradient for point/ball targets.

    The gradient is the unit vector away from the nearest target point;
    undefined on the target itself and at equidistant points, where the
    finite-difference kink filter takes over.
    """
    from .geometry import distance_to_set

    def fn(pts):
        return distance_to_set(pts, target, h=h)

    grad_fn = None
    if isinstance(target, (PointSet, BallSet)):
        anchors = target.points if isinstance(target, PointSet) else target.centers

        def grad_fn(pts):
            d = cdist(pts, anchors)
            nearest = anchors[np.argmin(d, axis=1)]
            z = pts - nearest
            r = np.linalg.norm(z, axis=-1, keepdims=True)
            return np.divide(z, r, out=np.zeros_like(z), where=r > 1e-300)

    return ScalarField(fn, grad_fn, "lipschitz", 1.0, name)


def gradient_agreement(f: ScalarField, points, delta: float = DELTA_FD):
    """Relative disagreement between closed-form and central-difference gradients.

    Returns (rel_errors, kink_mask): the field invariant requires agreement
    within TOL_GRAD at 99% of random points, the rest being flagged kinks.
    """
    if f.grad_fn is None:
        raise ValueError("field has no closed-form gradient to check")
    pts = as_points(points)
    g_closed = np.asarray(f.grad_fn(pts), dtype=float)
    g_fd, ok = grad_batch(replace(f, grad_fn=None), pts, delta=delta)
    scale = np.maximum(np.linalg.norm(g_closed, axis=1), 1.0)
    rel = np.linalg.norm(g_closed - g_fd, axis=1) / scale
    return rel, ~ok
