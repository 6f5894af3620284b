"""Population games on the simplex and their mean dynamics as inclusions.

A game is a payoff map F from a strategy distribution x (a simplex point) to
a payoff vector. Shipping dynamics: best response (set-valued at payoff
ties), tempered best response, pairwise comparison (Smith), excess payoff
(BNN), and replicator. Gains-form Lyapunov candidates are provided for the
families where an aggregate-gains function is standard; they are candidates
only and must still pass certification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certify import EPS_NUM, Verdict, _witness
from .dynamics import TOL_TIE, Inclusion
from .errors import EmptyRegion, UnknownFamily, UnsupportedFamily
from .fields import ScalarField
from .geometry import CompactDomain, Region, as_points

FAMILIES = ("br", "tempered_br", "smith", "bnn", "replicator")


@dataclass
class PopulationGame:
    """Payoff map on the simplex; affine games carry their matrix for exact derivatives."""

    n: int
    payoff_fn: "callable"             # (N, A) -> (N, A)
    deriv_fn: "callable | None" = None  # (N, A) -> (N, A, A); None: finite differences
    matrix: np.ndarray | None = None
    offset: np.ndarray | None = None
    name: str = "game"

    @property
    def domain(self) -> CompactDomain:
        return CompactDomain.simplex(self.n)

    def payoff(self, x) -> np.ndarray:
        return np.asarray(self.payoff_fn(as_points(x)), dtype=float)

    def payoff_derivative(self, x, delta: float = 1e-6) -> np.ndarray:
        pts = as_points(x)
        if self.deriv_fn is not None:
            return np.asarray(self.deriv_fn(pts), dtype=float)
        n, dim = pts.shape
        D = np.empty((n, dim, dim))
        for k in range(dim):
            step = np.zeros(dim)
            step[k] = delta
            D[:, :, k] = (self.payoff(pts + step) - self.payoff(pts - step)) / (2 * delta)
        return D


def matrix_game(M, offset=None, name: str = "matrix_game") -> PopulationGame:
    """Affine payoff F(x) = M x + offset with constant derivative M."""
    M = np.asarray(M, dtype=float)
    dim = M.shape[0]
    c = np.zeros(dim) if offset is None else np.asarray(offset, dtype=float)

    def payoff(pts):
        return pts @ M.T + c

    def deriv(pts):
        return np.broadcast_to(M, (len(pts), dim, dim)).copy()

    return PopulationGame(dim, payoff, deriv, matrix=M, offset=c, name=name)


RPS_MATRIX = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])
NEG_IDENTITY_OFFSET = np.array([0.25, 0.35, 0.40])


def builtin_game(name: str) -> PopulationGame:
    if name == "rps":
        return matrix_game(RPS_MATRIX, name="rps")
    if name == "neg_identity":
        # -x + c: strictly self-defeating with the interior equilibrium at c.
        return matrix_game(-np.eye(3), offset=NEG_IDENTITY_OFFSET, name="neg_identity")
    if name == "coordination":
        return matrix_game(np.eye(3), name="coordination")
    raise UnknownFamily(f"no builtin game named {name!r}")


@dataclass(frozen=True)
class DynamicSpec:
    """Dynamic family plus its parameters (tempering applies to tempered_br)."""

    family: str
    tempering: "callable | None" = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnknownFamily(f"unknown dynamic family {self.family!r}")


def _default_tempering(gain):
    # Switching-rate damping by the maximal gain; one concrete choice from
    # the standard family of status-quo-biased revision rates.
    return 1.0 - np.exp(-gain)


# ---------------------------------------------------------------------------
# Self-defeating externality


def tangent_directions(dim: int, n_random: int, rng: np.random.Generator) -> np.ndarray:
    """Coordinate-difference basis plus random unit tangent vectors (sum zero)."""
    dirs = []
    for i in range(dim):
        for j in range(i + 1, dim):
            d = np.zeros(dim)
            d[i], d[j] = 1.0, -1.0
            dirs.append(d / np.sqrt(2.0))
    if n_random > 0:
        z = rng.normal(size=(n_random, dim))
        z -= z.mean(axis=1, keepdims=True)
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        keep = norms[:, 0] > 1e-12
        dirs.extend(z[keep] / norms[keep])
    return np.array(dirs)


def check_self_defeating(game: PopulationGame, region: Region, h: float = 0.01,
                         n_random_dirs: int = 64, seed: int = 0) -> Verdict:
    """Max of z' DF(x) z over sampled x and tangent z; passes when <= EPS_NUM.

    Negative semidefiniteness on tangent deviations means a strategy whose
    share grows sees its payoff fall: the externality is self-defeating.
    """
    samples = region.sample(h, closure=True)
    if len(samples) == 0:
        raise EmptyRegion("no samples in the region")
    rng = np.random.default_rng(seed)
    Z = tangent_directions(game.n, n_random_dirs, rng)
    if game.matrix is not None:
        quad_dirs = np.einsum("di,ij,dj->d", Z, game.matrix, Z)
        quad = np.broadcast_to(quad_dirs, (len(samples), len(Z)))
    else:
        D = game.payoff_derivative(samples)
        quad = np.einsum("di,nij,dj->nd", Z, D, Z)
    worst_flat = int(np.argmax(quad))
    worst_x, worst_z = np.unravel_index(worst_flat, quad.shape)
    worst = float(quad[worst_x, worst_z])
    status = "pass" if worst <= EPS_NUM else "fail"
    witnesses = []
    if status == "fail":
        witnesses.append(_witness(samples[worst_x], z=Z[worst_z].tolist(), value=worst))
    return Verdict("self_defeating", status, witnesses,
                   {"worst_value": worst, "n_samples": len(samples),
                    "n_directions": len(Z)})


# ---------------------------------------------------------------------------
# Mean dynamics


def _pairwise_gains(F: np.ndarray) -> np.ndarray:
    """psi[n, i, j] = [F_j - F_i]_+ : the gain of switching from i to j."""
    return np.maximum(F[:, None, :] - F[:, :, None], 0.0)


def _smith_velocity(game: PopulationGame):
    def v(pts):
        F = game.payoff(pts)
        psi = _pairwise_gains(F)
        inflow = np.einsum("nj,nji->ni", pts, psi)
        outflow = pts * psi.sum(axis=2)
        return inflow - outflow

    return v


def _bnn_velocity(game: PopulationGame):
    def v(pts):
        F = game.payoff(pts)
        excess = F - np.einsum("ni,ni->n", pts, F)[:, None]
        gamma = np.maximum(excess, 0.0)
        return gamma - pts * gamma.sum(axis=1, keepdims=True)

    return v


def _replicator_velocity(game: PopulationGame):
    def v(pts):
        F = game.payoff(pts)
        mean = np.einsum("ni,ni->n", pts, F)[:, None]
        return pts * (F - mean)

    return v


def _estimate_bound(v_fn, domain: CompactDomain, h: float = 0.02) -> float:
    mesh = domain.grid(h)
    speeds = np.linalg.norm(np.asarray(v_fn(mesh), dtype=float), axis=1)
    return 1.05 * float(speeds.max()) + 1e-9


def make_inclusion(game: PopulationGame, spec: DynamicSpec,
                   bound: float | None = None) -> Inclusion:
    """Mean dynamic of the revision protocol as an inclusion on the simplex.

    Best-response families are set-valued at payoff ties (tolerance TOL_TIE)
    with one extreme velocity per maximizing vertex; the other families are
    ordinary vector fields.
    """
    domain = game.domain
    name = f"{spec.family}({game.name})"
    if spec.family in ("br", "tempered_br"):
        temper = spec.tempering or _default_tempering

        def extremes(pts):
            F = game.payoff(pts)
            m = F.max(axis=1, keepdims=True)
            active = F >= m - TOL_TIE
            V = np.eye(domain.dim)[None, :, :] - pts[:, None, :]
            if spec.family == "tempered_br":
                gain = m[:, 0] - np.einsum("ni,ni->n", pts, F)
                V = V * temper(np.maximum(gain, 0.0))[:, None, None]
            return V, active

        inc = Inclusion(domain, extremes,
                        float(np.sqrt(2.0)) if bound is None else bound, name=name)
    elif spec.family in ("smith", "bnn", "replicator"):
        v_fn = {"smith": _smith_velocity, "bnn": _bnn_velocity,
                "replicator": _replicator_velocity}[spec.family](game)
        inc = Inclusion.from_ode(domain, v_fn,
                                 bound=bound if bound is not None else _estimate_bound(v_fn, domain),
                                 name=name)
    else:
        raise UnknownFamily(f"unknown dynamic family {spec.family!r}")
    problems = inc.validate(h=0.05)
    if problems:
        raise UnknownFamily(f"generated dynamic violates simplex invariants: {problems}")
    return inc


# ---------------------------------------------------------------------------
# Gains-based Lyapunov candidates


def _smith_gains(game: PopulationGame) -> ScalarField:
    def fn(pts):
        psi = _pairwise_gains(game.payoff(pts))
        return 0.5 * np.einsum("ni,nij->n", pts, psi ** 2)

    grad_fn = None
    if game.matrix is not None:
        M = game.matrix

        def grad_fn(pts):
            F = game.payoff(pts)
            psi = _pairwise_gains(F)
            own = 0.5 * (psi ** 2).sum(axis=2)
            t_in = np.einsum("ni,nij,jk->nk", pts, psi, M)
            t_out = np.einsum("ni,nij,ik->nk", pts, psi, M)
            return own + t_in - t_out

    return ScalarField(fn, grad_fn, "c1", None, f"smith_gains({game.name})")


def _bnn_gains(game: PopulationGame) -> ScalarField:
    def fn(pts):
        F = game.payoff(pts)
        excess = F - np.einsum("ni,ni->n", pts, F)[:, None]
        return 0.5 * (np.maximum(excess, 0.0) ** 2).sum(axis=1)

    grad_fn = None
    if game.matrix is not None:
        M = game.matrix

        def grad_fn(pts):
            F = game.payoff(pts)
            excess = F - np.einsum("ni,ni->n", pts, F)[:, None]
            gamma = np.maximum(excess, 0.0)
            return gamma @ M - gamma.sum(axis=1, keepdims=True) * (F + pts @ M)

    return ScalarField(fn, grad_fn, "c1", None, f"bnn_gains({game.name})")


def _br_gains(game: PopulationGame) -> ScalarField:
    # Maximal excess payoff; kinked at ties, so differentiation goes through
    # the finite-difference path with its kink filter.
    def fn(pts):
        F = game.payoff(pts)
        return F.max(axis=1) - np.einsum("ni,ni->n", pts, F)

    return ScalarField(fn, None, "lipschitz", None, f"br_gains({game.name})")


def gains_lyapunov_candidates(game: PopulationGame, spec: DynamicSpec):
    """Aggregate-gains candidate pair (W, W_tilde) for the given family.

    The decay candidate is the derivative of W along the mean dynamic
    (closed form for affine games, finite differences otherwise). Both are
    candidates: certification, not construction, establishes validity.
    """
    if spec.family == "replicator":
        raise UnsupportedFamily("no gains-form candidate ships for the replicator family")
    if spec.family == "smith":
        W = _smith_gains(game)
        v_fn = _smith_velocity(game)
    elif spec.family == "bnn":
        W = _bnn_gains(game)
        v_fn = _bnn_velocity(game)
    elif spec.family in ("br", "tempered_br"):
        W = _br_gains(game)
        W_tilde = ScalarField(lambda pts: -W.fn(pts), None, "lsc", None,
                              f"br_gains_decay({game.name})")
        return W, W_tilde
    else:
        raise UnknownFamily(f"unknown dynamic family {spec.family!r}")

    if W.grad_fn is not None:
        grad = W.grad_fn

        def decay(pts):
            return np.einsum("na,na->n", np.asarray(grad(pts), dtype=float), v_fn(pts))

    else:
        from .fields import grad_batch

        def decay(pts):
            g, _ = grad_batch(W, pts)
            return np.einsum("na,na->n", g, v_fn(pts))

    W_tilde = ScalarField(decay, None, "lsc", None, f"{spec.family}_gains_decay({game.name})")
    return W, W_tilde


# ---------------------------------------------------------------------------
# Independent equilibrium oracle


def regret(game: PopulationGame, x) -> np.ndarray | float:
    """Best-response violation max_i F_i(x) - x.F(x); zero exactly at equilibria."""
    pts = as_points(x)
    F = game.payoff(pts)
    r = F.max(axis=1) - np.einsum("ni,ni->n", pts, F)
    return float(r[0]) if np.ndim(x) == 1 else r


def find_nash_brute(game: PopulationGame, h: float = 0.01, rounds: int = 10):
    """Grid scan of the regret followed by bisection refinement.

    Independent of any dynamic: pure payoff evaluation. Returns (point,
    regret at the point); the mesh step shrinks by half each round.
    """
    domain = game.domain
    mesh = domain.grid(h)
    r = regret(game, mesh)
    best = mesh[int(np.argmin(r))]
    step = h
    dirs = domain.tangent_dirs()
    offsets = np.concatenate([dirs, -dirs])
    for _ in range(rounds):
        step /= 2.0
        cands = np.vstack([best[None, :], best[None, :] + step * offsets,
                           best[None, :] + 2 * step * offsets])
        cands = domain.project(cands)
        rc = regret(game, cands)
        best = cands[int(np.argmin(rc))]
    return best, regret(game, best)
