"""Construction of the forward-invariant sublevel neighborhood.

Given a Lyapunov candidate W, an open monotone-decrease neighborhood X' of a
closed target set, the construction computes

    d_bar : min distance from the complement of X' to the target,
    X'_0  : cl X' intersected with {distance-to-target >= d_bar/2},
    w_bar : min of W over X'_0 (positive when W vanishes only on the target),
    X''   : {W < w_bar/2} ∩ X',

and X'' is the neighborhood whose forward invariance the trajectory suite
then stress-tests. Grid minima overestimate true minima, so a conservative
mode shrinks the level by the Lipschitz grid margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Inclusion, SelectorPolicy, integrate_batch
from .errors import EmptyAnnulus, EmptyRegion, NonpositiveLevel, PreconditionFailed
from .fields import ScalarField, distance_field, estimate_lipschitz
from .geometry import (
    EPS_BD,
    ClosureOf,
    Intersection,
    Region,
    SublevelSet,
    SuperlevelSet,
    as_points,
    escape_distance,
    min_over_region,
)

# The construction halves both the distance threshold and the level; any
# factor in (0, 1) would do, these are the canonical defaults.
ANNULUS_FACTOR = 0.5
LEVEL_FACTOR = 0.5

DEFAULT_POLICIES = ("first", "mixture", "random", "adversarial")


@dataclass
class InvariantConstruction:
    """Constructed forward-invariant sublevel neighborhood with its audit trail."""

    d_bar: float
    w_bar: float
    level: float
    core: Region                 # X'' = {W < level} ∩ X'
    annulus: Region              # X'_0
    w_bar_argmin: np.ndarray
    W: ScalarField
    xprime: Region
    target: Region
    lipschitz_W: float
    h: float
    conservative: bool
    diagnostics: dict = field(default_factory=dict)

    def escape_test(self):
        """Escaped iff W exceeds the level by the grid margin or the state
        leaves the closure of X' by more than the boundary tolerance."""
        margin = self.lipschitz_W * self.core.domain.covering_radius(self.h)
        level, W, xp = self.level, self.W, self.xprime

        def test(states):
            vals = np.asarray(W(as_points(states)), dtype=float)
            return (vals > level + margin) | ~xp.closure_contains(states, tol=EPS_BD)

        return test

    def to_dict(self) -> dict:
        return {
            "d_bar": self.d_bar,
            "w_bar": self.w_bar,
            "level": self.level,
            "w_bar_argmin": np.asarray(self.w_bar_argmin).tolist(),
            "lipschitz_W": self.lipschitz_W,
            "h": self.h,
            "conservative": self.conservative,
            "diagnostics": self.diagnostics,
        }


def construct_invariant_neighborhood(
    W: ScalarField,
    xprime: Region,
    target: Region,
    h: float = 0.01,
    conservative: bool = False,
    lipschitz: float | None = None,
) -> InvariantConstruction:
    """Build the forward-invariant sublevel neighborhood from (W, X', target).

    Requires: target nonempty, closed, contained in the open X' which is a
    strict subset of the domain; W nonnegative on sampled cl X'.
    """
    domain = xprime.domain
    target_pts = target.sample(h, closure=True)
    if len(target_pts) == 0:
        raise PreconditionFailed("target region has no samples")
    if not xprime.contains(target_pts).all():
        raise PreconditionFailed("target is not contained in the open neighborhood")
    if not xprime.is_open:
        raise PreconditionFailed("the monotone-decrease neighborhood must be open")

    cl_xprime = ClosureOf(xprime)
    cl_samples = cl_xprime.sample(h)
    if len(cl_samples) == 0:
        raise EmptyRegion("closure of the neighborhood has no samples")
    w_vals = W(cl_samples)
    if (w_vals < -EPS_BD).any():
        worst = int(np.argmin(w_vals))
        raise PreconditionFailed(
            f"W is negative on cl X' (W={w_vals[worst]:.3e} at {cl_samples[worst].tolist()})"
        )

    d_bar = escape_distance(xprime, target, h=h)
    d_star = distance_field(target, h=h)
    annulus = Intersection(cl_xprime, SuperlevelSet(domain, d_star, ANNULUS_FACTOR * d_bar))

    L_W = lipschitz if lipschitz is not None else (
        W.lipschitz if W.lipschitz is not None else estimate_lipschitz(W, cl_xprime, h=h)
    )
    try:
        m = min_over_region(W, annulus, h=h, lipschitz=L_W)
    except EmptyRegion as exc:
        raise EmptyAnnulus(
            f"no samples in cl X' with distance-to-target >= {ANNULUS_FACTOR * d_bar:.4g}"
        ) from exc
    w_bar = m.value
    grid_margin = L_W * domain.covering_radius(h)
    if w_bar <= 0 or (conservative and w_bar - grid_margin <= 0):
        raise NonpositiveLevel(
            f"min of W over the annulus is {w_bar:.3e}"
            + (f" (margin {grid_margin:.3e})" if conservative else "")
            + ": W vanishes away from the target, the zero-set condition fails"
        )
    level = LEVEL_FACTOR * ((w_bar - grid_margin) if conservative else w_bar)

    core = Intersection(SublevelSet(domain, W, level), xprime)
    construction = InvariantConstruction(
        d_bar=d_bar,
        w_bar=w_bar,
        level=level,
        core=core,
        annulus=annulus,
        w_bar_argmin=m.argmin,
        W=W,
        xprime=xprime,
        target=target,
        lipschitz_W=float(L_W),
        h=h,
        conservative=conservative,
        diagnostics={
            "annulus_samples": m.n_samples,
            "w_bar_error_margin": grid_margin,
            "annulus_threshold": ANNULUS_FACTOR * d_bar,
        },
    )
    _check_construction_invariants(construction, target_pts, h)
    return construction


def _check_construction_invariants(cons: InvariantConstruction, target_pts, h: float):
    """Grid assertions the construction must satisfy by its own logic."""
    core, d_star = cons.core, distance_field(cons.target, h=h)
    # The target sits strictly inside the constructed neighborhood.
    if not core.contains(target_pts).all():
        raise PreconditionFailed(
            "constructed neighborhood does not contain the target samples "
            "(W does not vanish on the target?)"
        )
    core_samples = core.sample(h)
    cons.diagnostics["core_samples"] = len(core_samples)
    if len(core_samples):
        d_vals = d_star(core_samples)
        if not (d_vals < ANNULUS_FACTOR * cons.d_bar + EPS_BD).all():
            raise PreconditionFailed(
                "a sampled point of the constructed neighborhood is farther than "
                "d_bar/2 from the target; the level is inconsistent with the annulus minimum"
            )


# ---------------------------------------------------------------------------
# Forward-invariance verification


@dataclass
class EscapeWitness:
    policy: str
    start_index: int
    start: np.ndarray
    t: float
    state: np.ndarray

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "start_index": int(self.start_index),
            "start": np.asarray(self.start).tolist(),
            "t": float(self.t),
            "state": np.asarray(self.state).tolist(),
        }


@dataclass
class InvarianceReport:
    verdict: str                  # "invariant (empirical)" | "escape witnesses found"
    witnesses: list[EscapeWitness]
    n_starts: int
    T: float
    dt: float
    policies: tuple
    seed: int
    h: float
    per_policy_escapes: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def invariant(self) -> bool:
        return not self.witnesses

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "n_starts": self.n_starts,
            "T": self.T,
            "dt": self.dt,
            "policies": list(self.policies),
            "seed": self.seed,
            "h": self.h,
            "per_policy_escapes": self.per_policy_escapes,
            "notes": self.notes,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


def sample_starts(region: Region, n: int, h: float, rng: np.random.Generator) -> np.ndarray:
    """n start points inside the region, half of them within ~2h of its boundary.

    Escapes happen at boundaries, so half the budget goes to jittered copies
    of boundary-adjacent grid members; the rest is spread over the region.
    """
    members = region.sample(h)
    if len(members) == 0:
        raise EmptyRegion(f"region has no sample points at h={h}; cannot draw starts")
    boundary = region.boundary_adjacent(h)
    if len(boundary) == 0:
        boundary = members
    want_near = n // 2
    starts = [
        _jittered(region, boundary, want_near, h, rng),
        _jittered(region, members, n - want_near, h, rng),
    ]
    return np.vstack(starts)[:n]


def _jittered(region: Region, pool: np.ndarray, n: int, h: float,
              rng: np.random.Generator) -> np.ndarray:
    out = []
    need = n
    for _ in range(8):
        idx = rng.integers(0, len(pool), size=2 * need)
        cands = pool[idx]
        noise = rng.uniform(-h / 2, h / 2, size=cands.shape)
        if region.domain.kind == "simplex":
            noise -= noise.mean(axis=1, keepdims=True)
        cands = region.domain.project(cands + noise)
        keep = region.contains(cands)
        out.append(cands[keep][:need])
        need -= len(out[-1])
        if need <= 0:
            return np.vstack(out)[:n]
    # Fall back to exact members (always inside) to fill the remainder.
    idx = rng.integers(0, len(pool), size=need)
    out.append(pool[idx])
    return np.vstack(out)[:n]


def verify_forward_invariance(
    inc: Inclusion,
    region,
    n_starts: int = 100,
    T: float = 20.0,
    dt: float = 1e-3,
    policies: tuple = DEFAULT_POLICIES,
    h: float = 0.01,
    seed: int = 0,
    target: Region | None = None,
) -> InvarianceReport:
    """Stress-test forward invariance of a region along integrated paths.

    `region` is either a Region or an InvariantConstruction (whose sublevel
    escape margin is then used). Starts are boundary-biased; every selector
    policy runs, the adversarial one climbing the distance-to-target field.
    A report with witnesses is a valid outcome, not an error.
    """
    if isinstance(region, InvariantConstruction):
        cons = region
        R = cons.core
        escape_test = cons.escape_test()
        target = target if target is not None else cons.target
    else:
        R = region
        escape_test = lambda states: ~R.closure_contains(states, tol=EPS_BD)

    rng = np.random.default_rng(seed)
    starts = sample_starts(R, n_starts, h, rng)

    resolved: list[SelectorPolicy] = []
    for p in policies:
        if isinstance(p, SelectorPolicy):
            resolved.append(p)
        elif p == "adversarial":
            if target is None:
                raise PreconditionFailed(
                    "adversarial policy needs a target (for the distance objective) "
                    "when verifying a plain region"
                )
            resolved.append(SelectorPolicy("adversarial", distance_field(target, h=h)))
        else:
            resolved.append(SelectorPolicy(p))

    witnesses: list[EscapeWitness] = []
    per_policy = {}
    notes = []
    for policy in resolved:
        res = integrate_batch(
            inc, starts, T, dt, policy=policy, seed=seed,
            escape_test=escape_test, stop_when_all_escaped=True,
            on_left_domain="freeze",
        )
        count = int(res.escaped.sum())
        per_policy[policy.kind] = count
        if res.left_domain is not None and res.left_domain.any():
            notes.append(f"{policy.kind}: {int(res.left_domain.sum())} trajectories "
                         "pushed against the domain boundary and were frozen there")
        for i in np.flatnonzero(res.escaped):
            witnesses.append(
                EscapeWitness(
                    policy=policy.kind,
                    start_index=int(i),
                    start=starts[i].copy(),
                    t=float(res.escape_times[i]),
                    state=res.escape_states[i].copy(),
                )
            )
    verdict = "invariant (empirical)" if not witnesses else "escape witnesses found"
    return InvarianceReport(
        verdict=verdict,
        witnesses=witnesses,
        n_starts=n_starts,
        T=T,
        dt=dt,
        policies=tuple(p.kind for p in resolved),
        seed=seed,
        h=h,
        per_policy_escapes=per_policy,
        notes=notes,
    )
