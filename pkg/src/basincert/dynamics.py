"""Differential inclusions and numerical trajectories.

An inclusion maps each state to a finite set of extreme velocities; a
trajectory is produced by explicit Euler steps with exact projection onto
the domain, the velocity per step chosen by a selector policy. Euler matches
the regularity of nonsmooth selections, so no higher-order scheme is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LeftDomain, PreconditionFailed, StepTooLarge
from .fields import ScalarField, grad_batch
from .geometry import CompactDomain, as_points

# Argmax ties are declared at this payoff tolerance.
TOL_TIE = 1e-9
# Hard cap on the Euler step given the velocity bound M.
DT_CAP = 0.01
DT_BOUND_FRACTION = 0.1
# Slack on the per-step Lipschitz bound, scaled with M.
TOL_STEP = 1e-7


def dt_max(bound: float) -> float:
    return min(DT_CAP, DT_BOUND_FRACTION / max(bound, 1e-12))


@dataclass(frozen=True)
class SelectorPolicy:
    """How one velocity is chosen from the extreme set at each step."""

    kind: str  # "first" | "mixture" | "random" | "adversarial"
    objective: ScalarField | None = None

    def __post_init__(self):
        if self.kind not in ("first", "mixture", "random", "adversarial"):
            raise ValueError(f"unknown selector policy {self.kind!r}")
        if self.kind == "adversarial" and self.objective is None:
            raise ValueError("adversarial policy needs an objective field")

    def __str__(self):
        return self.kind


FIRST_EXTREME = SelectorPolicy("first")
UNIFORM_MIXTURE = SelectorPolicy("mixture")
RANDOM_EXTREME = SelectorPolicy("random")


def adversarial_selector(inc: "Inclusion", objective: ScalarField) -> SelectorPolicy:
    """Policy picking, at each step, the extreme velocity that most increases
    the objective: the selection most likely to violate a decrease bound.
    Falls back to the first extreme where the objective has no gradient."""
    return SelectorPolicy("adversarial", objective)


class Inclusion:
    """Set-valued velocity map with finitely many extreme velocities per state.

    extremes_fn maps a batch (N, A) to a velocity tensor (N, K, A) plus an
    active mask (N, K); inactive slots are placeholders (argmax ties vary the
    active count per point). All velocities satisfy |v| <= bound.
    """

    def __init__(self, domain: CompactDomain, extremes_fn, bound: float,
                 name: str = "inclusion", ode_fn=None):
        self.domain = domain
        self.extremes_fn = extremes_fn
        self.bound = float(bound)
        self.name = name
        self.ode_fn = ode_fn  # fast path when the inclusion is single-valued

    @property
    def is_singleton(self) -> bool:
        return self.ode_fn is not None

    @classmethod
    def from_ode(cls, domain: CompactDomain, f, bound: float | None = None,
                 name: str = "ode") -> "Inclusion":
        """Ordinary vector field as a singleton inclusion; f is batched (N,A)->(N,A)."""
        if bound is None:
            probe = domain.grid(0.02 if domain.kind == "box" else 0.02)
            speeds = np.linalg.norm(np.asarray(f(probe), dtype=float), axis=1)
            bound = 1.05 * float(speeds.max()) + 1e-9

        def extremes(pts):
            v = np.asarray(f(pts), dtype=float)[:, None, :]
            return v, np.ones((len(pts), 1), dtype=bool)

        return cls(domain, extremes, bound, name=name, ode_fn=f)

    @classmethod
    def from_extreme_fields(cls, domain: CompactDomain, fns, bound: float,
                            name: str = "hull") -> "Inclusion":
        """Convex hull of finitely many vector fields, all extremes always active."""

        def extremes(pts):
            V = np.stack([np.asarray(f(pts), dtype=float) for f in fns], axis=1)
            return V, np.ones((len(pts), len(fns)), dtype=bool)

        return cls(domain, extremes, bound, name=name,
                   ode_fn=fns[0] if len(fns) == 1 else None)

    def velocities_at(self, x) -> list[np.ndarray]:
        """Extreme velocities at a point (singleton list for ordinary fields)."""
        V, active = self.extremes_fn(as_points(x))
        return [V[0, k].copy() for k in range(V.shape[1]) if active[0, k]]

    def validate(self, h: float = 0.05, tol: float = 1e-9) -> list[str]:
        """Sampled tangency/boundedness check; returns violation messages."""
        pts = self.domain.grid(h)
        V, active = self.extremes_fn(pts)
        problems = []
        speeds = np.linalg.norm(V, axis=2)
        if (speeds[active] > self.bound * (1 + 1e-9) + tol).any():
            problems.append("velocity exceeds the declared bound")
        if self.domain.kind == "simplex":
            sums = np.abs(V.sum(axis=2))
            if (sums[active] > 1e-8).any():
                problems.append("velocity leaves the simplex plane (sum != 0)")
            at_zero = pts[:, None, :] <= tol  # (N, 1->K broadcast, A)
            bad = active[:, :, None] & at_zero & (V < -1e-8)
            if bad.any():
                problems.append("velocity points out of the simplex at a zero coordinate")
        return problems


def velocities_at(inc: Inclusion, x) -> list[np.ndarray]:
    return inc.velocities_at(x)


@dataclass
class Trajectory:
    """Euler path: states[k] at times[k], selectors[k] chose the step k velocity.

    Selector index -1 denotes the uniform mixture of the active extremes.
    """

    times: np.ndarray
    states: np.ndarray
    selectors: np.ndarray
    dt: float
    policy: str = "first"
    seed: int | None = None

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def max_step_ratio(self, bound: float) -> float:
        """max step length / (bound * dt): the discrete Lipschitz certificate."""
        steps = np.linalg.norm(np.diff(self.states, axis=0), axis=1)
        return float(steps.max(initial=0.0) / (bound * self.dt))


@dataclass
class BatchResult:
    """Vectorized multi-start integration output."""

    times: np.ndarray
    final: np.ndarray                       # (N, A)
    observed: dict                          # name -> (n_steps+1, N)
    states: np.ndarray | None = None        # (n_steps+1, N, A) when recorded
    selectors: np.ndarray | None = None     # (n_steps, N) when recorded
    escaped: np.ndarray | None = None       # (N,) bool
    escape_times: np.ndarray | None = None  # (N,) first escape time (nan if none)
    escape_states: np.ndarray | None = None
    left_domain: np.ndarray | None = None   # (N,) trajectories frozen at the boundary


def _select_velocities(inc: Inclusion, x: np.ndarray, policy: SelectorPolicy,
                       rng: np.random.Generator | None):
    """One selector evaluation on a batch; returns (velocities (N,A), indices (N,))."""
    if inc.ode_fn is not None:
        v = np.asarray(inc.ode_fn(x), dtype=float)
        return v, np.zeros(len(x), dtype=int)
    V, active = inc.extremes_fn(x)
    n, k, _ = V.shape
    if k == 1:
        return V[:, 0, :], np.zeros(n, dtype=int)
    if policy.kind == "mixture":
        w = active.astype(float)
        w /= w.sum(axis=1, keepdims=True)
        return np.einsum("nk,nka->na", w, V), np.full(n, -1, dtype=int)
    if policy.kind == "first":
        idx = np.argmax(active, axis=1)
    elif policy.kind == "random":
        r = rng.random((n, k))
        r[~active] = -1.0
        idx = np.argmax(r, axis=1)
    else:  # adversarial
        g, ok = grad_batch(policy.objective, x)
        scores = np.einsum("nka,na->nk", V, g)
        scores[~active] = -np.inf
        idx = np.argmax(scores, axis=1)
        if not ok.all():  # kink of the objective: fall back to first extreme
            idx = np.where(ok, idx, np.argmax(active, axis=1))
    return V[np.arange(n), idx], idx


def integrate_batch(
    inc: Inclusion,
    x0,
    T: float,
    dt: float,
    policy: SelectorPolicy = FIRST_EXTREME,
    seed: int | None = 0,
    observers: dict | None = None,
    record_states: bool = False,
    escape_test=None,
    stop_when_all_escaped: bool = True,
    on_left_domain: str = "raise",
) -> BatchResult:
    """Integrate many starts at once with a shared selector policy.

    observers maps names to scalar fields evaluated at every stored step.
    escape_test(states)->bool mask records the first escape per start; when
    every start has escaped the run stops early.

    on_left_domain="freeze" pins a trajectory at its last valid state instead
    of raising when its velocity points out of the compact domain; used by
    the invariance verifier, where such a trajectory has already left the
    region under test and only the rest of the batch still matters.
    """
    if on_left_domain not in ("raise", "freeze"):
        raise ValueError("on_left_domain must be 'raise' or 'freeze'")
    X = as_points(x0).copy()
    n, dim = X.shape
    cap = dt_max(inc.bound)
    if dt > cap + 1e-15:
        raise StepTooLarge(f"dt={dt} exceeds dt_max={cap:.4g} for bound M={inc.bound:.4g}")
    if not inc.domain.contains(X).all():
        raise PreconditionFailed("some start points lie outside the domain")
    n_steps = int(round(T / dt))
    rng = np.random.default_rng(seed) if policy.kind == "random" else None
    tol_proj_sq = (1e-7 * inc.bound * dt) ** 2
    speed_cap_sq = (inc.bound + TOL_STEP * (1.0 + inc.bound)) ** 2

    observers = observers or {}
    observed = {name: np.empty((n_steps + 1, n)) for name in observers}
    for name, f in observers.items():
        observed[name][0] = f(X)
    states = np.empty((n_steps + 1, n, dim)) if record_states else None
    selectors = np.empty((n_steps, n), dtype=int) if record_states else None
    if record_states:
        states[0] = X

    escaped = np.zeros(n, dtype=bool)
    escape_times = np.full(n, np.nan)
    escape_states = np.full((n, dim), np.nan)
    frozen = np.zeros(n, dtype=bool)
    if escape_test is not None:
        first = np.asarray(escape_test(X), dtype=bool)
        _record_escapes(first, escaped, escape_times, escape_states, X, 0.0)

    last_step = n_steps
    for k in range(n_steps):
        v, idx = _select_velocities(inc, X, policy, rng)
        speeds_sq = np.einsum("na,na->n", v, v)
        if (speeds_sq > speed_cap_sq).any():
            worst = float(np.sqrt(speeds_sq.max()))
            raise PreconditionFailed(
                f"velocity norm {worst:.4g} exceeds declared bound {inc.bound:.4g}"
            )
        raw = X + dt * v
        X_new = inc.domain.project(raw)
        diff = X_new - raw
        disp_sq = np.einsum("na,na->n", diff, diff)
        bad = disp_sq > tol_proj_sq
        if bad.any():
            if on_left_domain == "raise":
                j = int(np.argmax(disp_sq))
                raise LeftDomain(
                    f"projection moved a state by {np.sqrt(disp_sq[j]):.3e} > "
                    f"tol_proj={np.sqrt(tol_proj_sq):.3e} at {raw[j].tolist()}"
                )
            X_new[bad] = X[bad]
            frozen |= bad
        X = X_new
        t = (k + 1) * dt
        if record_states:
            states[k + 1] = X
            selectors[k] = idx
        for name, f in observers.items():
            observed[name][k + 1] = f(X)
        if escape_test is not None:
            fresh = np.asarray(escape_test(X), dtype=bool) & ~escaped
            _record_escapes(fresh, escaped, escape_times, escape_states, X, t)
            if stop_when_all_escaped and escaped.all():
                last_step = k + 1
                break

    times = np.arange(last_step + 1) * dt
    if record_states:
        states = states[: last_step + 1]
        selectors = selectors[:last_step]
    observed = {name: arr[: last_step + 1] for name, arr in observed.items()}
    return BatchResult(
        times=times,
        final=X,
        observed=observed,
        states=states,
        selectors=selectors,
        escaped=escaped if escape_test is not None else None,
        escape_times=escape_times if escape_test is not None else None,
        escape_states=escape_states if escape_test is not None else None,
        left_domain=frozen if on_left_domain == "freeze" else None,
    )


def _record_escapes(fresh, escaped, times, states, X, t):
    if fresh.any():
        escaped |= fresh
        times[fresh] = t
        states[fresh] = X[fresh]


def integrate(
    inc: Inclusion,
    x0,
    T: float,
    dt: float,
    policy: SelectorPolicy = FIRST_EXTREME,
    seed: int | None = 0,
) -> Trajectory:
    """Single Caratheodory-style Euler path from x0 over horizon T."""
    res = integrate_batch(inc, as_points(x0), T, dt, policy=policy, seed=seed,
                          record_states=True)
    return Trajectory(
        times=res.times,
        states=res.states[:, 0, :],
        selectors=res.selectors[:, 0],
        dt=dt,
        policy=policy.kind,
        seed=seed,
    )
