"""Hypothesis checks and trajectory validation behind the stability certificate.

The certificate records, per hypothesis, a pass/fail verdict with witness
points for every violation; a fail anywhere means the instance is never
reported asymptotically stable. Checks are sampled: a pass is empirical
evidence at the stated grid, a fail is a concrete counterexample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _nm_minimize

from .dynamics import Inclusion, SelectorPolicy, Trajectory, integrate_batch
from .errors import EmptyRegion, LeftDomain, PreconditionFailed, TooManyKinks
from .fields import (
    ScalarField,
    distance_field,
    estimate_gradient_lipschitz,
    estimate_lipschitz,
    grad_batch,
    raw_max_slope,
)
from .geometry import ClosureOf, Region
from .invariant import (
    DEFAULT_POLICIES,
    InvariantConstruction,
    InvarianceReport,
    construct_invariant_neighborhood,
    sample_starts,
    verify_forward_invariance,
)

# Numerical slack on sign and zero-set comparisons.
EPS_NUM = 1e-9
# Fraction of nondifferentiable samples tolerated before the decrease-bound
# check refuses to certify.
MAX_KINK_FRACTION = 0.01
# Two-scale slope-growth threshold for the Lipschitz hypothesis.
LIPSCHITZ_RATIO_LIMIT = 1.25

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"
MAX_WITNESSES = 25


@dataclass
class Verdict:
    name: str
    status: str
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "witnesses": self.witnesses,
            "details": self.details,
        }


def _witness(point, **values) -> dict:
    return {"point": np.asarray(point).tolist(),
            **{k: (float(v) if np.isscalar(v) or np.ndim(v) == 0 else np.asarray(v).tolist())
               for k, v in values.items()}}


def _verdict(name, bad_mask, samples, details, value_arrays) -> Verdict:
    """Assemble a verdict from a violation mask over samples."""
    idx = np.flatnonzero(bad_mask)
    witnesses = [
        _witness(samples[i], **{k: arr[i] for k, arr in value_arrays.items()})
        for i in idx[:MAX_WITNESSES]
    ]
    details = dict(details)
    details["n_violations"] = int(len(idx))
    return Verdict(name, PASS if len(idx) == 0 else FAIL, witnesses, details)


# ---------------------------------------------------------------------------
# Hypothesis checks


def check_sign_conditions(W: ScalarField, W_tilde: ScalarField, xprime: Region,
                          h: float = 0.01) -> Verdict:
    """W >= 0 and W_tilde <= 0 at every sample of the neighborhood."""
    samples = xprime.sample(h)
    if len(samples) == 0:
        raise EmptyRegion("neighborhood has no samples")
    Wv = W(samples)
    Wt = W_tilde(samples)
    bad = (Wv < -EPS_NUM) | (Wt > EPS_NUM)
    return _verdict(
        "sign_conditions", bad, samples,
        {"n_samples": len(samples), "min_W": float(Wv.min()), "max_W_tilde": float(Wt.max())},
        {"W": Wv, "W_tilde": Wt},
    )


def _descend_for_zero(f, domain, seed_points, sign: float):
    """Local derivative-free descent of sign*f from each seed; returns minima."""
    results = []
    for s in seed_points:
        res = _nm_minimize(
            lambda x: sign * float(f(domain.project(x[None, :]))[0]),
            np.asarray(s, dtype=float),
            method="Nelder-Mead",
            options={"maxiter": 200 * len(s), "xatol": 1e-10, "fatol": 1e-14},
        )
        results.append((domain.project(res.x[None, :])[0], sign * float(res.fun)))
    return results


def check_zero_sets(W: ScalarField, W_tilde: ScalarField, xprime: Region,
                    target: Region, h: float = 0.01, descent_seeds: int = 5) -> Verdict:
    """Zero sets of W (on cl X') and W_tilde (on X') must coincide with the target.

    On target samples both fields must vanish; off a covering-radius band
    around the target, W must be strictly positive and W_tilde strictly
    negative. A grid scan proposes suspicious points and a local descent
    confirms zeros the grid straddles.
    """
    cl = ClosureOf(xprime)
    samples = cl.sample(h)
    if len(samples) == 0:
        raise EmptyRegion("closure of the neighborhood has no samples")
    domain = xprime.domain
    d_star = distance_field(target, h=h)
    d_vals = d_star(samples)
    band = domain.covering_radius(h)
    on_target = target.closure_contains(samples)
    Wv, Wt = W(samples), W_tilde(samples)

    bad_target = on_target & ((np.abs(Wv) > EPS_NUM) | (np.abs(Wt) > EPS_NUM))
    off = ~on_target & (d_vals > band)
    in_open = xprime.contains(samples)
    bad_W = off & (Wv <= EPS_NUM)
    bad_Wt = off & in_open & (Wt >= -EPS_NUM)
    bad = bad_target | bad_W | bad_Wt

    details = {
        "n_samples": len(samples),
        "band": band,
        "n_target_samples": int(on_target.sum()),
    }
    verdict = _verdict("zero_sets", bad, samples, details,
                       {"W": Wv, "W_tilde": Wt, "dist_to_target": d_vals})

    # Descent confirmation: hunt zeros of W (and near-zero maxima of W_tilde)
    # that sit between grid nodes.
    if verdict.passed and off.any() and descent_seeds > 0:
        extra = []
        order_W = np.flatnonzero(off)[np.argsort(Wv[off])][:descent_seeds]
        for x_min, val in _descend_for_zero(W, domain, samples[order_W], +1.0):
            if (val <= EPS_NUM and cl.closure_contains(x_min[None])[0]
                    and d_star(x_min[None])[0] > band):
                extra.append(_witness(x_min, W=val, dist_to_target=d_star(x_min[None])[0]))
        off_open = off & in_open
        if off_open.any():
            order_Wt = np.flatnonzero(off_open)[np.argsort(-Wt[off_open])][:descent_seeds]
            for x_max, val in _descend_for_zero(W_tilde, domain, samples[order_Wt], -1.0):
                if (val >= -EPS_NUM and xprime.contains(x_max[None])[0]
                        and d_star(x_max[None])[0] > band):
                    extra.append(_witness(x_max, W_tilde=val,
                                          dist_to_target=d_star(x_max[None])[0]))
        if extra:
            verdict = Verdict("zero_sets", FAIL, extra[:MAX_WITNESSES],
                              {**details, "n_violations": len(extra),
                               "found_by": "local descent"})
    return verdict


def check_lipschitz(W: ScalarField, xprime: Region, h: float = 0.01) -> Verdict:
    """Sampled Lipschitz estimate plus a two-scale growth test.

    A genuinely Lipschitz field keeps its max difference quotient nearly flat
    when the probe step halves; a cusp grows it by ~sqrt(2) or more.
    """
    cl = ClosureOf(xprime)
    slope_h = raw_max_slope(W, cl, h=h, n_random=0, step=h)
    slope_half = raw_max_slope(W, cl, h=h, n_random=0, step=h / 2)
    estimate = estimate_lipschitz(W, cl, h=h)
    ratio = slope_half / max(slope_h, 1e-30)
    status = PASS if ratio <= LIPSCHITZ_RATIO_LIMIT else FAIL
    details = {"estimate": estimate, "slope_at_h": slope_h,
               "slope_at_h_half": slope_half, "growth_ratio": ratio}
    witnesses = [] if status == PASS else [{"growth_ratio": ratio}]
    return Verdict("lipschitz_W", status, witnesses, details)


def check_decrease_bound(W: ScalarField, W_tilde: ScalarField, inc: Inclusion,
                         xprime: Region, h: float = 0.01) -> Verdict:
    """<grad W(x), v> <= W_tilde(x) for every extreme velocity at every sample
    where W is differentiable. Extremes suffice: the bound is linear in v, so
    it extends to the whole convex hull. Kink points are skipped per point."""
    samples = xprime.sample(h)
    if len(samples) == 0:
        raise EmptyRegion("neighborhood has no samples")
    grads, ok = grad_batch(W, samples)
    kink_fraction = 1.0 - float(ok.mean())
    if kink_fraction > MAX_KINK_FRACTION:
        raise TooManyKinks(
            f"{100 * kink_fraction:.2f}% of samples are nondifferentiable "
            f"(limit {100 * MAX_KINK_FRACTION:.0f}%)"
        )
    X, G = samples[ok], grads[ok]
    V, active = inc.extremes_fn(X)
    lhs = np.einsum("na,nka->nk", G, V)
    rhs = W_tilde(X)[:, None] + EPS_NUM
    viol = active & (lhs > rhs)
    bad = viol.any(axis=1)
    gap = np.where(active, lhs - rhs, -np.inf).max(axis=1)
    details = {
        "n_samples": len(samples),
        "n_kinks_skipped": int((~ok).sum()),
        "max_gap": float(gap.max(initial=-np.inf)),
    }
    return _verdict("decrease_bound", bad, X, details,
                    {"gap": gap, "W_tilde": rhs[:, 0] - EPS_NUM})


# ---------------------------------------------------------------------------
# Trajectory validators


def step_tolerance_constant(W: ScalarField, W_tilde: ScalarField, inc: Inclusion,
                            region: Region, h: float = 0.01) -> float:
    """Constant C such that one Euler step can exceed the decrease bound by at
    most C*dt^2: half the gradient-Lipschitz times the squared speed bound,
    plus the decay field's own variation, doubled for safety."""
    L_grad = estimate_gradient_lipschitz(W, region, h=h)
    L_wt = estimate_lipschitz(W_tilde, region, h=h, n_random=512)
    M = inc.bound
    return 2.0 * (0.5 * L_grad * M * M + L_wt * M)


def _monotone_scan(W_series: np.ndarray, Wt_series: np.ndarray, dt: float,
                   c_tol: float):
    """Vectorized per-step and cumulative decrease checks on (n+1, N) series."""
    tol_step = c_tol * dt * dt
    dW = np.diff(W_series, axis=0)
    step_ok = dW <= dt * Wt_series[:-1] + tol_step
    horizon = dt * (W_series.shape[0] - 1)
    cum_rhs = W_series[0] + dt * Wt_series[:-1].sum(axis=0) + horizon * tol_step
    cum_ok = W_series[-1] <= cum_rhs
    return step_ok, cum_ok, tol_step


def verify_monotone_decrease(traj: Trajectory, W: ScalarField, W_tilde: ScalarField,
                             c_tol: float = 1.0) -> Verdict:
    """Per-step and cumulative decrease along one trajectory.

    Each step must satisfy W(x_{t+dt}) - W(x_t) <= dt*W_tilde(x_t) + C*dt^2
    (Euler's local truncation is quadratic in dt), and the summed version must
    hold over the whole horizon.
    """
    Wv = W(traj.states)[:, None]
    Wt = W_tilde(traj.states)[:, None]
    step_ok, cum_ok, tol_step = _monotone_scan(Wv, Wt, traj.dt, c_tol)
    details = {
        "n_steps": len(traj.times) - 1,
        "tol_step": tol_step,
        "cumulative_ok": bool(cum_ok[0]),
        "policy": traj.policy,
    }
    if step_ok.all() and cum_ok.all():
        return Verdict("monotone_decrease", PASS, [], details)
    witnesses = []
    if not step_ok.all():
        k = int(np.argmin(step_ok[:, 0]))
        witnesses.append(_witness(
            traj.states[k], t=traj.times[k], W=Wv[k, 0], W_next=Wv[k + 1, 0],
            W_tilde=Wt[k, 0], step_index=k,
        ))
        details["first_violating_step"] = k
    if not cum_ok.all():
        witnesses.append(_witness(traj.states[-1], t=traj.times[-1],
                                  W_final=Wv[-1, 0], W_start=Wv[0, 0]))
    return Verdict("monotone_decrease", FAIL, witnesses, details)


def verify_convergence(trajs: list[Trajectory], target: Region,
                       tol_conv: float = 1e-3, T: float | None = None,
                       h: float = 0.01) -> Verdict:
    """Terminal distance below tol plus no excursions after the first crossing.

    Each trajectory must end within tol_conv of the target, must cross below
    tol_conv at some time, and must never exceed 2*tol_conv afterwards.
    """
    witnesses = []
    worst_final = 0.0
    for i, traj in enumerate(trajs):
        d = np.asarray(distance_to_set_series(traj.states, target, h))
        worst_final = max(worst_final, float(d[-1]))
        if T is not None and traj.times[-1] < T - 1e-9:
            witnesses.append(_witness(traj.states[-1], index=i, t=traj.times[-1],
                                      reason_code=0))
            continue
        below = d <= tol_conv
        if d[-1] > tol_conv or not below.any():
            witnesses.append(_witness(traj.states[-1], index=i, final_distance=d[-1]))
            continue
        first = int(np.argmax(below))
        if (d[first:] > 2 * tol_conv).any():
            k = first + int(np.argmax(d[first:] > 2 * tol_conv))
            witnesses.append(_witness(traj.states[k], index=i, t=traj.times[k],
                                      excursion=float(d[k])))
    details = {"n_trajectories": len(trajs), "tol_conv": tol_conv,
               "worst_final_distance": worst_final}
    return Verdict("convergence", PASS if not witnesses else FAIL,
                   witnesses[:MAX_WITNESSES], details)


def distance_to_set_series(states: np.ndarray, target: Region, h: float = 0.01):
    from .geometry import distance_to_set

    return distance_to_set(states, target, h=h)


# ---------------------------------------------------------------------------
# Full certification


@dataclass
class CertifyParams:
    h: float = 0.01
    dt: float = 1e-3
    T_conv: float | None = None      # None: scaled from the sampled decay rate
    T_inv: float = 20.0
    n_starts_inv: int = 100
    n_starts_traj: int = 16
    tol_conv: float = 1e-3
    seed: int = 0
    policies: tuple = DEFAULT_POLICIES
    conservative: bool = False

    def to_dict(self) -> dict:
        return {
            "h": self.h, "dt": self.dt, "T_conv": self.T_conv, "T_inv": self.T_inv,
            "n_starts_inv": self.n_starts_inv, "n_starts_traj": self.n_starts_traj,
            "tol_conv": self.tol_conv, "seed": self.seed,
            "policies": list(self.policies), "conservative": self.conservative,
        }


@dataclass
class StabilityInstance:
    """A complete certification problem: domain, sets, candidate pair, dynamic."""

    name: str
    target: Region
    xprime: Region
    W: ScalarField
    W_tilde: ScalarField
    inclusion: Inclusion
    params: CertifyParams = field(default_factory=CertifyParams)

    @property
    def domain(self):
        return self.xprime.domain


@dataclass
class Certificate:
    instance: str
    hypotheses: dict
    construction: InvariantConstruction | None
    invariance: InvarianceReport | None
    decrease: Verdict | None
    convergence: Verdict | None
    overall: str
    claim: str
    params: CertifyParams
    notes: list = field(default_factory=list)
    transitivity: dict | None = None
    schema_version: int = 1

    @property
    def passed(self) -> bool:
        return self.overall == PASS

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "instance": self.instance,
            "overall": self.overall,
            "claim": self.claim,
            "hypotheses": {k: v.to_dict() for k, v in self.hypotheses.items()},
            "construction": self.construction.to_dict() if self.construction else None,
            "invariance": self.invariance.to_dict() if self.invariance else None,
            "trajectories": {
                "monotone_decrease": self.decrease.to_dict() if self.decrease else None,
                "convergence": self.convergence.to_dict() if self.convergence else None,
            },
            "transitivity": self.transitivity,
            "params": self.params.to_dict(),
            "notes": self.notes,
        }


def rate_scaled_horizon(W: ScalarField, W_tilde: ScalarField, xprime: Region,
                        target: Region, h: float = 0.01,
                        t_min: float = 10.0, t_max: float = 500.0) -> float:
    """Horizon 20/rate, where rate is the slowest sampled relative decay
    -W_tilde/W off the covering band around the target."""
    cl = ClosureOf(xprime)
    samples = cl.sample(h)
    d = distance_field(target, h=h)(samples)
    off = d > xprime.domain.covering_radius(h)
    if not off.any():
        return t_min
    Wv = np.maximum(W(samples[off]), 1e-12)
    Wt = W_tilde(samples[off])
    rate = float(np.min(-Wt / Wv))
    if rate <= 1e-12:
        # No decay guarantee anywhere: the zero-set check is already failing,
        # so a long horizon buys nothing.
        return t_min
    return float(np.clip(20.0 / rate, t_min, t_max))


def certify(instance: StabilityInstance) -> Certificate:
    """Run every hypothesis check, build the invariant neighborhood, and
    validate invariance, decrease, and convergence along trajectories.

    The verdict claims asymptotic stability only when everything passes;
    failures aggregate into the certificate, never silently."""
    p = instance.params
    W, Wt, xp, target, inc = (instance.W, instance.W_tilde, instance.xprime,
                              instance.target, instance.inclusion)
    notes = []
    hypotheses = {}
    hypotheses["sign_conditions"] = check_sign_conditions(W, Wt, xp, h=p.h)
    hypotheses["zero_sets"] = check_zero_sets(W, Wt, xp, target, h=p.h)
    hypotheses["lipschitz_W"] = check_lipschitz(W, xp, h=p.h)
    try:
        hypotheses["decrease_bound"] = check_decrease_bound(W, Wt, inc, xp, h=p.h)
    except TooManyKinks as exc:
        hypotheses["decrease_bound"] = Verdict("decrease_bound", FAIL, [],
                                               {"error": str(exc)})

    construction = None
    invariance = None
    decrease_verdict = None
    convergence_verdict = None
    try:
        construction = construct_invariant_neighborhood(
            W, xp, target, h=p.h, conservative=p.conservative)
    except Exception as exc:  # noqa: BLE001 - recorded, never silent
        notes.append(f"construction failed: {type(exc).__name__}: {exc}")

    if construction is not None:
        invariance = verify_forward_invariance(
            inc, construction, n_starts=p.n_starts_inv, T=p.T_inv, dt=p.dt,
            policies=p.policies, h=p.h, seed=p.seed)
        decrease_verdict, convergence_verdict = _trajectory_suite(
            instance, construction, notes)

    hyp_ok = all(v.passed for v in hypotheses.values())
    traj_ok = (
        construction is not None
        and invariance is not None and invariance.invariant
        and decrease_verdict is not None and decrease_verdict.passed
        and convergence_verdict is not None and convergence_verdict.passed
    )
    overall = PASS if (hyp_ok and traj_ok) else FAIL
    claim = (
        "asymptotically stable (empirical); basin contains the constructed "
        "sublevel neighborhood" if overall == PASS else "not certified"
    )
    return Certificate(
        instance=instance.name,
        hypotheses=hypotheses,
        construction=construction,
        invariance=invariance,
        decrease=decrease_verdict,
        convergence=convergence_verdict,
        overall=overall,
        claim=claim,
        params=p,
        notes=notes,
    )


def _trajectory_suite(instance: StabilityInstance, cons: InvariantConstruction,
                      notes: list):
    """Batched decrease + convergence validation from starts inside X''."""
    p = instance.params
    W, Wt, target, inc = instance.W, instance.W_tilde, instance.target, instance.inclusion
    rng = np.random.default_rng(p.seed + 1)
    try:
        starts = sample_starts(cons.core, p.n_starts_traj, p.h, rng)
    except EmptyRegion as exc:
        notes.append(f"trajectory suite skipped: {exc}")
        return None, None
    T = p.T_conv if p.T_conv is not None else rate_scaled_horizon(
        W, Wt, instance.xprime, target, h=p.h)
    c_tol = step_tolerance_constant(W, Wt, inc, cons.core, h=p.h)
    d_star = distance_field(target, h=p.h)
    observers = {"W": W, "W_tilde": Wt, "dist": d_star}

    # All selector policies produce bit-identical paths when the inclusion is
    # single-valued, so one pass covers them.
    suite_policies = p.policies if not inc.is_singleton else ("first",)
    if inc.is_singleton and len(p.policies) > 1:
        notes.append("single-valued inclusion: trajectory suite ran one policy, "
                     "selector policies coincide")

    step_fail, cum_fail, conv_fail = [], [], []
    worst_final = 0.0
    for pol in suite_policies:
        policy = (SelectorPolicy("adversarial", d_star) if pol == "adversarial"
                  else SelectorPolicy(pol))
        try:
            res = integrate_batch(inc, starts, T, p.dt, policy=policy, seed=p.seed,
                                  observers=observers)
        except (LeftDomain, PreconditionFailed) as exc:
            # The dynamic pushed a trajectory out of the compact domain (or
            # past its declared speed bound): decisive evidence against the
            # instance, recorded rather than raised.
            notes.append(f"trajectory suite aborted under policy "
                         f"{policy.kind!r}: {type(exc).__name__}: {exc}")
            step_fail.append({"policy": policy.kind, "error": str(exc)})
            conv_fail.append({"policy": policy.kind, "error": str(exc)})
            continue
        step_ok, cum_ok, tol_step = _monotone_scan(
            res.observed["W"], res.observed["W_tilde"], p.dt, c_tol)
        for j in np.flatnonzero(~step_ok.all(axis=0)):
            k = int(np.argmin(step_ok[:, j]))
            w = _witness(starts[j], step_index=k, t=float(k * p.dt))
            w["policy"] = policy.kind
            step_fail.append(w)
        for j in np.flatnonzero(~cum_ok):
            cum_fail.append({"start": starts[j].tolist(), "policy": policy.kind})
        d_series = res.observed["dist"]
        worst_final = max(worst_final, float(d_series[-1].max()))
        below = d_series <= p.tol_conv
        for j in range(d_series.shape[1]):
            col = d_series[:, j]
            if col[-1] > p.tol_conv or not below[:, j].any():
                conv_fail.append({"start": starts[j].tolist(), "policy": policy.kind,
                                  "final_distance": float(col[-1])})
                continue
            first = int(np.argmax(below[:, j]))
            if (col[first:] > 2 * p.tol_conv).any():
                conv_fail.append({"start": starts[j].tolist(), "policy": policy.kind,
                                  "excursion": float(col[first:].max())})

    decrease = Verdict(
        "monotone_decrease", PASS if not (step_fail or cum_fail) else FAIL,
        (step_fail + cum_fail)[:MAX_WITNESSES],
        {"n_starts": len(starts), "T": T, "c_tol": c_tol,
         "tol_step": c_tol * p.dt * p.dt, "policies": list(suite_policies)},
    )
    convergence = Verdict(
        "convergence", PASS if not conv_fail else FAIL, conv_fail[:MAX_WITNESSES],
        {"n_starts": len(starts), "T": T, "tol_conv": p.tol_conv,
         "worst_final_distance": worst_final},
    )
    return decrease, convergence
