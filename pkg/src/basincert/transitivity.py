"""Two-stage Lyapunov certification through an intermediate set.

Given nested sets X1 (open) containing X2 containing the closed target, a
pair (W1, W1_tilde) certifying attraction to cl X2 inside X1 and a pair
(W2, W2_tilde) certifying attraction to the target inside X2, the composite
pair

    W = 2*W1 + W2,     W_tilde = 2*W1_tilde + W2_tilde

certifies attraction to the target inside X1 directly, with no forward or
backward invariance demanded of X1 or X2. The decisive extra condition is
W1_tilde + W2_tilde <= 0 on all of X1: outside X2 the inner decay W2_tilde
may be positive, and the outer decay must absorb it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certify import (
    EPS_NUM,
    FAIL,
    PASS,
    Certificate,
    CertifyParams,
    StabilityInstance,
    Verdict,
    _verdict,
    certify,
    check_decrease_bound,
    check_zero_sets,
)
from .dynamics import Inclusion
from .errors import EmptyRegion, PreconditionFailed, TooManyKinks
from .fields import ScalarField, combine
from .geometry import ClosureOf, Region

COMPOSITE_OUTER_WEIGHT = 2.0


@dataclass
class TransitivityInstance:
    """Nested sets, the two candidate pairs, and the dynamic they certify."""

    name: str
    target: Region          # closed
    x1: Region              # open, outer
    x2: Region              # intermediate
    W1: ScalarField
    W2: ScalarField
    W1_tilde: ScalarField
    W2_tilde: ScalarField
    inclusion: Inclusion
    params: CertifyParams = field(default_factory=CertifyParams)

    def validate_nesting(self, h: float) -> None:
        t = self.target.sample(h, closure=True)
        if len(t) == 0:
            raise EmptyRegion("target has no samples")
        if not self.x2.closure_contains(t).all():
            raise PreconditionFailed("target is not contained in the intermediate set")
        x2s = self.x2.sample(h, closure=True)
        if len(x2s) == 0:
            raise EmptyRegion("intermediate set has no samples")
        if not self.x1.closure_contains(x2s).all():
            raise PreconditionFailed("intermediate set is not contained in the outer set")
        if not self.x1.is_open:
            raise PreconditionFailed("the outer set must be open")


def check_transitivity_conditions(inst: TransitivityInstance,
                                  h: float | None = None) -> dict[str, Verdict]:
    """Sampled verdicts for the nested-pair conditions.

    a-i/ii: signs of the outer pair on X1; a-iii: its zero sets equal cl X2;
    a-iv: outer decrease bound over extreme velocities on X1. b-*: same for
    the inner pair with the target as zero set, the sign of the inner decay
    checked only on X2 (outside it the decay may be positive by design).
    c: the summed decay is nonpositive on all of X1.
    """
    h = h if h is not None else inst.params.h
    inst.validate_nesting(h)
    x1_samples = inst.x1.sample(h)
    if len(x1_samples) == 0:
        raise EmptyRegion("outer set has no samples")
    x2_samples = inst.x2.sample(h)
    if len(x2_samples) == 0:
        raise EmptyRegion("intermediate set has no samples")

    out = {}
    W1v = inst.W1(x1_samples)
    W1t = inst.W1_tilde(x1_samples)
    W2v = inst.W2(x1_samples)
    W2t_on_x2 = inst.W2_tilde(x2_samples)
    out["a_i"] = _verdict("a_i", W1v < -EPS_NUM, x1_samples,
                          {"min_W1": float(W1v.min())}, {"W1": W1v})
    out["a_ii"] = _verdict("a_ii", W1t > EPS_NUM, x1_samples,
                           {"max_W1_tilde": float(W1t.max())}, {"W1_tilde": W1t})
    out["a_iii"] = _rename(check_zero_sets(inst.W1, inst.W1_tilde, inst.x1,
                                           ClosureOf(inst.x2), h=h), "a_iii")
    out["a_iv"] = _rename(_decrease(inst.W1, inst.W1_tilde, inst.inclusion,
                                    inst.x1, h), "a_iv")
    out["b_i"] = _verdict("b_i", W2v < -EPS_NUM, x1_samples,
                          {"min_W2": float(W2v.min())}, {"W2": W2v})
    out["b_ii"] = _verdict("b_ii", W2t_on_x2 > EPS_NUM, x2_samples,
                           {"max_W2_tilde_on_X2": float(W2t_on_x2.max())},
                           {"W2_tilde": W2t_on_x2})
    out["b_iii"] = _rename(check_zero_sets(inst.W2, inst.W2_tilde, inst.x2,
                                           inst.target, h=h), "b_iii")
    out["b_iv"] = _rename(_decrease(inst.W2, inst.W2_tilde, inst.inclusion,
                                    inst.x1, h), "b_iv")
    summed = W1t + inst.W2_tilde(x1_samples)
    out["c"] = _verdict("c", summed > EPS_NUM, x1_samples,
                        {"max_summed_decay": float(summed.max())},
                        {"summed_decay": summed})
    return out


def _rename(v: Verdict, name: str) -> Verdict:
    v.name = name
    return v


def _decrease(W, W_tilde, inc, region, h) -> Verdict:
    try:
        return check_decrease_bound(W, W_tilde, inc, region, h=h)
    except TooManyKinks as exc:
        return Verdict("decrease_bound", FAIL, [], {"error": str(exc)})


def compose_transitive(inst: TransitivityInstance,
                       outer_weight: float = COMPOSITE_OUTER_WEIGHT):
    """The composite candidate pair (outer_weight*W1 + W2, same for the decays).

    The composite gradient exists only where both parts are differentiable;
    points where just one part has a gradient stay nondifferentiable rather
    than being patched one-sidedly.
    """
    W = combine([inst.W1, inst.W2], [outer_weight, 1.0],
                name=f"{outer_weight:g}*{inst.W1.name}+{inst.W2.name}")
    W_tilde = combine([inst.W1_tilde, inst.W2_tilde], [outer_weight, 1.0],
                      name=f"{outer_weight:g}*{inst.W1_tilde.name}+{inst.W2_tilde.name}")
    return W, W_tilde


def certify_transitive(inst: TransitivityInstance) -> Certificate:
    """Check the nested-pair conditions, build the composite pair, re-check the
    single-pair hypotheses on (W, W_tilde, X1, target) including the composite
    zero-set scan, and delegate to the full certifier. The resulting basin is
    the sublevel neighborhood constructed inside X1."""
    conditions = check_transitivity_conditions(inst)
    failed = [name for name, v in conditions.items() if not v.passed]
    if failed:
        raise PreconditionFailed(
            f"transitivity conditions failed: {', '.join(failed)}", failed=failed)

    W, W_tilde = compose_transitive(inst)
    composite_zeros = check_zero_sets(W, W_tilde, inst.x1, inst.target,
                                      h=inst.params.h)
    composite_zeros.name = "composite_zero_sets"

    stability = StabilityInstance(
        name=f"{inst.name}_composite",
        target=inst.target,
        xprime=inst.x1,
        W=W,
        W_tilde=W_tilde,
        inclusion=inst.inclusion,
        params=inst.params,
    )
    cert = certify(stability)
    cert.transitivity = {
        "conditions": {k: v.to_dict() for k, v in conditions.items()},
        "composite_zero_sets": composite_zeros.to_dict(),
        "outer_weight": COMPOSITE_OUTER_WEIGHT,
    }
    if not composite_zeros.passed:
        cert.overall = FAIL
        cert.claim = "not certified"
        cert.notes.append("composite zero-set scan failed")
    return cert
