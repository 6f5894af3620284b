"""Built-in certification instances: a small well-understood corpus.

Covers linear contractions (with the thin-rectangle neighborhood that is a
monotone-decrease set yet not forward invariant), saturating nonlinear pulls
with quadratic candidates, self-defeating games under gains candidates, the
nested-quadratic transitivity exemplar, and planted-defect variants that the
falsification tests rely on. Every closed-form quantity quoted in the tests
traces back to these definitions.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .certify import CertifyParams, StabilityInstance
from .dynamics import Inclusion
from .fields import ScalarField, constant_field, radial_hinge, sqnorm
from .games import DynamicSpec, builtin_game, find_nash_brute, gains_lyapunov_candidates, make_inclusion
from .geometry import BallSet, BoxRegion, CompactDomain, PointSet
from .transitivity import TransitivityInstance

BOX2 = [[-1.0, 1.0], [-1.0, 1.0]]

ROTATION_CONTRACTION = np.array([[-0.1, -1.0], [1.0, -0.1]])


def linear_inclusion(domain: CompactDomain, A, name: str) -> Inclusion:
    A = np.asarray(A, dtype=float)
    return Inclusion.from_ode(domain, lambda pts: pts @ A.T, name=name)


def _named_vector_field(name: str):
    if name == "saturating_pull":
        # -x * (1 - |x|^2 / 4): weakening pull, still dominated by -1.5|x|^2.
        return lambda pts: -pts * (1.0 - (pts ** 2).sum(axis=1, keepdims=True) / 4.0)
    if name == "damped_pull":
        # -x / (1 + |x|^2): saturating pull dominated by -|x|^2 on the unit ball.
        return lambda pts: -pts / (1.0 + (pts ** 2).sum(axis=1, keepdims=True))
    raise KeyError(f"no builtin vector field named {name!r}")


def make_instance(name: str, **param_overrides) -> StabilityInstance:
    """Instantiate a builtin certification instance by name."""
    if name not in BUILTIN_INSTANCES:
        raise KeyError(f"no builtin instance named {name!r}; "
                       f"known: {sorted(BUILTIN_INSTANCES)}")
    inst = BUILTIN_INSTANCES[name]()
    if param_overrides:
        inst.params = replace(inst.params, **param_overrides)
    return inst


def _linear2d() -> StabilityInstance:
    domain = CompactDomain.box(BOX2)
    return StabilityInstance(
        name="linear2d",
        target=PointSet(domain, [[0.0, 0.0]]),
        xprime=BallSet(domain, [[0.0, 0.0]], 1.0, open_flag=True),
        W=sqnorm(dim=2, name="W"),
        W_tilde=replace(-2.0 * sqnorm(dim=2), smoothness="lsc", name="W_tilde"),
        inclusion=linear_inclusion(domain, -np.eye(2), "pull_to_origin"),
    )


def _linear2d_aniso() -> StabilityInstance:
    domain = CompactDomain.box(BOX2)
    return StabilityInstance(
        name="linear2d_aniso",
        target=PointSet(domain, [[0.0, 0.0]]),
        xprime=BallSet(domain, [[0.0, 0.0]], 1.0, open_flag=True),
        W=sqnorm(dim=2, name="W"),
        W_tilde=replace(-2.0 * sqnorm(dim=2), smoothness="lsc", name="W_tilde"),
        inclusion=linear_inclusion(domain, np.diag([-1.0, -2.0]), "aniso_pull"),
    )


def _rotation_contraction() -> StabilityInstance:
    domain = CompactDomain.box(BOX2)
    return StabilityInstance(
        name="rotation_contraction",
        target=PointSet(domain, [[0.0, 0.0]]),
        xprime=BoxRegion(domain, [[-1.0, 1.0], [-0.1, 0.1]], open_flag=True),
        W=sqnorm(dim=2, name="W"),
        W_tilde=replace(-0.2 * sqnorm(dim=2), smoothness="lsc", name="W_tilde"),
        inclusion=linear_inclusion(domain, ROTATION_CONTRACTION, "rotation_contraction"),
    )


def _saturating_pull() -> StabilityInstance:
    domain = CompactDomain.box(BOX2)
    return StabilityInstance(
        name="saturating_pull",
        target=PointSet(domain, [[0.0, 0.0]]),
        xprime=BallSet(domain, [[0.0, 0.0]], 1.0, open_flag=True),
        W=sqnorm(dim=2, name="W"),
        W_tilde=replace(-1.5 * sqnorm(dim=2), smoothness="lsc", name="W_tilde"),
        inclusion=Inclusion.from_ode(domain, _named_vector_field("saturating_pull"),
                                     name="saturating_pull"),
    )


def _damped_pull() -> StabilityInstance:
    domain = CompactDomain.box(BOX2)
    return StabilityInstance(
        name="damped_pull",
        target=PointSet(domain, [[0.0, 0.0]]),
        xprime=BallSet(domain, [[0.0, 0.0]], 1.0, open_flag=True),
        W=sqnorm(dim=2, name="W"),
        W_tilde=replace(-1.0 * sqnorm(dim=2), smoothness="lsc", name="W_tilde"),
        inclusion=Inclusion.from_ode(domain, _named_vector_field("damped_pull"),
                                     name="damped_pull"),
    )


def _game_instance(family: str) -> StabilityInstance:
    game = builtin_game("neg_identity")
    spec = DynamicSpec(family)
    inc = make_inclusion(game, spec)
    W, W_tilde = gains_lyapunov_candidates(game, spec)
    equilibrium, _ = find_nash_brute(game, h=0.01)
    domain = game.domain
    return StabilityInstance(
        name=f"{family}_negdef",
        target=PointSet(domain, equilibrium[None, :]),
        xprime=BallSet(domain, equilibrium[None, :], 0.2, open_flag=True),
        W=W,
        W_tilde=W_tilde,
        inclusion=inc,
        params=CertifyParams(T_conv=200.0),
    )


# --- planted defects -------------------------------------------------------


def _defect_sign_flipped() -> StabilityInstance:
    inst = _linear2d()
    inst.name = "defect_sign_flipped"
    inst.inclusion = linear_inclusion(inst.domain, np.eye(2), "push_from_origin")
    return inst


def _defect_spurious_zero() -> StabilityInstance:
    inst = _linear2d()
    inst.name = "defect_spurious_zero"
    r2 = sqnorm(dim=2)

    def fn(pts):
        return (r2.fn(pts) - 0.25) ** 2

    def grad_fn(pts):
        return (2.0 * (r2.fn(pts) - 0.25))[:, None] * r2.grad_fn(pts)

    inst.W = ScalarField(fn, grad_fn, "c1", None, "W_spurious_ring")
    return inst


def _defect_flat_decay() -> StabilityInstance:
    inst = _linear2d()
    inst.name = "defect_flat_decay"
    inst.W_tilde = replace(constant_field(0.0), smoothness="lsc", name="W_tilde_zero")
    return inst


BUILTIN_INSTANCES = {
    "linear2d": _linear2d,
    "linear2d_aniso": _linear2d_aniso,
    "rotation_contraction": _rotation_contraction,
    "saturating_pull": _saturating_pull,
    "damped_pull": _damped_pull,
    "smith_negdef": lambda: _game_instance("smith"),
    "bnn_negdef": lambda: _game_instance("bnn"),
    "defect_sign_flipped": _defect_sign_flipped,
    "defect_spurious_zero": _defect_spurious_zero,
    "defect_flat_decay": _defect_flat_decay,
}

# The theorem-level soundness corpus: instances expected to certify cleanly.
SOUND_CORPUS = (
    "linear2d",
    "rotation_contraction",
    "saturating_pull",
    "damped_pull",
    "smith_negdef",
    "bnn_negdef",
)


# --- transitivity exemplars -------------------------------------------------

NESTED_R_INNER = 0.3
NESTED_R_OUTER = 0.9
NESTED_BETA = 3.0


def make_transitivity_instance(name: str = "nested_quadratic") -> TransitivityInstance:
    """Nested-quadratic exemplar on the plane, pulled to the origin.

    Inner pair: W2 = r^2 with decay -2 r^2 + beta (r - 0.3)_+ that turns
    positive outside the intermediate ball (beta = 3 exceeds the minimum 2.4
    needed for that). Outer pair: W1 = (r - 0.3)_+^2 with its exact decay
    -2 r (r - 0.3)_+ under the pull, strong enough that the summed decay
    stays <= -0.09 on the outer ball. The defect variant adds a radial bump
    peaking at r = 0.6 that drives the summed decay to exactly +0.1 there.
    """
    if name not in ("nested_quadratic", "nested_quadratic_defect_c"):
        raise KeyError(f"no builtin transitivity instance named {name!r}")
    domain = CompactDomain.box(BOX2)
    target = PointSet(domain, [[0.0, 0.0]])
    x1 = BallSet(domain, [[0.0, 0.0]], NESTED_R_OUTER, open_flag=True)
    x2 = BallSet(domain, [[0.0, 0.0]], NESTED_R_INNER, open_flag=True)
    W1 = radial_hinge(0.0, 0.0, 1.0, NESTED_R_INNER, dim=2, name="W1_hinge_sq")
    W1_tilde = replace(
        radial_hinge(0.0, -2.0, 0.0, NESTED_R_INNER, dim=2, name="W1_tilde"),
        smoothness="lsc",
    )
    W2 = sqnorm(dim=2, name="W2")
    W2_tilde = replace(
        radial_hinge(-2.0, 0.0, 0.0, NESTED_R_INNER, dim=2, coef_h1=NESTED_BETA,
                     name="W2_tilde"),
        smoothness="lsc",
    )
    if name == "nested_quadratic_defect_c":
        base = W2_tilde

        def bumped(pts):
            r = np.linalg.norm(pts, axis=-1)
            return base.fn(pts) + 0.28 * np.maximum(0.0, 1.0 - np.abs(r - 0.6) / 0.05)

        W2_tilde = ScalarField(bumped, None, "lsc", None, "W2_tilde_bumped")
    return TransitivityInstance(
        name=name,
        target=target,
        x1=x1,
        x2=x2,
        W1=W1,
        W2=W2,
        W1_tilde=W1_tilde,
        W2_tilde=W2_tilde,
        inclusion=linear_inclusion(domain, -np.eye(2), "pull_to_origin"),
    )
