"""Sampling-based certification of Lyapunov stability and forward-invariant basins.

The toolkit takes a differential inclusion on a compact domain together with
a Lyapunov candidate W and a decay-rate candidate W_tilde, checks the
monotone-decrease hypotheses by dense sampling, constructs an explicitly
forward-invariant sublevel neighborhood of the target set, and validates
invariance, decrease, and convergence along integrated trajectories.
Evolutionary game dynamics ship as first-class instances.
"""

from .certify import (
    Certificate,
    CertifyParams,
    StabilityInstance,
    Verdict,
    certify,
    check_decrease_bound,
    check_lipschitz,
    check_sign_conditions,
    check_zero_sets,
    rate_scaled_horizon,
    step_tolerance_constant,
    verify_convergence,
    verify_monotone_decrease,
)
from .dynamics import (
    FIRST_EXTREME,
    RANDOM_EXTREME,
    UNIFORM_MIXTURE,
    Inclusion,
    SelectorPolicy,
    Trajectory,
    adversarial_selector,
    integrate,
    integrate_batch,
    velocities_at,
)
from .errors import (
    BasincertError,
    ConfigError,
    EmptyAnnulus,
    EmptyRegion,
    EmptyTarget,
    LeftDomain,
    NondifferentiableAt,
    NonpositiveLevel,
    NonpositiveResult,
    NotStrictSubset,
    PreconditionFailed,
    SchemaMismatch,
    StepTooLarge,
    TooManyKinks,
    UnknownFamily,
    UnsupportedFamily,
)
from .fields import (
    ScalarField,
    combine,
    constant_field,
    directional_decrease,
    distance_field,
    estimate_lipschitz,
    grad,
    gradient_agreement,
    linear_field,
    norm1,
    norm2,
    quadratic_form,
    radial_hinge,
    sqnorm,
)
from .games import (
    DynamicSpec,
    PopulationGame,
    builtin_game,
    check_self_defeating,
    find_nash_brute,
    gains_lyapunov_candidates,
    make_inclusion,
    matrix_game,
    regret,
)
from .geometry import (
    BallSet,
    BoxRegion,
    ClosureOf,
    CompactDomain,
    Complement,
    Intersection,
    PointSet,
    PredicateRegion,
    Region,
    RegionMinimum,
    SublevelSet,
    SuperlevelSet,
    WholeDomain,
    distance_error_bound,
    distance_to_set,
    escape_distance,
    min_over_region,
)
from .instances import BUILTIN_INSTANCES, SOUND_CORPUS, make_instance, make_transitivity_instance
from .invariant import (
    EscapeWitness,
    InvarianceReport,
    InvariantConstruction,
    construct_invariant_neighborhood,
    verify_forward_invariance,
)
from .transitivity import (
    TransitivityInstance,
    certify_transitive,
    check_transitivity_conditions,
    compose_transitive,
)

__version__ = "0.1.0"
