import numpy as np
import pytest

from basincert import (
    CompactDomain,
    DynamicSpec,
    UnknownFamily,
    UnsupportedFamily,
    WholeDomain,
    builtin_game,
    check_self_defeating,
    find_nash_brute,
    gains_lyapunov_candidates,
    integrate,
    make_inclusion,
    matrix_game,
    regret,
)
from basincert.games import RPS_MATRIX, tangent_directions


@pytest.fixture(scope="module")
def simplex3():
    return CompactDomain.simplex(3)


@pytest.fixture(scope="module")
def rps():
    return builtin_game("rps")


@pytest.fixture(scope="module")
def negdef():
    return builtin_game("neg_identity")


class TestSelfDefeating:
    def test_rps_neutral(self, rps, simplex3):
        # antisymmetric payoffs: the tangent quadratic form vanishes identically
        v = check_self_defeating(rps, WholeDomain(simplex3), h=0.02,
                                 n_random_dirs=200)
        assert v.passed
        assert abs(v.details["worst_value"]) <= 1e-12

    def test_negative_definite_passes(self, negdef, simplex3):
        v = check_self_defeating(negdef, WholeDomain(simplex3), h=0.02)
        assert v.passed
        assert v.details["worst_value"] < -0.5  # -|z|^2 over unit tangents

    def test_coordination_fails(self, simplex3):
        v = check_self_defeating(builtin_game("coordination"),
                                 WholeDomain(simplex3), h=0.02)
        assert not v.passed
        assert v.details["worst_value"] > 0.5
        assert len(v.witnesses) == 1

    def test_tangent_directions_sum_zero(self, rng):
        Z = tangent_directions(4, 32, rng)
        np.testing.assert_allclose(Z.sum(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(Z, axis=1), 1.0, atol=1e-12)


class TestMakeInclusion:
    def test_smith_zero_at_equilibrium(self, negdef):
        inc = make_inclusion(negdef, DynamicSpec("smith"))
        eq, _ = find_nash_brute(negdef, h=0.01)
        vels = inc.velocities_at(eq)
        assert len(vels) == 1
        np.testing.assert_allclose(vels[0], 0.0, atol=1e-9)

    def test_br_three_extremes_at_uniform_rps(self, rps):
        inc = make_inclusion(rps, DynamicSpec("br"))
        vels = inc.velocities_at(np.ones(3) / 3)
        assert len(vels) == 3
        for k, v in enumerate(vels):
            np.testing.assert_allclose(v, np.eye(3)[k] - np.ones(3) / 3, atol=1e-12)

    def test_replicator_rest_at_vertex(self, rps):
        inc = make_inclusion(rps, DynamicSpec("replicator"))
        vels = inc.velocities_at(np.eye(3)[1])
        np.testing.assert_allclose(vels[0], 0.0, atol=1e-15)

    def test_unknown_family(self, rps):
        with pytest.raises(UnknownFamily):
            DynamicSpec("smoothed_fictitious_play")

    def test_tempered_br_damps_by_gain(self, negdef):
        inc = make_inclusion(negdef, DynamicSpec("tempered_br"))
        x = np.array([0.6, 0.2, 0.2])
        F = negdef.payoff(x)[0]
        gain = F.max() - x @ F
        plain = make_inclusion(negdef, DynamicSpec("br")).velocities_at(x)
        damped = inc.velocities_at(x)
        np.testing.assert_allclose(damped[0], (1 - np.exp(-gain)) * plain[0],
                                   atol=1e-12)


class TestGainsCandidates:
    def test_bnn_zero_at_equilibrium(self, negdef):
        W, _ = gains_lyapunov_candidates(negdef, DynamicSpec("bnn"))
        eq, _ = find_nash_brute(negdef, h=0.01)
        assert W(eq) == pytest.approx(0.0, abs=1e-12)

    def test_smith_positive_off_equilibrium(self, negdef):
        W, _ = gains_lyapunov_candidates(negdef, DynamicSpec("smith"))
        assert W(np.array([0.6, 0.2, 0.2])) > 0

    def test_smith_value_at_rps_vertex(self, rps):
        # hand evaluation: F(e1) = (0, 1, -1); only switches away from
        # strategy 1 carry mass: ([1]+^2 + [-1]+^2)/2 = 0.5
        W, _ = gains_lyapunov_candidates(rps, DynamicSpec("smith"))
        assert W(np.eye(3)[0]) == pytest.approx(0.5)

    def test_replicator_unsupported(self, rps):
        with pytest.raises(UnsupportedFamily):
            gains_lyapunov_candidates(rps, DynamicSpec("replicator"))

    def test_decay_fields_are_lsc(self, negdef):
        for family in ("smith", "bnn", "br"):
            _, W_tilde = gains_lyapunov_candidates(negdef, DynamicSpec(family))
            assert W_tilde.smoothness == "lsc"

    def test_gains_gradients_match_fd(self, negdef, rng, simplex3):
        from basincert import gradient_agreement

        xs = simplex3.random_points(2000, rng)
        for family in ("smith", "bnn"):
            W, _ = gains_lyapunov_candidates(negdef, DynamicSpec(family))
            rel, kinks = gradient_agreement(W, xs)
            assert (rel[~kinks] <= 1e-6).mean() >= 0.99


class TestNashOracle:
    def test_negdef_equilibrium_is_offset(self, negdef):
        # F = c - x has its unique equilibrium exactly at c
        eq, r = find_nash_brute(negdef, h=0.01)
        np.testing.assert_allclose(eq, [0.25, 0.35, 0.40], atol=2e-4)
        assert r <= 1e-6

    def test_rps_uniform(self, rps):
        eq, r = find_nash_brute(rps, h=0.01)
        np.testing.assert_allclose(eq, np.ones(3) / 3, atol=2e-4)

    def test_regret_nonnegative(self, rps, simplex3, rng):
        xs = simplex3.random_points(500, rng)
        assert (regret(rps, xs) >= -1e-12).all()


class TestDynamicInvariants:
    @pytest.mark.parametrize("family", ["smith", "bnn", "replicator", "br",
                                        "tempered_br"])
    def test_simplex_conservation(self, negdef, family):
        inc = make_inclusion(negdef, DynamicSpec(family))
        traj = integrate(inc, [0.7, 0.2, 0.1], T=10.0, dt=1e-3)
        assert np.abs(traj.states.sum(axis=1) - 1.0).max() <= 1e-9
        assert traj.states.min() >= -1e-9

    def test_nash_stationarity_exact(self, negdef):
        eq, _ = find_nash_brute(negdef, h=0.01)
        for family in ("smith", "bnn"):
            inc = make_inclusion(negdef, DynamicSpec(family))
            np.testing.assert_allclose(inc.velocities_at(eq)[0], 0.0, atol=1e-9)

    def test_br_hull_contains_zero_at_interior_nash(self, rps):
        # at a mixed equilibrium the extreme velocities average to zero with
        # the equilibrium weights: zero is in the hull, vertices are not zero
        inc = make_inclusion(rps, DynamicSpec("br"))
        eq = np.ones(3) / 3
        vels = np.array(inc.velocities_at(eq))
        np.testing.assert_allclose(eq @ vels, 0.0, atol=1e-12)

    def test_br_zero_at_strict_equilibrium(self):
        # dominant-strategy game: the vertex is a strict equilibrium and the
        # best-response velocity there is exactly zero
        M = np.array([[1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        game = matrix_game(M, name="dominant")
        inc = make_inclusion(game, DynamicSpec("br"))
        vels = inc.velocities_at(np.eye(3)[0])
        assert len(vels) == 1
        np.testing.assert_allclose(vels[0], 0.0, atol=1e-12)

    @pytest.mark.parametrize("family", ["smith", "bnn", "replicator"])
    def test_positive_correlation(self, negdef, family, simplex3, rng):
        # every velocity points weakly up the payoff field
        inc = make_inclusion(negdef, DynamicSpec(family))
        xs = simplex3.random_points(500, rng)
        V, active = inc.extremes_fn(xs)
        F = negdef.payoff(xs)
        corr = np.einsum("nka,na->nk", V, F)
        assert corr[active].min() >= -1e-9
