import numpy as np
import pytest
from dataclasses import replace

from basincert import (
    PreconditionFailed,
    ScalarField,
    certify_transitive,
    check_transitivity_conditions,
    check_zero_sets,
    compose_transitive,
    constant_field,
    sqnorm,
)
from basincert.certify import check_decrease_bound, check_sign_conditions
from basincert.instances import make_transitivity_instance


@pytest.fixture(scope="module")
def nested():
    return make_transitivity_instance("nested_quadratic")


@pytest.fixture(scope="module")
def nested_conditions(nested):
    return check_transitivity_conditions(nested, h=0.01)


class TestConditions:
    def test_all_pass(self, nested_conditions):
        assert all(v.passed for v in nested_conditions.values())
        assert set(nested_conditions) == {"a_i", "a_ii", "a_iii", "a_iv",
                                          "b_i", "b_ii", "b_iii", "b_iv", "c"}

    def test_inner_decay_positive_outside_intermediate(self, nested):
        # the whole point of condition c: W2_tilde > 0 somewhere in X1 \ X2
        # while the summed decay stays nonpositive there
        x = np.array([0.6, 0.0])
        assert nested.x1.contains(x[None])[0] and not nested.x2.contains(x[None])[0]
        w2t = nested.W2_tilde(x)
        assert w2t == pytest.approx(0.18)
        assert nested.W1_tilde(x) + w2t == pytest.approx(-0.18)

    def test_b_ii_not_tested_outside_intermediate(self, nested, nested_conditions):
        # b_ii passes although the inner decay is positive outside X2
        assert nested_conditions["b_ii"].passed
        samples = nested.x1.sample(0.01)
        outside = samples[~nested.x2.contains(samples)]
        assert (nested.W2_tilde(outside) > 0).any()

    def test_c_violation_detected(self):
        defect = make_transitivity_instance("nested_quadratic_defect_c")
        conds = check_transitivity_conditions(defect, h=0.01)
        passes = {k: v.passed for k, v in conds.items()}
        assert not passes["c"]
        assert all(ok for k, ok in passes.items() if k != "c")
        v = conds["c"]
        assert v.details["max_summed_decay"] == pytest.approx(0.1, abs=1e-9)
        w = v.witnesses[0]
        assert np.linalg.norm(w["point"]) == pytest.approx(0.6, abs=0.06)


class TestCompose:
    def test_weighted_sum_value(self, box2):
        # outer weight 2: W = 2*W1 + W2 evaluates 2*0.3 + 0.4 = 1.0
        inst = make_transitivity_instance("nested_quadratic")
        inst = replace(inst, W1=constant_field(0.3), W2=constant_field(0.4))
        W, _ = compose_transitive(inst)
        assert W(np.array([0.1, 0.1])) == pytest.approx(1.0)

    def test_zero_at_target(self, nested):
        W, W_tilde = compose_transitive(nested)
        origin = np.array([0.0, 0.0])
        assert W(origin) == 0.0
        assert W_tilde(origin) == 0.0

    def test_decay_arithmetic(self):
        inst = make_transitivity_instance("nested_quadratic")
        inst = replace(inst,
                       W1_tilde=replace(constant_field(-1.0), smoothness="lsc"),
                       W2_tilde=replace(constant_field(0.5), smoothness="lsc"))
        _, W_tilde = compose_transitive(inst)
        # 2*(-1) + 0.5 = -1.5 <= 0: the outer decay absorbs the positive inner one
        assert W_tilde(np.array([0.2, 0.2])) == pytest.approx(-1.5)

    def test_composite_gradient_exists_where_both_do(self, nested, rng):
        W, _ = compose_transitive(nested)
        assert W.grad_fn is not None
        xs = nested.x1.sample(0.05)
        from basincert.fields import grad_batch

        g, ok = grad_batch(W, xs)
        assert ok.all()
        # chain rule: 2*grad W1 + grad W2
        expected = 2 * np.asarray(nested.W1.grad_fn(xs)) + np.asarray(nested.W2.grad_fn(xs))
        np.testing.assert_allclose(g, expected, atol=1e-12)


@pytest.fixture(scope="module")
def nested_cert(nested):
    inst = make_transitivity_instance("nested_quadratic")
    inst.params = replace(inst.params, n_starts_inv=60, T_inv=10.0, n_starts_traj=6)
    return certify_transitive(inst)


class TestCertifyTransitive:
    def test_end_to_end_pass(self, nested_cert):
        cert = nested_cert
        assert cert.passed
        assert cert.transitivity is not None
        conds = cert.transitivity["conditions"]
        assert all(v["status"] == "pass" for v in conds.values())
        assert cert.transitivity["composite_zero_sets"]["status"] == "pass"

    def test_basin_inside_outer_set(self, nested_cert, nested):
        # the constructed neighborhood lives inside X1, not all of it
        cons = nested_cert.construction
        assert cons.d_bar == pytest.approx(0.9, abs=0.02)
        core_samples = cons.core.sample(0.01)
        assert nested.x1.contains(core_samples).all()
        radii = np.linalg.norm(core_samples, axis=1)
        assert radii.max() < 0.4  # W = 2(r-0.3)_+^2 + r^2 < level confines r

    def test_precondition_failure_lists_conditions(self):
        defect = make_transitivity_instance("nested_quadratic_defect_c")
        with pytest.raises(PreconditionFailed) as err:
            certify_transitive(defect)
        assert "c" in err.value.failed

    def test_spurious_inner_zero_fails_b_iii_and_composite_scan(self):
        # W2 with an extra zero ring inside cl X2 \ target: condition b_iii
        # fails and the composite zero-set scan would fail the same way
        inst = make_transitivity_instance("nested_quadratic")
        r2 = sqnorm(dim=2)

        def fn(pts):
            v = r2.fn(pts)
            return v * (v - 0.04) ** 2  # extra ring at r = 0.2 inside X2

        inst = replace(inst, W2=ScalarField(fn, None, "c1", name="W2_spurious"))
        conds = check_transitivity_conditions(inst, h=0.01)
        assert not conds["b_iii"].passed
        with pytest.raises(PreconditionFailed) as err:
            certify_transitive(inst)
        assert "b_iii" in err.value.failed
        W, W_tilde = compose_transitive(inst)
        scan = check_zero_sets(W, W_tilde, inst.x1, inst.target, h=0.01)
        assert not scan.passed

    def test_weight_robustness(self, nested):
        # condition c holds with slack (max summed decay ~ -0.09), so any
        # outer weight above 1 keeps the single-pair hypotheses green
        for kappa in (2.5, 3.0):
            W, W_tilde = compose_transitive(nested, outer_weight=kappa)
            assert check_sign_conditions(W, W_tilde, nested.x1, h=0.02).passed
            assert check_zero_sets(W, W_tilde, nested.x1, nested.target, h=0.02).passed
            assert check_decrease_bound(W, W_tilde, nested.inclusion, nested.x1,
                                        h=0.02).passed

    def test_zero_set_logic_on_samples(self, nested):
        # composite zero forces both parts to vanish; composite decay zero
        # forces the outer decay and the sum to vanish
        W, W_tilde = compose_transitive(nested)
        samples = nested.x1.sample(0.01, closure=True)
        Wv = W(samples)
        zero_W = np.abs(Wv) <= 1e-9
        assert (np.abs(nested.W1(samples[zero_W])) <= 1e-9).all()
        assert (np.abs(nested.W2(samples[zero_W])) <= 1e-9).all()
        Wt = W_tilde(samples)
        zero_Wt = np.abs(Wt) <= 1e-9
        w1t = nested.W1_tilde(samples[zero_Wt])
        summed = w1t + nested.W2_tilde(samples[zero_Wt])
        assert (np.abs(w1t) <= 1e-9).all()
        assert (np.abs(summed) <= 1e-9).all()
