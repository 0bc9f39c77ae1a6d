from fractions import Fraction

import pytest

from pandora.model import (
    DTInstance,
    ExplicitPBInstance,
    InstanceError,
    MSSCfInstance,
    PolicyError,
    PolicyTree,
    ThresholdPBInstance,
    Value,
    eval_dt,
    eval_msscf,
    eval_pb,
    eval_threshold,
    min_finite,
    render_policy,
    require_valid,
    simulate,
    threshold_scenario_outcome,
    validate,
)

HALF = Fraction(1, 2)


def square_pb():
    return ExplicitPBInstance(
        [1, 1],
        [HALF, HALF],
        [[Value.of(0), Value.of(5)], [Value.of(5), Value.of(0)]],
    )


def test_value_labels_round_trip():
    for v in (Value.of(3), Value.of(Fraction(7, 2)), Value.inf("dead"), Value.of(0)):
        assert Value.parse(v.label) == v
    assert Value.of(Fraction(7, 2)).label == "7/2"
    assert Value.inf("x").label == "inf:x"


def test_value_magnitude_order():
    assert Value.of(3) < Value.inf("a")
    assert Value.of(2) < Value.of(3)
    assert not Value.inf("a") < Value.inf("b")
    assert not Value.inf("b") < Value.inf("a")
    assert Value.inf("a") != Value.inf("b")


def test_min_finite_skips_tagged_infinities():
    assert min_finite([Value.inf("a"), Value.of(4), Value.of(2)]) == 2
    assert min_finite([Value.inf("a")]) is None
    assert min_finite([]) is None


def test_instances_coerce_and_freeze():
    inst = square_pb()
    assert inst.n == 2 and inst.m == 2
    assert isinstance(inst.box_costs[0], Fraction)
    with pytest.raises(AttributeError):
        inst.box_costs = ()


def test_validate_flags_bad_probabilities():
    bad = ExplicitPBInstance([1], [Fraction(1, 3)], [[Value.of(1)]])
    assert any("sum" in p for p in validate(bad))
    with pytest.raises(InstanceError):
        require_valid(bad)


def test_validate_flags_indistinguishable_scenarios():
    inst = DTInstance([1], [HALF, HALF], [["a", "a"]])
    assert any("told apart" in p or "distinguish" in p for p in validate(inst))


def test_validate_flags_uncoverable_set():
    inst = MSSCfInstance([1], [HALF, HALF], [[True, False]], [["f", "f"]])
    assert any("member" in p for p in validate(inst))


def test_eval_pb_square():
    inst = square_pb()
    policy = PolicyTree.act(
        0,
        {
            "0": PolicyTree.stop(),
            "5": PolicyTree.act(1, {"0": PolicyTree.stop()}),
        },
    )
    assert eval_pb(inst, policy) == Fraction(3, 2)


def test_eval_pb_rejects_stop_without_value():
    inst = square_pb()
    with pytest.raises(PolicyError):
        eval_pb(inst, PolicyTree.stop())


def test_eval_pb_rejects_repeated_box():
    inst = square_pb()
    policy = PolicyTree.act(
        0,
        {
            "0": PolicyTree.stop(),
            "5": PolicyTree.act(0, {"5": PolicyTree.stop()}),
        },
    )
    with pytest.raises(PolicyError):
        eval_pb(inst, policy)


def test_threshold_outcome_charges_up_to_first_hit():
    inst = ThresholdPBInstance(
        [2, 3],
        [HALF, HALF],
        [[Value.of(1), Value.of(9)], [Value.of(9), Value.of(1)]],
        threshold=4,
    )
    policy = PolicyTree.act(
        0,
        {
            "1": PolicyTree.stop(),
            "9": PolicyTree.act(1, {"1": PolicyTree.stop(), "9": PolicyTree.outside()}),
        },
    )
    first = threshold_scenario_outcome(inst, policy, 0)
    assert first.cost == 2 and first.covered
    second = threshold_scenario_outcome(inst, policy, 1)
    assert second.cost == 5 and second.covered
    assert eval_threshold(inst, policy) == Fraction(7, 2)


def test_threshold_outside_pays_the_price():
    inst = ThresholdPBInstance([2], [1], [[Value.of(9)]], threshold=4)
    outcome = threshold_scenario_outcome(inst, PolicyTree.outside(), 0)
    assert outcome.cost == 4 and not outcome.covered
    walked = threshold_scenario_outcome(
        inst, PolicyTree.act(0, {"9": PolicyTree.outside()}), 0
    )
    assert walked.cost == 6 and not walked.covered


def test_threshold_stop_needs_a_qualifying_value():
    inst = ThresholdPBInstance([2], [1], [[Value.of(9)]], threshold=4)
    with pytest.raises(PolicyError):
        eval_threshold(inst, PolicyTree.act(0, {"9": PolicyTree.stop()}))


def test_eval_dt_requires_correct_identification():
    inst = DTInstance([1, 1], [HALF, HALF], [["a", "b"], ["c", "c"]])
    good = PolicyTree.act(0, {"a": PolicyTree.identified(0), "b": PolicyTree.identified(1)})
    assert eval_dt(inst, good) == 1
    wrong = PolicyTree.act(0, {"a": PolicyTree.identified(1), "b": PolicyTree.identified(0)})
    with pytest.raises(PolicyError):
        eval_dt(inst, wrong)
    early = PolicyTree.identified(0)
    with pytest.raises(PolicyError):
        eval_dt(inst, early)


def test_eval_msscf_charges_until_membership():
    inst = MSSCfInstance(
        [1, 2],
        [HALF, HALF],
        [[True, False], [False, True]],
        [["f", "g"], ["h", "f"]],
    )
    policy = PolicyTree.act(
        0, {"0": PolicyTree.stop(), "inf:g": PolicyTree.act(1, {"0": PolicyTree.stop()})}
    )
    assert eval_msscf(inst, policy) == HALF * 1 + HALF * 3


def test_eval_msscf_rejects_uncovered_leaf():
    inst = MSSCfInstance([1], [1], [[True]], [["f"]])
    with pytest.raises(PolicyError):
        eval_msscf(inst, PolicyTree.stop())


def test_policy_missing_branch_is_an_error():
    inst = square_pb()
    policy = PolicyTree.act(0, {"0": PolicyTree.stop()})
    with pytest.raises(PolicyError):
        eval_pb(inst, policy)


def test_render_policy_mentions_actions_and_labels():
    text = render_policy(
        PolicyTree.act(3, {"0": PolicyTree.stop(), "inf:x": PolicyTree.outside()})
    )
    assert "act 3" in text and "[inf:x]" in text


def test_simulate_converges_to_exact_cost():
    inst = square_pb()
    policy = PolicyTree.act(
        0, {"0": PolicyTree.stop(), "5": PolicyTree.act(1, {"0": PolicyTree.stop()})}
    )
    result = simulate(inst, policy, trials=4000, seed=123)
    exact = float(eval_pb(inst, policy))
    assert abs(result.mean - exact) <= 4 * result.stderr + 1e-9
    assert result.stderr > 0


def test_simulate_is_deterministic_per_seed():
    inst = square_pb()
    policy = PolicyTree.act(
        0, {"0": PolicyTree.stop(), "5": PolicyTree.act(1, {"0": PolicyTree.stop()})}
    )
    a = simulate(inst, policy, trials=50, seed=9)
    b = simulate(inst, policy, trials=50, seed=9)
    assert a == b
