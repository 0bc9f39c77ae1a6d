from fractions import Fraction

import pytest

from pandora.generators import gen_dt, gen_explicit, gen_msscf, gen_threshold
from pandora.model import (
    DTInstance,
    ExplicitPBInstance,
    MSSCfInstance,
    ThresholdPBInstance,
    Value,
    eval_dt,
    eval_msscf,
    eval_pb,
    eval_threshold,
    threshold_outcomes,
)
from pandora.oracles import CapExceeded, opt_dt, opt_msscf, opt_pb, opt_threshold

HALF = Fraction(1, 2)
THIRD = Fraction(1, 3)


# Expected optima below were worked out by hand before the recursion existed:
# symmetric two-box search costs 1 + 1/2 for the second opening; the
# three-scenario identification needs one test always and a second two thirds
# of the time; the two-element cover mirrors the two-box search.


def test_opt_pb_symmetric_two_boxes():
    inst = ExplicitPBInstance(
        [1, 1], [HALF, HALF], [[Value.of(0), Value.of(5)], [Value.of(5), Value.of(0)]]
    )
    tree, cost = opt_pb(inst)
    assert cost == Fraction(3, 2)
    assert eval_pb(inst, tree) == cost


def test_opt_pb_prefers_stopping_over_spending():
    # after the free peek, opening the second box costs 1 to improve 2 -> 0
    # half the time: a wash, and the tie goes to stopping
    inst = ExplicitPBInstance(
        [0, 1], [HALF, HALF], [[Value.of(2), Value.of(2)], [Value.of(2), Value.of(0)]]
    )
    tree, cost = opt_pb(inst)
    assert cost == 2
    assert tree.action == 0
    assert tree.children["2"].kind == "stop"


def test_opt_pb_skips_dead_boxes():
    inst = ExplicitPBInstance(
        [Fraction(1, 4), 1],
        [HALF, HALF],
        [[Value.inf("x"), Value.inf("y")], [Value.of(1), Value.of(2)]],
    )
    _, cost = opt_pb(inst)
    assert cost == 1 + HALF * 1 + HALF * 2


def test_opt_dt_three_scenarios():
    inst = DTInstance(
        [1, 1],
        [THIRD, THIRD, THIRD],
        [["a", "b", "b"], ["c", "c", "d"]],
    )
    tree, cost = opt_dt(inst)
    assert cost == Fraction(5, 3)
    assert eval_dt(inst, tree) == cost


def test_opt_msscf_two_singletons():
    inst = MSSCfInstance(
        [1, 1],
        [HALF, HALF],
        [[True, False], [False, True]],
        [["f", "f"], ["f", "f"]],
    )
    tree, cost = opt_msscf(inst)
    assert cost == Fraction(3, 2)
    assert eval_msscf(inst, tree) == cost


def test_opt_msscf_shared_member_wins():
    inst = MSSCfInstance(
        [1, 1, 1],
        [HALF, HALF],
        [[True, False], [False, True], [True, True]],
        [["f", "f"], ["f", "f"], ["f", "f"]],
    )
    _, cost = opt_msscf(inst)
    assert cost == 1


def test_opt_threshold_coverage_beats_quitting_on_ties():
    # covering costs exactly the quit price; the tree must still cover
    inst = ThresholdPBInstance([3], [1], [[Value.of(1)]], threshold=3)
    tree, cost = opt_threshold(inst)
    assert cost == 3
    assert tree.kind == "act"
    assert all(o.covered for o in threshold_outcomes(inst, tree))


def test_opt_threshold_quits_when_cheaper():
    inst = ThresholdPBInstance([3], [1], [[Value.of(1)]], threshold=2)
    tree, cost = opt_threshold(inst)
    assert cost == 2 and tree.kind == "outside"


def test_opt_threshold_splits_before_buying():
    inst = ThresholdPBInstance(
        [Fraction(1, 4), 2, 2],
        [HALF, HALF],
        [
            [Value.of(9), Value.of(8)],
            [Value.of(1), Value.of(9)],
            [Value.of(9), Value.of(1)],
        ],
        threshold=3,
    )
    tree, cost = opt_threshold(inst)
    # peek at the cheap box, then buy the right one
    assert tree.action == 0
    assert cost == Fraction(1, 4) + 2
    assert eval_threshold(inst, tree) == cost


def test_opt_threshold_monotone_in_the_price():
    inst = gen_threshold(4, 4, seed=5, threshold=1)
    base = ThresholdPBInstance(inst.box_costs, inst.scenario_probs, inst.values, 1)
    last = None
    for t in range(1, 8):
        cur = ThresholdPBInstance(base.box_costs, base.scenario_probs, base.values, t)
        _, cost = opt_threshold(cur)
        if last is not None:
            assert cost - last <= 1  # raising the price by 1 cannot hurt by more
        last = cost


def test_oracles_beat_or_match_policy_evaluations():
    for seed in range(8):
        pinst = gen_explicit(4, 4, seed)
        tree, cost = opt_pb(pinst)
        assert eval_pb(pinst, tree) == cost
        minst = gen_msscf(4, 4, seed)
        mtree, mcost = opt_msscf(minst)
        assert eval_msscf(minst, mtree) == mcost
        dinst = gen_dt(4, 4, seed)
        dtree, dcost = opt_dt(dinst)
        assert eval_dt(dinst, dtree) == dcost
        tinst = gen_threshold(4, 4, seed)
        ttree, tcost = opt_threshold(tinst)
        assert eval_threshold(tinst, ttree) == tcost


def test_memoization_matches_plain_recursion():
    for seed in (0, 1, 2):
        inst = gen_explicit(3, 3, seed, support=4)
        _, with_memo = opt_pb(inst, memoize=True)
        _, without = opt_pb(inst, memoize=False)
        assert with_memo == without
        tinst = gen_threshold(3, 3, seed, support=4)
        _, t_with = opt_threshold(tinst, memoize=True)
        _, t_without = opt_threshold(tinst, memoize=False)
        assert t_with == t_without


def test_cap_guards_the_recursion():
    inst = gen_explicit(6, 3, seed=1)
    with pytest.raises(CapExceeded):
        opt_pb(inst, cap=5)
