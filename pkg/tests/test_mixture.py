import random
from fractions import Fraction

import pytest

from pandora.generators import gen_mixture
from pandora.mixture import (
    EvidenceList,
    FiniteDist,
    MixturePBInstance,
    classify_boxes,
    dp_solve,
    eliminate,
    mixture_pb_solve,
    noninformative_order,
    opt_mixture_pb,
    opt_mixture_threshold,
    search_policy_cost,
    tv_distance,
    update_evidence,
    validate_mixture,
)
from pandora.model import InstanceError, simulate

HALF = Fraction(1, 2)


def two_point(p_low, low=0, high=9) -> FiniteDist:
    p_low = Fraction(p_low)
    return FiniteDist([(low, p_low), (high, 1 - p_low)])


def demo_instance() -> MixturePBInstance:
    return MixturePBInstance(
        [1, 1],
        [HALF, HALF],
        [
            [two_point(Fraction(3, 4)), two_point(Fraction(1, 4))],
            [two_point(HALF, low=2), two_point(HALF, low=2)],
        ],
        HALF,
    )


def test_finite_dist_merges_and_sorts():
    d = FiniteDist([(3, HALF), (1, Fraction(1, 4)), (3, Fraction(1, 4))])
    assert d.items == ((Fraction(1), Fraction(1, 4)), (Fraction(3), Fraction(3, 4)))
    assert d.prob_of(3) == Fraction(3, 4)
    assert d.prob_leq(2) == Fraction(1, 4)


def test_tv_distance_examples():
    assert tv_distance(two_point(HALF), two_point(HALF)) == 0
    assert tv_distance(two_point(1), two_point(0)) == 1
    assert tv_distance(two_point(Fraction(3, 4)), two_point(Fraction(1, 4))) == HALF


def test_validate_catches_separation_violations():
    inst = MixturePBInstance(
        [1],
        [HALF, HALF],
        [[two_point(HALF), two_point(Fraction(2, 5))]],  # tv = 1/10 < 1/2
        HALF,
    )
    assert any("apart" in p for p in validate_mixture(inst))
    with pytest.raises(InstanceError):
        classify_boxes(inst, (0, 1))


def test_classify_boxes_splits_by_surviving_set():
    inst = demo_instance()
    assert classify_boxes(inst, (0, 1)) == ((0,), (1,))
    # with one component left nothing is informative
    assert classify_boxes(inst, (0,)) == ((), (0, 1))


def test_noninformative_order_ranks_by_chance_per_cost():
    inst = MixturePBInstance(
        [2, 1],
        [1],
        [[two_point(HALF, low=0)], [two_point(HALF, low=0)]],
        HALF,
    )
    # same hit chance, cheaper box first
    assert noninformative_order(inst, (0,), Fraction(1)) == [1, 0]


def test_update_evidence_tracks_favored_draws():
    inst = demo_instance()
    E = update_evidence(EvidenceList(), inst, 0, Fraction(0), (0, 1))
    z, t, esum = E.get(0, 1)
    assert (z, t) == (1, 1)
    assert esum == Fraction(3, 4)  # mass component 0 puts on its favored values
    z, t, _ = E.get(1, 0)
    assert (z, t) == (0, 1)
    # the shared box is informative for no pair: nothing records
    E2 = update_evidence(EvidenceList(), inst, 1, Fraction(2), (0, 1))
    assert E2.entries == ()


def test_eliminate_waits_for_the_deadline():
    inst = demo_instance()
    E = EvidenceList()
    for _ in range(3):
        E = update_evidence(E, inst, 0, Fraction(0), (0, 1))
    # deadline for delta=0.9: ln(1/0.9)/(1/2)^2 = 0.42, so t=3 is past it
    assert eliminate(E, (0, 1), HALF, 0.9) == (0,)
    # with delta tiny the deadline is far away: nothing is eliminated
    assert eliminate(E, (0, 1), HALF, 1e-9) == (0, 1)


def test_eliminate_drops_the_contradicted_side():
    inst = demo_instance()
    E = EvidenceList()
    for _ in range(5):
        E = update_evidence(E, inst, 0, Fraction(9), (0, 1))
    # all draws favored component 1, so component 0 is contradicted
    assert eliminate(E, (0, 1), HALF, 0.5) == (1,)


def test_dp_solve_matches_reference_on_demo():
    inst = demo_instance()
    res = dp_solve(inst, Fraction(3), HALF)
    assert res.cost == opt_mixture_threshold(inst, Fraction(3))
    assert res.cost == Fraction(9, 4)
    assert res.states >= 1
    assert all(0 <= p <= 1 for p in res.outside_probs)


def test_dp_solve_slack_bound_holds_on_random_mixtures():
    for seed in range(10):
        inst = gen_mixture(3, 2, seed, epsilon=HALF)
        values = sorted({v for row in inst.dists for d in row for v in d.support})
        T = values[len(values) // 2] + HALF
        res = dp_solve(inst, T, HALF)
        ref = opt_mixture_threshold(inst, T)
        assert res.cost <= (1 + HALF) * ref
        assert res.cost >= ref


def test_dp_policy_never_reopens_boxes():
    inst = demo_instance()
    res = dp_solve(inst, Fraction(3), HALF)
    history = ()
    opened = set()
    rng = random.Random(0)
    while True:
        action = res.policy.next_action(history)
        if action[0] in ("stop", "outside"):
            break
        k = action[1]
        assert k not in opened
        opened.add(k)
        v = inst.dists[k][0].sample(rng)
        history = history + ((k, v),)
        if v <= Fraction(3):
            break


def test_dp_solve_rejects_bad_arguments():
    inst = demo_instance()
    with pytest.raises(InstanceError):
        dp_solve(inst, Fraction(0), HALF)
    with pytest.raises(InstanceError):
        dp_solve(inst, Fraction(3), Fraction(0))
    with pytest.raises(InstanceError):
        dp_solve(inst, Fraction(3), HALF, state_budget=1)


def test_mixture_pb_solve_retires_all_components():
    inst = demo_instance()
    solved = mixture_pb_solve(inst, HALF)
    retired = [c for ph in solved.phases for c in ph.covered]
    assert sorted(retired) == [0, 1]
    assert solved.cost >= opt_mixture_pb(inst)
    assert solved.cost == search_policy_cost(inst, solved.policy)


def test_mixture_pb_solve_random_instances_stay_feasible():
    for seed in range(8):
        inst = gen_mixture(3, 2, seed + 100, epsilon=HALF)
        solved = mixture_pb_solve(inst, HALF)
        ref = opt_mixture_pb(inst)
        assert solved.cost >= ref


def test_simulation_matches_exact_cost():
    inst = demo_instance()
    solved = mixture_pb_solve(inst, HALF)
    sim = simulate(inst, solved.policy, trials=3000, seed=11)
    assert abs(sim.mean - float(solved.cost)) <= 4 * sim.stderr + 1e-9


def test_threshold_policy_simulation_matches_exact_cost():
    inst = demo_instance()
    res = dp_solve(inst, Fraction(3), HALF)
    sim = simulate(inst, res.policy, trials=3000, seed=13)
    assert abs(sim.mean - float(res.cost)) <= 4 * sim.stderr + 1e-9
