import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pandora import generators, io
from pandora.model import InstanceError, PolicyTree, Value, validate
from pandora.reductions import expand

HALF = Fraction(1, 2)

rationals = st.builds(Fraction, st.integers(0, 30), st.integers(1, 8))
positives = st.builds(Fraction, st.integers(1, 30), st.integers(1, 8))
tags = st.text(alphabet="abcxyz_019", min_size=1, max_size=4)
values = st.one_of(
    rationals.map(Value.of),
    tags.map(Value.inf),
)

labels = st.one_of(tags, rationals.map(lambda q: str(q)))
policies = st.recursive(
    st.one_of(
        st.just(PolicyTree.stop()),
        st.just(PolicyTree.outside()),
        st.integers(0, 5).map(PolicyTree.identified),
    ),
    lambda leaf: st.builds(
        PolicyTree.act,
        st.integers(0, 9),
        st.dictionaries(labels, leaf, min_size=1, max_size=3),
    ),
    max_leaves=12,
)


# ---------------------------------------------------------------------------
# value ordering

@given(values)
def test_value_label_round_trip(v):
    assert Value.parse(v.label) == v


@given(values, values)
def test_value_order_is_total_on_magnitude(v, w):
    assert (v < w) + (w < v) + (v <= w and w <= v) == 1


@given(rationals, tags)
def test_every_infinity_dominates_every_finite(q, tag):
    assert Value.of(q) < Value.inf(tag)
    assert Value.inf(tag) >= Value.of(q)


@given(st.lists(values, min_size=1, max_size=8))
def test_sorting_puts_finites_first_ascending(vs):
    ordered = sorted(vs)
    finites = [v.finite for v in ordered if v.is_finite]
    assert finites == sorted(finites)
    first_inf = next((k for k, v in enumerate(ordered) if not v.is_finite), len(ordered))
    assert all(not v.is_finite for v in ordered[first_inf:])


# ---------------------------------------------------------------------------
# instance serialization

def seeded_instances(seed):
    rng_args = dict(n=3, m=3, seed=seed)
    return [
        generators.gen_explicit(**rng_args),
        generators.gen_threshold(**rng_args),
        generators.gen_dt(**rng_args),
        generators.gen_msscf(**rng_args),
        generators.gen_mixture(**rng_args),
    ]


@pytest.mark.parametrize("seed", range(8))
def test_instance_json_round_trip(seed):
    for instance in seeded_instances(seed):
        text = io.dumps_instance(instance)
        again = io.loads_instance(text)
        assert again == instance
        assert io.dumps_instance(again) == text


@pytest.mark.parametrize("seed", range(8))
def test_instance_files_round_trip(tmp_path, seed):
    for k, instance in enumerate(seeded_instances(seed)):
        path = tmp_path / f"i{k}.json"
        io.save_instance(instance, path)
        assert io.load_instance(path) == instance


def test_problem_kind_tags_match_documents():
    kinds = [io.problem_kind(x) for x in seeded_instances(0)]
    assert kinds == ["pb", "pbt", "dt", "msscf", "mixture"]
    for instance in seeded_instances(0):
        doc = json.loads(io.dumps_instance(instance))
        assert doc["problem"] == io.problem_kind(instance)


def test_unknown_problem_kind_rejected():
    with pytest.raises(InstanceError):
        io.instance_from_dict({"problem": "sudoku"})


@given(policies)
@settings(max_examples=60)
def test_policy_json_round_trip(tree):
    text = io.dumps_policy(tree)
    again = io.loads_policy(text)
    assert again == tree
    assert io.dumps_policy(again) == text


def test_unknown_policy_kind_rejected():
    with pytest.raises(InstanceError):
        io.policy_from_dict({"kind": "shrug"})


# ---------------------------------------------------------------------------
# generators

@pytest.mark.parametrize("seed", range(12))
def test_generated_instances_are_valid(seed):
    for instance in seeded_instances(seed):
        if hasattr(instance, "component_weights"):
            continue  # gen_mixture validates internally
        assert validate(instance) == []


@pytest.mark.parametrize("seed", range(6))
def test_generators_are_deterministic(seed):
    first = seeded_instances(seed)
    second = seeded_instances(seed)
    assert first == second


def test_distinct_seeds_vary():
    texts = {io.dumps_instance(generators.gen_explicit(4, 4, seed)) for seed in range(10)}
    assert len(texts) > 1


def test_gen_dt_columns_distinct():
    for seed in range(10):
        instance = generators.gen_dt(3, 5, seed)
        cols = {
            tuple(instance.outcomes[t][j] for t in range(instance.n))
            for j in range(instance.m)
        }
        assert len(cols) == instance.m


def test_gen_dt_impossible_shape_rejected():
    # one binary test cannot tell three scenarios apart
    with pytest.raises(InstanceError):
        generators.gen_dt(1, 3, seed=0, alphabet=2)


def test_gen_mixture_separation_promise():
    from pandora.mixture import tv_distance

    for seed in range(10):
        instance = generators.gen_mixture(3, 4, seed, epsilon=Fraction(1, 2))
        for row in instance.dists:
            for a in range(instance.m):
                for b in range(a + 1, instance.m):
                    d = tv_distance(row[a], row[b])
                    assert d == 0 or d >= HALF


# ---------------------------------------------------------------------------
# uniform expansion

@given(st.lists(positives, min_size=1, max_size=5))
def test_expand_counts_proportional(raw):
    total = sum(raw)
    probs = [p / total for p in raw]
    result = expand(probs, max_copies=10**9)
    assert result.kept == tuple(range(len(probs)))
    assert math.gcd(*result.counts) == 1
    for a in range(len(probs)):
        for b in range(len(probs)):
            assert result.counts[a] * probs[b] == result.counts[b] * probs[a]


@given(st.lists(positives, min_size=1, max_size=5))
def test_expand_copies_match_counts(raw):
    total = sum(raw)
    result = expand([p / total for p in raw], max_copies=10**9)
    assert len(result.copies) == sum(result.counts)
    for k, c in enumerate(result.counts):
        assert result.copies.count(k) == c
    assert list(result.copies) == sorted(result.copies)


@given(st.lists(positives, min_size=2, max_size=5), st.integers(0, 3))
def test_expand_floor_drops_exactly_the_small(raw, quarters):
    floor_c = Fraction(quarters, 4)
    total = sum(raw)
    probs = [p / total for p in raw]
    cutoff = floor_c / len(probs)
    expected = tuple(k for k, p in enumerate(probs) if p > cutoff)
    if not expected:
        with pytest.raises(InstanceError):
            expand(probs, floor_c=floor_c, max_copies=10**9)
        return
    result = expand(probs, floor_c=floor_c, max_copies=10**9)
    assert result.kept == expected
    for k, c in enumerate(result.counts):
        assert (c == 0) == (k not in expected)
    survivors = [probs[k] for k in expected]
    weight = sum(survivors)
    for a, b in zip(expected, expected[1:]):
        assert result.counts[a] * (probs[b] / weight) == result.counts[b] * (probs[a] / weight)


def test_expand_rejects_nonpositive_and_caps():
    with pytest.raises(InstanceError):
        expand([Fraction(1, 2), Fraction(0)])
    with pytest.raises(InstanceError):
        expand([Fraction(1, 997), Fraction(996, 997)], max_copies=100)
