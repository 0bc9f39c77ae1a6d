"""Seeded random instances for tests, benchmarks, and the corpus runner.

Every generator is a pure function of its arguments: the same seed yields the
same instance.  Probabilities are small-denominator rationals, never floats.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .mixture import FiniteDist, MixturePBInstance, validate_mixture
from .model import (
    DTInstance,
    ExplicitPBInstance,
    InstanceError,
    MSSCfInstance,
    ThresholdPBInstance,
    Value,
    require_valid,
)


def _costs(rng: random.Random, n: int, mode: str) -> list[Fraction]:
    if mode == "unit":
        return [Fraction(1)] * n
    if mode == "random":
        return [Fraction(rng.randint(1, 8), rng.choice((1, 2))) for _ in range(n)]
    raise ValueError(f"unknown cost mode {mode!r}")


def _probs(rng: random.Random, m: int, uniform: bool) -> list[Fraction]:
    if uniform:
        return [Fraction(1, m)] * m
    weights = [rng.randint(1, 9) for _ in range(m)]
    total = sum(weights)
    return [Fraction(w, total) for w in weights]


def _value_matrix(rng: random.Random, n: int, m: int, support: int, inf_rate: float) -> list[list[Value]]:
    values = [
        [
            Value.inf(f"x{rng.randrange(4)}")
            if rng.random() < inf_rate
            else Value.of(rng.randrange(support))
            for _ in range(m)
        ]
        for _ in range(n)
    ]
    for j in range(m):
        if all(values[i][j].finite is None for i in range(n)):
            values[rng.randrange(n)][j] = Value.of(rng.randrange(support))
    return values


def gen_explicit(
    n: int,
    m: int,
    seed: int,
    support: int = 10,
    cost_mode: str = "unit",
    uniform: bool = False,
    inf_rate: float = 0.15,
) -> ExplicitPBInstance:
    """Box-search instance with small integer values, occasional dead boxes
    (tagged infinities), and at least one finite value per scenario."""
    rng = random.Random(seed)
    instance = ExplicitPBInstance(
        _costs(rng, n, cost_mode),
        _probs(rng, m, uniform),
        _value_matrix(rng, n, m, support, inf_rate),
    )
    require_valid(instance)
    return instance


def gen_threshold(
    n: int,
    m: int,
    seed: int,
    threshold=None,
    support: int = 10,
    cost_mode: str = "unit",
    uniform: bool = True,
    inf_rate: float = 0.15,
) -> ThresholdPBInstance:
    """Quit-price instance; the default price is a uniform integer in [1, m]."""
    rng = random.Random(seed)
    costs = _costs(rng, n, cost_mode)
    probs = _probs(rng, m, uniform)
    values = _value_matrix(rng, n, m, support, inf_rate)
    if threshold is None:
        threshold = Fraction(rng.randint(1, m))
    instance = ThresholdPBInstance(costs, probs, values, threshold)
    require_valid(instance)
    return instance


def gen_dt(
    n: int,
    m: int,
    seed: int,
    alphabet: int = 3,
    cost_mode: str = "unit",
    uniform: bool = True,
) -> DTInstance:
    """Identification instance with pairwise distinguishable scenarios."""
    rng = random.Random(seed)
    costs = _costs(rng, n, cost_mode)
    probs = _probs(rng, m, uniform)
    for _ in range(1000):
        outcomes = [[f"o{rng.randrange(alphabet)}" for _ in range(m)] for _ in range(n)]
        columns = {tuple(outcomes[t][j] for t in range(n)) for j in range(m)}
        if len(columns) == m:
            instance = DTInstance(costs, probs, outcomes)
            require_valid(instance)
            return instance
    raise InstanceError(
        f"could not draw {m} distinguishable scenarios from {n} tests over {alphabet} outcomes"
    )


def gen_msscf(
    n: int,
    m: int,
    seed: int,
    density: float = 0.5,
    cost_mode: str = "random",
    uniform: bool = False,
) -> MSSCfInstance:
    """Covering instance where every set has at least one member."""
    rng = random.Random(seed)
    costs = _costs(rng, n, cost_mode)
    probs = _probs(rng, m, uniform)
    membership = [[rng.random() < density for _ in range(m)] for _ in range(n)]
    for j in range(m):
        if not any(membership[i][j] for i in range(n)):
            membership[rng.randrange(n)][j] = True
    feedback = [[f"f{rng.randrange(3)}" for _ in range(m)] for _ in range(n)]
    instance = MSSCfInstance(costs, probs, membership, feedback)
    require_valid(instance)
    return instance


def gen_mixture(
    n: int,
    m: int,
    seed: int,
    epsilon=Fraction(1, 2),
) -> MixturePBInstance:
    """Mixture instance honoring the separation promise by construction.

    Distributions are two-point over a low and a high value.  For each box,
    components are assigned to groups; one group's low-value probability is
    drawn freely and each further group sits exactly a multiple of epsilon
    below it, so pairwise distances are 0 or at least epsilon.
    """
    rng = random.Random(seed)
    epsilon = Fraction(epsilon)
    if not 0 < epsilon <= 1:
        raise InstanceError(f"separation must lie in (0, 1], got {epsilon}")
    costs = [Fraction(rng.randint(1, 3)) for _ in range(n)]
    weights = _probs(rng, m, uniform=False)
    max_groups = min(m, int(1 / epsilon) + 1)
    dists: list[list[FiniteDist]] = []
    any_informative = False
    for k in range(n):
        low, high = Fraction(rng.randint(0, 4)), Fraction(rng.randint(5, 9))
        force = k == n - 1 and not any_informative
        groups = max_groups if force and max_groups >= 2 else rng.randint(1, max_groups)
        if groups < 2:
            q = Fraction(rng.randint(0, 4), 4)
            dists.append([FiniteDist([(low, q), (high, 1 - q)])] * m)
            continue
        any_informative = True
        slack = 1 - (groups - 1) * epsilon
        top = (groups - 1) * epsilon + slack * Fraction(rng.randint(0, 4), 4)
        assignment = [g % groups for g in range(m)]
        rng.shuffle(assignment)
        row = []
        for i in range(m):
            q = top - assignment[i] * epsilon
            row.append(FiniteDist([(low, q), (high, 1 - q)]))
        dists.append(row)
    instance = MixturePBInstance(costs, weights, dists, epsilon)
    problems = validate_mixture(instance)
    if problems:
        raise InstanceError("; ".join(problems))
    return instance
