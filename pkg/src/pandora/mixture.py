"""Box search when values are drawn from a mixture of product distributions.

One of m hidden components is drawn from known weights; given the component,
every box's value is independent with a known finite-support distribution.
The instance promises separation: for each box, two components' value
distributions are either identical or at least epsilon apart in total
variation.  Boxes therefore split, relative to a set S of components still
in play, into informative ones (some pair in S disagrees) and noninformative
ones (all of S agrees).

The quit-price solver `dp_solve` runs on a compressed state: instead of the
full opening history it keeps which informative boxes were opened, how many
noninformative ones were, the surviving component set S, and a per-pair
evidence tally.  After each informative opening, each surviving ordered pair
(i, j) with disagreeing distributions records whether the observed value was
more likely under i, and component j (or i) is dropped once the tally is long
enough to make the empirical frequency conclusive.  Opening decisions made by
the compressed solver are carried out lazily against the true history, so
policies stay executable and their exact expected cost can be computed by
enumeration.

Everything except the elimination deadline (a logarithm) is exact rational
arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cmp_to_key
from typing import Callable, Sequence

from .model import InstanceError, PolicyError, _frac

Hist = tuple[tuple[int, Fraction], ...]


@dataclass(frozen=True)
class FiniteDist:
    """Finite-support distribution over nonnegative rational values."""

    items: tuple[tuple[Fraction, Fraction], ...]

    def __init__(self, items):
        merged: dict[Fraction, Fraction] = {}
        for v, p in items:
            v, p = _frac(v), _frac(p)
            merged[v] = merged.get(v, Fraction(0)) + p
        object.__setattr__(
            self, "items", tuple(sorted((v, p) for v, p in merged.items() if p != 0))
        )

    @property
    def support(self) -> tuple[Fraction, ...]:
        return tuple(v for v, _ in self.items)

    def prob_of(self, v: Fraction) -> Fraction:
        for u, p in self.items:
            if u == v:
                return p
        return Fraction(0)

    def prob_leq(self, t: Fraction) -> Fraction:
        return sum((p for v, p in self.items if v <= t), Fraction(0))

    def sample(self, rng) -> Fraction:
        u = rng.random()
        acc = 0.0
        for v, p in self.items:
            acc += float(p)
            if u < acc:
                return v
        return self.items[-1][0]


def tv_distance(a: FiniteDist, b: FiniteDist) -> Fraction:
    values = set(a.support) | set(b.support)
    return sum((abs(a.prob_of(v) - b.prob_of(v)) for v in values), Fraction(0)) / 2


@dataclass(frozen=True)
class MixturePBInstance:
    """box_costs[k]: opening cost; component_weights[i]: mixing probability;
    dists[k][i]: value distribution of box k under component i; epsilon: the
    promised pairwise separation."""

    box_costs: tuple[Fraction, ...]
    component_weights: tuple[Fraction, ...]
    dists: tuple[tuple[FiniteDist, ...], ...]
    epsilon: Fraction

    def __init__(self, box_costs, component_weights, dists, epsilon):
        object.__setattr__(self, "box_costs", tuple(_frac(c) for c in box_costs))
        object.__setattr__(self, "component_weights", tuple(_frac(w) for w in component_weights))
        object.__setattr__(
            self,
            "dists",
            tuple(
                tuple(d if isinstance(d, FiniteDist) else FiniteDist(d) for d in row)
                for row in dists
            ),
        )
        object.__setattr__(self, "epsilon", _frac(epsilon))

    @property
    def n(self) -> int:
        return len(self.box_costs)

    @property
    def m(self) -> int:
        return len(self.component_weights)


def validate_mixture(instance: MixturePBInstance) -> list[str]:
    problems = []
    if instance.n == 0:
        problems.append("no boxes")
    if instance.m == 0:
        problems.append("no components")
    if any(c <= 0 for c in instance.box_costs):
        problems.append("box costs must be positive")
    if any(w <= 0 for w in instance.component_weights):
        problems.append("component weights must be positive")
    elif sum(instance.component_weights) != 1:
        problems.append(f"component weights sum to {sum(instance.component_weights)}, not 1")
    if not 0 < instance.epsilon <= 1:
        problems.append(f"separation must lie in (0, 1], got {instance.epsilon}")
    if len(instance.dists) != instance.n:
        problems.append(f"expected {instance.n} distribution rows, got {len(instance.dists)}")
    for k, row in enumerate(instance.dists):
        if len(row) != instance.m:
            problems.append(f"box {k} has {len(row)} component distributions, expected {instance.m}")
            continue
        for i, d in enumerate(row):
            if not d.items:
                problems.append(f"box {k} component {i} has an empty distribution")
            elif sum(p for _, p in d.items) != 1:
                problems.append(f"box {k} component {i} probabilities do not sum to 1")
            if any(v < 0 for v, _ in d.items):
                problems.append(f"box {k} component {i} has a negative value")
            if any(p < 0 for _, p in d.items):
                problems.append(f"box {k} component {i} has a negative probability")
        for i in range(instance.m):
            for j in range(i + 1, instance.m):
                d = tv_distance(row[i], row[j])
                if 0 < d < instance.epsilon:
                    problems.append(
                        f"box {k}: components {i} and {j} are {d} apart, inside (0, {instance.epsilon})"
                    )
    return problems


def classify_boxes(instance: MixturePBInstance, S: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """(informative, noninformative) box ids relative to surviving components
    S.  Raises when a pair sits strictly between identical and separated,
    breaking the instance's promise."""
    S = sorted(S)
    informative, noninformative = [], []
    for k in range(instance.n):
        row = instance.dists[k]
        splits = False
        for a, i in enumerate(S):
            for j in S[a + 1:]:
                d = tv_distance(row[i], row[j])
                if 0 < d < instance.epsilon:
                    raise InstanceError(
                        f"box {k}: components {i} and {j} are {d} apart, "
                        f"inside (0, {instance.epsilon})"
                    )
                if d > 0:
                    splits = True
        if splits:
            informative.append(k)
        else:
            noninformative.append(k)
    return tuple(informative), tuple(noninformative)


def noninformative_order(instance: MixturePBInstance, S: Sequence[int], T: Fraction, exclude=frozenset()) -> list[int]:
    """Noninformative boxes ranked by chance of beating the quit price per
    unit cost, ties to the lower id.  All of S agrees on these boxes, so the
    chance is read off any surviving component."""
    i0 = min(S)
    _, nib = classify_boxes(instance, S)
    boxes = [k for k in nib if k not in exclude]

    def cmp(a: int, b: int) -> int:
        ga, gb = instance.dists[a][i0].prob_leq(T), instance.dists[b][i0].prob_leq(T)
        ca, cb = instance.box_costs[a], instance.box_costs[b]
        if ga * cb != gb * ca:
            return -1 if ga * cb > gb * ca else 1
        return -1 if a < b else 1

    return sorted(boxes, key=cmp_to_key(cmp))


def best_noninformative(instance: MixturePBInstance, S: Sequence[int], T: Fraction, opened_count: int, exclude=frozenset()) -> int | None:
    order = noninformative_order(instance, S, T, exclude)
    if opened_count >= len(order):
        return None
    return order[opened_count]


# ---------------------------------------------------------------------------
# evidence tallies and elimination

@dataclass(frozen=True)
class EvidenceList:
    """Per ordered pair (i, j): how often the observed value favored i (z),
    how many informative-for-the-pair openings there were (t), and the total
    probability i assigns to its favored values over those openings (esum).
    Under truth i the tally z concentrates around esum."""

    entries: tuple[tuple[int, int, int, int, Fraction], ...] = ()

    def get(self, i: int, j: int) -> tuple[int, int, Fraction]:
        for a, b, z, t, esum in self.entries:
            if a == i and b == j:
                return z, t, esum
        return 0, 0, Fraction(0)


def _favors(di: FiniteDist, dj: FiniteDist, v: Fraction, i: int, j: int) -> bool:
    pi, pj = di.prob_of(v), dj.prob_of(v)
    return pi > pj or (pi == pj and i < j)


def update_evidence(E: EvidenceList, instance: MixturePBInstance, box: int, value: Fraction, S: Sequence[int]) -> EvidenceList:
    """Fold one observed value of an informative box into the tallies.  Only
    pairs the box actually separates (total variation at least epsilon)
    record anything."""
    S = sorted(S)
    rows = {(a, b): (z, t, e) for a, b, z, t, e in E.entries}
    row = instance.dists[box]
    for i in S:
        for j in S:
            if i == j or tv_distance(row[i], row[j]) < instance.epsilon:
                continue
            z, t, esum = rows.get((i, j), (0, 0, Fraction(0)))
            if _favors(row[i], row[j], value, i, j):
                z += 1
            t += 1
            esum += sum(
                (p for v, p in row[i].items if _favors(row[i], row[j], v, i, j)),
                Fraction(0),
            )
            rows[(i, j)] = (z, t, esum)
    return EvidenceList(tuple(sorted((i, j, z, t, e) for (i, j), (z, t, e) in rows.items())))


def eliminate(E: EvidenceList, S: Sequence[int], epsilon: Fraction, delta: float) -> tuple[int, ...]:
    """Drop components contradicted by a long enough tally.

    Once a pair's tally length t exceeds ln(1/delta) / epsilon^2, the
    empirical favoring frequency z/t either matches what truth-i predicts
    (within epsilon/2, so j is dropped) or it does not (so i is dropped).
    The comparison itself is exact; only the deadline uses floats.
    """
    S = list(dict.fromkeys(S))
    deadline = math.log(1 / delta) / float(epsilon) ** 2
    changed = True
    while changed:
        changed = False
        for i in sorted(S):
            for j in sorted(S):
                if i == j:
                    continue
                z, t, esum = E.get(i, j)
                if t == 0 or t <= deadline:
                    continue
                if abs(Fraction(z, t) - esum / t) <= epsilon / 2:
                    S.remove(j)
                else:
                    S.remove(i)
                changed = True
                break
            if changed:
                break
    return tuple(sorted(S))


def _prune_evidence(E: EvidenceList, S: Sequence[int]) -> EvidenceList:
    keep = set(S)
    return EvidenceList(tuple(e for e in E.entries if e[0] in keep and e[1] in keep))


# ---------------------------------------------------------------------------
# the compressed quit-price solver

def _record_informative(M: tuple, k: int) -> tuple:
    if M and isinstance(M[-1], frozenset):
        return M[:-1] + (M[-1] | {k},)
    return M + (frozenset({k}),)


def _record_noninformative(M: tuple) -> tuple:
    if M and isinstance(M[-1], int):
        return M[:-1] + (M[-1] + 1,)
    return M + (1,)


def _informative_opened(M: tuple) -> frozenset[int]:
    out: frozenset[int] = frozenset()
    for part in M:
        if isinstance(part, frozenset):
            out |= part
    return out


def _noninformative_count(M: tuple) -> int:
    return sum(part for part in M if isinstance(part, int))


@dataclass
class DPResult:
    policy: "MixtureThresholdPolicy"
    cost: Fraction
    outside_probs: tuple[Fraction, ...]
    states: int
    informative_cap: int
    delta: float
    threshold: Fraction
    beta: Fraction


class _Compressed:
    """Shared machinery: the memoized value recursion and history replay."""

    def __init__(self, instance: MixturePBInstance, T: Fraction, beta: Fraction, state_budget: int):
        problems = validate_mixture(instance)
        if problems:
            raise InstanceError("; ".join(problems))
        T = _frac(T)
        if T <= 0:
            raise InstanceError(f"quit price must be positive, got {T}")
        beta = _frac(beta)
        if beta <= 0:
            raise InstanceError(f"slack must be positive, got {beta}")
        self.instance = instance
        self.T = T
        self.beta = beta
        self.state_budget = state_budget
        c_min = min(instance.box_costs)
        m = instance.m
        self.delta = float(self.beta * c_min / (m * m * T))
        if self.delta >= 1:
            self.cap = 0
        else:
            self.cap = math.ceil(m * m / float(instance.epsilon) ** 2 * math.log(1 / self.delta))
        self.memo: dict[tuple, tuple[Fraction, tuple]] = {}
        self._cls_cache: dict[tuple[int, ...], tuple[tuple[int, ...], tuple[int, ...]]] = {}
        self._order_cache: dict[tuple, list[int]] = {}

    def _classify(self, S: tuple[int, ...]) -> tuple[tuple[int, ...], tuple[int, ...]]:
        hit = self._cls_cache.get(S)
        if hit is None:
            hit = classify_boxes(self.instance, S)
            self._cls_cache[S] = hit
        return hit

    def _nib_order(self, S: tuple[int, ...], exclude: frozenset[int]) -> list[int]:
        key = (S, exclude)
        hit = self._order_cache.get(key)
        if hit is None:
            hit = noninformative_order(self.instance, S, self.T, exclude)
            self._order_cache[key] = hit
        return hit

    def _weights(self, S: tuple[int, ...]) -> list[Fraction]:
        w = [self.instance.component_weights[i] for i in S]
        total = sum(w)
        return [x / total for x in w]

    def value(self, M: tuple, E: EvidenceList, S: tuple[int, ...]) -> Fraction:
        return self._solve(M, E, S)[0]

    def choice(self, M: tuple, E: EvidenceList, S: tuple[int, ...]) -> tuple:
        return self._solve(M, E, S)[1]

    def _solve(self, M: tuple, E: EvidenceList, S: tuple[int, ...]) -> tuple[Fraction, tuple]:
        key = (M, E.entries, S)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if len(self.memo) >= self.state_budget:
            raise InstanceError(f"state budget of {self.state_budget} exceeded")
        inst, T = self.instance, self.T
        best: Fraction = T
        pick: tuple = ("outside",)
        opened_inf = _informative_opened(M)
        informative, _ = self._classify(S)
        weights = self._weights(S)
        if len(S) > 1 and len(opened_inf) < self.cap:
            for k in informative:
                if k in opened_inf:
                    continue
                cand = inst.box_costs[k] + self._nature_informative(M, E, S, k, weights)
                if cand < best:
                    best, pick = cand, ("open-informative", k)
        count = _noninformative_count(M)
        order = self._nib_order(S, opened_inf)
        k2 = order[count] if count < len(order) else None
        if k2 is not None:
            p_done = sum(
                (w * inst.dists[k2][i].prob_leq(T) for w, i in zip(weights, S)),
                Fraction(0),
            )
            cand = inst.box_costs[k2]
            if p_done != 1:
                cand += (1 - p_done) * self._solve(_record_noninformative(M), E, S)[0]
            if cand < best:
                best, pick = cand, ("open-noninformative", k2)
        self.memo[key] = (best, pick)
        return best, pick

    def _nature_informative(self, M, E, S, k, weights) -> Fraction:
        inst, T = self.instance, self.T
        support = sorted({v for i in S for v in inst.dists[k][i].support})
        M2 = _record_informative(M, k)
        total = Fraction(0)
        for v in support:
            p = sum((w * inst.dists[k][i].prob_of(v) for w, i in zip(weights, S)), Fraction(0))
            if p == 0 or v <= T:
                continue
            E2 = update_evidence(E, inst, k, v, S)
            S2 = eliminate(E2, S, inst.epsilon, self.delta)
            total += p * self._solve(M2, _prune_evidence(E2, S2), S2)[0]
        return total

    def replay(self, history: Hist) -> tuple[tuple, EvidenceList, tuple[int, ...]]:
        M: tuple = ()
        E = EvidenceList()
        S = tuple(range(self.instance.m))
        for k, v in history:
            informative, _ = self._classify(S)
            if k in informative:
                M = _record_informative(M, k)
                E = update_evidence(E, self.instance, k, v, S)
                S = eliminate(E, S, self.instance.epsilon, self.delta)
                E = _prune_evidence(E, S)
            else:
                M = _record_noninformative(M)
        return M, E, S


class MixtureThresholdPolicy:
    """Executable quit-price policy: replays the history through the
    compressed state and reads the solver's choice there.  A noninformative
    choice is carried out on the cheapest-equivalent unopened box, since the
    compressed state tracks only how many such boxes were opened."""

    objective = "threshold"

    def __init__(self, solver: _Compressed):
        self._solver = solver
        self.threshold = solver.T

    def next_action(self, history: Hist) -> tuple:
        if history and history[-1][1] <= self.threshold:
            return ("stop",)
        M, E, S = self._solver.replay(history)
        pick = self._solver.choice(M, E, S)
        if pick[0] == "outside":
            return ("outside",)
        opened = {k for k, _ in history}
        if pick[0] == "open-informative":
            k = pick[1]
            if k in opened:
                raise PolicyError(f"informative box {k} chosen twice")
            return ("open", k)
        order = self._solver._nib_order(S, _informative_opened(M))
        for k in order:
            if k not in opened:
                return ("open", k)
        return ("outside",)


def _threshold_walk(instance: MixturePBInstance, policy, T: Fraction) -> tuple[Fraction, tuple[Fraction, ...]]:
    """Exact expected cost and per-component giving-up probability of an
    executable quit-price policy, by enumerating every reachable history."""

    def walk(i: int, history: Hist) -> tuple[Fraction, Fraction]:
        action = policy.next_action(history)
        if action[0] == "stop":
            return Fraction(0), Fraction(0)
        if action[0] == "outside":
            return T, Fraction(1)
        k = action[1]
        if any(k == b for b, _ in history):
            raise PolicyError(f"box {k} opened twice on one path")
        cost = instance.box_costs[k]
        out = Fraction(0)
        for v, p in instance.dists[k][i].items:
            if v <= T:
                continue
            sub_cost, sub_out = walk(i, history + ((k, v),))
            cost += p * sub_cost
            out += p * sub_out
        return cost, out

    outs = []
    total = Fraction(0)
    for i, w in enumerate(instance.component_weights):
        cost, out = walk(i, ())
        total += w * cost
        outs.append(out)
    return total, tuple(outs)


def dp_solve(instance: MixturePBInstance, T, beta, state_budget: int = 200_000) -> DPResult:
    """Quit-price search on the compressed state.

    The elimination confidence is delta = beta * (cheapest box) / (m^2 T) and
    at most ceil(m^2 / epsilon^2 * ln(1/delta)) informative boxes may be
    opened on any path, which keeps the state space polynomial for fixed
    epsilon.  The returned cost is the exact expected cost of the executable
    policy, computed by enumeration, not the solver's internal estimate.
    """
    solver = _Compressed(instance, T, beta, state_budget)
    policy = MixtureThresholdPolicy(solver)
    solver.value((), EvidenceList(), tuple(range(instance.m)))
    cost, outs = _threshold_walk(instance, policy, solver.T)
    return DPResult(
        policy=policy,
        cost=cost,
        outside_probs=outs,
        states=len(solver.memo),
        informative_cap=solver.cap,
        delta=solver.delta,
        threshold=solver.T,
        beta=solver.beta,
    )


# ---------------------------------------------------------------------------
# exact reference values by full-history enumeration

def _posterior(instance: MixturePBInstance, history: Hist) -> list[Fraction]:
    w = list(instance.component_weights)
    for k, v in history:
        w = [wi * instance.dists[k][i].prob_of(v) for i, wi in enumerate(w)]
    total = sum(w)
    if total == 0:
        raise InstanceError("impossible history")
    return [wi / total for wi in w]


def opt_mixture_threshold(instance: MixturePBInstance, T) -> Fraction:
    """Optimal expected quit-price cost, by dynamic programming over full
    histories.  Exponential in the box count; a reference for small sizes."""
    problems = validate_mixture(instance)
    if problems:
        raise InstanceError("; ".join(problems))
    T = _frac(T)
    memo: dict[frozenset, Fraction] = {}

    def value(history: Hist) -> Fraction:
        key = frozenset(history)
        if key in memo:
            return memo[key]
        post = _posterior(instance, history)
        opened = {k for k, _ in history}
        best = T
        for k in range(instance.n):
            if k in opened:
                continue
            support = sorted({v for row in (instance.dists[k][i] for i in range(instance.m)) for v in row.support})
            cand = instance.box_costs[k]
            for v in support:
                p = sum(post[i] * instance.dists[k][i].prob_of(v) for i in range(instance.m))
                if p == 0 or v <= T:
                    continue
                cand += p * value(history + ((k, v),))
                if cand >= best:
                    break
            if cand < best:
                best = cand
        memo[key] = best
        return best

    return value(())


def opt_mixture_pb(instance: MixturePBInstance) -> Fraction:
    """Optimal expected search cost (openings plus the value taken), by
    dynamic programming over full histories."""
    problems = validate_mixture(instance)
    if problems:
        raise InstanceError("; ".join(problems))
    memo: dict[frozenset, Fraction] = {}

    def value(history: Hist) -> Fraction:
        key = frozenset(history)
        if key in memo:
            return memo[key]
        post = _posterior(instance, history)
        opened = {k for k, _ in history}
        best = min((v for _, v in history), default=None)
        for k in range(instance.n):
            if k in opened:
                continue
            support = sorted({v for i in range(instance.m) for v in instance.dists[k][i].support})
            cand = instance.box_costs[k]
            for v in support:
                p = sum(post[i] * instance.dists[k][i].prob_of(v) for i in range(instance.m))
                if p == 0:
                    continue
                cand += p * value(history + ((k, v),))
                if best is not None and cand >= best:
                    break
            if best is None or cand < best:
                best = cand
        memo[key] = best
        return best

    if instance.n == 0:
        raise InstanceError("no boxes")
    return value(())


# ---------------------------------------------------------------------------
# full search through rounds of quit-price search

@dataclass
class MixturePhase:
    threshold: Fraction
    result: DPResult
    remaining: tuple[int, ...]
    covered: tuple[int, ...]
    accept_mass: Fraction
    warning: bool
    reference_cost: Fraction | None
    """Optimal quit-price cost at this round's price, when small enough to
    enumerate; the round's price is expected to stay within
    (1 + beta) * reference / accept_frac."""


@dataclass
class MixtureSolveResult:
    policy: "MixtureSearchPolicy"
    cost: Fraction
    phases: list[MixturePhase]


class MixtureSearchPolicy:
    """Stitched rounds: follow round i's quit-price policy while total
    spending is within its price, take any value at or below it, move on
    when the round gives up or its budget is spent, and after the last round
    open whatever is left in index order."""

    objective = "search"

    def __init__(self, instance: MixturePBInstance, rounds: list[tuple[Fraction, MixtureThresholdPolicy]]):
        self._instance = instance
        self._rounds = rounds

    def next_action(self, history: Hist) -> tuple:
        spent = sum((self._instance.box_costs[k] for k, _ in history), Fraction(0))
        lowest = min((v for _, v in history), default=None)
        opened = {k for k, _ in history}
        for T_i, policy in self._rounds:
            if lowest is not None and lowest <= T_i:
                return ("stop",)
            if spent > T_i:
                continue
            action = policy.next_action(history)
            if action[0] == "outside":
                continue
            if action[0] == "stop":
                return ("stop",)
            return action
        for k in range(self._instance.n):
            if k not in opened:
                return ("open", k)
        if lowest is None:
            raise PolicyError("every box is open and no value was ever revealed")
        return ("stop",)


def search_policy_cost(instance: MixturePBInstance, policy) -> Fraction:
    """Exact expected search cost (openings plus the value taken) of an
    executable policy, by enumerating every reachable history."""

    def walk(i: int, history: Hist) -> Fraction:
        action = policy.next_action(history)
        if action[0] == "stop":
            lowest = min((v for _, v in history), default=None)
            if lowest is None:
                raise PolicyError("stopping before any value was revealed")
            return lowest
        if action[0] == "outside":
            raise PolicyError("search policies cannot give up")
        k = action[1]
        if any(k == b for b, _ in history):
            raise PolicyError(f"box {k} opened twice on one path")
        cost = instance.box_costs[k]
        for v, p in instance.dists[k][i].items:
            cost += p * walk(i, history + ((k, v),))
        return cost

    return sum(
        (w * walk(i, ()) for i, w in enumerate(instance.component_weights)),
        Fraction(0),
    )


def _restrict(instance: MixturePBInstance, components: Sequence[int]) -> MixturePBInstance:
    total = sum(instance.component_weights[i] for i in components)
    return MixturePBInstance(
        instance.box_costs,
        [instance.component_weights[i] / total for i in components],
        [[row[i] for i in components] for row in instance.dists],
        instance.epsilon,
    )


def _mixture_grid(instance: MixturePBInstance) -> list[Fraction]:
    total = sum(instance.box_costs, Fraction(0))
    values = {v for row in instance.dists for d in row for v in d.support}
    top = total + max(values) + 1
    grid = {Fraction(k) for k in range(1, math.ceil(top) + 1)}
    grid.add(top)
    grid |= values
    if instance.n <= 16:
        sums = {Fraction(0)}
        for c in instance.box_costs:
            sums |= {s + c for s in sums}
        grid |= sums
    return sorted(q for q in grid if q > 0)


def mixture_pb_solve(
    instance: MixturePBInstance,
    beta,
    accept_frac: Fraction = Fraction(1, 5),
    state_budget: int = 200_000,
    reference_limit: int = 6,
) -> MixtureSolveResult:
    """Full search through rounds of compressed quit-price search.

    Each round restricts to the components still in play, picks the smallest
    grid price at which the compressed solver's giving-up mass is at most
    accept_frac, and retires the components that find a qualifying value with
    probability above one half.  An accepted round always retires at least
    one component, so there are at most m rounds.
    """
    problems = validate_mixture(instance)
    if problems:
        raise InstanceError("; ".join(problems))
    beta = _frac(beta)
    remaining = list(range(instance.m))
    phases: list[MixturePhase] = []
    rounds: list[tuple[Fraction, MixtureThresholdPolicy]] = []
    while remaining:
        if len(phases) >= instance.m:
            raise PolicyError("round limit exceeded without covering every component")
        sub = _restrict(instance, remaining)
        candidates = _mixture_grid(sub)

        def evaluate(T: Fraction):
            res = dp_solve(sub, T, beta, state_budget)
            mass = sum(
                (w * out for w, out in zip(sub.component_weights, res.outside_probs)),
                Fraction(0),
            )
            return mass <= accept_frac, (res, mass)

        lo, hi = 0, len(candidates) - 1
        cache: dict[int, tuple[bool, tuple]] = {}

        def peek(idx: int):
            if idx not in cache:
                cache[idx] = evaluate(candidates[idx])
            return cache[idx]

        ok, payload = peek(hi)
        warning = not ok
        if ok:
            while lo < hi:
                mid = (lo + hi) // 2
                if peek(mid)[0]:
                    hi = mid
                else:
                    lo = mid + 1
            payload = peek(lo)[1]
            T_i = candidates[lo]
        else:
            T_i = candidates[hi]
        res, mass = payload
        covered = [remaining[p] for p, out in enumerate(res.outside_probs) if out < Fraction(1, 2)]
        if not covered:
            raise PolicyError(f"round at quit price {T_i} retired no component")
        reference = None
        if sub.n <= reference_limit:
            reference = opt_mixture_threshold(sub, T_i)
        phases.append(
            MixturePhase(T_i, res, tuple(remaining), tuple(covered), mass, warning, reference)
        )
        rounds.append((T_i, res.policy))
        remaining = [i for i in remaining if i not in covered]
    policy = MixtureSearchPolicy(instance, rounds)
    cost = search_policy_cost(instance, policy)
    return MixtureSolveResult(policy=policy, cost=cost, phases=phases)


# ---------------------------------------------------------------------------
# sampling hook for model.simulate

def sample_costs(instance: MixturePBInstance, policy, trials: int, rng) -> list[float]:
    weights = [float(w) for w in instance.component_weights]
    cumulative = []
    acc = 0.0
    for w in weights:
        acc += w
        cumulative.append(acc)
    quit_price = getattr(policy, "threshold", None)
    costs: list[float] = []
    for _ in range(trials):
        u = rng.random()
        i = next((k for k, q in enumerate(cumulative) if u < q), instance.m - 1)
        history: Hist = ()
        spent = 0.0
        while True:
            action = policy.next_action(history)
            if action[0] == "stop":
                if policy.objective == "search":
                    lowest = min((v for _, v in history), default=None)
                    if lowest is None:
                        raise PolicyError("stopping before any value was revealed")
                    spent += float(lowest)
                break
            if action[0] == "outside":
                if quit_price is None:
                    raise PolicyError("search policies cannot give up")
                spent += float(quit_price)
                break
            k = action[1]
            if any(k == b for b, _ in history):
                raise PolicyError(f"box {k} opened twice on one path")
            v = instance.dists[k][i].sample(rng)
            spent += float(instance.box_costs[k])
            history = history + ((k, v),)
        costs.append(spent)
    return costs
