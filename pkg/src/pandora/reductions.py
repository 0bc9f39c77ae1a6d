"""Cost-preserving transformations between the four search problems.

Every transformation returns a `ReductionCertificate`: the transformed
instance, a `back_translate` function carrying any feasible policy for the
transformed instance back to a feasible policy for the source, and a text
statement of the cost relation the pair is claimed to satisfy.  The claims
are checked exactly on random corpora by the test suite; nothing here relies
on floating point.

The module also houses the threshold search used to lift quit-price policies
back to plain box search: a growing sequence of quit prices is chosen so that
each round covers at least a constant fraction of the surviving scenario
mass, the per-round policies are then stitched into one box-search policy
that follows round i until its spending exceeds that round's quit price, and
stops as soon as any revealed value is at or below it.  The uniform variant
first drops scenarios of negligible probability and duplicates the rest into
equal-probability copies so that solvers restricted to uniform distributions
apply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .model import (
    ACT,
    IDENTIFIED,
    OUTSIDE,
    STOP,
    DTInstance,
    ExplicitPBInstance,
    InstanceError,
    MSSCfInstance,
    PolicyError,
    PolicyTree,
    ThresholdPBInstance,
    Value,
    min_finite,
    require_valid,
    threshold_outcomes,
)

Action = tuple


@dataclass
class ReductionCertificate:
    """A transformed instance plus the translation back.

    `action_map` names what each action of the transformed instance means in
    source terms; it is what the command line stores in the sidecar file next
    to a transformed instance so a later call can rebuild the translation.
    """

    forward: object
    back_translate: Callable[[PolicyTree], PolicyTree]
    claimed_bound: str
    action_map: dict[int, Action] = field(default_factory=dict)


def _is_uniform(probs) -> bool:
    return len(set(probs)) == 1


# ---------------------------------------------------------------------------
# set cover with feedback -> box search

def msscf_to_pb(instance: MSSCfInstance) -> ReductionCertificate:
    """Covering an element is finding a zero; a miss is a tagged infinity.

    Outcome labels coincide on both sides, so policy trees carry over
    unchanged in either direction and cost is preserved exactly.
    """
    require_valid(instance)
    values = [
        [
            Value.of(0) if instance.membership[i][j] else Value.inf(instance.feedback[i][j])
            for j in range(instance.m)
        ]
        for i in range(instance.n)
    ]
    forward = ExplicitPBInstance(instance.element_costs, instance.set_probs, values)
    return ReductionCertificate(
        forward=forward,
        back_translate=lambda policy: policy,
        claimed_bound="cover cost equals search cost for the identical policy tree, both directions",
        action_map={i: ("element", i) for i in range(instance.n)},
    )


# ---------------------------------------------------------------------------
# set cover with feedback -> identification

def msscf_to_dt(instance: MSSCfInstance) -> ReductionCertificate:
    """Selections become tests; a membership hit names the realized set.

    A feasible identification tree translates back by replaying its element
    choices, terminating any branch whose selection hits a member, and
    appending the cheapest member of the named set at each leaf whose branch
    never hit one.
    """
    require_valid(instance)
    outcomes = [
        [
            f"hit:{j}" if instance.membership[i][j] else "miss:" + instance.feedback[i][j]
            for j in range(instance.m)
        ]
        for i in range(instance.n)
    ]
    forward = DTInstance(instance.element_costs, instance.set_probs, outcomes)

    def cheapest_member(j: int) -> int:
        best = None
        for e in range(instance.n):
            if instance.membership[e][j] and (best is None or instance.element_costs[e] < instance.element_costs[best]):
                best = e
        if best is None:
            raise InstanceError(f"set {j} has no member")
        return best

    def back(node: PolicyTree, consistent: tuple[int, ...], selected: frozenset[int]) -> PolicyTree:
        if node.kind == IDENTIFIED:
            j = node.scenario
            if any(instance.membership[e][j] for e in selected):
                return PolicyTree.stop()
            e = cheapest_member(j)
            return PolicyTree.act(e, {"0": PolicyTree.stop()})
        if node.kind != ACT:
            raise PolicyError(f"identification trees cannot contain {node.kind!r} nodes")
        i = node.action
        classes: dict[str, list[int]] = {}
        for j in consistent:
            classes.setdefault(instance.label(i, j), []).append(j)
        children = {}
        for lab, cls in classes.items():
            if instance.membership[i][cls[0]]:
                children[lab] = PolicyTree.stop()
            else:
                child = node.children.get("miss:" + instance.feedback[i][cls[0]])
                if child is None:
                    raise PolicyError(f"identification tree lacks a branch for test {i} on sets {cls}")
                children[lab] = back(child, tuple(cls), selected | {i})
        return PolicyTree.act(i, children)

    def back_translate(policy: PolicyTree) -> PolicyTree:
        return back(policy, tuple(range(instance.m)), frozenset())

    return ReductionCertificate(
        forward=forward,
        back_translate=back_translate,
        claimed_bound="cover cost <= identification cost + expected cheapest-member cost",
        action_map={i: ("element", i) for i in range(instance.n)},
    )


# ---------------------------------------------------------------------------
# box search -> threshold search (value shifting)

def pb_to_pbt_naive(instance: ExplicitPBInstance) -> ReductionCertificate:
    """Move values out of reach and sell them back through dedicated boxes.

    Every original value is shifted above the quit price so original boxes
    become pure information.  For each box j and each finite value v that j
    can reveal, a new final box is added that costs the original opening cost
    plus v and reveals 0 exactly under the scenarios where box j holds v.
    Buying a final box is how a translated policy commits to a value, so an
    optimal quit-price policy costs at most twice the optimal search cost,
    and any feasible quit-price policy translates back without getting worse.
    """
    require_valid(instance)
    finite_all = [v.finite for row in instance.values for v in row if v.finite is not None]
    if not finite_all:
        raise InstanceError("no finite value anywhere; the search problem is infeasible")
    T = sum(instance.box_costs, Fraction(0)) + max(finite_all) + 1
    shift = T + 1

    costs = list(instance.box_costs)
    values: list[list[Value]] = [
        [
            Value.of(v.finite + shift) if v.finite is not None else v
            for v in row
        ]
        for row in instance.values
    ]
    action_map: dict[int, Action] = {i: ("box", i) for i in range(instance.n)}
    finals: list[tuple[int, Fraction]] = []
    for j in range(instance.n):
        support = sorted({v.finite for v in instance.values[j] if v.finite is not None})
        for v in support:
            fid = len(costs)
            action_map[fid] = ("final", j, v)
            finals.append((j, v))
            costs.append(instance.box_costs[j] + v)
            values.append(
                [
                    Value.of(0) if instance.values[j][s].finite == v else Value.of(shift)
                    for s in range(instance.m)
                ]
            )
    forward = ThresholdPBInstance(costs, instance.scenario_probs, values, T)
    miss_label = str(shift)

    def fwd_label(i: int, j: int) -> str:
        v = instance.values[i][j]
        return str(v.finite + shift) if v.finite is not None else v.label

    def back(node: PolicyTree, observed: dict[int, Value], consistent: tuple[int, ...]) -> PolicyTree:
        if node.kind == STOP:
            if min_finite(observed.values()) is None:
                raise PolicyError("quit-price policy stops before any value was committed")
            return PolicyTree.stop()
        if node.kind == OUTSIDE:
            # the quit price exceeds the cost of opening everything, so a
            # giving-up branch translates to exhaustive search
            return _open_rest(instance, observed, consistent)
        what = action_map[node.action]
        if what[0] == "box":
            j = what[1]
            if j in observed:
                raise PolicyError(f"box {j} opened twice on one path")
            classes: dict[str, list[int]] = {}
            for s in consistent:
                classes.setdefault(instance.label(j, s), []).append(s)
            children = {}
            for lab, cls in classes.items():
                child = node.children.get(fwd_label(j, cls[0]))
                if child is None:
                    raise PolicyError(f"quit-price policy lacks a branch for box {j} label {lab}")
                obs = dict(observed)
                obs[j] = instance.values[j][cls[0]]
                children[lab] = back(child, obs, tuple(cls))
            return PolicyTree.act(j, children)
        # final box for (source box j, value v)
        _, j, v = what
        if j in observed:
            u = observed[j]
            key = "0" if u.finite == v else miss_label
            child = node.children.get(key)
            if child is None:
                raise PolicyError(f"quit-price policy lacks the determined branch of final box ({j}, {v})")
            return back(child, observed, consistent)
        classes = {}
        for s in consistent:
            classes.setdefault(instance.label(j, s), []).append(s)
        children = {}
        for lab, cls in classes.items():
            u = instance.values[j][cls[0]]
            key = "0" if u.finite == v else miss_label
            child = node.children.get(key)
            if child is None:
                raise PolicyError(f"quit-price policy lacks a branch for final box ({j}, {v})")
            obs = dict(observed)
            obs[j] = u
            children[lab] = back(child, obs, tuple(cls))
        return PolicyTree.act(j, children)

    def back_translate(policy: PolicyTree) -> PolicyTree:
        return back(policy, {}, tuple(range(instance.m)))

    return ReductionCertificate(
        forward=forward,
        back_translate=back_translate,
        claimed_bound=(
            "optimal quit-price cost <= 2 x optimal search cost; "
            "translated policy search cost <= its quit-price cost"
        ),
        action_map=action_map,
    )


def _open_rest(instance: ExplicitPBInstance, observed: dict[int, Value], consistent: tuple[int, ...]) -> PolicyTree:
    if min_finite(observed.values()) is not None and len(observed) == instance.n:
        return PolicyTree.stop()
    todo = [b for b in range(instance.n) if b not in observed]
    if not todo:
        if min_finite(observed.values()) is None:
            raise PolicyError("some scenario has no finite value in any box")
        return PolicyTree.stop()
    b = todo[0]
    classes: dict[str, list[int]] = {}
    for s in consistent:
        classes.setdefault(instance.label(b, s), []).append(s)
    children = {}
    for lab, cls in classes.items():
        obs = dict(observed)
        obs[b] = instance.values[b][cls[0]]
        children[lab] = _open_rest(instance, obs, tuple(cls))
    return PolicyTree.act(b, children)


# ---------------------------------------------------------------------------
# quit-price search with uniform scenarios -> set cover with feedback

def pbt_to_umsscf(instance: ThresholdPBInstance) -> ReductionCertificate:
    """Quit-price search as covering, for integer prices and uniform scenarios.

    Each scenario splits into T equal-probability copies.  A box becomes one
    element that covers every copy of the scenarios where the box beats the
    price (value strictly below T) and otherwise feeds back the value seen.
    T extra unit-cost elements each cover one copy of every scenario, so
    covering by outside elements alone costs exactly the quit price.  The
    translation back replays box elements, ignores outside elements until at
    least half the price has been sunk into them, and then gives up.  Per
    scenario, the translated policy costs at most 3 times the average cover
    cost of that scenario's copies.
    """
    require_valid(instance)
    T_frac = instance.threshold
    if T_frac.denominator != 1 or T_frac < 1:
        raise InstanceError(f"quit price must be a positive integer, got {T_frac}")
    if not _is_uniform(instance.scenario_probs):
        raise InstanceError("this transformation needs uniform scenario probabilities")
    T = int(T_frac)
    n, m = instance.n, instance.m

    num_sets = m * T
    probs = [Fraction(1, num_sets)] * num_sets
    costs = list(instance.box_costs) + [Fraction(1)] * T
    membership: list[list[bool]] = []
    feedback: list[list[str]] = []
    action_map: dict[int, Action] = {}
    for b in range(n):
        action_map[b] = ("box", b)
        v_row = instance.values[b]
        row_member = []
        row_fb = []
        for i in range(m):
            hits = v_row[i].finite is not None and v_row[i].finite < T
            for _ in range(T):
                row_member.append(hits)
                row_fb.append(v_row[i].label)
        membership.append(row_member)
        feedback.append(row_fb)
    for k in range(T):
        action_map[n + k] = ("outside", k)
        membership.append([kk == k for _ in range(m) for kk in range(T)])
        feedback.append(["out"] * num_sets)
    forward = MSSCfInstance(costs, probs, membership, feedback)

    def back(node: PolicyTree, taken_outside: int, consistent: tuple[int, ...], opened: frozenset[int]) -> PolicyTree:
        if node.kind == STOP:
            raise PolicyError("cover policy ends while some scenario has found nothing below the price")
        if node.kind != ACT:
            raise PolicyError(f"cover policies cannot contain {node.kind!r} nodes")
        what = action_map[node.action]
        if what[0] == "outside":
            count = taken_outside + 1
            if 2 * count >= T:
                return PolicyTree.outside()
            child = node.children.get("inf:out")
            if child is None:
                raise PolicyError("cover policy lacks the miss branch of an outside element")
            return back(child, count, consistent, opened)
        b = what[1]
        if b in opened:
            raise PolicyError(f"box {b} opened twice on one path")
        classes: dict[str, list[int]] = {}
        for i in consistent:
            classes.setdefault(instance.label(b, i), []).append(i)
        children = {}
        for lab, cls in classes.items():
            if instance.qualifies(b, cls[0]):
                children[lab] = PolicyTree.stop()
                continue
            child = node.children.get("inf:" + lab)
            if child is None:
                raise PolicyError(f"cover policy lacks a branch for box {b} label {lab}")
            children[lab] = back(child, taken_outside, tuple(cls), opened | {b})
        return PolicyTree.act(b, children)

    def back_translate(policy: PolicyTree) -> PolicyTree:
        return back(policy, 0, tuple(range(m)), frozenset())

    return ReductionCertificate(
        forward=forward,
        back_translate=back_translate,
        claimed_bound=(
            "per scenario, translated quit-price cost <= 3 x mean cover cost of the scenario's copies"
        ),
        action_map=action_map,
    )


# ---------------------------------------------------------------------------
# identification with uniform priors -> set cover with feedback

def udt_to_umsscf(instance: DTInstance) -> ReductionCertificate:
    """Identification as covering, one set per scenario.

    Tests become elements that belong to no set and feed their outcome back.
    Each scenario additionally gets an isolating element, its only member,
    priced at the hardest pairwise distinction the scenario forces: the
    maximum over other scenarios of the cheapest test telling the two apart.
    A cover policy translates back by replaying test elements, skipping
    isolating elements while remembering their scenarios, spending a real
    distinguishing test only when a second isolating element follows a
    remembered one, and finishing each branch by separating whatever pair is
    left.  Aggregate identification cost stays within twice the cover cost,
    and the optimal cover cost is within 3 times the optimal identification
    cost (append each leaf's isolating element to see why).
    """
    require_valid(instance)
    if not _is_uniform(instance.scenario_probs):
        raise InstanceError("this transformation needs uniform scenario priors")
    n, m = instance.n, instance.m
    out = instance.outcomes

    def pair_cost(i: int, k: int) -> Fraction:
        best = None
        for t in range(n):
            if out[t][i] != out[t][k] and (best is None or instance.test_costs[t] < best):
                best = instance.test_costs[t]
        if best is None:
            raise InstanceError(f"scenarios {i} and {k} cannot be told apart")
        return best

    iso_cost = [
        max(pair_cost(i, k) for k in range(m) if k != i) if m > 1 else Fraction(1)
        for i in range(m)
    ]

    costs = list(instance.test_costs) + iso_cost
    membership = [[False] * m for _ in range(n)] + [
        [i == j for j in range(m)] for i in range(m)
    ]
    feedback = [[out[t][j] for j in range(m)] for t in range(n)] + [
        ["iso"] * m for _ in range(m)
    ]
    forward = MSSCfInstance(costs, instance.scenario_probs, membership, feedback)
    action_map: dict[int, Action] = {t: ("test", t) for t in range(n)}
    action_map.update({n + i: ("isolating", i) for i in range(m)})

    def cheapest_separating_test(i: int, k: int, run: frozenset[int]) -> int | None:
        """None if a test already run tells i and k apart, else the cheapest
        not-yet-run test that does."""
        best = None
        for t in range(n):
            if out[t][i] == out[t][k]:
                continue
            if t in run:
                return None
            if best is None or instance.test_costs[t] < instance.test_costs[best]:
                best = t
        if best is None:
            raise InstanceError(f"scenarios {i} and {k} cannot be told apart")
        return best

    def split(consistent: tuple[int, ...], t: int):
        classes: dict[str, list[int]] = {}
        for j in consistent:
            classes.setdefault(out[t][j], []).append(j)
        return classes

    def finish(consistent: tuple[int, ...], run: frozenset[int]) -> PolicyTree:
        if len(consistent) == 1:
            return PolicyTree.identified(consistent[0])
        i, k = sorted(consistent)[:2]
        t = cheapest_separating_test(i, k, run)
        if t is None:
            raise PolicyError(f"scenarios {i} and {k} were separated yet share a branch")
        classes = split(consistent, t)
        return PolicyTree.act(
            t,
            {lab: finish(tuple(cls), run | {t}) for lab, cls in classes.items()},
        )

    def back(node: PolicyTree, consistent: tuple[int, ...], run: frozenset[int], stack: tuple[int, ...]) -> PolicyTree:
        if node.kind == STOP:
            return finish(consistent, run)
        if node.kind != ACT:
            raise PolicyError(f"cover policies cannot contain {node.kind!r} nodes")
        what = action_map[node.action]
        if what[0] == "test":
            t = what[1]
            if t in run:
                # this test was already spent by an inserted distinction; its
                # outcome is determined, follow the known branch for free
                lab = out[t][consistent[0]]
                child = node.children.get("inf:" + lab)
                if child is None:
                    return finish(consistent, run)
                return back(child, consistent, run, stack)
            classes = split(consistent, t)
            children = {}
            for lab, cls in classes.items():
                child = node.children.get("inf:" + lab)
                if child is None:
                    children[lab] = finish(tuple(cls), run | {t})
                else:
                    children[lab] = back(child, tuple(cls), run | {t}, stack)
            return PolicyTree.act(t, children)
        j = what[1]
        cont = node.children.get("inf:iso")
        if not stack:
            if cont is None:
                return finish(consistent, run)
            return back(cont, consistent, run, stack + (j,))
        k = stack[-1]
        t = cheapest_separating_test(j, k, run) if j != k else None
        if t is None:
            if cont is None:
                return finish(consistent, run)
            return back(cont, consistent, run, stack + (j,))
        classes = split(consistent, t)
        children = {}
        for lab, cls in classes.items():
            if cont is None:
                children[lab] = finish(tuple(cls), run | {t})
            else:
                children[lab] = back(cont, tuple(cls), run | {t}, stack + (j,))
        return PolicyTree.act(t, children)

    def back_translate(policy: PolicyTree) -> PolicyTree:
        return back(policy, tuple(range(m)), frozenset(), ())

    return ReductionCertificate(
        forward=forward,
        back_translate=back_translate,
        claimed_bound=(
            "identification cost of the translation <= 2 x cover cost; "
            "optimal cover cost <= 3 x optimal identification cost"
        ),
        action_map=action_map,
    )


def dt_policy_as_cover(instance: DTInstance, policy: PolicyTree) -> PolicyTree:
    """Feasible cover policy for `udt_to_umsscf(instance).forward` built from
    an identification tree: replay the tests, then select the named
    scenario's isolating element at every leaf."""
    n = instance.n

    def conv(node: PolicyTree) -> PolicyTree:
        if node.kind == IDENTIFIED:
            return PolicyTree.act(n + node.scenario, {"0": PolicyTree.stop()})
        if node.kind != ACT:
            raise PolicyError(f"identification trees cannot contain {node.kind!r} nodes")
        return PolicyTree.act(
            node.action,
            {"inf:" + lab: conv(child) for lab, child in node.children.items()},
        )

    return conv(policy)


# ---------------------------------------------------------------------------
# scenario expansion to uniform probabilities

@dataclass
class ExpandResult:
    counts: tuple[int, ...]
    copies: tuple[int, ...]
    kept: tuple[int, ...]

    @property
    def total(self) -> int:
        return len(self.copies)


def expand(probs: Sequence[Fraction], floor_c: Fraction = Fraction(0), max_copies: int = 10_000) -> ExpandResult:
    """Integer copy counts turning a rational distribution into a uniform one.

    Scenarios whose probability is at most floor_c / len(probs) are dropped
    (count 0).  The rest are renormalized and replicated in exact proportion:
    counts are the rescaled probabilities times their common denominator,
    reduced by their gcd, so each copy carries probability 1 / total.
    """
    probs = [Fraction(p) for p in probs]
    if any(p <= 0 for p in probs):
        raise InstanceError("probabilities must be positive")
    cutoff = Fraction(floor_c) / len(probs)
    kept = [k for k, p in enumerate(probs) if p > cutoff]
    if not kept:
        raise InstanceError("every scenario fell below the probability floor")
    total = sum(probs[k] for k in kept)
    scaled = [probs[k] / total for k in kept]
    denom = math.lcm(*(q.denominator for q in scaled))
    raw = [int(q * denom) for q in scaled]
    g = math.gcd(*raw)
    kept_counts = [r // g for r in raw]
    if sum(kept_counts) > max_copies:
        raise InstanceError(
            f"expansion needs {sum(kept_counts)} copies, above the cap of {max_copies}"
        )
    counts = [0] * len(probs)
    copies: list[int] = []
    for k, c in zip(kept, kept_counts):
        counts[k] = c
        copies.extend([k] * c)
    return ExpandResult(tuple(counts), tuple(copies), tuple(kept))


# ---------------------------------------------------------------------------
# threshold search over a candidate grid

@dataclass
class ThresholdSearch:
    threshold: Fraction
    policy: PolicyTree
    accept_mass: Fraction
    warning: bool


def _grid_search(candidates: Sequence[Fraction], evaluate) -> tuple[int, object, bool]:
    """Leftmost candidate accepted by `evaluate`, by bisection.

    `evaluate(T)` returns (ok, payload).  Acceptance is assumed monotone in
    T, which holds for an exact solver: raising the quit price only makes
    covering more attractive.  Returns (index, payload, warning); when no
    candidate is accepted the last one is returned with warning=True.
    """
    cache: dict[int, tuple[bool, object]] = {}

    def peek(idx: int):
        if idx not in cache:
            cache[idx] = evaluate(candidates[idx])
        return cache[idx]

    lo, hi = 0, len(candidates) - 1
    ok, payload = peek(hi)
    if not ok:
        return hi, payload, True
    while lo < hi:
        mid = (lo + hi) // 2
        ok, _ = peek(mid)
        if ok:
            hi = mid
        else:
            lo = mid + 1
    return lo, peek(lo)[1], False


def threshold_grid(costs: Sequence[Fraction], values, integer_grid: bool = False) -> list[Fraction]:
    """Candidate quit prices: achievable spending levels and revealed values,
    padded with the integers, up to one past the point where opening every
    box is certain to beat quitting."""
    total = sum(costs, Fraction(0))
    finite = {v.finite for row in values for v in row if v.finite is not None}
    top = total + (max(finite) if finite else 0) + 1
    grid: set[Fraction] = {Fraction(k) for k in range(1, math.ceil(top) + 1)}
    grid.add(top)
    if not integer_grid:
        grid |= finite
        if len(costs) <= 16:
            sums = {Fraction(0)}
            for c in costs:
                sums |= {s + c for s in sums}
            grid |= sums
    return sorted(q for q in grid if q > 0)


def _sub_threshold(instance: ExplicitPBInstance, remaining: Sequence[int], T: Fraction) -> ThresholdPBInstance:
    mass = sum(instance.scenario_probs[j] for j in remaining)
    return ThresholdPBInstance(
        instance.box_costs,
        [instance.scenario_probs[j] / mass for j in remaining],
        [[row[j] for j in remaining] for row in instance.values],
        T,
    )


def binary_search_threshold(
    instance: ExplicitPBInstance,
    remaining: Sequence[int],
    solver: Callable[[ThresholdPBInstance], PolicyTree],
    accept_frac: Fraction = Fraction(1, 5),
    integer_grid: bool = False,
) -> ThresholdSearch:
    """Smallest grid quit price at which the solver's policy gives up on at
    most an accept_frac share of the remaining scenario mass."""
    remaining = list(remaining)
    candidates = threshold_grid(
        instance.box_costs,
        [[row[j] for j in remaining] for row in instance.values],
        integer_grid=integer_grid,
    )

    def evaluate(T: Fraction):
        sub = _sub_threshold(instance, remaining, T)
        policy = solver(sub)
        outs = threshold_outcomes(sub, policy)
        mass = sum(
            p for p, o in zip(sub.scenario_probs, outs) if not o.covered
        )
        return mass <= accept_frac, (policy, Fraction(mass))

    idx, (policy, mass), warning = _grid_search(candidates, evaluate)
    return ThresholdSearch(candidates[idx], policy, mass, warning)


# ---------------------------------------------------------------------------
# phase decomposition and stitching

@dataclass
class Phase:
    threshold: Fraction
    policy: PolicyTree
    remaining: tuple[int, ...]
    covered: tuple[int, ...]
    accept_mass: Fraction
    warning: bool


@dataclass
class PhaseRun:
    policy: PolicyTree
    phases: list[Phase]
    coverage: dict[int, tuple[int, Fraction]]
    """scenario -> (phase index, that phase's quit price) for scenarios the
    stitched policy stops on via the quit-price rule."""


_START = object()


def _stitch(instance: ExplicitPBInstance, rounds: list[tuple[Fraction, PolicyTree]]) -> tuple[PolicyTree, dict[int, tuple[int, Fraction]]]:
    """One box-search policy from per-round quit-price policies.

    Follow round i's policy, skipping boxes already opened, until total
    spending exceeds its quit price or its tree is exhausted, then move to
    round i+1.  Stop as soon as any revealed value is at or below the current
    round's price.  Branches outliving every round fall back to opening the
    remaining boxes in index order until stopping is legal.
    """
    values = instance.values
    costs = instance.box_costs
    coverage: dict[int, tuple[int, Fraction]] = {}

    def fallback(consistent: tuple[int, ...], observed: tuple[tuple[int, Value], ...]) -> PolicyTree:
        if min_finite(v for _, v in observed) is not None:
            return PolicyTree.stop()
        opened = {b for b, _ in observed}
        todo = [b for b in range(instance.n) if b not in opened]
        if not todo:
            raise PolicyError("some scenario has no finite value in any box")
        b = todo[0]
        classes: dict[str, list[int]] = {}
        for j in consistent:
            classes.setdefault(values[b][j].label, []).append(j)
        return PolicyTree.act(
            b,
            {
                lab: fallback(tuple(cls), observed + ((b, values[b][cls[0]]),))
                for lab, cls in classes.items()
            },
        )

    def build(consistent, observed, spent, idx, node) -> PolicyTree:
        while True:
            if idx >= len(rounds):
                return fallback(consistent, observed)
            T_i, tree_i = rounds[idx]
            mf = min_finite(v for _, v in observed)
            if mf is not None and mf <= T_i:
                for j in consistent:
                    coverage.setdefault(j, (idx, T_i))
                return PolicyTree.stop()
            if spent > T_i:
                idx, node = idx + 1, _START
                continue
            cur = tree_i if node is _START else node
            opened_map = dict(observed)
            while cur is not None and cur.kind == ACT and cur.action in opened_map:
                cur = cur.children.get(opened_map[cur.action].label)
            if cur is None or cur.kind != ACT:
                idx, node = idx + 1, _START
                continue
            b = cur.action
            classes: dict[str, list[int]] = {}
            for j in consistent:
                classes.setdefault(values[b][j].label, []).append(j)
            children = {}
            for lab, cls in classes.items():
                v = values[b][cls[0]]
                obs = observed + ((b, v),)
                if v.finite is not None and v.finite <= T_i:
                    for j in cls:
                        coverage.setdefault(j, (idx, T_i))
                    children[lab] = PolicyTree.stop()
                else:
                    children[lab] = build(tuple(cls), obs, spent + costs[b], idx, cur.children.get(lab))
            return PolicyTree.act(b, children)

    policy = build(tuple(range(instance.m)), (), Fraction(0), 0, _START)
    return policy, coverage


def pb_phases(
    instance: ExplicitPBInstance,
    solver: Callable[[ThresholdPBInstance], PolicyTree],
    accept_frac: Fraction = Fraction(1, 5),
    integer_grid: bool = False,
) -> PhaseRun:
    """Box search through rounds of quit-price search.

    Each round picks the smallest grid price at which the solver abandons at
    most accept_frac of the surviving mass, removes the scenarios its policy
    covers, and repeats; the per-round policies are stitched into one
    box-search policy.
    """
    require_valid(instance)
    remaining = list(range(instance.m))
    phases: list[Phase] = []
    while remaining:
        if len(phases) >= instance.m:
            raise PolicyError("round limit exceeded without covering every scenario")
        found = binary_search_threshold(instance, remaining, solver, accept_frac, integer_grid)
        sub = _sub_threshold(instance, remaining, found.threshold)
        outs = threshold_outcomes(sub, found.policy)
        covered = [j for j, o in zip(remaining, outs) if o.covered]
        if not covered:
            raise PolicyError(
                f"round at quit price {found.threshold} covered nothing; instance may be uncoverable"
            )
        phases.append(
            Phase(found.threshold, found.policy, tuple(remaining), tuple(covered), found.accept_mass, found.warning)
        )
        remaining = [j for j in remaining if j not in covered]
    policy, coverage = _stitch(instance, [(ph.threshold, ph.policy) for ph in phases])
    return PhaseRun(policy, phases, coverage)


def _expanded_threshold(instance: ExplicitPBInstance, copies: Sequence[int], T: Fraction) -> ThresholdPBInstance:
    return ThresholdPBInstance(
        instance.box_costs,
        [Fraction(1, len(copies))] * len(copies),
        [[row[j] for j in copies] for row in instance.values],
        T,
    )


def pb_phases_uniform(
    instance: ExplicitPBInstance,
    solver: Callable[[ThresholdPBInstance], PolicyTree],
    floor_c: Fraction = Fraction(1, 10),
    outside_frac: Fraction = Fraction(1, 10),
    integer_grid: bool = False,
    max_copies: int = 10_000,
) -> PhaseRun:
    """Box search through rounds of uniform quit-price search.

    Before each round, scenarios holding at most floor_c / |remaining| of the
    renormalized surviving mass are parked; the rest are replicated into
    equal-probability copies so the solver can assume uniform scenarios.  The
    round's price is the smallest at which the share of abandoned copies is
    at most outside_frac.  Covered scenarios leave for good; parked ones
    return, with renormalization lifting them over the floor eventually.
    """
    require_valid(instance)
    remaining = list(range(instance.m))
    phases: list[Phase] = []
    while remaining:
        if len(phases) >= instance.m:
            raise PolicyError("round limit exceeded without covering every scenario")
        mass = sum(instance.scenario_probs[j] for j in remaining)
        local = [instance.scenario_probs[j] / mass for j in remaining]
        expansion = expand(local, floor_c, max_copies=max_copies)
        kept = [remaining[k] for k in expansion.kept]
        copies = [remaining[k] for k in expansion.copies]
        candidates = threshold_grid(
            instance.box_costs,
            [[row[j] for j in kept] for row in instance.values],
            integer_grid=integer_grid,
        )

        def evaluate(T: Fraction):
            sub = _expanded_threshold(instance, copies, T)
            policy = solver(sub)
            outs = threshold_outcomes(sub, policy)
            bad = sum(1 for o in outs if not o.covered)
            return Fraction(bad, len(copies)) <= outside_frac, (policy, outs)

        idx, (policy, outs), warning = _grid_search(candidates, evaluate)
        T_i = candidates[idx]
        covered_set = set()
        for pos, o in enumerate(outs):
            if o.covered:
                covered_set.add(copies[pos])
        covered = [j for j in kept if j in covered_set]
        if not covered:
            raise PolicyError(
                f"round at quit price {T_i} covered nothing; instance may be uncoverable"
            )
        bad_mass = Fraction(sum(1 for o in outs if not o.covered), len(copies))
        phases.append(Phase(T_i, policy, tuple(remaining), tuple(covered), bad_mass, warning))
        remaining = [j for j in remaining if j not in covered_set]
    policy, coverage = _stitch(instance, [(ph.threshold, ph.policy) for ph in phases])
    return PhaseRun(policy, phases, coverage)
