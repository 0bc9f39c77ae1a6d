"""Exact optimal adaptive policies for small instances.

Each solver runs a memoized recursion over information states.  A state is
the pair (consistent scenarios, actions already taken): outcome labels are
deterministic per scenario, so the pair fully determines the conditional
future cost, and states reached by different observation orders can share
one memo entry.

Deliberate conventions, shared by all four solvers:

* ties between equally good actions go to the lowest action index, and a
  tie between acting and a terminal choice goes to the terminal choice that
  needs no further spending (stopping in box search, covering rather than
  quitting in threshold search),
* a single consistent scenario is solved in closed form (one best action
  remains: stop, the cheapest qualifying box, or the cheapest member),
* actions whose cost alone already meets the best candidate are skipped,
  since every action's continuation value is at least its cost.

These are reference oracles, exponential by nature.  Calls refuse instances
beyond `cap` actions or scenarios (default 12).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .model import (
    DTInstance,
    ExplicitPBInstance,
    InstanceError,
    MSSCfInstance,
    PolicyTree,
    ThresholdPBInstance,
    min_finite,
    require_valid,
)

DEFAULT_CAP = 12


class CapExceeded(RuntimeError):
    """Instance is too large for exact search under the configured cap."""


@dataclass(frozen=True)
class InfoState:
    """What an adaptive policy knows: surviving scenarios and spent actions."""

    consistent: frozenset[int]
    opened: frozenset[int]

    def open(self, action: int, keep) -> "InfoState":
        return InfoState(frozenset(k for k in self.consistent if keep(k)), self.opened | {action})


def _check_cap(n: int, m: int, cap: int) -> None:
    if n > cap or m > cap:
        raise CapExceeded(f"instance has {n} actions and {m} scenarios, cap is {cap}")


def _classes(consistent, label_of) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    for j in consistent:
        out.setdefault(label_of(j), []).append(j)
    return out


class _Memo:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.values: dict = {}
        self.choices: dict = {}

    def get(self, key):
        if self.enabled:
            return self.values.get(key)
        return None

    def put(self, key, value, choice):
        self.choices[key] = choice
        if self.enabled:
            self.values[key] = value


# ---------------------------------------------------------------------------
# box search

def opt_pb(instance: ExplicitPBInstance, cap: int = DEFAULT_CAP, memoize: bool = True) -> tuple[PolicyTree, Fraction]:
    """Optimal policy and its exact expected cost for box search."""
    require_valid(instance)
    _check_cap(instance.n, instance.m, cap)
    probs = instance.scenario_probs
    values = instance.values
    costs = instance.box_costs
    memo = _Memo(memoize)

    def best_seen(j: int, opened: frozenset[int]) -> Fraction | None:
        return min_finite(values[i][j] for i in opened)

    def solve(consistent: frozenset[int], opened: frozenset[int]) -> Fraction:
        key = (consistent, opened)
        cached = memo.get(key)
        if cached is not None:
            return cached

        if len(consistent) == 1:
            (j,) = consistent
            m0 = best_seen(j, opened)
            best, choice = m0, ("stop",)
            for b in range(instance.n):
                if b in opened:
                    continue
                v = values[b][j]
                if v.finite is None:
                    continue
                cand = costs[b] + v.finite
                if best is None or cand < best:
                    best, choice = cand, ("open", b)
            if best is None:
                raise InstanceError(f"scenario {j} has no finite value in any box")
            memo.put(key, best, choice)
            return best

        mass = sum(probs[j] for j in consistent)
        best: Fraction | None = None
        choice = None
        seen = {j: best_seen(j, opened) for j in consistent}
        if all(v is not None for v in seen.values()):
            best = sum(probs[j] * seen[j] for j in consistent) / mass
            choice = ("stop",)
        for b in range(instance.n):
            if b in opened:
                continue
            if best is not None and costs[b] >= best:
                continue
            cand = costs[b]
            classes = _classes(consistent, lambda j: values[b][j].label)
            nxt = opened | {b}
            for cls in classes.values():
                w = sum(probs[j] for j in cls)
                cand += (w / mass) * solve(frozenset(cls), nxt)
                if best is not None and cand >= best:
                    break
            if best is None or cand < best:
                best, choice = cand, ("open", b)
        if best is None:
            raise InstanceError("no finite value reachable for some scenario")
        memo.put(key, best, choice)
        return best

    def build(consistent: frozenset[int], opened: frozenset[int]) -> PolicyTree:
        solve(consistent, opened)
        choice = memo.choices[(consistent, opened)]
        if choice[0] == "stop":
            return PolicyTree.stop()
        b = choice[1]
        classes = _classes(consistent, lambda j: instance.values[b][j].label)
        return PolicyTree.act(
            b,
            {lab: build(frozenset(cls), opened | {b}) for lab, cls in classes.items()},
        )

    root = frozenset(range(instance.m))
    cost = solve(root, frozenset())
    return build(root, frozenset()), cost


# ---------------------------------------------------------------------------
# threshold search

def opt_threshold(instance: ThresholdPBInstance, cap: int = DEFAULT_CAP, memoize: bool = True) -> tuple[PolicyTree, Fraction]:
    """Optimal policy and exact expected cost for threshold search.

    States are only reached while no qualifying value has been revealed, so
    the state value is min(quit price, best expected continuation).
    """
    require_valid(instance)
    _check_cap(instance.n, instance.m, cap)
    probs = instance.scenario_probs
    costs = instance.box_costs
    T = instance.threshold
    memo = _Memo(memoize)

    def solve(consistent: frozenset[int], opened: frozenset[int]) -> Fraction:
        key = (consistent, opened)
        cached = memo.get(key)
        if cached is not None:
            return cached

        if len(consistent) == 1:
            (j,) = consistent
            best, choice = T, ("outside",)
            for b in range(instance.n):
                if b in opened:
                    continue
                if instance.qualifies(b, j) and costs[b] <= best:
                    # a tie prefers covering over quitting
                    if costs[b] < best or choice[0] == "outside":
                        best, choice = costs[b], ("open", b)
            memo.put(key, best, choice)
            return best

        mass = sum(probs[j] for j in consistent)
        best, choice = T, ("outside",)
        for b in range(instance.n):
            if b in opened:
                continue
            if costs[b] > best or (costs[b] == best and choice[0] != "outside"):
                continue
            cand = costs[b]
            classes = _classes(consistent, lambda j: instance.label(b, j))
            nxt = opened | {b}
            for lab, cls in classes.items():
                if instance.qualifies(b, cls[0]):
                    continue
                w = sum(probs[j] for j in cls)
                cand += (w / mass) * solve(frozenset(cls), nxt)
                if cand > best:
                    break
            if cand < best or (cand == best and choice[0] == "outside"):
                best, choice = cand, ("open", b)
        memo.put(key, best, choice)
        return best

    def build(consistent: frozenset[int], opened: frozenset[int]) -> PolicyTree:
        solve(consistent, opened)
        choice = memo.choices[(consistent, opened)]
        if choice[0] == "outside":
            return PolicyTree.outside()
        b = choice[1]
        classes = _classes(consistent, lambda j: instance.label(b, j))
        children = {}
        for lab, cls in classes.items():
            if instance.qualifies(b, cls[0]):
                children[lab] = PolicyTree.stop()
            else:
                children[lab] = build(frozenset(cls), opened | {b})
        return PolicyTree.act(b, children)

    root = frozenset(range(instance.m))
    cost = solve(root, frozenset())
    return build(root, frozenset()), cost


# ---------------------------------------------------------------------------
# identification

def opt_dt(instance: DTInstance, cap: int = DEFAULT_CAP, memoize: bool = True) -> tuple[PolicyTree, Fraction]:
    """Optimal identification tree and its exact expected cost."""
    require_valid(instance)
    _check_cap(instance.n, instance.m, cap)
    probs = instance.scenario_probs
    costs = instance.test_costs
    memo = _Memo(memoize)

    def solve(consistent: frozenset[int]) -> Fraction:
        cached = memo.get(consistent)
        if cached is not None:
            return cached
        if len(consistent) == 1:
            memo.put(consistent, Fraction(0), ("leaf",))
            return Fraction(0)
        mass = sum(probs[j] for j in consistent)
        best: Fraction | None = None
        choice = None
        for t in range(instance.n):
            if best is not None and costs[t] >= best:
                continue
            classes = _classes(consistent, lambda j: instance.outcomes[t][j])
            if len(classes) < 2:
                continue
            cand = costs[t]
            for cls in classes.values():
                w = sum(probs[j] for j in cls)
                cand += (w / mass) * solve(frozenset(cls))
                if best is not None and cand >= best:
                    break
            if best is None or cand < best:
                best, choice = cand, ("test", t)
        if best is None:
            raise InstanceError(f"scenarios {sorted(consistent)} cannot be told apart")
        memo.put(consistent, best, choice)
        return best

    def build(consistent: frozenset[int]) -> PolicyTree:
        solve(consistent)
        choice = memo.choices[consistent]
        if choice[0] == "leaf":
            (j,) = consistent
            return PolicyTree.identified(j)
        t = choice[1]
        classes = _classes(consistent, lambda j: instance.outcomes[t][j])
        return PolicyTree.act(t, {lab: build(frozenset(cls)) for lab, cls in classes.items()})

    root = frozenset(range(instance.m))
    cost = solve(root)
    return build(root), cost


# ---------------------------------------------------------------------------
# set cover with feedback

def opt_msscf(instance: MSSCfInstance, cap: int = DEFAULT_CAP, memoize: bool = True) -> tuple[PolicyTree, Fraction]:
    """Optimal adaptive cover policy and its exact expected cost.

    A membership hit shows the same label to every set containing the
    element, so all sets in one consistent class are covered at the same
    node and the covered branch terminates.  The state therefore never mixes
    covered and uncovered consistent sets.
    """
    require_valid(instance)
    _check_cap(instance.n, instance.m, cap)
    probs = instance.set_probs
    costs = instance.element_costs
    member = instance.membership
    memo = _Memo(memoize)

    def solve(consistent: frozenset[int], selected: frozenset[int]) -> Fraction:
        key = (consistent, selected)
        cached = memo.get(key)
        if cached is not None:
            return cached

        if len(consistent) == 1:
            (j,) = consistent
            best, choice = None, None
            for e in range(instance.n):
                if e in selected or not member[e][j]:
                    continue
                if best is None or costs[e] < best:
                    best, choice = costs[e], ("select", e)
            if best is None:
                raise InstanceError(f"set {j} cannot be covered by the remaining elements")
            memo.put(key, best, choice)
            return best

        mass = sum(probs[j] for j in consistent)
        best: Fraction | None = None
        choice = None
        for e in range(instance.n):
            if e in selected:
                continue
            if best is not None and costs[e] >= best:
                continue
            covers = any(member[e][j] for j in consistent)
            classes = _classes(consistent, lambda j: instance.label(e, j))
            if not covers and len(classes) < 2:
                continue  # neither covers nor splits: pure delay
            cand = costs[e]
            nxt = selected | {e}
            for lab, cls in classes.items():
                if member[e][cls[0]]:
                    continue  # covered branch ends here
                w = sum(probs[j] for j in cls)
                cand += (w / mass) * solve(frozenset(cls), nxt)
                if best is not None and cand >= best:
                    break
            if best is None or cand < best:
                best, choice = cand, ("select", e)
        if best is None:
            raise InstanceError("some set cannot be covered")
        memo.put(key, best, choice)
        return best

    def build(consistent: frozenset[int], selected: frozenset[int]) -> PolicyTree:
        solve(consistent, selected)
        choice = memo.choices[(consistent, selected)]
        e = choice[1]
        classes = _classes(consistent, lambda j: instance.label(e, j))
        children = {}
        for lab, cls in classes.items():
            if member[e][cls[0]]:
                children[lab] = PolicyTree.stop()
            else:
                children[lab] = build(frozenset(cls), selected | {e})
        return PolicyTree.act(e, children)

    root = frozenset(range(instance.m))
    cost = solve(root, frozenset())
    return build(root, frozenset()), cost
