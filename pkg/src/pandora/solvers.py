"""Polynomial-time policies: greedy rules and the two composed pipelines.

All greedy rules share one comparator: candidate a beats candidate b when
a's gain per unit cost is strictly larger, with zero-cost candidates ranked
by gain alone ahead of any positive-cost one, and ties going to the lowest
action index.  Ratios are compared by cross multiplication so everything
stays rational.
"""

from __future__ import annotations

import logging
from fractions import Fraction
from typing import Sequence

from . import oracles, reductions
from .model import (
    DTInstance,
    ExplicitPBInstance,
    InstanceError,
    MSSCfInstance,
    PolicyTree,
    ThresholdPBInstance,
    eval_msscf,
    require_valid,
)

log = logging.getLogger(__name__)


def _beats(gain_a: Fraction, cost_a: Fraction, gain_b: Fraction, cost_b: Fraction) -> bool:
    """gain_a / cost_a > gain_b / cost_b with x / 0 read as infinite for x > 0."""
    if cost_a == 0 and cost_b == 0:
        return gain_a > gain_b
    return gain_a * cost_b > gain_b * cost_a


# ---------------------------------------------------------------------------
# set cover with feedback

def greedy_msscf(instance: MSSCfInstance) -> PolicyTree:
    """Repeatedly select the element covering the most surviving probability
    mass per unit cost."""
    require_valid(instance)
    costs = instance.element_costs
    probs = instance.set_probs

    def build(consistent: tuple[int, ...], selected: frozenset[int]) -> PolicyTree:
        best = None
        best_gain = best_cost = None
        for e in range(instance.n):
            if e in selected:
                continue
            gain = sum((probs[j] for j in consistent if instance.membership[e][j]), Fraction(0))
            if gain == 0:
                continue
            if best is None or _beats(gain, costs[e], best_gain, best_cost):
                best, best_gain, best_cost = e, gain, costs[e]
        if best is None:
            raise InstanceError(f"sets {consistent} have no unselected member")
        classes: dict[str, list[int]] = {}
        for j in consistent:
            classes.setdefault(instance.label(best, j), []).append(j)
        children = {}
        for lab, cls in classes.items():
            if instance.membership[best][cls[0]]:
                children[lab] = PolicyTree.stop()
            else:
                children[lab] = build(tuple(cls), selected | {best})
        return PolicyTree.act(best, children)

    return build(tuple(range(instance.m)), frozenset())


def nonadaptive_mssc_order(instance: MSSCfInstance) -> tuple[int, ...]:
    """Feedback-blind selection order: repeatedly take the element covering
    the most not-yet-covered probability mass per unit cost, then append the
    leftovers.  The induced policy (see `order_policy`) selects along the
    order and stops at the first membership hit."""
    require_valid(instance)
    uncovered = set(range(instance.m))
    chosen: list[int] = []
    taken: set[int] = set()
    while uncovered:
        best = None
        best_gain = best_cost = None
        for e in range(instance.n):
            if e in taken:
                continue
            gain = sum(
                (instance.set_probs[j] for j in uncovered if instance.membership[e][j]),
                Fraction(0),
            )
            if gain == 0:
                continue
            if best is None or _beats(gain, instance.element_costs[e], best_gain, best_cost):
                best, best_gain, best_cost = e, gain, instance.element_costs[e]
        if best is None:
            raise InstanceError(f"sets {sorted(uncovered)} have no unselected member")
        chosen.append(best)
        taken.add(best)
        uncovered = {j for j in uncovered if not instance.membership[best][j]}
    chosen.extend(e for e in range(instance.n) if e not in taken)
    return tuple(chosen)


def order_policy(instance: MSSCfInstance, order: Sequence[int]) -> PolicyTree:
    """Policy that selects along a fixed order, ignoring feedback, and stops
    at the first membership hit."""

    def build(pos: int, consistent: tuple[int, ...]) -> PolicyTree:
        if pos >= len(order):
            raise InstanceError(f"order {order} never covers sets {consistent}")
        e = order[pos]
        classes: dict[str, list[int]] = {}
        for j in consistent:
            classes.setdefault(instance.label(e, j), []).append(j)
        children = {}
        for lab, cls in classes.items():
            if instance.membership[e][cls[0]]:
                children[lab] = PolicyTree.stop()
            else:
                children[lab] = build(pos + 1, tuple(cls))
        return PolicyTree.act(e, children)

    return build(0, tuple(range(instance.m)))


def order_cost(instance: MSSCfInstance, order: Sequence[int]) -> Fraction:
    return eval_msscf(instance, order_policy(instance, order))


def best_order_cost(instance: MSSCfInstance) -> Fraction:
    """Cheapest fixed selection order, by enumeration.  Exponential; only for
    cross-checking the nonadaptive rule on small instances."""
    import itertools

    best = None
    for perm in itertools.permutations(range(instance.n)):
        pos = {e: k for k, e in enumerate(perm)}
        total = Fraction(0)
        for j in range(instance.m):
            first = min(
                (pos[e] for e in range(instance.n) if instance.membership[e][j]),
                default=None,
            )
            if first is None:
                raise InstanceError(f"set {j} has no member")
            total += instance.set_probs[j] * sum(
                (instance.element_costs[perm[k]] for k in range(first + 1)), Fraction(0)
            )
        if best is None or total < best:
            best = total
    return best


# ---------------------------------------------------------------------------
# identification

def _pairs(k: int) -> int:
    return k * (k - 1) // 2


def greedy_dt(instance: DTInstance) -> PolicyTree:
    """Repeatedly run the test separating the most still-confusable scenario
    pairs per unit cost."""
    require_valid(instance)

    def build(consistent: tuple[int, ...], run: frozenset[int]) -> PolicyTree:
        if len(consistent) == 1:
            return PolicyTree.identified(consistent[0])
        best = None
        best_gain = best_cost = None
        best_classes = None
        for t in range(instance.n):
            if t in run:
                continue
            classes: dict[str, list[int]] = {}
            for j in consistent:
                classes.setdefault(instance.outcomes[t][j], []).append(j)
            if len(classes) < 2:
                continue
            gain = Fraction(_pairs(len(consistent)) - sum(_pairs(len(c)) for c in classes.values()))
            if best is None or _beats(gain, instance.test_costs[t], best_gain, best_cost):
                best, best_gain, best_cost = t, gain, instance.test_costs[t]
                best_classes = classes
        if best is None:
            raise InstanceError(f"scenarios {consistent} cannot be told apart")
        return PolicyTree.act(
            best,
            {lab: build(tuple(cls), run | {best}) for lab, cls in best_classes.items()},
        )

    return build(tuple(range(instance.m)), frozenset())


# ---------------------------------------------------------------------------
# quit-price search

def greedy_threshold(instance: ThresholdPBInstance) -> PolicyTree:
    """Separate scenarios greedily, then buy the cheapest qualifying box.

    While the surviving scenarios disagree on some unopened box, open the box
    separating the most pairs per unit cost; branches that reveal a value at
    or below the quit price stop there.  Once all survivors look alike, the
    choice is the cheapest box revealing a qualifying value, against giving
    up at the quit price; covering wins ties.
    """
    require_valid(instance)
    T = instance.threshold

    def build(consistent: tuple[int, ...], opened: frozenset[int]) -> PolicyTree:
        best = None
        best_gain = best_cost = None
        best_classes = None
        for b in range(instance.n):
            if b in opened:
                continue
            classes: dict[str, list[int]] = {}
            for j in consistent:
                classes.setdefault(instance.label(b, j), []).append(j)
            if len(classes) < 2:
                continue
            gain = Fraction(_pairs(len(consistent)) - sum(_pairs(len(c)) for c in classes.values()))
            if best is None or _beats(gain, instance.box_costs[b], best_gain, best_cost):
                best, best_gain, best_cost = b, gain, instance.box_costs[b]
                best_classes = classes
        if best is None:
            # all survivors agree on every unopened box
            cover = None
            for b in range(instance.n):
                if b in opened or not instance.qualifies(b, consistent[0]):
                    continue
                if cover is None or instance.box_costs[b] < instance.box_costs[cover]:
                    cover = b
            if cover is not None and instance.box_costs[cover] <= T:
                lab = instance.label(cover, consistent[0])
                return PolicyTree.act(cover, {lab: PolicyTree.stop()})
            return PolicyTree.outside()
        children = {}
        for lab, cls in best_classes.items():
            if instance.qualifies(best, cls[0]):
                children[lab] = PolicyTree.stop()
            else:
                children[lab] = build(tuple(cls), opened | {best})
        return PolicyTree.act(best, children)

    return build(tuple(range(instance.m)), frozenset())


# ---------------------------------------------------------------------------
# exact adapters, for use as phase solvers

def exact_threshold_solver(cap: int = oracles.DEFAULT_CAP):
    def solver(instance: ThresholdPBInstance) -> PolicyTree:
        policy, _ = oracles.opt_threshold(instance, cap=cap)
        return policy

    return solver


# ---------------------------------------------------------------------------
# composed pipelines for box search

def pipeline_pb_direct(instance: ExplicitPBInstance) -> PolicyTree:
    """Shift values out of reach, solve the quit-price instance greedily,
    translate back."""
    require_valid(instance)
    cert = reductions.pb_to_pbt_naive(instance)
    forward_policy = greedy_threshold(cert.forward)
    policy = cert.back_translate(forward_policy)
    log.debug("direct pipeline: quit price %s, %d forward actions", cert.forward.threshold, cert.forward.n)
    return policy


def _via_udt_threshold_solver(tinstance: ThresholdPBInstance) -> PolicyTree:
    cover_cert = reductions.pbt_to_umsscf(tinstance)
    ident_cert = reductions.msscf_to_dt(cover_cert.forward)
    ident_policy = greedy_dt(ident_cert.forward)
    cover_policy = ident_cert.back_translate(ident_policy)
    return cover_cert.back_translate(cover_policy)


def pipeline_pb_via_udt(instance: ExplicitPBInstance) -> reductions.PhaseRun:
    """Box search routed through covering and identification.

    Rounds of uniform quit-price search (low-probability scenarios parked,
    the rest split into equal copies); each round's quit-price instance is
    recast as set cover with feedback, that as identification, the greedy
    identification tree is translated back down the chain, and the per-round
    policies are stitched together.  Quit prices are kept integral because
    the covering recast needs a whole number of outside elements.
    """
    require_valid(instance)
    return reductions.pb_phases_uniform(instance, _via_udt_threshold_solver, integer_grid=True)
