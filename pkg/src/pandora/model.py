"""Shared problem instances, adaptive policies, and exact evaluators.

Four sequential decision problems share one representation layer:

* correlated Pandora's box search: open boxes at known costs until you stop
  and keep the smallest value revealed so far,
* its threshold variant: find any value at or below a quit price T, or pay T,
* scenario identification through costed tests (adaptive decision trees),
* min-sum set cover with feedback: select elements until the realized set
  contains one of them, learning a feedback label on every miss.

An instance couples a cost vector (one entry per action), a probability
vector (one entry per scenario), and an action-by-scenario outcome matrix.
Probabilities, costs, and values are exact `fractions.Fraction` so that the
inequality checks made elsewhere in the package hold with equality semantics
rather than tolerances.  Monte-Carlo simulation is the one place floats
appear.

A policy is a finite tree.  Each internal node names the action to take next
and maps every outcome label observable there to a subtree.  Labels are
opaque strings.  The label of a revealed box value is its exact text form
("3", "7/2", "inf:foo"), which keeps policies portable across the instance
transformations in `pandora.reductions`: a transformed instance produces the
same label stream as its source wherever the constructions need trees to be
carried over.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Sequence


class PolicyError(Exception):
    """A policy is malformed or infeasible for the instance at hand."""


class InstanceError(ValueError):
    """An instance violates a structural requirement."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}: {x!r}")


# ---------------------------------------------------------------------------
# values

_INF_PREFIX = "inf:"


@dataclass(frozen=True)
class Value:
    """A box outcome: either a finite nonnegative rational or a tagged infinity.

    Tagged infinities all share the same magnitude (larger than every finite
    value) but remain distinguishable by tag, so a policy can branch on which
    infinity it saw.  They are never paid: an evaluator that would have to
    charge one raises instead.
    """

    finite: Fraction | None
    tag: str | None = None

    @staticmethod
    def of(x) -> "Value":
        return Value(_frac(x), None)

    @staticmethod
    def inf(tag: str) -> "Value":
        if not tag:
            raise InstanceError("infinite values need a nonempty tag")
        return Value(None, str(tag))

    @property
    def is_finite(self) -> bool:
        return self.finite is not None

    @property
    def label(self) -> str:
        """Exact text form, also the outcome label a policy branches on."""
        if self.finite is not None:
            return str(self.finite)
        return _INF_PREFIX + str(self.tag)

    @staticmethod
    def parse(text: str) -> "Value":
        if text.startswith(_INF_PREFIX):
            return Value.inf(text[len(_INF_PREFIX):])
        return Value.of(Fraction(text))

    def _mag(self):
        # magnitude key: every infinity sits above every finite value
        return (1,) if self.finite is None else (0, self.finite)

    def __lt__(self, other: "Value") -> bool:
        return self._mag() < other._mag()

    def __le__(self, other: "Value") -> bool:
        return self._mag() <= other._mag()

    def __gt__(self, other: "Value") -> bool:
        return self._mag() > other._mag()

    def __ge__(self, other: "Value") -> bool:
        return self._mag() >= other._mag()

    def __repr__(self) -> str:
        return f"Value({self.label!r})"


def min_finite(values: Iterable[Value]) -> Fraction | None:
    """Smallest finite magnitude among `values`, or None if all are infinite."""
    best: Fraction | None = None
    for v in values:
        if v.finite is not None and (best is None or v.finite < best):
            best = v.finite
    return best


# ---------------------------------------------------------------------------
# instances

def _prob_tuple(probs) -> tuple[Fraction, ...]:
    out = tuple(_frac(p) for p in probs)
    return out


def _cost_tuple(costs) -> tuple[Fraction, ...]:
    return tuple(_frac(c) for c in costs)


def _value_matrix(values) -> tuple[tuple[Value, ...], ...]:
    rows = []
    for row in values:
        cells = []
        for cell in row:
            if isinstance(cell, Value):
                cells.append(cell)
            else:
                cells.append(Value.of(cell))
        rows.append(tuple(cells))
    return tuple(rows)


@dataclass(frozen=True)
class ExplicitPBInstance:
    """Pandora's box search over an explicit scenario list.

    `values[i][j]` is what box i reveals under scenario j.  The searcher pays
    `box_costs[i]` to open box i, may stop once every scenario still
    consistent with its observations has some finite value on the table, and
    then pays the smallest value it has revealed.
    """

    box_costs: tuple[Fraction, ...]
    scenario_probs: tuple[Fraction, ...]
    values: tuple[tuple[Value, ...], ...]

    def __init__(self, box_costs, scenario_probs, values):
        object.__setattr__(self, "box_costs", _cost_tuple(box_costs))
        object.__setattr__(self, "scenario_probs", _prob_tuple(scenario_probs))
        object.__setattr__(self, "values", _value_matrix(values))

    @property
    def n(self) -> int:
        return len(self.box_costs)

    @property
    def m(self) -> int:
        return len(self.scenario_probs)

    def label(self, i: int, j: int) -> str:
        return self.values[i][j].label


@dataclass(frozen=True)
class ThresholdPBInstance:
    """Pandora's box search with a quit price.

    The searcher either reveals some value at or below `threshold` (the
    search then ends, values themselves are not paid) or gives up and pays
    `threshold` on top of the opening costs spent.
    """

    box_costs: tuple[Fraction, ...]
    scenario_probs: tuple[Fraction, ...]
    values: tuple[tuple[Value, ...], ...]
    threshold: Fraction

    def __init__(self, box_costs, scenario_probs, values, threshold):
        object.__setattr__(self, "box_costs", _cost_tuple(box_costs))
        object.__setattr__(self, "scenario_probs", _prob_tuple(scenario_probs))
        object.__setattr__(self, "values", _value_matrix(values))
        object.__setattr__(self, "threshold", _frac(threshold))

    @property
    def n(self) -> int:
        return len(self.box_costs)

    @property
    def m(self) -> int:
        return len(self.scenario_probs)

    def label(self, i: int, j: int) -> str:
        return self.values[i][j].label

    def qualifies(self, i: int, j: int) -> bool:
        v = self.values[i][j]
        return v.finite is not None and v.finite <= self.threshold


@dataclass(frozen=True)
class DTInstance:
    """Scenario identification by costed tests.

    Running test i under scenario j shows the opaque label `outcomes[i][j]`.
    A policy must single out the realized scenario on every branch; its cost
    is the expected total test cost spent.
    """

    test_costs: tuple[Fraction, ...]
    scenario_probs: tuple[Fraction, ...]
    outcomes: tuple[tuple[str, ...], ...]

    def __init__(self, test_costs, scenario_probs, outcomes):
        object.__setattr__(self, "test_costs", _cost_tuple(test_costs))
        object.__setattr__(self, "scenario_probs", _prob_tuple(scenario_probs))
        object.__setattr__(self, "outcomes", tuple(tuple(str(o) for o in row) for row in outcomes))

    @property
    def n(self) -> int:
        return len(self.test_costs)

    @property
    def m(self) -> int:
        return len(self.scenario_probs)

    def label(self, i: int, j: int) -> str:
        return self.outcomes[i][j]


@dataclass(frozen=True)
class MSSCfInstance:
    """Min-sum set cover with feedback.

    Scenario j is a set of elements.  Selecting element i costs
    `element_costs[i]`; if i belongs to the realized set the search for that
    set is over (it is covered), otherwise the searcher learns the label
    `feedback[i][j]`.  The objective charges each set the cumulative cost of
    the selections made up to and including its first member.
    """

    element_costs: tuple[Fraction, ...]
    set_probs: tuple[Fraction, ...]
    membership: tuple[tuple[bool, ...], ...]
    feedback: tuple[tuple[str, ...], ...]

    def __init__(self, element_costs, set_probs, membership, feedback):
        object.__setattr__(self, "element_costs", _cost_tuple(element_costs))
        object.__setattr__(self, "set_probs", _prob_tuple(set_probs))
        object.__setattr__(self, "membership", tuple(tuple(bool(b) for b in row) for row in membership))
        object.__setattr__(self, "feedback", tuple(tuple(str(f) for f in row) for row in feedback))

    @property
    def n(self) -> int:
        return len(self.element_costs)

    @property
    def m(self) -> int:
        return len(self.set_probs)

    def label(self, i: int, j: int) -> str:
        """Observed label when selecting element i under realized set j.

        A membership hit shows as the plain label "0" (the search learns the
        set is covered, not which set it is); a miss shows the feedback label
        behind an "inf:" prefix so hits and misses can never collide.
        """
        if self.membership[i][j]:
            return "0"
        return _INF_PREFIX + self.feedback[i][j]


Instance = ExplicitPBInstance | ThresholdPBInstance | DTInstance | MSSCfInstance


# ---------------------------------------------------------------------------
# policies

ACT = "act"
STOP = "stop"
OUTSIDE = "outside"
IDENTIFIED = "identified"


@dataclass(frozen=True)
class PolicyTree:
    """One node of an adaptive policy.

    kind "act" carries the action index and one child per observable label.
    kind "stop" keeps the best value revealed so far (box search),
    kind "outside" pays the quit price (threshold search),
    kind "identified" names the scenario singled out (identification).
    """

    kind: str
    action: int | None = None
    children: Mapping[str, "PolicyTree"] | None = None
    scenario: int | None = None

    @staticmethod
    def act(action: int, children: Mapping[str, "PolicyTree"]) -> "PolicyTree":
        return PolicyTree(ACT, action=int(action), children=dict(children))

    @staticmethod
    def stop() -> "PolicyTree":
        return PolicyTree(STOP)

    @staticmethod
    def outside() -> "PolicyTree":
        return PolicyTree(OUTSIDE)

    @staticmethod
    def identified(scenario: int) -> "PolicyTree":
        return PolicyTree(IDENTIFIED, scenario=int(scenario))

    def size(self) -> int:
        if self.kind != ACT:
            return 1
        return 1 + sum(child.size() for child in self.children.values())

    def depth(self) -> int:
        if self.kind != ACT:
            return 0
        return 1 + max(child.depth() for child in self.children.values())

    def actions_on_path(self, labels: Sequence[str]) -> list[int]:
        """Actions taken when the observed labels are `labels`, in order."""
        node, taken = self, []
        for lab in labels:
            if node.kind != ACT:
                break
            taken.append(node.action)
            node = node.children[lab]
        return taken


def render_policy(node: PolicyTree, indent: str = "") -> str:
    """Human-readable indented rendering used by the command line."""
    if node.kind == STOP:
        return indent + "stop"
    if node.kind == OUTSIDE:
        return indent + "take outside option"
    if node.kind == IDENTIFIED:
        return indent + f"scenario {node.scenario}"
    lines = [indent + f"act {node.action}"]
    for lab in sorted(node.children):
        lines.append(indent + f"  [{lab}]")
        lines.append(render_policy(node.children[lab], indent + "    "))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# validation

def validate(instance) -> list[str]:
    """Structural checks.  Returns human-readable violations, empty if valid."""
    problems: list[str] = []

    def check_probs(probs):
        if not probs:
            problems.append("no scenarios")
            return
        if any(p <= 0 for p in probs):
            problems.append("scenario probabilities must be positive")
        if sum(probs) != 1:
            problems.append(f"scenario probabilities sum to {sum(probs)}, not 1")

    def check_costs(costs, what):
        if not costs:
            problems.append(f"no {what}")
        if any(c < 0 for c in costs):
            problems.append(f"{what} costs must be nonnegative")

    def check_matrix(matrix, n, m, what):
        if len(matrix) != n:
            problems.append(f"{what} matrix has {len(matrix)} rows, expected {n}")
            return False
        for row in matrix:
            if len(row) != m:
                problems.append(f"{what} matrix row has {len(row)} entries, expected {m}")
                return False
        return True

    if isinstance(instance, (ExplicitPBInstance, ThresholdPBInstance)):
        check_costs(instance.box_costs, "box")
        check_probs(instance.scenario_probs)
        if check_matrix(instance.values, instance.n, instance.m, "value"):
            for i in range(instance.n):
                for j in range(instance.m):
                    v = instance.values[i][j]
                    if v.finite is not None and v.finite < 0:
                        problems.append(f"negative value at box {i}, scenario {j}")
        if isinstance(instance, ThresholdPBInstance) and instance.threshold < 0:
            problems.append("threshold must be nonnegative")
    elif isinstance(instance, DTInstance):
        check_costs(instance.test_costs, "test")
        check_probs(instance.scenario_probs)
        if check_matrix(instance.outcomes, instance.n, instance.m, "outcome"):
            for j in range(instance.m):
                for k in range(j + 1, instance.m):
                    if all(instance.outcomes[i][j] == instance.outcomes[i][k] for i in range(instance.n)):
                        problems.append(f"scenarios {j} and {k} are indistinguishable")
    elif isinstance(instance, MSSCfInstance):
        check_costs(instance.element_costs, "element")
        check_probs(instance.set_probs)
        ok = check_matrix(instance.membership, instance.n, instance.m, "membership")
        ok = check_matrix(instance.feedback, instance.n, instance.m, "feedback") and ok
        if ok:
            for j in range(instance.m):
                if not any(instance.membership[i][j] for i in range(instance.n)):
                    problems.append(f"set {j} has no member element and can never be covered")
    else:
        problems.append(f"unknown instance type {type(instance).__name__}")
    return problems


def require_valid(instance) -> None:
    problems = validate(instance)
    if problems:
        raise InstanceError("; ".join(problems))


# ---------------------------------------------------------------------------
# exact evaluation

def _child(node: PolicyTree, label: str, what: str) -> PolicyTree:
    child = node.children.get(label)
    if child is None:
        raise PolicyError(f"{what}: no branch for observed label {label!r} after action {node.action}")
    return child


def pb_scenario_cost(instance: ExplicitPBInstance, policy: PolicyTree, j: int) -> Fraction:
    """Opening costs plus the kept value when scenario j drives the walk."""
    node = node_start = policy
    spent = Fraction(0)
    best: Fraction | None = None
    seen: set[int] = set()
    while node.kind == ACT:
        i = node.action
        if i in seen:
            raise PolicyError(f"box {i} opened twice on one path")
        seen.add(i)
        spent += instance.box_costs[i]
        v = instance.values[i][j]
        if v.finite is not None and (best is None or v.finite < best):
            best = v.finite
        node = _child(node, v.label, "box search")
    if node.kind == OUTSIDE:
        raise PolicyError("box search has no outside option")
    if node.kind != STOP:
        raise PolicyError(f"box search paths must end by stopping, got {node.kind!r}")
    if best is None:
        raise PolicyError(f"scenario {j}: stopped with no finite value revealed")
    return spent + best


def eval_pb(instance: ExplicitPBInstance, policy: PolicyTree) -> Fraction:
    return sum(
        p * pb_scenario_cost(instance, policy, j)
        for j, p in enumerate(instance.scenario_probs)
    )


class ThresholdOutcome(NamedTuple):
    cost: Fraction
    covered: bool


def threshold_scenario_outcome(instance: ThresholdPBInstance, policy: PolicyTree, j: int) -> ThresholdOutcome:
    """Cost charged to scenario j, and whether it found a qualifying value.

    Costs accrue up to and including the opening that reveals the first value
    at or below the threshold; whatever the tree does beyond that node is not
    charged.  A path that gives up pays its opening costs plus the threshold.
    """
    node = policy
    spent = Fraction(0)
    seen: set[int] = set()
    while node.kind == ACT:
        i = node.action
        if i in seen:
            raise PolicyError(f"box {i} opened twice on one path")
        seen.add(i)
        spent += instance.box_costs[i]
        if instance.qualifies(i, j):
            return ThresholdOutcome(spent, True)
        node = _child(node, instance.label(i, j), "threshold search")
    if node.kind == OUTSIDE:
        return ThresholdOutcome(spent + instance.threshold, False)
    if node.kind == STOP:
        raise PolicyError(f"scenario {j}: stopped without a value at or below the threshold")
    raise PolicyError(f"threshold search cannot end with {node.kind!r}")


def threshold_outcomes(instance: ThresholdPBInstance, policy: PolicyTree) -> list[ThresholdOutcome]:
    return [threshold_scenario_outcome(instance, policy, j) for j in range(instance.m)]


def eval_threshold(instance: ThresholdPBInstance, policy: PolicyTree) -> Fraction:
    return sum(
        p * threshold_scenario_outcome(instance, policy, j).cost
        for j, p in enumerate(instance.scenario_probs)
    )


def dt_scenario_cost(instance: DTInstance, policy: PolicyTree, j: int) -> Fraction:
    node = policy
    spent = Fraction(0)
    seen: set[int] = set()
    consistent = set(range(instance.m))
    while node.kind == ACT:
        i = node.action
        if i in seen:
            raise PolicyError(f"test {i} run twice on one path")
        seen.add(i)
        spent += instance.test_costs[i]
        lab = instance.outcomes[i][j]
        consistent = {k for k in consistent if instance.outcomes[i][k] == lab}
        node = _child(node, lab, "identification")
    if node.kind != IDENTIFIED:
        raise PolicyError(f"identification paths must end by naming a scenario, got {node.kind!r}")
    if len(consistent) > 1:
        raise PolicyError(f"leaf still consistent with scenarios {sorted(consistent)}")
    if node.scenario != j:
        raise PolicyError(f"scenario {j} misidentified as {node.scenario}")
    return spent


def eval_dt(instance: DTInstance, policy: PolicyTree) -> Fraction:
    return sum(
        p * dt_scenario_cost(instance, policy, j)
        for j, p in enumerate(instance.scenario_probs)
    )


def msscf_scenario_cost(instance: MSSCfInstance, policy: PolicyTree, j: int) -> Fraction:
    """Cumulative selection cost until set j is covered."""
    node = policy
    spent = Fraction(0)
    seen: set[int] = set()
    while node.kind == ACT:
        i = node.action
        if i in seen:
            raise PolicyError(f"element {i} selected twice on one path")
        seen.add(i)
        spent += instance.element_costs[i]
        if instance.membership[i][j]:
            return spent
        node = _child(node, instance.label(i, j), "set cover")
    raise PolicyError(f"set {j} reaches a leaf without being covered")


def eval_msscf(instance: MSSCfInstance, policy: PolicyTree) -> Fraction:
    return sum(
        p * msscf_scenario_cost(instance, policy, j)
        for j, p in enumerate(instance.set_probs)
    )


# ---------------------------------------------------------------------------
# Monte-Carlo simulation

class SimulationResult(NamedTuple):
    mean: float
    stderr: float


def _scenario_cost_fn(instance):
    if isinstance(instance, ExplicitPBInstance):
        return pb_scenario_cost, instance.scenario_probs
    if isinstance(instance, ThresholdPBInstance):
        return (lambda inst, pol, j: threshold_scenario_outcome(inst, pol, j).cost), instance.scenario_probs
    if isinstance(instance, DTInstance):
        return dt_scenario_cost, instance.scenario_probs
    if isinstance(instance, MSSCfInstance):
        return msscf_scenario_cost, instance.set_probs
    raise TypeError(f"cannot simulate {type(instance).__name__}")


def simulate(instance, policy, trials: int, seed: int) -> SimulationResult:
    """Empirical mean cost over seeded random scenario draws.

    Sampling and averaging run in binary floating point; the exact evaluators
    are the reference the sample mean is expected to approach.  Mixture
    instances draw a component and then a value for every box the policy
    opens.  Returns the sample mean and its standard error.
    """
    if trials <= 0:
        raise ValueError("simulation needs at least one trial")
    rng = random.Random(seed)
    if hasattr(instance, "component_weights"):
        from . import mixture as _mixture

        costs = _mixture.sample_costs(instance, policy, trials, rng)
    else:
        per_scenario, probs = _scenario_cost_fn(instance)
        cumulative = []
        acc = 0.0
        for p in probs:
            acc += float(p)
            cumulative.append(acc)
        cache: dict[int, float] = {}
        costs = []
        for _ in range(trials):
            u = rng.random()
            j = next((k for k, q in enumerate(cumulative) if u < q), len(cumulative) - 1)
            if j not in cache:
                cache[j] = float(per_scenario(instance, policy, j))
            costs.append(cache[j])
    mean = sum(costs) / trials
    if trials == 1:
        return SimulationResult(mean, 0.0)
    var = sum((c - mean) ** 2 for c in costs) / (trials - 1)
    return SimulationResult(mean, math.sqrt(var / trials))
