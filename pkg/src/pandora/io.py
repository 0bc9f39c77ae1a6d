"""Text formats for instances and policies.

Instances are stored as one self-describing JSON document with a `problem`
field in {"pb", "pbt", "dt", "msscf", "mixture"}.  Every rational is written
in exact "p/q" form (plain integers stay plain) and infinite box values are
written "inf:<tag>", so a document round-trips bit-exactly: load(dump(x)) is
equal to x and dump(load(text)) reproduces text for documents produced here.

Policies serialize as nested JSON nodes keyed by outcome label.  The policy
format is what `pandora reduce` writes next to a transformed instance and
what `pandora backtranslate` reads back.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .model import (
    ACT,
    IDENTIFIED,
    OUTSIDE,
    STOP,
    DTInstance,
    ExplicitPBInstance,
    InstanceError,
    MSSCfInstance,
    PolicyTree,
    ThresholdPBInstance,
    Value,
)

PROBLEM_KINDS = ("pb", "pbt", "dt", "msscf", "mixture")


def format_rational(q: Fraction) -> str:
    return str(Fraction(q))


def parse_rational(text: str) -> Fraction:
    return Fraction(str(text))


def format_value(v: Value) -> str:
    return v.label


def parse_value(text: str) -> Value:
    return Value.parse(str(text))


def _rlist(xs) -> list[str]:
    return [format_rational(x) for x in xs]


def problem_kind(instance) -> str:
    from . import mixture as _mixture

    if isinstance(instance, ExplicitPBInstance):
        return "pb"
    if isinstance(instance, ThresholdPBInstance):
        return "pbt"
    if isinstance(instance, DTInstance):
        return "dt"
    if isinstance(instance, MSSCfInstance):
        return "msscf"
    if isinstance(instance, _mixture.MixturePBInstance):
        return "mixture"
    raise TypeError(f"not an instance: {type(instance).__name__}")


def instance_to_dict(instance) -> dict:
    kind = problem_kind(instance)
    if kind == "pb":
        return {
            "problem": "pb",
            "costs": _rlist(instance.box_costs),
            "probs": _rlist(instance.scenario_probs),
            "values": [[format_value(v) for v in row] for row in instance.values],
        }
    if kind == "pbt":
        return {
            "problem": "pbt",
            "costs": _rlist(instance.box_costs),
            "probs": _rlist(instance.scenario_probs),
            "values": [[format_value(v) for v in row] for row in instance.values],
            "threshold": format_rational(instance.threshold),
        }
    if kind == "dt":
        return {
            "problem": "dt",
            "costs": _rlist(instance.test_costs),
            "probs": _rlist(instance.scenario_probs),
            "outcomes": [list(row) for row in instance.outcomes],
        }
    if kind == "msscf":
        return {
            "problem": "msscf",
            "costs": _rlist(instance.element_costs),
            "probs": _rlist(instance.set_probs),
            "membership": [[1 if b else 0 for b in row] for row in instance.membership],
            "feedback": [list(row) for row in instance.feedback],
        }
    # mixture
    return {
        "problem": "mixture",
        "costs": _rlist(instance.box_costs),
        "weights": _rlist(instance.component_weights),
        "epsilon": format_rational(instance.epsilon),
        "dists": [
            [
                [[format_rational(v), format_rational(p)] for v, p in dist.items]
                for dist in row
            ]
            for row in instance.dists
        ],
    }


def instance_from_dict(doc: dict):
    kind = doc.get("problem")
    if kind not in PROBLEM_KINDS:
        raise InstanceError(f"unknown problem kind {kind!r}")
    if kind == "pb":
        return ExplicitPBInstance(
            [parse_rational(c) for c in doc["costs"]],
            [parse_rational(p) for p in doc["probs"]],
            [[parse_value(v) for v in row] for row in doc["values"]],
        )
    if kind == "pbt":
        return ThresholdPBInstance(
            [parse_rational(c) for c in doc["costs"]],
            [parse_rational(p) for p in doc["probs"]],
            [[parse_value(v) for v in row] for row in doc["values"]],
            parse_rational(doc["threshold"]),
        )
    if kind == "dt":
        return DTInstance(
            [parse_rational(c) for c in doc["costs"]],
            [parse_rational(p) for p in doc["probs"]],
            doc["outcomes"],
        )
    if kind == "msscf":
        return MSSCfInstance(
            [parse_rational(c) for c in doc["costs"]],
            [parse_rational(p) for p in doc["probs"]],
            [[bool(b) for b in row] for row in doc["membership"]],
            doc["feedback"],
        )
    from . import mixture as _mixture

    return _mixture.MixturePBInstance(
        [parse_rational(c) for c in doc["costs"]],
        [parse_rational(w) for w in doc["weights"]],
        [
            [
                _mixture.FiniteDist([(parse_rational(v), parse_rational(p)) for v, p in dist])
                for dist in row
            ]
            for row in doc["dists"]
        ],
        parse_rational(doc["epsilon"]),
    )


def dumps_instance(instance) -> str:
    return json.dumps(instance_to_dict(instance), indent=1, sort_keys=True) + "\n"


def loads_instance(text: str):
    return instance_from_dict(json.loads(text))


def save_instance(instance, path) -> None:
    Path(path).write_text(dumps_instance(instance))


def load_instance(path):
    return loads_instance(Path(path).read_text())


# ---------------------------------------------------------------------------
# policies

def policy_to_dict(node: PolicyTree) -> dict:
    if node.kind == STOP:
        return {"kind": "stop"}
    if node.kind == OUTSIDE:
        return {"kind": "outside"}
    if node.kind == IDENTIFIED:
        return {"kind": "identified", "scenario": node.scenario}
    return {
        "kind": "act",
        "action": node.action,
        "children": {lab: policy_to_dict(child) for lab, child in node.children.items()},
    }


def policy_from_dict(doc: dict) -> PolicyTree:
    kind = doc.get("kind")
    if kind == "stop":
        return PolicyTree.stop()
    if kind == "outside":
        return PolicyTree.outside()
    if kind == "identified":
        return PolicyTree.identified(int(doc["scenario"]))
    if kind == "act":
        return PolicyTree.act(
            int(doc["action"]),
            {lab: policy_from_dict(child) for lab, child in doc["children"].items()},
        )
    raise InstanceError(f"unknown policy node kind {kind!r}")


def dumps_policy(node: PolicyTree) -> str:
    return json.dumps(policy_to_dict(node), indent=1, sort_keys=True) + "\n"


def loads_policy(text: str) -> PolicyTree:
    return policy_from_dict(json.loads(text))


def save_policy(node: PolicyTree, path) -> None:
    Path(path).write_text(dumps_policy(node))


def load_policy(path) -> PolicyTree:
    return loads_policy(Path(path).read_text())
