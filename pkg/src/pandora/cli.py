"""Command line front end.

Verbs: generate, oracle, solve, reduce, backtranslate, pipeline,
mixture-solve, corpus.  Instances and policies travel as the JSON documents
described in the io module; reduce writes a sidecar file recording what each
action of the transformed instance means, and backtranslate uses that sidecar
to rebuild the translation and carry a policy back to the source instance.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import corpus as corpus_mod
from . import generators, io, mixture, oracles, reductions, solvers
from .model import eval_dt, eval_msscf, eval_pb, eval_threshold, render_policy

_EVALUATORS = {
    "pb": eval_pb,
    "pbt": eval_threshold,
    "dt": eval_dt,
    "msscf": eval_msscf,
}

_ORACLES = {
    "pb": oracles.opt_pb,
    "pbt": oracles.opt_threshold,
    "dt": oracles.opt_dt,
    "msscf": oracles.opt_msscf,
}

_REDUCTIONS = {
    "cover-to-search": ("msscf", reductions.msscf_to_pb),
    "cover-to-identification": ("msscf", reductions.msscf_to_dt),
    "search-to-price": ("pb", reductions.pb_to_pbt_naive),
    "price-to-cover": ("pbt", reductions.pbt_to_umsscf),
    "identification-to-cover": ("dt", reductions.udt_to_umsscf),
}


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(path: str):
    instance = io.load_instance(path)
    return instance, io.problem_kind(instance)


def cmd_generate(args) -> int:
    kind = args.kind
    if kind == "pb":
        instance = generators.gen_explicit(
            args.n, args.m, args.seed, support=args.support, cost_mode=args.cost_mode, uniform=args.uniform
        )
    elif kind == "pbt":
        threshold = Fraction(args.threshold) if args.threshold else None
        instance = generators.gen_threshold(
            args.n,
            args.m,
            args.seed,
            threshold=threshold,
            support=args.support,
            cost_mode=args.cost_mode,
            uniform=args.uniform,
        )
    elif kind == "dt":
        instance = generators.gen_dt(args.n, args.m, args.seed, cost_mode=args.cost_mode)
    elif kind == "msscf":
        instance = generators.gen_msscf(
            args.n, args.m, args.seed, density=args.density, cost_mode=args.cost_mode, uniform=args.uniform
        )
    elif kind == "mixture":
        instance = generators.gen_mixture(args.n, args.m, args.seed, epsilon=Fraction(args.epsilon))
    else:
        raise SystemExit(f"unknown kind {kind!r}")
    _write_or_print(io.dumps_instance(instance), args.out)
    return 0


def _emit_policy(kind: str, policy, cost, fmt: str, out: str | None, extra=None) -> None:
    if out:
        Path(out).write_text(io.dumps_policy(policy))
    if fmt == "json":
        doc = {"problem": kind, "cost": str(cost), "policy": io.policy_to_dict(policy)}
        if extra:
            doc.update(extra)
        print(json.dumps(doc, indent=1, sort_keys=True))
    else:
        print(f"expected cost: {cost}")
        if extra:
            for key, value in extra.items():
                print(f"{key}: {value}")
        print(render_policy(policy), end="")


def cmd_oracle(args) -> int:
    instance, kind = _load(args.instance)
    if kind == "mixture":
        raise SystemExit("use mixture-solve for mixture instances")
    policy, cost = _ORACLES[kind](instance, cap=args.cap)
    _emit_policy(kind, policy, cost, args.format, args.out)
    return 0


_SOLVERS = {
    "greedy-cover": ("msscf", solvers.greedy_msscf),
    "greedy-identify": ("dt", solvers.greedy_dt),
    "greedy-price": ("pbt", solvers.greedy_threshold),
}


def cmd_solve(args) -> int:
    instance, kind = _load(args.instance)
    extra = None
    if args.algorithm == "nonadaptive-order":
        if kind != "msscf":
            raise SystemExit("nonadaptive-order needs a covering instance")
        order = solvers.nonadaptive_mssc_order(instance)
        policy = solvers.order_policy(instance, order)
        extra = {"order": " ".join(str(e) for e in order)}
    elif args.algorithm in ("pipeline-direct", "pipeline-via-identification"):
        if kind != "pb":
            raise SystemExit(f"{args.algorithm} needs a box-search instance")
        if args.algorithm == "pipeline-direct":
            policy = solvers.pipeline_pb_direct(instance)
        else:
            policy = solvers.pipeline_pb_via_udt(instance).policy
    else:
        want, fn = _SOLVERS[args.algorithm]
        if kind != want:
            raise SystemExit(f"{args.algorithm} needs a {want} instance, got {kind}")
        policy = fn(instance)
    cost = _EVALUATORS[kind](instance, policy)
    _emit_policy(kind, policy, cost, args.format, args.out, extra)
    return 0


def cmd_reduce(args) -> int:
    want, fn = _REDUCTIONS[args.reduction]
    instance, kind = _load(args.instance)
    if kind != want:
        raise SystemExit(f"{args.reduction} needs a {want} instance, got {kind}")
    cert = fn(instance)
    Path(args.out).write_text(io.dumps_instance(cert.forward))
    sidecar = args.sidecar or args.out + ".map.json"
    doc = {
        "reduction": args.reduction,
        "claimed_bound": cert.claimed_bound,
        "source": io.instance_to_dict(instance),
        "forward": io.instance_to_dict(cert.forward),
        "action_map": {str(a): [str(part) for part in what] for a, what in cert.action_map.items()},
    }
    Path(sidecar).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"wrote {args.out} and {sidecar}")
    print(f"claimed: {cert.claimed_bound}")
    return 0


def cmd_backtranslate(args) -> int:
    doc = json.loads(Path(args.sidecar).read_text())
    want, fn = _REDUCTIONS[doc["reduction"]]
    source = io.instance_from_dict(doc["source"])
    cert = fn(source)
    if io.instance_to_dict(cert.forward) != doc["forward"]:
        raise SystemExit("sidecar does not match: the transformation no longer yields this instance")
    policy = io.load_policy(args.policy)
    back = cert.back_translate(policy)
    _write_or_print(io.dumps_policy(back), args.out)
    kind = io.problem_kind(source)
    cost = _EVALUATORS[kind](source, back)
    print(f"source expected cost: {cost}", file=sys.stderr)
    return 0


def cmd_pipeline(args) -> int:
    instance, kind = _load(args.instance)
    if kind != "pb":
        raise SystemExit(f"pipelines need a box-search instance, got {kind}")
    start = time.perf_counter()
    if args.which == "direct":
        policy = solvers.pipeline_pb_direct(instance)
        algo = "pipeline-direct"
    else:
        policy = solvers.pipeline_pb_via_udt(instance).policy
        algo = "pipeline-via-identification"
    wall = time.perf_counter() - start
    cost = eval_pb(instance, policy)
    reference = None
    if instance.n <= args.cap:
        _, reference = oracles.opt_pb(instance, cap=args.cap)
    if args.out:
        Path(args.out).write_text(io.dumps_policy(policy))
    print(f"expected cost: {cost}")
    if reference is not None:
        print(f"exact reference: {reference} (ratio {float(cost / reference):.4f})")
    if args.report:
        result = corpus_mod.CorpusResult(
            rows=[
                corpus_mod.Row(
                    Path(args.instance).stem, "pb", instance.n, instance.m, algo, cost, reference, wall
                )
            ]
        )
        written = corpus_mod.write_report(result, args.report, figures=not args.no_figures)
        print("report: " + ", ".join(str(p) for p in written))
    return 0


def cmd_mixture_solve(args) -> int:
    instance, kind = _load(args.instance)
    if kind != "mixture":
        raise SystemExit(f"mixture-solve needs a mixture instance, got {kind}")
    beta = Fraction(args.beta)
    if args.threshold:
        res = mixture.dp_solve(instance, Fraction(args.threshold), beta)
        print(f"quit price: {res.threshold}")
        print(f"expected cost: {res.cost}")
        print(f"giving-up probability by component: {[str(p) for p in res.outside_probs]}")
        print(f"states: {res.states}, informative cap: {res.informative_cap}, confidence: {res.delta:.3g}")
        return 0
    solved = mixture.mixture_pb_solve(instance, beta)
    for idx, ph in enumerate(solved.phases):
        line = (
            f"round {idx}: price {ph.threshold}, giving-up mass {ph.accept_mass}, "
            f"retired components {list(ph.covered)}"
        )
        if ph.reference_cost is not None:
            line += f", exact price reference {ph.reference_cost}"
        if ph.warning:
            line += " [no price met the target]"
        print(line)
    print(f"expected cost: {solved.cost}")
    reference = mixture.opt_mixture_pb(instance) if instance.n <= 6 else None
    if reference is not None:
        print(f"exact reference: {reference} (ratio {float(solved.cost / reference):.4f})")
    return 0


def cmd_corpus(args) -> int:
    cfg = corpus_mod.CorpusConfig(
        count=args.count, max_n=args.max_n, max_m=args.max_m, seed=args.seed
    )
    result = corpus_mod.run_corpus(cfg)
    summary = result.summary()
    print(json.dumps(summary, indent=1, sort_keys=True))
    if args.report:
        written = corpus_mod.write_report(result, args.report, figures=not args.no_figures)
        print("report: " + ", ".join(str(p) for p in written))
    if not result.ok:
        for c in result.checks:
            if not c.passed:
                print(f"FAILED {c.instance_id} {c.check}: {c.note}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pandora",
        description="costed search, covering, and identification: solvers, transformations, exact references",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a seeded random instance")
    p.add_argument("kind", choices=sorted(io.PROBLEM_KINDS))
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--support", type=int, default=10)
    p.add_argument("--cost-mode", choices=("unit", "random"), default="unit")
    p.add_argument("--uniform", action="store_true")
    p.add_argument("--threshold", help="quit price (pbt only)")
    p.add_argument("--density", type=float, default=0.5, help="membership density (msscf only)")
    p.add_argument("--epsilon", default="1/2", help="separation promise (mixture only)")
    p.add_argument("-o", "--out")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("oracle", help="exact optimal policy by exhaustive recursion")
    p.add_argument("instance")
    p.add_argument("--cap", type=int, default=oracles.DEFAULT_CAP)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("-o", "--out", help="also write the policy JSON here")
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("solve", help="polynomial-time policy")
    p.add_argument(
        "algorithm",
        choices=sorted(_SOLVERS) + ["nonadaptive-order", "pipeline-direct", "pipeline-via-identification"],
    )
    p.add_argument("instance")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("-o", "--out", help="also write the policy JSON here")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("reduce", help="transform an instance, keeping the translation recipe")
    p.add_argument("reduction", choices=sorted(_REDUCTIONS))
    p.add_argument("instance")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--sidecar", help="where to write the action map (default: <out>.map.json)")
    p.set_defaults(fn=cmd_reduce)

    p = sub.add_parser("backtranslate", help="carry a policy back through a recorded transformation")
    p.add_argument("sidecar")
    p.add_argument("policy")
    p.add_argument("-o", "--out")
    p.set_defaults(fn=cmd_backtranslate)

    p = sub.add_parser("pipeline", help="box search end to end through the transformations")
    p.add_argument("which", choices=("direct", "via-identification"))
    p.add_argument("instance")
    p.add_argument("--cap", type=int, default=oracles.DEFAULT_CAP)
    p.add_argument("--report", help="write a delimited summary (and figures) here")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("-o", "--out", help="also write the policy JSON here")
    p.set_defaults(fn=cmd_pipeline)

    p = sub.add_parser("mixture-solve", help="compressed-state search over a mixture instance")
    p.add_argument("instance")
    p.add_argument("--beta", default="1/2", help="cost slack governing elimination confidence")
    p.add_argument("--threshold", help="solve a single quit price instead of the full search")
    p.set_defaults(fn=cmd_mixture_solve)

    p = sub.add_parser("corpus", help="run the seeded corpus with exact cross-checks")
    p.add_argument("--count", type=int, default=25)
    p.add_argument("--max-n", type=int, default=6)
    p.add_argument("--max-m", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="write delimited results (and figures) here")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_corpus)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
