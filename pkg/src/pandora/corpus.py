"""Seeded corpus runs: solve, cross-check, and report.

For every corpus index one instance of each problem family is generated and
solved by the polynomial algorithms next to the exact reference, every
claimed cost relation is checked with exact arithmetic, and the results land
in delimited files plus, on the report path, rendered figures.

A corpus run is the package's own regression harness: `ok` is true only when
every exact check passed.  Approximation ratios are recorded for inspection
but carry no pass/fail weight beyond the claims themselves.
"""

from __future__ import annotations

import csv
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import generators, mixture, oracles, reductions, solvers
from .model import (
    ACT,
    STOP,
    ExplicitPBInstance,
    PolicyTree,
    eval_dt,
    eval_msscf,
    eval_pb,
    eval_threshold,
    min_finite,
    msscf_scenario_cost,
    threshold_scenario_outcome,
)


@dataclass
class CorpusConfig:
    count: int = 25
    max_n: int = 6
    max_m: int = 6
    seed: int = 0
    support: int = 6
    oracle_cap: int = 12


@dataclass
class Row:
    instance_id: str
    problem: str
    n: int
    m: int
    algorithm: str
    cost: Fraction | None
    oracle: Fraction | None
    wall: float

    @property
    def ratio(self) -> float | None:
        if self.cost is None or self.oracle in (None, 0):
            return None
        return float(self.cost / self.oracle)


@dataclass
class CheckRow:
    instance_id: str
    check: str
    passed: bool
    note: str = ""


@dataclass
class CorpusResult:
    rows: list[Row] = field(default_factory=list)
    checks: list[CheckRow] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> dict:
        algos: dict[str, list[float]] = {}
        for r in self.rows:
            if r.ratio is not None:
                algos.setdefault(r.algorithm, []).append(r.ratio)
        return {
            "instances": len({r.instance_id for r in self.rows}),
            "checks_passed": sum(1 for c in self.checks if c.passed),
            "checks_failed": sum(1 for c in self.checks if not c.passed),
            "ratio_by_algorithm": {
                a: {
                    "count": len(v),
                    "mean": sum(v) / len(v),
                    "max": max(v),
                }
                for a, v in sorted(algos.items())
            },
        }


def _timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def pb_walk(instance: ExplicitPBInstance, policy: PolicyTree, j: int) -> tuple[Fraction, Fraction | None]:
    """(total opening cost, value taken) along scenario j's branch."""
    spent = Fraction(0)
    revealed: list = []
    node = policy
    while node.kind == ACT:
        spent += instance.box_costs[node.action]
        v = instance.values[node.action][j]
        revealed.append(v)
        node = node.children[v.label]
    if node.kind != STOP:
        raise ValueError(f"unexpected {node.kind!r} leaf in a search policy")
    return spent, min_finite(revealed)


def _run_msscf(result: CorpusResult, iid: str, rng: random.Random, cfg: CorpusConfig) -> None:
    n, m = rng.randint(2, cfg.max_n), rng.randint(2, cfg.max_m)
    inst = generators.gen_msscf(n, m, rng.randrange(2**32))
    opt_tree, opt_cost = oracles.opt_msscf(inst, cap=cfg.oracle_cap)
    greedy, wall = _timed(solvers.greedy_msscf, inst)
    greedy_cost = eval_msscf(inst, greedy)
    result.rows.append(Row(iid, "msscf", n, m, "greedy-cover", greedy_cost, opt_cost, wall))
    result.checks.append(
        CheckRow(iid, "cover-oracle-floor", opt_cost <= greedy_cost, f"{opt_cost} <= {greedy_cost}")
    )

    order, wall = _timed(solvers.nonadaptive_mssc_order, inst)
    fixed_cost = solvers.order_cost(inst, order)
    best_fixed = solvers.best_order_cost(inst) if inst.n <= 7 else None
    result.rows.append(Row(iid, "msscf", n, m, "nonadaptive-order", fixed_cost, best_fixed, wall))

    cert = reductions.msscf_to_pb(inst)
    for name, tree, cost in (("greedy", greedy, greedy_cost), ("exact", opt_tree, opt_cost)):
        carried = eval_pb(cert.forward, cert.back_translate(tree))
        result.checks.append(
            CheckRow(iid, f"cover-as-search-equal-{name}", carried == cost, f"{carried} == {cost}")
        )
    fwd_tree, fwd_cost = oracles.opt_pb(cert.forward, cap=cfg.oracle_cap)
    result.checks.append(
        CheckRow(iid, "cover-search-same-optimum", fwd_cost == opt_cost, f"{fwd_cost} == {opt_cost}")
    )
    result.checks.append(
        CheckRow(
            iid,
            "search-tree-covers",
            eval_msscf(inst, fwd_tree) == fwd_cost,
            "exact search tree carries back at equal cost",
        )
    )

    ident = reductions.msscf_to_dt(inst)
    ident_tree = solvers.greedy_dt(ident.forward)
    back = ident.back_translate(ident_tree)
    lhs = eval_msscf(inst, back)
    member_floor = sum(
        (
            inst.set_probs[j]
            * min(inst.element_costs[e] for e in range(inst.n) if inst.membership[e][j])
            for j in range(inst.m)
        ),
        Fraction(0),
    )
    rhs = eval_dt(ident.forward, ident_tree) + member_floor
    result.checks.append(
        CheckRow(iid, "cover-via-identification", lhs <= rhs, f"{lhs} <= {rhs}")
    )


def _run_dt(result: CorpusResult, iid: str, rng: random.Random, cfg: CorpusConfig) -> None:
    n, m = rng.randint(2, cfg.max_n), rng.randint(2, min(cfg.max_m, 5))
    inst = generators.gen_dt(n, m, rng.randrange(2**32))
    _, opt_cost = oracles.opt_dt(inst, cap=cfg.oracle_cap)
    greedy, wall = _timed(solvers.greedy_dt, inst)
    greedy_cost = eval_dt(inst, greedy)
    result.rows.append(Row(iid, "dt", n, m, "greedy-identify", greedy_cost, opt_cost, wall))
    result.checks.append(
        CheckRow(iid, "identify-oracle-floor", opt_cost <= greedy_cost, f"{opt_cost} <= {greedy_cost}")
    )

    cert = reductions.udt_to_umsscf(inst)
    cover = solvers.greedy_msscf(cert.forward)
    cover_cost = eval_msscf(cert.forward, cover)
    back = cert.back_translate(cover)
    back_cost = eval_dt(inst, back)
    result.checks.append(
        CheckRow(iid, "identify-from-cover-2x", back_cost <= 2 * cover_cost, f"{back_cost} <= 2*{cover_cost}")
    )
    if cert.forward.n <= cfg.oracle_cap:
        _, opt_cover = oracles.opt_msscf(cert.forward, cap=cfg.oracle_cap)
        result.checks.append(
            CheckRow(iid, "cover-optimum-3x", opt_cover <= 3 * opt_cost, f"{opt_cover} <= 3*{opt_cost}")
        )
    opt_tree, _ = oracles.opt_dt(inst, cap=cfg.oracle_cap)
    converted = reductions.dt_policy_as_cover(inst, opt_tree)
    conv_cost = eval_msscf(cert.forward, converted)
    iso_mean = sum(
        (p * cert.forward.element_costs[inst.n + j] for j, p in enumerate(inst.scenario_probs)),
        Fraction(0),
    )
    result.checks.append(
        CheckRow(
            iid,
            "identification-tree-covers",
            conv_cost <= opt_cost + iso_mean,
            f"{conv_cost} <= {opt_cost} + {iso_mean}",
        )
    )


def _run_pb(result: CorpusResult, iid: str, rng: random.Random, cfg: CorpusConfig) -> None:
    n, m = rng.randint(2, cfg.max_n), rng.randint(2, cfg.max_m)
    inst = generators.gen_explicit(n, m, rng.randrange(2**32), support=cfg.support)
    _, opt_cost = oracles.opt_pb(inst, cap=cfg.oracle_cap)

    run, wall = _timed(reductions.pb_phases, inst, solvers.exact_threshold_solver(cfg.oracle_cap))
    phased_cost = eval_pb(inst, run.policy)
    result.rows.append(Row(iid, "pb", n, m, "rounds-exact", phased_cost, opt_cost, wall))
    result.checks.append(
        CheckRow(iid, "search-oracle-floor", opt_cost <= phased_cost, f"{opt_cost} <= {phased_cost}")
    )
    mass_ok = all(ph.accept_mass <= Fraction(1, 5) and not ph.warning for ph in run.phases)
    result.checks.append(
        CheckRow(
            iid,
            "round-coverage-mass",
            mass_ok,
            "; ".join(f"T={ph.threshold} mass={ph.accept_mass}" for ph in run.phases),
        )
    )
    ski_ok = True
    notes = []
    for j in range(inst.m):
        probing, value = pb_walk(inst, run.policy, j)
        if j in run.coverage:
            _, T_i = run.coverage[j]
            if value > T_i or probing + value > 2 * max(probing, T_i):
                ski_ok = False
                notes.append(f"scenario {j}: probing {probing}, value {value}, price {T_i}")
    result.checks.append(CheckRow(iid, "buy-when-rent-doubles", ski_ok, "; ".join(notes)))

    direct, wall = _timed(solvers.pipeline_pb_direct, inst)
    direct_cost = eval_pb(inst, direct)
    result.rows.append(Row(iid, "pb", n, m, "pipeline-direct", direct_cost, opt_cost, wall))
    result.checks.append(
        CheckRow(iid, "direct-oracle-floor", opt_cost <= direct_cost, f"{opt_cost} <= {direct_cost}")
    )

    via, wall = _timed(solvers.pipeline_pb_via_udt, inst)
    via_cost = eval_pb(inst, via.policy)
    result.rows.append(Row(iid, "pb", n, m, "pipeline-via-identification", via_cost, opt_cost, wall))
    result.checks.append(
        CheckRow(iid, "via-identification-oracle-floor", opt_cost <= via_cost, f"{opt_cost} <= {via_cost}")
    )

    small = generators.gen_explicit(
        rng.randint(2, 3), rng.randint(2, 4), rng.randrange(2**32), support=3
    )
    cert = reductions.pb_to_pbt_naive(small)
    _, small_opt = oracles.opt_pb(small, cap=cfg.oracle_cap)
    _, fwd_opt = oracles.opt_threshold(cert.forward, cap=max(cfg.oracle_cap, cert.forward.n))
    result.checks.append(
        CheckRow(iid, "price-shift-doubles", fwd_opt <= 2 * small_opt, f"{fwd_opt} <= 2*{small_opt}")
    )
    fwd_greedy = solvers.greedy_threshold(cert.forward)
    back = cert.back_translate(fwd_greedy)
    result.checks.append(
        CheckRow(
            iid,
            "price-shift-translation-prunes",
            eval_pb(small, back) <= eval_threshold(cert.forward, fwd_greedy),
            f"{eval_pb(small, back)} <= {eval_threshold(cert.forward, fwd_greedy)}",
        )
    )


def _run_threshold(result: CorpusResult, iid: str, rng: random.Random, cfg: CorpusConfig) -> None:
    m = rng.randint(2, cfg.max_m)
    n = rng.randint(2, cfg.max_n)
    inst = generators.gen_threshold(
        n, m, rng.randrange(2**32), threshold=Fraction(rng.randint(1, m)), cost_mode="unit", uniform=True
    )
    _, opt_cost = oracles.opt_threshold(inst, cap=cfg.oracle_cap)
    greedy, wall = _timed(solvers.greedy_threshold, inst)
    greedy_cost = eval_threshold(inst, greedy)
    result.rows.append(Row(iid, "pbt", n, m, "greedy-price", greedy_cost, opt_cost, wall))
    result.checks.append(
        CheckRow(iid, "price-oracle-floor", opt_cost <= greedy_cost, f"{opt_cost} <= {greedy_cost}")
    )

    cert = reductions.pbt_to_umsscf(inst)
    cover = solvers.greedy_msscf(cert.forward)
    back = cert.back_translate(cover)
    T = int(inst.threshold)
    ok = True
    notes = []
    for i in range(inst.m):
        src = threshold_scenario_outcome(inst, back, i).cost
        copy_mean = sum(
            (msscf_scenario_cost(cert.forward, cover, i * T + k) for k in range(T)),
            Fraction(0),
        ) / T
        if src > 3 * copy_mean:
            ok = False
            notes.append(f"scenario {i}: price cost {src} > 3 * {copy_mean}")
    result.checks.append(CheckRow(iid, "halving-rule-3x", ok, "; ".join(notes)))


def _run_mixture(result: CorpusResult, iid: str, rng: random.Random, cfg: CorpusConfig) -> None:
    n, m = rng.randint(2, 3), 2
    inst = generators.gen_mixture(n, m, rng.randrange(2**32), epsilon=Fraction(1, 2))
    beta = Fraction(1, 2)
    values = sorted({v for row in inst.dists for d in row for v in d.support})
    T = values[len(values) // 2] + Fraction(1, 2)
    res, wall = _timed(mixture.dp_solve, inst, T, beta)
    reference = mixture.opt_mixture_threshold(inst, T)
    result.rows.append(Row(iid, "mixture", n, m, "compressed-price", res.cost, reference, wall))
    result.checks.append(
        CheckRow(
            iid,
            "compressed-price-slack",
            res.cost <= (1 + beta) * reference,
            f"{res.cost} <= (1+{beta})*{reference}",
        )
    )

    solved, wall = _timed(mixture.mixture_pb_solve, inst, beta)
    reference_pb = mixture.opt_mixture_pb(inst)
    result.rows.append(Row(iid, "mixture", n, m, "compressed-search", solved.cost, reference_pb, wall))
    result.checks.append(
        CheckRow(
            iid,
            "compressed-search-floor",
            solved.cost >= reference_pb,
            f"{solved.cost} >= {reference_pb}",
        )
    )


def run_corpus(config: CorpusConfig | None = None) -> CorpusResult:
    cfg = config or CorpusConfig()
    result = CorpusResult()
    for idx in range(cfg.count):
        rng = random.Random(f"{cfg.seed}:{idx}")
        iid = f"c{cfg.seed}-{idx:03d}"
        _run_msscf(result, iid + "-cover", rng, cfg)
        _run_dt(result, iid + "-identify", rng, cfg)
        _run_pb(result, iid + "-search", rng, cfg)
        _run_threshold(result, iid + "-price", rng, cfg)
        _run_mixture(result, iid + "-mixture", rng, cfg)
    return result


# ---------------------------------------------------------------------------
# reporting

CSV_COLUMNS = ("instance_id", "problem", "n", "m", "algorithm", "cost", "oracle_cost", "ratio", "wall_time_s")


def write_report(result: CorpusResult, path: str | Path, figures: bool = True) -> list[Path]:
    """Delimited results plus, unless disabled, rendered figures.

    Writes `<path>` (one row per algorithm run), `<stem>_checks.csv` (one row
    per exact check), and with figures on, `<stem>_ratios.png` and
    `<stem>_costs.png` next to them.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    written = [path]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in result.rows:
            writer.writerow(
                [
                    r.instance_id,
                    r.problem,
                    r.n,
                    r.m,
                    r.algorithm,
                    "" if r.cost is None else str(r.cost),
                    "" if r.oracle is None else str(r.oracle),
                    "" if r.ratio is None else f"{r.ratio:.6f}",
                    f"{r.wall:.6f}",
                ]
            )
    checks_path = path.with_name(path.stem + "_checks.csv")
    written.append(checks_path)
    with open(checks_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "check", "passed", "note"])
        for c in result.checks:
            writer.writerow([c.instance_id, c.check, "yes" if c.passed else "NO", c.note])
    if figures:
        written.extend(render_figures(result, path))
    return written


def render_figures(result: CorpusResult, path: str | Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    by_algo: dict[str, list[Row]] = {}
    for r in result.rows:
        if r.ratio is not None:
            by_algo.setdefault(r.algorithm, []).append(r)

    ratios_path = path.with_name(path.stem + "_ratios.png")
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for algo, rows in sorted(by_algo.items()):
        ax.hist([r.ratio for r in rows], bins=20, alpha=0.55, label=algo)
    ax.set_xlabel("cost / reference cost")
    ax.set_ylabel("runs")
    ax.set_title("approximation ratios")
    if by_algo:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(ratios_path, dpi=120)
    plt.close(fig)

    costs_path = path.with_name(path.stem + "_costs.png")
    fig, ax = plt.subplots(figsize=(6, 6))
    top = 0.0
    for algo, rows in sorted(by_algo.items()):
        xs = [float(r.oracle) for r in rows]
        ys = [float(r.cost) for r in rows]
        top = max([top] + xs + ys)
        ax.scatter(xs, ys, s=14, alpha=0.7, label=algo)
    if top > 0:
        ax.plot([0, top], [0, top], lw=1, ls="--", color="gray")
    ax.set_xlabel("reference cost")
    ax.set_ylabel("algorithm cost")
    ax.set_title("cost against the exact reference")
    if by_algo:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(costs_path, dpi=120)
    plt.close(fig)
    return [ratios_path, costs_path]
