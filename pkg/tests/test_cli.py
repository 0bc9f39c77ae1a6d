import json
from fractions import Fraction

import pytest

from pandora import io
from pandora.cli import main
from pandora.model import eval_msscf, eval_pb


def run(capsys, *argv) -> str:
    assert main(list(argv)) == 0
    return capsys.readouterr().out


@pytest.mark.parametrize("kind", ["pb", "pbt", "dt", "msscf", "mixture"])
def test_generate_writes_loadable_instances(tmp_path, capsys, kind):
    path = tmp_path / f"{kind}.json"
    run(capsys, "generate", kind, "--n", "3", "--m", "3", "--seed", "5", "-o", str(path))
    instance = io.load_instance(path)
    assert io.problem_kind(instance) == kind
    assert instance.n == 3


def test_generate_to_stdout(capsys):
    out = run(capsys, "generate", "pb", "--n", "2", "--m", "2", "--seed", "1")
    assert json.loads(out)["problem"] == "pb"


def gen(tmp_path, capsys, kind, seed=0, n=3, m=3, *extra) -> str:
    path = tmp_path / f"{kind}{seed}.json"
    run(capsys, "generate", kind, "--n", str(n), "--m", str(m), "--seed", str(seed), *extra, "-o", str(path))
    return str(path)


def test_oracle_text_and_json(tmp_path, capsys):
    inst = gen(tmp_path, capsys, "pb")
    text = run(capsys, "oracle", inst)
    assert text.startswith("expected cost: ")
    doc = json.loads(run(capsys, "oracle", inst, "--format", "json"))
    assert doc["problem"] == "pb"
    policy = io.policy_from_dict(doc["policy"])
    assert eval_pb(io.load_instance(inst), policy) == Fraction(doc["cost"])


def test_oracle_policy_file(tmp_path, capsys):
    inst = gen(tmp_path, capsys, "msscf")
    out = tmp_path / "policy.json"
    text = run(capsys, "oracle", inst, "-o", str(out))
    cost = Fraction(text.splitlines()[0].split(": ")[1])
    assert eval_msscf(io.load_instance(inst), io.load_policy(out)) == cost


def test_oracle_rejects_mixture(tmp_path, capsys):
    inst = gen(tmp_path, capsys, "mixture")
    with pytest.raises(SystemExit):
        main(["oracle", inst])


@pytest.mark.parametrize(
    "kind,algo",
    [
        ("msscf", "greedy-cover"),
        ("dt", "greedy-identify"),
        ("pbt", "greedy-price"),
        ("pb", "pipeline-direct"),
        ("pb", "pipeline-via-identification"),
    ],
)
def test_solve_algorithms(tmp_path, capsys, kind, algo):
    inst = gen(tmp_path, capsys, kind, seed=3)
    doc = json.loads(run(capsys, "solve", algo, inst, "--format", "json"))
    assert doc["problem"] == kind
    assert Fraction(doc["cost"]) >= 0


def test_solve_nonadaptive_order(tmp_path, capsys):
    inst = gen(tmp_path, capsys, "msscf", seed=2)
    doc = json.loads(run(capsys, "solve", "nonadaptive-order", inst, "--format", "json"))
    order = [int(tok) for tok in doc["order"].split()]
    assert sorted(order) == list(range(io.load_instance(inst).n))


def test_solve_kind_mismatch(tmp_path, capsys):
    inst = gen(tmp_path, capsys, "pb")
    with pytest.raises(SystemExit):
        main(["solve", "greedy-cover", inst])


@pytest.mark.parametrize(
    "kind,reduction",
    [
        ("msscf", "cover-to-search"),
        ("msscf", "cover-to-identification"),
        ("pb", "search-to-price"),
        ("dt", "identification-to-cover"),
    ],
)
def test_reduce_writes_forward_and_sidecar(tmp_path, capsys, kind, reduction):
    inst = gen(tmp_path, capsys, kind, seed=4)
    fwd = tmp_path / "forward.json"
    out = run(capsys, "reduce", reduction, inst, "-o", str(fwd))
    assert "claimed:" in out
    sidecar = json.loads((tmp_path / "forward.json.map.json").read_text())
    assert sidecar["reduction"] == reduction
    assert io.load_instance(fwd) == io.instance_from_dict(sidecar["forward"])
    assert sidecar["action_map"]


def test_reduce_backtranslate_round_trip(tmp_path, capsys):
    inst = gen(tmp_path, capsys, "msscf", seed=7)
    fwd = tmp_path / "as_search.json"
    run(capsys, "reduce", "cover-to-search", inst, "-o", str(fwd))
    fwd_policy = tmp_path / "fwd_policy.json"
    run(capsys, "oracle", str(fwd), "-o", str(fwd_policy))
    back = tmp_path / "back_policy.json"
    run(capsys, "backtranslate", str(fwd) + ".map.json", str(fwd_policy), "-o", str(back))
    source = io.load_instance(inst)
    cost = eval_msscf(source, io.load_policy(back))
    forward_cost = eval_pb(io.load_instance(fwd), io.load_policy(fwd_policy))
    assert cost == forward_cost


def test_backtranslate_rejects_stale_sidecar(tmp_path, capsys):
    inst = gen(tmp_path, capsys, "msscf", seed=7)
    fwd = tmp_path / "as_search.json"
    run(capsys, "reduce", "cover-to-search", inst, "-o", str(fwd))
    sidecar_path = tmp_path / "as_search.json.map.json"
    doc = json.loads(sidecar_path.read_text())
    doc["forward"]["costs"][0] = "999"
    sidecar_path.write_text(json.dumps(doc))
    fwd_policy = tmp_path / "fwd_policy.json"
    run(capsys, "oracle", str(fwd), "-o", str(fwd_policy))
    with pytest.raises(SystemExit):
        main(["backtranslate", str(sidecar_path), str(fwd_policy)])


def test_price_to_cover_needs_uniform_integer(tmp_path, capsys):
    inst = gen(tmp_path, capsys, "pbt", 1, 3, 3, "--uniform", "--threshold", "2")
    fwd = tmp_path / "cover.json"
    run(capsys, "reduce", "price-to-cover", inst, "-o", str(fwd))
    forward = io.load_instance(fwd)
    source = io.load_instance(inst)
    assert forward.m == source.m * 2  # one copy block per price unit


def test_pipeline_report_and_figures(tmp_path, capsys):
    inst = gen(tmp_path, capsys, "pb", seed=6)
    report = tmp_path / "run" / "pipeline.csv"
    out = run(capsys, "pipeline", "direct", inst, "--report", str(report))
    assert "exact reference:" in out
    assert report.exists()
    assert (report.parent / "pipeline_checks.csv").exists()
    assert (report.parent / "pipeline_ratios.png").exists()
    assert (report.parent / "pipeline_costs.png").exists()
    header = report.read_text().splitlines()[0]
    assert header.startswith("instance_id,problem,n,m,algorithm,cost")


def test_pipeline_no_figures(tmp_path, capsys):
    inst = gen(tmp_path, capsys, "pb", seed=6, n=2, m=2)
    report = tmp_path / "pipeline.csv"
    run(capsys, "pipeline", "via-identification", inst, "--report", str(report), "--no-figures")
    assert report.exists()
    assert not (tmp_path / "pipeline_ratios.png").exists()


def test_mixture_solve_full_search(tmp_path, capsys):
    inst = gen(tmp_path, capsys, "mixture", seed=1, n=2, m=2)
    out = run(capsys, "mixture-solve", inst)
    assert "round 0:" in out
    assert "expected cost:" in out
    assert "exact reference:" in out


def test_mixture_solve_single_price(tmp_path, capsys):
    inst = gen(tmp_path, capsys, "mixture", seed=1, n=2, m=2)
    out = run(capsys, "mixture-solve", inst, "--threshold", "5")
    assert "quit price: 5" in out
    assert "giving-up probability by component:" in out


def test_corpus_summary_and_report(tmp_path, capsys):
    report = tmp_path / "corpus.csv"
    out = run(
        capsys,
        "corpus",
        "--count", "3",
        "--max-n", "4",
        "--max-m", "4",
        "--report", str(report),
        "--no-figures",
    )
    summary = json.loads(out[: out.index("report: ")])
    assert summary["checks_failed"] == 0
    assert report.exists()
    lines = (tmp_path / "corpus_checks.csv").read_text().splitlines()
    assert len(lines) > 10
