import json
import re

import pytest

from safesched.cli import main
from safesched.task_model import TaskSystem

HEADER = re.compile(r"^# seed=\d+ generator=numpy-philox4x64-10 version=\S+ commit=\S+$")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    lines = out.out.splitlines()
    headers = [ln for ln in lines if ln.startswith("# seed=")]
    assert all(HEADER.match(h) for h in headers)
    body = "\n".join(ln for ln in lines if not ln.startswith("# seed="))
    return code, body, out.err


GOLDEN = {
    ("validate", "example1"): "ok: 2 tasks (1 hard, 1 soft)",
    ("build-mdp", "example1"): "vertices 25\nscheduler 9\ntaskgen 16\nedges 35\nbottom reachable",
    ("check-sampling", "example1"): (
        "task,good_for_sampling,|V_i|,good_for_efficient_sampling,|Safe_i|,K_edges,K_ticks\n"
        "1,false,0,false,0,,\n"
        "overall good_for_sampling=false good_for_efficient_sampling=false K="
    ),
    ("synth-safe", "example1"): (
        "safe vertices 19 of 25\nsafe scheduler vertices 8\n"
        '{"0": ["0", "1", "eps"], "4": ["1", "eps"], "5": ["0"], "6": ["0"], "7": ["0"], '
        '"18": ["eps"], "19": ["eps"], "20": ["eps"]}'
    ),
    ("simulate", "example1", "--steps", "30"): "ticks 30\nmean_cost 2.000000\nhard_misses 0\nsoft_misses 6",
    ("bounds", "--system", "example1", "--beta", "0.5"): (
        "pi_min 0.4\nscheduler_vertices 8\nphase_T 1524\nhoeffding_samples 370\neta 0.3439\n"
        "eta_beta 0.003125\neps_robust 0.003115264798\ngap 0.2857142857"
    ),
    ("bounds", "--n-soft", "2", "--a-max", "3", "--n-tasks", "2", "--pi-max", "0.6", "--eps", "0.05"): (
        "hoeffding_samples 600\nsteps_soft_only 5262\neta 0.04890625\neta_beta 5e-05\n"
        "eps_robust 4.999750012e-05\ngap 0.05128205128"
    ),
}


@pytest.mark.parametrize("argv", list(GOLDEN), ids=lambda a: " ".join(a))
def test_golden_output(capsys, argv):
    code, body, _ = run(capsys, *argv)
    assert code == 0
    assert body == GOLDEN[argv]


def test_solve(capsys, tmp_path):
    out = tmp_path / "sigma.json"
    code, body, _ = run(capsys, "solve", "example1", "--strategy-out", out)
    assert code == 0
    gain = float(body.splitlines()[0].split()[1])
    assert abs(gain - 2.0) < 1e-6
    assert json.loads(out.read_text())["0"] in ("0", "1")
    code, body, _ = run(capsys, "simulate", "example1", "--policy", f"strategy:{out}", "--steps", "300")
    assert code == 0 and "hard_misses 0" in body


def test_export_formats(capsys, tmp_path):
    for fmt in ("csv", "json", "dot"):
        dst = tmp_path / f"m.{fmt}"
        code, _, _ = run(capsys, "export", "example1", "--format", fmt, "--out", dst)
        assert code == 0 and dst.read_text()
    assert json.loads((tmp_path / "m.json").read_text())["init"] == 0
    assert (tmp_path / "m.csv").read_text().count("\n") == 36
    assert "killANDsub" in (tmp_path / "m.dot").read_text()


def test_build_mdp_writes_interchange_files(capsys, tmp_path):
    code, _, _ = run(capsys, "build-mdp", "example1", "--out", tmp_path / "ex1")
    assert code == 0
    assert len((tmp_path / "ex1.tra").read_text().splitlines()) == 35
    assert len((tmp_path / "ex1.sta").read_text().splitlines()) == 25


def test_learn_modes(capsys, tmp_path):
    code, body, err = run(capsys, "learn", "example1", "--out", tmp_path / "a.json")
    assert code == 4 and "no sampling condition" in err
    code, body, _ = run(capsys, "learn", "example1", "--mode", "hard-only", "--out", tmp_path / "h.json")
    assert code == 0 and "complete true" in body
    learned = TaskSystem.load(tmp_path / "h.json")
    assert learned.tasks[0].computation.support == (1,)
    prov = json.loads((tmp_path / "h.json.provenance.json").read_text())
    assert prov["generator"] == "numpy-philox4x64-10" and prov["seed"] == 0
    code, body, _ = run(capsys, "learn", "example2", "--out", tmp_path / "e2.json")
    assert code == 0 and "complete true" in body
    code, body, _ = run(capsys, "learn", "example2", "--mode", "sampling", "--budget", "20", "--out", tmp_path / "b.json")
    assert code == 5 and "complete false" in body


def test_check_sampling_require(capsys):
    assert run(capsys, "check-sampling", "example2", "--require", "sampling")[0] == 0
    assert run(capsys, "check-sampling", "example2", "--require", "efficient")[0] == 4


def test_mcts_and_qlearn(capsys):
    code, body, _ = run(capsys, "mcts", "example1", "--horizon", 4, "--budget", 4, "--rollouts", 1,
                        "--eval-steps", 60, "--seeds", 2)
    rows = body.splitlines()
    assert code == 0 and rows[0] == "seed,mean_cost,violations" and len(rows) == 3
    assert all(r.endswith(",0") for r in rows[1:])
    code, body, _ = run(capsys, "qlearn", "example1", "--steps", 500, "--eval-steps", 60)
    assert code == 0 and "train_hard_misses 0" in body and "eval_hard_misses 0" in body


def test_simulate_and_replay(capsys, tmp_path):
    trace = tmp_path / "t.txt"
    code, body, _ = run(capsys, "simulate", "example1", "--policy", "never:1", "--steps", 3000,
                        "--seed", 5, "--trace-out", trace)
    assert code == 0 and "mean_cost 3.333333" in body
    code, body, _ = run(capsys, "replay", "example1", trace)
    assert code == 0 and body.endswith("ok") and "regenerated true" in body
    trace.write_text(trace.read_text().replace("sub,killANDsub", "sub,sub", 1))
    assert run(capsys, "replay", "example1", trace)[0] == 2


def test_bench(capsys, tmp_path):
    csv = tmp_path / "b.csv"
    code, body, _ = run(capsys, "bench", "--fixtures", "example1", "--methods", "solve", "edf",
                        "--seeds", 1, "--eval-steps", 60, "--out", csv)
    assert code == 0
    assert body.splitlines()[1:] == ["example1,edf,1,2.0000,0,", "example1,solve,1,2.0000,0,"]
    assert csv.read_text().splitlines()[1].startswith("fixture,method,seed")


def test_exit_codes(capsys, tmp_path):
    assert run(capsys, "validate", tmp_path / "missing.json")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"tasks":[{"kind":"hard","computation":{"3":"1"},"deadline":2,"arrival":{"4":"1"}}]}')
    code, _, err = run(capsys, "validate", bad)
    assert code == 2 and "ComputationExceedsDeadline" in err
    bad.write_text('{"tasks":[]}')
    assert run(capsys, "validate", bad)[0] == 2
    bad.write_text("not json")
    assert run(capsys, "validate", bad)[0] == 2
    unsched = tmp_path / "u.json"
    t = '{"kind":"hard","computation":{"2":"1"},"deadline":2,"arrival":{"2":"1"}}'
    unsched.write_text('{"tasks":[%s,%s]}' % (t, t))
    assert run(capsys, "solve", unsched)[0] == 3
    assert run(capsys, "build-mdp", "example1", "--max-vertices", 3)[0] == 5
