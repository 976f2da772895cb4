import io
import json
import os
import subprocess
import sys

import pytest

from grushko.cli import cli_main


def run(*argv):
    buf = io.StringIO()
    code = cli_main(list(argv), buf)
    return code, buf.getvalue()


@pytest.fixture
def gp(data_dir):
    return os.path.join(data_dir, "ex41.gp")


def test_parse(gp):
    code, out = run("parse", "--presentation", gp, "--word", "c b a b^-1 c^-1")
    assert code == 0
    doc = json.loads(out)
    assert doc["presentation"] == {"k": 1, "N": 2, "xi": doc["presentation"]["xi"], "sporadic": False}
    assert doc["words"][0]["core"] == "a"


def test_length_with_lines_file(gp, data_dir):
    code, out = run("length", "--presentation", gp, "--lines", os.path.join(data_dir, "g41.txt"))
    assert code == 0
    assert json.loads(out)["lengths"] == {"b a c b^-1 a^3 c^-1": 4}


def test_whitehead_json_and_dot(gp, tmp_path):
    code, out = run("whitehead", "--presentation", gp, "--word", "b a c b^-1 a^3 c^-1")
    doc = json.loads(out)
    assert code == 0
    assert doc["connected"] and doc["circle"]
    assert len(doc["edges"]) == 4
    dot = tmp_path / "w.dot"
    code, _ = run("whitehead", "--presentation", gp, "--word", "b", "--dot", str(dot))
    assert code == 0
    assert dot.read_text().startswith("graph")


def test_reduce_writes_tree(gp, tmp_path):
    out_tree = tmp_path / "r.gt"
    code, out = run("reduce", "--presentation", gp, "--word", "b", "--out", str(out_tree))
    assert code == 0
    assert json.loads(out)["verdict"] == "uncrossed"
    assert out_tree.exists()


def test_simple_and_quadratic(gp):
    code, out = run("simple", "--presentation", gp, "--word", "b")
    assert code == 0 and json.loads(out)["verdict"] == "simple"
    code, out = run("simple", "--presentation", gp, "--word", "b a c b^-1 a^3 c^-1")
    assert json.loads(out)["verdict"] == "not-simple"
    code, out = run("quadratic", "--presentation", gp, "--word", "b a c b^-1 a^3 c^-1")
    doc = json.loads(out)
    assert doc["verdict"] == "quadratic"
    assert sorted(doc["crossings"].values()) == [2, 2]


def test_domain_error_exit_code(gp):
    code, out = run("simple", "--presentation", gp, "--word", "a")
    assert code == 1
    assert json.loads(out)["error"]
    code, out = run("quadratic", "--presentation", gp, "--word", "b")
    assert code == 1


def test_usage_errors(gp, tmp_path):
    assert run("bogus")[0] == 2
    assert run("simple", "--presentation", gp)[0] == 2
    assert run("simple", "--presentation", str(tmp_path / "missing.gp"), "--word", "b")[0] == 2
    assert run("simple", "--presentation", gp, "--word", "b", "--budget", "0")[0] == 2


def test_cutpair(tmp_path):
    gp = tmp_path / "f3.gp"
    gp.write_text("presentation { factors = []; free_rank = 3; alias a = x1; alias b = x2; alias c = x3 }\n")
    code, out = run("cutpair", "--presentation", str(gp), "--word", "a^2 b^2 a^2 b^2 c^2", "--R", "2")
    doc = json.loads(out)
    assert code == 0 and doc["verdict"] == "found"
    assert [w["a"] for w in doc["witness"]] == ["a", "b", "c", "a b", "a b^-1"]
    code, out = run("cutpair", "--presentation", str(gp), "--word", "a^2 b^2 a^2 b^2 c^2",
                    "--extract", "a^2 b^2")
    doc = json.loads(out)
    assert doc["verdict"] == "extracted" and doc["witness"]["c"] == 3


def test_certify_and_check(data_dir, tmp_path):
    rose = os.path.join(data_dir, "rose41.gt")
    cert = tmp_path / "c.json"
    code, out = run("certify", "--tree0", rose, "--tree1", rose, "--word", "b", "--out", str(cert))
    assert code == 0
    assert json.loads(out)["verdict"] == "simple"
    code, out = run("certify", "--check", str(cert))
    assert code == 0 and json.loads(out)["verdict"] == "valid"
    assert run("certify", "--word", "b")[0] == 2


def test_survey_deterministic(gp):
    args = ("survey", "--presentation", gp, "--word", "b", "--word", "b a c b^-1 a^3 c^-1",
            "--random", "2", "--seed", "4", "--no-timings", "--L", "4")
    code, one = run(*args)
    assert code == 0
    assert run(*args)[1] == one
    assert run(*args, "--workers", "2")[1] == one
    rows = json.loads(one)["rows"]
    kinds = {r["element"]: r["classification"] for r in rows}
    assert kinds["b"] == "simple"
    assert kinds["b a c b^-1 a^3 c^-1"] == "quadratic"


def test_console_entry_point(gp):
    r = subprocess.run([sys.executable, "-m", "grushko", "simple", "--presentation", gp, "--word", "c"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["verdict"] == "simple"
