import io
import json
from importlib import resources

import jsonschema
import pytest

from hamexpander.cli import run
from hamexpander.generators import circulant, kneser, random_bipartite_regular, random_regular
from hamexpander.graph import Graph, format_edge_list


def schema(name):
    text = resources.files("hamexpander").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)


def call(*argv):
    buf = io.StringIO()
    code = run([str(a) for a in argv], stdout=buf)
    return code, buf.getvalue()


def write(tmp_path, name, g):
    p = tmp_path / name
    p.write_text(format_edge_list(g))
    return p


@pytest.fixture
def files(tmp_path):
    k4 = Graph.from_edges(4, [(u, v) for u in range(4) for v in range(u + 1, 4)])
    out = {
        "k4": write(tmp_path, "k4.el", k4),
        "petersen": write(tmp_path, "petersen.el", kneser(5, 2)),
        "c100": write(tmp_path, "c100.el", circulant(100, [1])),
        "rr": write(tmp_path, "rr.el", random_regular(512, 16, seed=1)),
        "bip": write(tmp_path, "bip.el", random_bipartite_regular(1024, 32, seed=1)),
    }
    pairs = tmp_path / "pairs.txt"
    pairs.write_text("0 100\n5 300\n# comment\n17 400\n")
    out["pairs"] = pairs
    out["dir"] = tmp_path
    return out


def check(name, text):
    doc = json.loads(text)
    jsonschema.validate(doc, schema(name))
    return doc


def test_gen_then_oracle(files, tmp_path):
    target = tmp_path / "petersen_gen.el"
    code, out = call("gen", "kneser", 5, 2, "--out", target)
    assert code == 0 and out == ""
    check("gen", (tmp_path / "petersen_gen.el.json").read_text())
    code, out = call("oracle", target)
    assert code == 0 and check("oracle", out)["hamiltonian"] is False


def test_gen_to_stdout():
    code, out = call("gen", "cayley", 12, "--gens", "1,-1,3,-3")
    doc = check("gen", out)
    assert doc["metadata"]["d_max"] == 4 and doc["edge_list"].startswith("12 24\n")


def test_gen_regular_bipartite_and_glue():
    code, out = call("gen", "regular", 64, 4, "--bipartite", "--seed", 3)
    assert code == 0 and check("gen", out)["metadata"]["bipartite"] is True
    code, out = call("gen", "coset-glue", 12, 3, "--gens", "1,-1,3,-3,6")
    assert code == 0 and len(check("gen", out)["metadata"]["tour"]) == 5


def test_hamilton_cycle_graph(files):
    code, out = call("hamilton", files["c100"], "--seed", 7)
    doc = check("hamilton", out)
    assert code == 0 and len(doc["cycle"]) == 100 and "timings" not in doc


def test_hamilton_petersen_abstains(files):
    code, out = call("hamilton", files["petersen"])
    assert code == 2 and check("hamilton", out)["outcome"] == "failure"


def test_certify_k4(files):
    code, out = call("certify", files["k4"], "--exhaustive")
    doc = check("certify", out)
    assert round(doc["expansion"]["rho_upper"], 4) == 0.6667
    assert round(doc["bipartiteness"]["eps"], 4) == 0.3333


def test_spectra(files):
    code, out = call("spectra", files["petersen"])
    doc = check("spectra", out)
    assert abs(doc["lambda2"] - 1 / 3) < 1e-9 and abs(doc["lambda_n"] + 2 / 3) < 1e-9


def test_mixing_table_and_json(files):
    code, out = call("mixing", files["petersen"], "--t-max", 5)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "step\ttv" and len(lines) == 7
    code, out = call("mixing", files["petersen"], "--t-max", 5, "--json")
    assert len(check("mixing", out)["tv"]) == 6


def test_walk(files):
    code, out = call("walk", files["petersen"], 0, 4, "--count", 3)
    assert all(len(w) == 5 for w in check("walk", out)["walks"])
    code, out = call("walk", files["petersen"], 0, 3, "--to", 1, "--exact-law")
    doc = check("walk", out)
    assert doc["walks"][0][-1] == 1 and len(doc["f_table"]) == 4


def test_connect(files):
    code, out = call("connect", files["rr"], files["pairs"], "--ell", 7)
    doc = check("connect", out)
    assert code == 0 and [p[0] for p in doc["paths"]] == [0, 5, 17]
    assert all(len(p) == 8 for p in doc["paths"])


def test_absorb_with_queries(files, tmp_path):
    q = tmp_path / "q.txt"
    code, out = call("absorb", files["rr"])
    doc = check("absorb", out)
    q.write_text("\n" + " ".join(map(str, doc["reservoir"][:2])) + "\n")
    code, out = call("absorb", files["rr"], "--queries", q)
    doc = check("absorb", out)
    assert len(doc["queries"]) == 2
    assert len(doc["queries"][0]["path"]) == len(doc["vertices"])
    assert len(doc["queries"][1]["path"]) == len(doc["vertices"]) - 2


def test_reservoir(files):
    code, out = call("reservoir", files["rr"], "--p", 0.3, "--pairs", files["pairs"], "--ell", 12,
                     "--waive-spread", "--probe", "--rho", 0.2, "--trials", 10)
    doc = check("reservoir", out)
    assert code == 0 and len(doc["paths"]) == 3 and "expansion_probe" in doc


def test_bench():
    code, out = call("bench", "--kinds", "kneser", "--runs", 1)
    doc = check("bench", out)
    assert doc["results"][0]["cycles"] == 1


def test_out_file(files, tmp_path):
    target = tmp_path / "o.json"
    code, out = call("oracle", files["k4"], "--out", target)
    assert out == "" and check("oracle", target.read_text())["hamiltonian"] is True


@pytest.mark.parametrize("argv", [[], ["nosuch"], ["oracle"], ["hamilton", "x", "--seed", "abc"],
                                  ["oracle", "x", "--threads", "0"], ["gen", "kneser", "5"]])
def test_usage_errors(argv):
    assert call(*argv)[0] == 64


def test_input_errors(files, tmp_path):
    bad = tmp_path / "bad.el"
    bad.write_text("3 1\n0 0\n")
    assert call("oracle", bad)[0] == 65
    assert call("oracle", tmp_path / "missing.el")[0] == 65
    assert call("oracle", files["c100"])[0] == 65
    assert call("walk", files["k4"], 9, 2)[0] == 65


def test_config_file_and_env(files, tmp_path, monkeypatch):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# tiny\nexact_max_n = 3\n")
    code, out = call("oracle", files["k4"], "--config", cfg)
    assert code == 65
    monkeypatch.setenv("HAMEXPANDER_CONFIG", str(cfg))
    assert call("oracle", files["k4"])[0] == 65
    cfg.write_text("no_such_key = 1\n")
    assert call("oracle", files["k4"], "--config", cfg)[0] == 65


@pytest.mark.parametrize("argv", [
    ["hamilton", "rr", "--seed", "3"],
    ["connect", "rr", "pairs", "--ell", "9", "--seed", "5"],
    ["absorb", "bip", "--seed", "2"],
    ["walk", "petersen", "0", "6", "--count", "5", "--seed", "1"],
])
def test_repeatable_output(files, argv):
    argv = [str(files[a]) if a in files else a for a in argv]
    first = call(*argv)
    assert first == call(*argv)
    assert first == call(*argv, "--threads", "4")
