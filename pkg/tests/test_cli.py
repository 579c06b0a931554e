import json
import subprocess
import sys

import numpy as np
import pytest

from streambayes import DAG, BayesianNetwork, CLGaussian, Multinomial, Variable, serialize_model
from streambayes.cli import main
from streambayes.core import LATENT, StateSpace
from streambayes.datastream import Attributes, DataInstance, DynamicDataInstance, arff_text, open_arff


@pytest.fixture
def gmm_data(tmp_path):
    rng = np.random.default_rng(0)
    z = rng.integers(0, 2, 600)
    X = np.column_stack([np.where(z, 4.0, -4.0) + rng.normal(size=600), rng.normal(size=600)])
    attrs = Attributes.from_spaces([("GaussianVar8", StateSpace.real()), ("GaussianVar9", StateSpace.real())])
    p = tmp_path / "d.arff"
    p.write_text(arff_text(attrs, [DataInstance(attrs, r) for r in X]))
    return p


def learn(tmp_path, data, model="gmm:k=2", name="m.json", *extra):
    out = tmp_path / name
    code = main(["learn", "--model", model, "--data", str(data), "--out", str(out), *extra])
    return code, out


def test_learn_writes_model_and_log(tmp_path, gmm_data):
    code, out = learn(tmp_path, gmm_data)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["template"] == "gmm:k=2" and "posterior" in doc
    log = (tmp_path / "m.json.log").read_text().splitlines()
    assert log[0] == "batch_index\tinstance_count\telbo"
    assert len(log) == 2 and log[1].split("\t")[1] == "600"


def test_rerun_is_byte_identical(tmp_path, gmm_data):
    _, a = learn(tmp_path, gmm_data, "gmm:k=2", "a.json", "--seed", "5")
    _, b = learn(tmp_path, gmm_data, "gmm:k=2", "b.json", "--seed", "5")
    assert a.read_bytes() == b.read_bytes()


def test_unknown_template(tmp_path, gmm_data, capsys):
    code, out = learn(tmp_path, gmm_data, "nope")
    assert code == 1 and not out.exists()
    assert "usage" in capsys.readouterr().err.lower()


def test_failed_learn_leaves_nothing(tmp_path):
    attrs = Attributes.from_spaces([("D", StateSpace.finite(2))])
    p = tmp_path / "d.arff"
    p.write_text(arff_text(attrs, [DataInstance(attrs, [1.0])]))
    code, out = learn(tmp_path, p, "gmm:k=2")  # discrete attribute in a Gaussian mixture
    assert code != 0 and not out.exists()


def test_infer_text_and_json(tmp_path, gmm_data, capsys):
    _, out = learn(tmp_path, gmm_data)
    capsys.readouterr()
    args = ["infer", "--model", str(out), "--evidence", "GaussianVar8=8.0,GaussianVar9=-1.0", "--target", "HiddenVar"]
    assert main(args + ["--algo", "vmp"]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("P(HiddenVar|GaussianVar8=8.0, GaussianVar9=-1.0) = Multinomial [ ")
    assert main(args + ["--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    post = doc["posteriors"]["HiddenVar"]
    assert post["family"] == "Multinomial" and sum(post["probabilities"]) == pytest.approx(1.0)


def test_infer_is_repeatable(tmp_path, gmm_data, capsys):
    _, out = learn(tmp_path, gmm_data)
    capsys.readouterr()
    args = ["infer", "--model", str(out), "--evidence", "GaussianVar8=1.0", "--target", "HiddenVar",
            "--algo", "is", "--samples", "100000", "--seed", "7"]
    main(args)
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first


def test_infer_unknown_variable(tmp_path, gmm_data):
    _, out = learn(tmp_path, gmm_data)
    assert main(["infer", "--model", str(out), "--target", "Nope"]) == 2
    assert main(["infer", "--model", str(out), "--evidence", "Nope=1", "--target", "HiddenVar"]) == 2


def test_degenerate_evidence_exit_3(tmp_path, capsys):
    A, B = Variable.finite("A", 2), Variable.finite("B", 2)
    bn = BayesianNetwork(DAG([A, B], {"B": ["A"]}), {"A": Multinomial([1.0, 0.0]), "B": Multinomial([[1.0, 0.0], [0.5, 0.5]])})
    p = tmp_path / "bn.json"
    p.write_bytes(serialize_model(bn))
    assert main(["infer", "--model", str(p), "--evidence", "B=1", "--target", "A", "--algo", "is"]) == 3
    assert "DegenerateEvidence" in capsys.readouterr().err


def _lds_model(tmp_path):
    from streambayes import define_dbn, transition_dag
    from streambayes.dynamic import serialize_dbn

    X, Y = Variable.real("X", role=LATENT), Variable.real("Y")
    sd = DAG([X, Y], {"Y": ["X"]})
    emit = CLGaussian([0.0], [1.0], [[1.0]])
    dbn = define_dbn(
        BayesianNetwork(sd, {"X": CLGaussian.normal(0, 1), "Y": emit}),
        BayesianNetwork(transition_dag(sd, {"X": ["X"]}), {"X": CLGaussian([0.0], [1.0], [[1.0]]), "Y": emit}),
    )
    p = tmp_path / "lds.json"
    p.write_bytes(serialize_dbn(dbn))
    return p


def _dyn_data(tmp_path, times):
    attrs = Attributes.from_spaces([("Y", StateSpace.real())])
    rows = [DynamicDataInstance(attrs, [0.1 * t], 0, t) for t in times]
    p = tmp_path / "dyn.arff"
    p.write_text(arff_text(attrs, rows))
    return p


def test_filter_lines(tmp_path, capsys):
    model, data = _lds_model(tmp_path), _dyn_data(tmp_path, range(10))
    assert main(["filter", "--model", str(model), "--data", str(data), "--target", "X", "--horizon", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 20
    assert lines[0].startswith("t=0 ") and lines[1].startswith("t=0+1 ")
    assert main(["filter", "--model", str(model), "--data", str(data), "--target", "X"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 10


def test_filter_out_of_order(tmp_path):
    model = _lds_model(tmp_path)
    data = tmp_path / "bad.arff"
    data.write_text("@relation r\n@attribute SEQUENCE_ID real\n@attribute TIME_ID real\n@attribute Y real\n@data\n0,1,0.5\n0,0,0.2\n")
    assert main(["filter", "--model", str(model), "--data", str(data), "--target", "X"]) == 2


def test_filter_static_model(tmp_path, gmm_data):
    _, out = learn(tmp_path, gmm_data)
    assert main(["filter", "--model", str(out), "--data", str(_dyn_data(tmp_path, [0])), "--target", "HiddenVar"]) == 2


def test_sample_learn_round_trip(tmp_path):
    A, B = Variable.finite("A", 2), Variable.finite("B", 2)
    bn = BayesianNetwork(DAG([A, B], {"B": ["A"]}), {"A": Multinomial([0.3, 0.7]), "B": Multinomial([[0.9, 0.1], [0.2, 0.8]])})
    src = tmp_path / "bn.json"
    src.write_bytes(serialize_model(bn))
    data = tmp_path / "s.arff"
    assert main(["sample", "--model", str(src), "--n", "100000", "--seed", "1", "--out", str(data)]) == 0
    script = tmp_path / "ab.txt"
    script.write_text("link A B\n")
    out = tmp_path / "learned.json"
    assert main(["learn", "--model", f"custom:{script}", "--data", str(data), "--out", str(out), "--batch-size", "20000"]) == 0
    cpds = json.loads(out.read_text())["cpds"]
    np.testing.assert_allclose(cpds["A"]["probabilities"], [[0.3, 0.7]], atol=0.02)
    np.testing.assert_allclose(cpds["B"]["probabilities"], [[0.9, 0.1], [0.2, 0.8]], atol=0.02)


def test_sample_zero_and_determinism(tmp_path):
    bn = BayesianNetwork(DAG([Variable.real("X")]), {"X": CLGaussian.normal(0, 1)})
    src = tmp_path / "bn.json"
    src.write_bytes(serialize_model(bn))
    empty = tmp_path / "e.arff"
    assert main(["sample", "--model", str(src), "--n", "0", "--out", str(empty)]) == 0
    s = open_arff(str(empty))
    assert s.attributes.names == ["X"] and list(s) == []
    a, b = tmp_path / "a.arff", tmp_path / "b.arff"
    main(["sample", "--model", str(src), "--n", "50", "--seed", "4", "--out", str(a)])
    main(["sample", "--model", str(src), "--n", "50", "--seed", "4", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_dynamic_learn_template(tmp_path, capsys):
    rng = np.random.default_rng(3)
    attrs = Attributes.from_spaces([("O", StateSpace.finite(2))])
    rows = [DynamicDataInstance(attrs, [float(rng.integers(0, 2))], s, t) for s in range(5) for t in range(6)]
    data = tmp_path / "h.arff"
    data.write_text(arff_text(attrs, rows))
    out = tmp_path / "hmm.json"
    assert main(["learn", "--model", "hmm:states=2", "--data", str(data), "--out", str(out)]) == 0
    assert main(["filter", "--model", str(out), "--data", str(data), "--target", "HiddenVar"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 30


def test_entry_point_exit_code():
    r = subprocess.run([sys.executable, "-m", "streambayes.cli", "frobnicate"], capture_output=True, text=True)
    assert r.returncode == 1 and r.stdout == ""
