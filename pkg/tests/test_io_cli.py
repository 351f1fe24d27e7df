import json

import jsonschema
import numpy as np
import pytest

from pointreg import io
from pointreg.align import Transform
from pointreg.cli import main
from pointreg.registration import RegistrationConfig, register
from pointreg.stats import PairTable


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_read_points_formats(tmp_path):
    p = _write(tmp_path / "p.txt", "# dim=2\n1, 2\n\n3.5\t-4e-1\n")
    np.testing.assert_array_equal(io.read_points(p), [[1.0, 2.0], [3.5, -0.4]])


@pytest.mark.parametrize(
    "text",
    ["", "1 2\n3\n", "# dim=3\n1 2\n", "1 nan\n", "1 abc\n"],
)
def test_read_points_errors(tmp_path, text):
    with pytest.raises(io.ParseError):
        io.read_points(_write(tmp_path / "p.txt", text))


def test_points_round_trip(tmp_path, rng):
    pts = rng.normal(size=(7, 3)) * 1e3
    io.write_points(tmp_path / "x.txt", pts)
    np.testing.assert_array_equal(io.read_points(tmp_path / "x.txt"), pts)


def test_read_dense_weights_drops_zeros(tmp_path):
    t = io.read_weights(_write(tmp_path / "w.txt", "1 0 2\n0 3 0\n"), 2, 3)
    assert t.pairs() == [(0, 0), (0, 2), (1, 1)]
    np.testing.assert_array_equal(t.weights, [1, 2, 3])


def test_read_sparse_weights(tmp_path):
    t = io.read_weights(_write(tmp_path / "w.txt", "0 1 0.5\n2 0 1.5\n"), 3, 3)
    assert t.pairs() == [(0, 1), (2, 0)]


def test_format_header_overrides_detection(tmp_path):
    # three rows of three also fit a 3 x 3 dense matrix
    text = "0 1 0.5\n2 0 1.5\n1 1 1.0\n"
    dense = io.read_weights(_write(tmp_path / "a.txt", text), 3, 3)
    sparse = io.read_weights(_write(tmp_path / "b.txt", "# format=sparse\n" + text), 3, 3)
    assert len(dense) == 7
    assert sparse.pairs() == [(0, 1), (2, 0), (1, 1)]


@pytest.mark.parametrize(
    "text",
    ["0 5 1.0\n", "0.5 1 1.0\n", "1 2\n", "# format=dense\n1 2 3\n", "0 0 -1\n"],
)
def test_read_weights_errors(tmp_path, text):
    with pytest.raises(ValueError):
        io.read_weights(_write(tmp_path / "w.txt", text), 2, 2)


def test_weights_round_trip(tmp_path):
    t = PairTable([0, 1, 1], [2, 0, 1], [0.1, 1 / 3, 2.5])
    io.write_weights(tmp_path / "w.txt", t)
    back = io.read_weights(tmp_path / "w.txt", 2, 3)
    assert back.pairs() == t.pairs()
    np.testing.assert_array_equal(back.weights, t.weights)


# ---- command line ----------------------------------------------------------


def _synth(tmp_path, *extra, name="inst"):
    out = tmp_path / name
    assert main(["synth", "--out", str(out), *extra]) == 0
    return out


def _report(capsys):
    return json.loads(capsys.readouterr().out)


def test_align_identity(tmp_path, capsys):
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 2.0]])
    io.write_points(tmp_path / "a.txt", pts)
    io.write_weights(tmp_path / "w.txt", PairTable(np.arange(4), np.arange(4), np.ones(4)))
    code = main(["align", str(tmp_path / "a.txt"), str(tmp_path / "a.txt"), "--weights", str(tmp_path / "w.txt")])
    assert code == 0
    rep = _report(capsys)
    jsonschema.validate(rep, io.REPORT_SCHEMA)
    np.testing.assert_allclose(rep["transform"]["rotation"], np.eye(2), atol=1e-12)
    assert rep["e_min"] == pytest.approx(0.0, abs=1e-14)
    assert rep["converged"] is None


def test_align_separable_weights_exit_2(tmp_path, capsys):
    rng = np.random.default_rng(0)
    io.write_points(tmp_path / "u.txt", rng.random((3, 2)))
    io.write_points(tmp_path / "v.txt", rng.random((4, 2)))
    _write(tmp_path / "w.txt", "\n".join(["1 1 1 1"] * 3) + "\n")
    code = main(["align", str(tmp_path / "u.txt"), str(tmp_path / "v.txt"), "--weights", str(tmp_path / "w.txt")])
    assert code == 2
    assert "ill-posed" in capsys.readouterr().err


def test_missing_file_exit_1(tmp_path, capsys):
    assert main(["align", str(tmp_path / "nope.txt"), str(tmp_path / "nope.txt")]) == 1
    assert "error" in capsys.readouterr().err


def test_synth_register_recovers_truth(tmp_path, capsys):
    d = _synth(tmp_path, "--points", "12", "--spurious", "20", "--seed", "4", "--mode", "rigid")
    out = tmp_path / "report.json"
    code = main(["register", str(d / "source.txt"), str(d / "target.txt"),
                 "--weights", str(d / "weights.txt"), "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    jsonschema.validate(rep, io.REPORT_SCHEMA)
    truth = json.loads((d / "truth.json").read_text())
    assert rep["converged"] is True
    np.testing.assert_allclose(rep["transform"]["rotation"], truth["transform"]["rotation"], atol=1e-6)
    np.testing.assert_allclose(rep["transform"]["translation"], truth["transform"]["translation"], atol=1e-6)
    assert {(i, k) for i, k, _ in rep["pairs"]} <= {tuple(p) for p in truth["true_pairs"]}


def test_config_echo_reproduces_result(tmp_path, capsys):
    d = _synth(tmp_path, "--points", "10", "--spurious", "30", "--noise", "0.01", "--seed", "11")
    main(["register", str(d / "source.txt"), str(d / "target.txt"), "--weights", str(d / "weights.txt")])
    rep = _report(capsys)
    c = rep["config"]
    cfg = RegistrationConfig(c["threshold"], c["epsilon"], c["mode"], c["allow_reflection"],
                             c["max_iterations"], c["rank_tol"])
    U, V = io.read_points(d / "source.txt"), io.read_points(d / "target.txt")
    again = register(U, V, io.read_weights(d / "weights.txt", len(U), len(V)), cfg)
    assert again.transform.to_dict() == rep["transform"]
    assert again.score == rep["score"]
    assert len(again.iterations) == len(rep["iterations"])


def test_synth_is_byte_deterministic(tmp_path):
    a = _synth(tmp_path, "--seed", "42", "--noise", "0.1", name="a")
    b = _synth(tmp_path, "--seed", "42", "--noise", "0.1", name="b")
    for f in ("source.txt", "target.txt", "weights.txt", "truth.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_synth_outliers_and_noise_free_truth(tmp_path):
    d = _synth(tmp_path, "--points", "10", "--outliers", "5", "--noise", "0")
    assert io.read_points(d / "target.txt").shape == (15, 2)
    truth = json.loads((d / "truth.json").read_text())
    assert max(truth["residuals"]) <= 1e-12
    assert truth["spec"]["rng"] == "numpy PCG64"
    t = Transform.from_dict(truth["transform"])
    assert t.dim == 2


def test_register_without_weights_uses_proximity(tmp_path, capsys):
    rng = np.random.default_rng(3)
    U = rng.random((8, 2))
    io.write_points(tmp_path / "u.txt", U)
    io.write_points(tmp_path / "v.txt", U + 0.01)
    assert main(["register", str(tmp_path / "u.txt"), str(tmp_path / "v.txt")]) == 0
    rep = _report(capsys)
    assert rep["config"]["weights"] == "proximity"
    assert "weights" not in rep["inputs"]
    np.testing.assert_allclose(rep["transform"]["translation"], [0.01, 0.01], atol=1e-6)


def test_score_matched_copy_and_outputs(tmp_path, capsys):
    d = _synth(tmp_path, "--points", "10", "--spurious", "30", "--seed", "2")
    trace, pairs = tmp_path / "trace.csv", tmp_path / "pairs.csv"
    code = main(["score", str(d / "source.txt"), str(d / "target.txt"), "--weights", str(d / "weights.txt"),
                 "--trace-out", str(trace), "--pairs-out", str(pairs)])
    assert code == 0
    assert float(capsys.readouterr().out.strip()) <= 1e-6
    head = trace.read_text().splitlines()
    assert head[0] == "iteration,threshold,pairs_before,pairs_after,e_min,scale"
    assert len(head) > 1
    lines = pairs.read_text().splitlines()
    assert lines[0].startswith("i,k,weight,residual,moved_0,moved_1,target_0,target_1")
    assert len(lines) - 1 <= 10


def test_score_non_convergent_warns(tmp_path, capsys):
    rng = np.random.default_rng(1)
    U = rng.random((4, 2))
    io.write_points(tmp_path / "u.txt", U)
    io.write_points(tmp_path / "v.txt", np.vstack([U, U + 1e-9]))
    io.write_weights(tmp_path / "w.txt", PairTable([0, 1, 2, 3] * 2, np.arange(8), np.ones(8)))
    code = main(["score", str(tmp_path / "u.txt"), str(tmp_path / "v.txt"), "--weights", str(tmp_path / "w.txt"),
                 "--threshold", "1", "--epsilon", "0.25"])
    assert code == 0
    captured = capsys.readouterr()
    assert "converged=false" in captured.err
    float(captured.out.strip())


def test_invalid_config_exit_1(tmp_path, capsys):
    d = _synth(tmp_path)
    code = main(["register", str(d / "source.txt"), str(d / "target.txt"), "--threshold", "1", "--epsilon", "2"])
    assert code == 1
