import subprocess
import sys

import numpy as np
import pytest

from urnn_equiv.cli import main
from urnn_equiv.serialize import read_json, read_model, write_model
from urnn_equiv.rnn import RnnParams


@pytest.fixture
def workspace(tmp_path):
    return tmp_path


def run(args):
    return main([str(a) for a in args])


def gen_system(workspace, name="model.json", epsilon=0.01, seed=7, n=4):
    path = workspace / name
    code = run(
        ["gen-system", "--n", n, "--m", 2, "--p", 2, "--epsilon", epsilon,
         "--seed", seed, "--out", path]
    )
    assert code == 0
    return path


def gen_data(workspace, model, name="data", **kw):
    out = workspace / name
    args = ["gen-data", "--model", model, "--out", out, "--n-train", kw.get("n_train", 6),
            "--n-test", kw.get("n_test", 3), "--t-len", kw.get("t_len", 40),
            "--snr-db", kw.get("snr_db", 20.0), "--seed", kw.get("seed", 3)]
    assert run(args) == 0
    return out


def test_dof_output(capsys):
    assert run(["dof", "--n", 4, "--m", 2, "--p", 2]) == 0
    out = capsys.readouterr().out
    assert "32" in out and "60" in out


def test_gen_system_records_singular_range(workspace):
    path = gen_system(workspace)
    _, metadata = read_model(str(path))
    lo, hi = metadata["singular_value_range"]
    assert 0.99 - 1e-12 < lo and hi < 1.0
    fractions = metadata["achieved_activity_fractions"]
    assert all(abs(f - 0.6) <= 0.05 for f in fractions)


def test_gen_system_missing_parent_dir_is_io_error(workspace, capsys):
    code = run(
        ["gen-system", "--n", 2, "--m", 1, "--p", 1, "--seed", 0,
         "--out", workspace / "nope" / "model.json"]
    )
    assert code == 3
    assert "nope" in capsys.readouterr().err


def test_gen_data_records_snr(workspace):
    model = gen_system(workspace, epsilon=0.05)
    data_dir = gen_data(workspace, model)
    meta = read_json(str(data_dir / "meta.json"))
    assert abs(meta["empirical_snr_db"] - 20.0) <= 0.5


def test_embed_and_verify_roundtrip(workspace, capsys):
    model = gen_system(workspace, epsilon=0.05)
    embedded = workspace / "embedded.json"
    assert run(["embed", "--model", model, "--bound-m", 10.0, "--out", embedded]) == 0
    out = capsys.readouterr().out
    assert "states=8" in out

    report = workspace / "verify.json"
    code = run(
        ["verify", "--model-a", model, "--model-b", embedded, "--bound-m", 10.0,
         "--trials", 10, "--t-len", 100, "--tol", 1e-8, "--seed", 5,
         "--report", report]
    )
    assert code == 0
    doc = read_json(str(report))
    assert doc["passed"] is True
    assert doc["max_abs_deviation"] <= 1e-8
    assert len(doc["per_trial_deviations"]) == 10


def test_verify_self_zero_deviation(workspace):
    model = gen_system(workspace, epsilon=0.05)
    report = workspace / "self.json"
    code = run(
        ["verify", "--model-a", model, "--model-b", model, "--bound-m", 5.0,
         "--trials", 3, "--t-len", 50, "--tol", 1e-8, "--seed", 1, "--report", report]
    )
    assert code == 0
    assert read_json(str(report))["max_abs_deviation"] == 0.0


def test_verify_fails_on_perturbed_model(workspace):
    model = gen_system(workspace, epsilon=0.05)
    params, _ = read_model(str(model))
    perturbed = workspace / "perturbed.json"
    write_model(str(perturbed), params.replace(c=params.c * 1.01))
    code = run(
        ["verify", "--model-a", model, "--model-b", perturbed, "--bound-m", 5.0,
         "--trials", 3, "--t-len", 50, "--tol", 1e-8, "--seed", 1]
    )
    assert code == 1


def test_embed_rejects_sigmoid(workspace, capsys):
    model = gen_system(workspace, epsilon=0.05)
    params, _ = read_model(str(model))
    sigmoid_path = workspace / "sigmoid.json"
    write_model(str(sigmoid_path), params.replace(activation="sigmoid"))
    code = run(["embed", "--model", sigmoid_path, "--bound-m", 1.0, "--out", workspace / "x.json"])
    assert code == 2
    assert "relu" in capsys.readouterr().err


def test_embed_rejects_expansive(workspace, capsys):
    expansive = RnnParams(
        w=np.array([[1.2]]), f=np.array([[1.0]]), b=np.zeros(1),
        c=np.array([[1.0]]), h_init=np.zeros(1), activation="relu",
    )
    path = workspace / "expansive.json"
    write_model(str(path), expansive)
    code = run(["embed", "--model", path, "--bound-m", 1.0, "--out", workspace / "x.json"])
    assert code == 2
    assert "contractive" in capsys.readouterr().err


def test_train_and_eval(workspace, capsys):
    model = gen_system(workspace, epsilon=0.1, n=2)
    data_dir = gen_data(workspace, model, t_len=30)
    trained = workspace / "trained.json"
    report = workspace / "train.json"
    code = run(
        ["train", "--dataset", data_dir, "--hidden-units", 2, "--constraint", "unitary",
         "--max-epochs", 2, "--seed", 0, "--out", trained, "--report", report]
    )
    assert code == 0
    doc = read_json(str(report))
    assert doc["epochs_run"] == 2
    assert doc["final_constraint_residual"] <= 1e-8
    assert doc["wall_time_s"] is None

    assert run(["eval", "--model", trained, "--dataset", data_dir]) == 0
    assert "test R^2" in capsys.readouterr().out


def test_converse_relu_report(workspace):
    report = workspace / "relu.json"
    code = run(["converse", "relu", "--wc", 0.9, "--grid-resolution", 9, "--report", report])
    assert code == 0
    doc = read_json(str(report))
    assert doc["one_state_gap"] >= 0.01
    assert doc["two_state_embedding_deviation"] <= 1e-8


def test_converse_sigmoid_report(workspace):
    report = workspace / "sig.json"
    code = run(["converse", "sigmoid", "--wc", 0.9, "--candidates", 5, "--seed", 1,
                "--report", report])
    assert code == 0
    doc = read_json(str(report))
    assert doc["min_max_gap"] > 1e-3
    assert len(doc["per_candidate_max_gap"]) == 5


def test_converse_rejects_bad_wc(capsys):
    assert run(["converse", "relu", "--wc", 1.5]) == 2


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as err:
        run(["gen-system", "--n", 2])  # missing required flags
    assert err.value.code == 2


def test_reports_are_byte_identical_across_reruns(workspace):
    model = gen_system(workspace, epsilon=0.05, name="m1.json")
    model2 = gen_system(workspace, epsilon=0.05, name="m2.json")
    assert (workspace / "m1.json").read_bytes() == (workspace / "m2.json").read_bytes()

    r1 = workspace / "r1.json"
    r2 = workspace / "r2.json"
    for r in (r1, r2):
        assert run(
            ["verify", "--model-a", model, "--model-b", model2, "--bound-m", 2.0,
             "--trials", 4, "--t-len", 30, "--tol", 1e-8, "--seed", 11, "--report", r]
        ) == 0
    assert r1.read_bytes() == r2.read_bytes()


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "urnn_equiv.cli", "dof", "--n", "1", "--m", "1", "--p", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "rnn=3" in proc.stdout
