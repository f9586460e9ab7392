"""End-to-end tests of the command-line interface (in-process via main)."""

import json
import shutil
import subprocess

import numpy as np
import pytest

from labrr.cli import load_results, main
from labrr.data import load_csv, synth, save_csv
from labrr.ridgeless import load_model


def _write_synth_csv(path, fn="f1", n=30, noise=0.0, seed=1):
    save_csv(synth(fn, n, noise, seed=seed), path)
    return str(path)


# ---------------------------------------------------------------------------
# synth


def test_synth_writes_csv(tmp_path, capsys):
    out = tmp_path / "data.csv"
    rc = main(["synth", "--fn", "f1", "--n", "25", "--seed", "3", "--out", str(out)])
    assert rc == 0
    ds = load_csv(out)
    assert ds.n == 25
    assert ds.dim == 2
    stdout = capsys.readouterr().out
    assert "n=25" in stdout
    assert "d=2" in stdout


def test_synth_f2_has_six_features(tmp_path):
    out = tmp_path / "f2.csv"
    assert main(["synth", "--fn", "f2", "--n", "10", "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0]
    assert header == "x1,x2,x3,x4,x5,x6,y"


def test_synth_unknown_function_exits_2(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["synth", "--fn", "f9", "--n", "10", "--out", str(tmp_path / "x.csv")])
    assert err.value.code == 2


def test_synth_bad_count_exits_2(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["synth", "--fn", "f1", "--n", "0", "--out", str(tmp_path / "x.csv")])
    assert err.value.code == 2


# ---------------------------------------------------------------------------
# train


def _train_args(data, out, **extra):
    args = [
        "train", "--data", data, "--out", out,
        "--B", "1e-6", "--n0", "30", "--max-support-ratio", "1.0",
        "--jitter", "0", "--L", "0",
    ]
    for flag, value in extra.items():
        args += [flag, str(value)]
    return args


def test_train_interpolates_and_saves_model(tmp_path, capsys):
    data = _write_synth_csv(tmp_path / "d.csv")
    out = tmp_path / "model.json"
    rc = main(_train_args(data, str(out)))
    assert rc == 0
    model = load_model(out)
    assert model.n_support == 30
    stdout = capsys.readouterr().out
    assert stdout.startswith("model ")
    assert "stop=error_budget_met" in stdout
    assert "support=30" in stdout


def test_train_rerun_is_byte_identical(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv")
    out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(_train_args(data, str(out_a))) == 0
    assert main(_train_args(data, str(out_b))) == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_train_writes_trace(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv", n=40)
    out = tmp_path / "model.json"
    trace = tmp_path / "trace.jsonl"
    rc = main([
        "train", "--data", data, "--out", str(out), "--trace", str(trace),
        "--B", "1e-4", "--n0", "10", "--k", "5", "--L", "2", "--batch", "8",
        "--max-outer", "4",
    ])
    assert rc == 0
    records = [json.loads(line) for line in trace.read_text().splitlines()]
    assert len(records) >= 1
    assert set(records[0]) == {"round", "n_support", "max_sq_error", "mean_sq_error", "inner_losses"}
    assert records[0]["round"] == 0


def test_train_selection_flag(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv", n=40)
    out = tmp_path / "model.json"
    rc = main([
        "train", "--data", data, "--out", str(out),
        "--B", "1e-3", "--n0", "8", "--L", "1", "--max-outer", "2",
        "--selection", "x_kmeans",
    ])
    assert rc == 0


def test_train_insufficient_data_exits_2(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv", n=10)
    with pytest.raises(SystemExit) as err:
        main(["train", "--data", data, "--out", str(tmp_path / "m.json"),
              "--B", "1e-3", "--n0", "50"])
    assert err.value.code == 2


def test_train_invalid_budget_exits_2(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv")
    with pytest.raises(SystemExit) as err:
        main(["train", "--data", data, "--out", str(tmp_path / "m.json"), "--B", "-1"])
    assert err.value.code == 2


def test_train_missing_budget_exits_2(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv")
    with pytest.raises(SystemExit) as err:
        main(["train", "--data", data, "--out", str(tmp_path / "m.json")])
    assert err.value.code == 2


def test_train_missing_data_is_io_error(tmp_path):
    rc = main(["train", "--data", str(tmp_path / "absent.csv"),
               "--out", str(tmp_path / "m.json"), "--B", "1e-3"])
    assert rc == 3


def test_train_config_file_supplies_defaults(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "error_budget": 1e-6, "initial_support": 30, "max_support_ratio": 1.0,
        "jitter": 0.0, "inner_steps": 0,
    }))
    out = tmp_path / "model.json"
    rc = main(["train", "--data", data, "--out", str(out), "--config", str(cfg)])
    assert rc == 0
    assert load_model(out).n_support == 30


def test_train_flag_overrides_config_file(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "error_budget": 1e-6, "initial_support": 5, "max_support_ratio": 1.0,
        "jitter": 0.0, "inner_steps": 0,
    }))
    out = tmp_path / "model.json"
    rc = main(["train", "--data", data, "--out", str(out), "--config", str(cfg),
               "--n0", "30"])
    assert rc == 0
    assert load_model(out).n_support == 30


def test_train_unknown_config_key_exits_2(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"error_budget": 1e-3, "learning_rte": 0.1}))
    with pytest.raises(SystemExit) as err:
        main(["train", "--data", data, "--out", str(tmp_path / "m.json"),
              "--config", str(cfg)])
    assert err.value.code == 2


def test_train_non_object_config_exits_2(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv")
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2, 3]")
    with pytest.raises(SystemExit) as err:
        main(["train", "--data", data, "--out", str(tmp_path / "m.json"),
              "--config", str(cfg)])
    assert err.value.code == 2


def test_train_missing_config_file_exits_2(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv")
    with pytest.raises(SystemExit) as err:
        main(["train", "--data", data, "--out", str(tmp_path / "m.json"),
              "--config", str(tmp_path / "absent.json"), "--B", "1e-3"])
    assert err.value.code == 2


# ---------------------------------------------------------------------------
# benchmark


def _bench_args(out, trials=2):
    return [
        "benchmark", "--fn", "f1", "--n", "60", "--trials", str(trials),
        "--B", "1e-3", "--n0", "10", "--k", "5", "--L", "3",
        "--batch", "16", "--max-outer", "5", "--out", out,
    ]


def test_benchmark_writes_jsonl(tmp_path, capsys):
    out = tmp_path / "results.jsonl"
    rc = main(_bench_args(str(out)))
    assert rc == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(records) == 4  # config + 2 trials + aggregate
    assert records[0]["record"] == "config"
    assert records[0]["trials"] == 2
    assert [r["record"] for r in records[1:3]] == ["trial", "trial"]
    assert records[3]["record"] == "aggregate"
    assert records[3]["n_trials"] == 2
    assert records[3]["n_failed"] == 0
    stdout = capsys.readouterr().out
    assert "2/2 trials ok" in stdout
    assert "aggregate: mean_r2=" in stdout


def test_benchmark_results_pass_load_results(tmp_path):
    out = tmp_path / "results.jsonl"
    assert main(_bench_args(str(out))) == 0
    config, trials, aggregate = load_results(out)
    assert config is not None
    assert len(trials) == 2
    assert aggregate["mean_r_squared"] == pytest.approx(
        np.mean([t["r_squared"] for t in trials])
    )


def test_benchmark_trials_use_distinct_seeds_and_splits(tmp_path):
    out = tmp_path / "results.jsonl"
    assert main(_bench_args(str(out))) == 0
    _, trials, _ = load_results(out)
    assert [t["seed"] for t in trials] == [0, 1]
    assert trials[0]["r_squared"] != trials[1]["r_squared"]


def _strip_clocks(record):
    return {k: v for k, v in record.items() if k != "wall_clock_seconds"}


def test_benchmark_rerun_reproduces_results(tmp_path):
    out_a, out_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(_bench_args(str(out_a))) == 0
    assert main(_bench_args(str(out_b))) == 0
    rec_a = [json.loads(line) for line in out_a.read_text().splitlines()]
    rec_b = [json.loads(line) for line in out_b.read_text().splitlines()]
    assert [_strip_clocks(r) for r in rec_a] == [_strip_clocks(r) for r in rec_b]


def test_benchmark_tampered_aggregate_is_rejected(tmp_path):
    out = tmp_path / "results.jsonl"
    assert main(_bench_args(str(out))) == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    records[-1]["mean_r_squared"] += 0.1
    out.write_text("".join(json.dumps(r) + "\n" for r in records))
    with pytest.raises(ValueError):
        load_results(out)


def test_benchmark_requires_exactly_one_source(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv")
    with pytest.raises(SystemExit) as err:
        main(["benchmark", "--trials", "1", "--B", "1e-3"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["benchmark", "--data", data, "--fn", "f1", "--n", "30",
              "--trials", "1", "--B", "1e-3"])
    assert err.value.code == 2


def test_benchmark_fn_needs_n():
    with pytest.raises(SystemExit) as err:
        main(["benchmark", "--fn", "f1", "--trials", "1", "--B", "1e-3"])
    assert err.value.code == 2


def test_benchmark_validates_trials_and_clip(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["benchmark", "--fn", "f1", "--n", "30", "--trials", "0", "--B", "1e-3"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["benchmark", "--fn", "f1", "--n", "30", "--trials", "1",
              "--B", "1e-3", "--clip", "-1"])
    assert err.value.code == 2


def test_benchmark_fixed_test_trains_on_full_file(tmp_path):
    train_csv = _write_synth_csv(tmp_path / "train.csv", n=40, seed=2)
    test_csv = _write_synth_csv(tmp_path / "test.csv", n=15, seed=3)
    out = tmp_path / "results.jsonl"
    rc = main([
        "benchmark", "--data", train_csv, "--test-csv", test_csv,
        "--trials", "2", "--B", "1e-3", "--n0", "10", "--k", "5", "--L", "2",
        "--batch", "16", "--max-outer", "3", "--out", str(out),
    ])
    assert rc == 0
    config, trials, _ = load_results(out)
    assert config["fixed_test"] == test_csv
    assert all(t["n_train"] == 40 for t in trials)
    assert all(t["n_test"] == 15 for t in trials)


def test_benchmark_mismatched_test_dim_exits_2(tmp_path):
    train_csv = _write_synth_csv(tmp_path / "train.csv", fn="f1", n=40)
    test_csv = _write_synth_csv(tmp_path / "test.csv", fn="f2", n=15)
    with pytest.raises(SystemExit) as err:
        main(["benchmark", "--data", train_csv, "--test-csv", test_csv,
              "--trials", "1", "--B", "1e-3"])
    assert err.value.code == 2


@pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
def test_benchmark_all_trials_failing_returns_1(tmp_path, capsys):
    # Identical feature rows make the jitter-free Gram matrix singular in
    # every trial; the run must report rc 1 and per-trial errors.
    rows = ["x1,x2,y"] + [f"1.0,2.0,{i}.0" for i in range(30)]
    data = tmp_path / "flat.csv"
    data.write_text("\n".join(rows) + "\n")
    out = tmp_path / "results.jsonl"
    rc = main([
        "benchmark", "--data", str(data), "--trials", "2", "--B", "1e-3",
        "--n0", "4", "--L", "1", "--jitter", "0", "--out", str(out),
    ])
    assert rc == 1
    records = [json.loads(line) for line in out.read_text().splitlines()]
    trials = [r for r in records if r.get("record") == "trial"]
    assert len(trials) == 2
    assert all("error" in t for t in trials)
    assert records[-1]["n_failed"] == 2
    assert "FAILED" in capsys.readouterr().out


def test_benchmark_config_file_keys(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "error_budget": 1e-3, "trials": 2, "base_seed": 5,
        "initial_support": 10, "grow_count": 5, "inner_steps": 2,
        "batch_size": 16, "max_rounds": 3,
    }))
    out = tmp_path / "results.jsonl"
    rc = main(["benchmark", "--fn", "f1", "--n", "60", "--config", str(cfg),
               "--out", str(out)])
    assert rc == 0
    config, trials, _ = load_results(out)
    assert config["base_seed"] == 5
    assert [t["seed"] for t in trials] == [5, 6]


# ---------------------------------------------------------------------------
# predict


@pytest.fixture()
def trained(tmp_path):
    data = _write_synth_csv(tmp_path / "d.csv")
    model_path = tmp_path / "model.json"
    assert main(_train_args(data, str(model_path))) == 0
    return data, model_path


def test_predict_round_trips_training_labels(tmp_path, trained):
    data, model_path = trained
    out = tmp_path / "preds.csv"
    rc = main(["predict", "--model", str(model_path), "--data", data,
               "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "prediction"
    preds = np.array([float(v) for v in lines[1:]])
    truth = load_csv(data).y
    assert preds.shape == truth.shape
    assert np.abs(preds - truth).max() <= 1e-6


def test_predict_to_stdout(capsys, trained):
    data, model_path = trained
    capsys.readouterr()  # drain the fixture's training summary
    rc = main(["predict", "--model", str(model_path), "--data", data])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "prediction"
    assert len(lines) == 31


def test_predict_accepts_feature_only_csv(tmp_path, trained):
    data, model_path = trained
    ds = load_csv(data)
    feats = tmp_path / "features.csv"
    feats.write_text(
        "x1,x2\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in ds.x)
    )
    out = tmp_path / "preds.csv"
    rc = main(["predict", "--model", str(model_path), "--data", str(feats),
               "--out", str(out)])
    assert rc == 0
    preds = np.array([float(v) for v in out.read_text().splitlines()[1:]])
    assert np.abs(preds - ds.y).max() <= 1e-6


def test_predict_clip_bounds_predictions(tmp_path, trained):
    data, model_path = trained
    out = tmp_path / "preds.csv"
    rc = main(["predict", "--model", str(model_path), "--data", data,
               "--clip", "0.5", "--out", str(out)])
    assert rc == 0
    preds = np.array([float(v) for v in out.read_text().splitlines()[1:]])
    y = load_csv(data).y
    mid = (y.min() + y.max()) / 2.0
    half = (y.max() - y.min()) / 2.0
    assert np.all(preds >= mid - 0.5 * half - 1e-9)
    assert np.all(preds <= mid + 0.5 * half + 1e-9)


def test_predict_invalid_clip_exits_2(trained):
    data, model_path = trained
    with pytest.raises(SystemExit) as err:
        main(["predict", "--model", str(model_path), "--data", data, "--clip", "0"])
    assert err.value.code == 2


def test_predict_wrong_column_count_returns_2(tmp_path, trained):
    _, model_path = trained
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c,d,e\n1,2,3,4,5\n")
    rc = main(["predict", "--model", str(model_path), "--data", str(bad)])
    assert rc == 2


def test_predict_corrupt_model_returns_3(tmp_path, trained):
    data, _ = trained
    broken = tmp_path / "broken.json"
    broken.write_text("not a model {")
    rc = main(["predict", "--model", str(broken), "--data", data])
    assert rc == 3


def test_predict_missing_files_return_3(tmp_path, trained):
    data, model_path = trained
    assert main(["predict", "--model", str(tmp_path / "absent.json"),
                 "--data", data]) == 3
    assert main(["predict", "--model", str(model_path),
                 "--data", str(tmp_path / "absent.csv")]) == 3


# ---------------------------------------------------------------------------
# misc


def test_no_command_exits_2():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2


def test_log_env_does_not_break_commands(tmp_path, monkeypatch):
    monkeypatch.setenv("LABRR_LOG", "debug")
    out = tmp_path / "d.csv"
    assert main(["synth", "--fn", "f3", "--n", "8", "--out", str(out)]) == 0


@pytest.mark.skipif(shutil.which("labrr") is None, reason="console script not on PATH")
def test_console_script_entry_point(tmp_path):
    out = tmp_path / "cli.csv"
    proc = subprocess.run(
        ["labrr", "synth", "--fn", "f1", "--n", "6", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert out.exists()
