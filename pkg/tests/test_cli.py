"""Command-line surface: exit codes, artifacts, precedence, isolation."""

import json

import pytest

from wxhier.cli import main
from wxhier.dataset import load_manifest
from wxhier.hierarchy import bundle_content_hash
from wxhier.taxonomy import LEAF_CLASSES


def run(*argv):
    return main([str(a) for a in argv])


# ------------------------------------------------------------------- split

def test_split_writes_four_files(small_data, tmp_path, capsys):
    rc = run("split", "--manifest", small_data / "manifest.csv",
             "--output-dir", tmp_path, "--seed", 11)
    assert rc == 0
    for name in ("train.csv", "val.csv", "test.csv", "split_summary.csv"):
        assert (tmp_path / name).exists()
    out = capsys.readouterr().out
    assert "train" in out and "seed 11" in out
    total = sum(
        len(load_manifest((tmp_path / n).read_bytes()))
        for n in ("train.csv", "val.csv", "test.csv")
    )
    assert total == 11 * 8


def test_split_documented_example(tmp_path):
    # 20 entries over 2 classes, defaults: per class test 3, val 1, train 6
    lines = ["path,label"] + [f"r{i}.ppm,rain" for i in range(10)] + [
        f"s{i}.ppm,snow" for i in range(10)
    ]
    manifest = tmp_path / "m.csv"
    manifest.write_text("\n".join(lines) + "\n")
    out = tmp_path / "out"
    assert run("split", "--manifest", manifest, "--output-dir", out, "--seed", 7) == 0
    sizes = tuple(
        len(load_manifest((out / n).read_bytes())) for n in ("train.csv", "val.csv", "test.csv")
    )
    assert sizes == (12, 2, 6)


def test_split_rerun_byte_identical(small_data, tmp_path):
    for sub in ("a", "b"):
        assert run("split", "--manifest", small_data / "manifest.csv",
                   "--output-dir", tmp_path / sub, "--seed", 4, "--strict") == 0
    for name in ("train.csv", "val.csv", "test.csv", "split_summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# -------------------------------------------------------------- exit codes

def test_missing_manifest_is_io_error(tmp_path, capsys):
    assert run("split", "--manifest", tmp_path / "nope.csv", "--output-dir", tmp_path) == 3
    assert "I/O error" in capsys.readouterr().err


def test_bad_fraction_is_config_error(small_data, tmp_path, capsys):
    rc = run("split", "--manifest", small_data / "manifest.csv",
             "--output-dir", tmp_path, "--test-fraction", "1.5")
    assert rc == 2
    assert "configuration error" in capsys.readouterr().err


def test_unknown_label_is_data_error(tmp_path, capsys):
    manifest = tmp_path / "m.csv"
    manifest.write_text("path,label\nx.ppm,blizzard\n")
    assert run("split", "--manifest", manifest, "--output-dir", tmp_path) == 4
    assert "data error" in capsys.readouterr().err


def test_missing_class_is_data_error(small_data, tmp_path, capsys):
    entries = load_manifest((small_data / "manifest.csv").read_bytes())
    partial = tmp_path / "partial.csv"
    partial.write_text(
        "path,label\n" + "".join(f"{e.path},{e.leaf}\n" for e in entries if e.leaf != "dew")
    )
    rc = run("train", "--manifest", partial, "--root", small_data,
             "--output-dir", tmp_path, "--epochs", 1, "--input-size", 8)
    assert rc == 4
    assert "dew" in capsys.readouterr().err


def test_bad_flag_exits_2(capsys):
    assert run("split", "--no-such-flag") == 2


def test_unknown_config_key_exits_2(small_data, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"verbosity": 3}')
    rc = run("split", "--manifest", small_data / "manifest.csv",
             "--config", cfg, "--output-dir", tmp_path)
    assert rc == 2
    assert "verbosity" in capsys.readouterr().err


# ------------------------------------------------------------ config file

def test_flag_overrides_config_file(small_data, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"seed": 1, "test_fraction": 0.5}')
    out_cfg = tmp_path / "by_config"
    out_flag = tmp_path / "by_flag"
    assert run("split", "--manifest", small_data / "manifest.csv",
               "--config", cfg, "--output-dir", out_cfg) == 0
    assert run("split", "--manifest", small_data / "manifest.csv",
               "--config", cfg, "--output-dir", out_flag, "--test-fraction", 0.25) == 0
    n_cfg = len(load_manifest((out_cfg / "test.csv").read_bytes()))
    n_flag = len(load_manifest((out_flag / "test.csv").read_bytes()))
    assert n_cfg == 11 * 4  # half of 8 per class
    assert n_flag == 11 * 2  # quarter of 8 per class


def test_env_var_sets_default_output_dir(small_data, tmp_path, monkeypatch):
    monkeypatch.setenv("WXHIER_OUTPUT_DIR", str(tmp_path / "from_env"))
    assert run("split", "--manifest", small_data / "manifest.csv", "--seed", 2) == 0
    assert (tmp_path / "from_env" / "train.csv").exists()


# ----------------------------------------------------------------- predict

def test_predict_json_lines_with_isolation(small_bundle, small_data, tmp_path, capsys):
    good = small_data / "rain" / "000.ppm"
    bad = tmp_path / "broken.ppm"
    bad.write_bytes(b"P6 trash")
    rc = run("predict", "--bundle", small_bundle, good, bad)
    assert rc == 0  # one success is enough
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    ok = json.loads(lines[0])
    assert ok["leaf"] in LEAF_CLASSES
    assert ok["group"] in ("Rainy", "Dusty", "Cold")
    assert ok["safety_source"] in ("taxonomy", "cold_model")
    assert len(ok["group_probs"]) == 3
    err = json.loads(lines[1])
    assert err["path"].endswith("broken.ppm")
    assert "error" in err and "leaf" not in err


def test_predict_cold_route_has_safety_fields(small_bundle, small_data, capsys):
    images = sorted((small_data / "snow").glob("*.ppm"))
    rc = run("predict", "--bundle", small_bundle, *images)
    assert rc == 0
    docs = [json.loads(l) for l in capsys.readouterr().out.strip().splitlines()]
    cold = [d for d in docs if d.get("group") == "Cold"]
    assert cold, "expected at least one cold-routed snow image"
    for d in cold:
        assert d["safety_source"] == "cold_model"
        assert d["safety"] in ("Safe", "PotentiallyHazardous")
        assert len(d["safety_probs"]) == 2


def test_predict_all_failures_exit_4(small_bundle, tmp_path, capsys):
    assert run("predict", "--bundle", small_bundle, tmp_path / "a.ppm", tmp_path / "b.ppm") == 4
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    assert all("error" in json.loads(l) for l in lines)


# ---------------------------------------------------------------- evaluate

def test_evaluate_writes_report_with_bundle_hash(small_bundle, small_data, tmp_path, capsys):
    rc = run("evaluate", "--bundle", small_bundle,
             "--manifest", small_data / "manifest.csv", "--root", small_data,
             "--output-dir", tmp_path)
    assert rc == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["bundle_hash"] == bundle_content_hash(small_bundle)
    assert 0.0 <= doc["e2e_leaf_accuracy"] <= 1.0
    for name in ("confusion_primary.csv", "confusion_leaf.csv", "confusion_safety.csv",
                 "confusion_routed_cold.csv", "confusion_oracle_rainy.csv"):
        assert (tmp_path / name).exists(), name
    assert "accuracy" in capsys.readouterr().out


def test_evaluate_missing_bundle_is_data_error(small_data, tmp_path, capsys):
    rc = run("evaluate", "--bundle", tmp_path / "nothing",
             "--manifest", small_data / "manifest.csv", "--output-dir", tmp_path)
    assert rc == 4
    assert "bundle.json" in capsys.readouterr().err


# ----------------------------------------------------------------- compare

def test_compare_four_rows(small_bundle, small_data, tmp_path, capsys):
    flat_out = tmp_path / "flat"
    rc = run("train", "--manifest", small_data / "manifest.csv", "--root", small_data,
             "--output-dir", flat_out, "--arch", "softmax-flat",
             "--epochs", 2, "--input-size", 16, "--seed", 0)
    assert rc == 0
    rc = run("compare", "--manifest", small_data / "manifest.csv", "--root", small_data,
             "--output-dir", tmp_path,
             f"hier={small_bundle}", f"flat={flat_out / 'model.wxm1'}",
             f"hier2={small_bundle}", f"flat2={flat_out / 'model.wxm1'}")
    assert rc == 0
    lines = (tmp_path / "comparison.csv").read_text().strip().splitlines()
    assert lines[0] == "model,accuracy,accuracy_percent"
    assert len(lines) == 5
    assert lines[1].startswith("hier,")
    assert lines[1] == lines[3].replace("hier2", "hier")


def test_compare_requires_two_models(small_data, tmp_path):
    rc = run("compare", "--manifest", small_data / "manifest.csv",
             "--output-dir", tmp_path, "only=one")
    assert rc == 2


def test_compare_bad_entry_shape(small_data, tmp_path):
    rc = run("compare", "--manifest", small_data / "manifest.csv",
             "--output-dir", tmp_path, "missing-equals-sign", "x=y")
    assert rc == 2


# -------------------------------------------------------------------- misc

def test_stats_and_preprocess_round_trip(small_data, tmp_path):
    assert run("stats", "--manifest", small_data / "manifest.csv",
               "--output-dir", tmp_path, "--input-size", 12) == 0
    doc = json.loads((tmp_path / "stats.json").read_text())
    assert doc["sample_count"] == 88 * 12 * 12 * 3
    assert run("preprocess", "--manifest", small_data / "manifest.csv",
               "--output-dir", tmp_path, "--input-size", 12,
               "--stats", tmp_path / "stats.json") == 0
    from wxhier.tensorio import read_tensor

    batch = read_tensor(tmp_path / "tensors.wxt1")
    assert batch.shape == (88, 12, 12, 3)
    labels = (tmp_path / "labels.csv").read_text().strip().splitlines()
    assert labels[0] == "index,path,label"
    assert len(labels) == 89


def test_synth_subcommand(tmp_path):
    assert run("synth", "--output-dir", tmp_path / "ds",
               "--per-class", 2, "--image-size", 24, "--seed", 3) == 0
    entries = load_manifest((tmp_path / "ds" / "manifest.csv").read_bytes())
    assert len(entries) == 22


def test_train_flat_writes_history(small_data, tmp_path, capsys):
    rc = run("train", "--manifest", small_data / "manifest.csv", "--root", small_data,
             "--val-manifest", small_data / "manifest.csv",
             "--output-dir", tmp_path, "--arch", "softmax-flat",
             "--epochs", 2, "--input-size", 8, "--seed", 1)
    assert rc == 0
    assert (tmp_path / "model.wxm1").exists()
    history = (tmp_path / "history.csv").read_text().strip().splitlines()
    assert history[0] == "epoch,train_loss,train_acc,val_acc"
    assert len(history) == 3
    assert "final validation accuracy" in capsys.readouterr().out


def test_hierarchical_bundle_has_five_models(small_bundle):
    models = sorted(p.name for p in small_bundle.glob("*.wxm1"))
    assert models == [
        "primary.wxm1", "sub_cold_fine.wxm1", "sub_cold_safety.wxm1",
        "sub_dusty.wxm1", "sub_rainy.wxm1",
    ]
