"""Experiment drivers: config, streams, commands, CLI exit codes."""

import csv
import json
import os

import numpy as np
import pytest

from greedyq import cli, embedding, graphs, harness, learning
from greedyq.errors import ArgumentError, ParseError
from greedyq.harness import (STREAM_TEST, STREAM_TRAIN, STREAM_VAL,
                             ExperimentConfig, file_sha256, make_instance,
                             parse_config, write_config)
from greedyq.problems import Problem

TINY = dict(problem=Problem.MVC, family="er", train_sizes=(6, 8),
            test_sizes=(6, 8), er_p=0.3, val_count=3, test_count=4,
            episodes=2, embed_p=4, batch_size=8, capacity=100,
            eps_anneal_steps=20, seed=5)


def tiny_cfg(**overrides):
    kw = dict(TINY)
    kw.update(overrides)
    return ExperimentConfig(**kw)


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        comment = fh.readline()
        rows = list(csv.reader(fh))
    return comment, rows[0], rows[1:]


def test_config_defaults_follow_problem_presets():
    cfg = ExperimentConfig(problem=Problem.MVC)
    assert (cfg.embed_T, cfg.n_step, cfg.batch_size) == (5, 5, 128)
    assert cfg.reward_norm == 20.0
    assert "model" in cfg.methods and "exact" in cfg.methods
    tsp = ExperimentConfig(problem=Problem.TSP, family="tsp-random")
    assert (tsp.embed_T, tsp.n_step, tsp.gamma) == (4, 1, 0.1)
    assert tsp.reward_norm == 20.0 * tsp.tsp_extent


def test_config_validation():
    with pytest.raises(ArgumentError):
        ExperimentConfig(family="grid")
    with pytest.raises(ArgumentError):
        ExperimentConfig(problem=Problem.TSP, family="er")
    with pytest.raises(ArgumentError):
        ExperimentConfig(train_sizes=(9, 5))


def test_config_file_roundtrip(tmp_path):
    cfg = tiny_cfg()
    path = str(tmp_path / "exp.cfg")
    write_config(cfg, path)
    loaded = parse_config(path)
    assert loaded == cfg
    assert loaded.config_hash() == cfg.config_hash()
    override = parse_config(path, seed=9)
    assert override.seed == 9 and override.config_hash() != cfg.config_hash()


def test_config_rejects_unknown_keys(tmp_path):
    path = str(tmp_path / "bad.cfg")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("[training]\nlearning_rate = 0.1\n")
    with pytest.raises(ParseError):
        parse_config(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("[training]\nepisodes = soon\n")
    with pytest.raises(ArgumentError):
        parse_config(path)


def test_instance_streams_are_deterministic_and_disjoint():
    cfg = tiny_cfg()
    again = tiny_cfg()
    for stream in (STREAM_TRAIN, STREAM_VAL, STREAM_TEST):
        a = make_instance(cfg, stream, 3)
        b = make_instance(again, stream, 3)
        assert a.edge_u.tolist() == b.edge_u.tolist()
        assert a.edge_v.tolist() == b.edge_v.tolist()
        assert cfg.train_sizes[0] <= a.node_count <= cfg.train_sizes[1]
    train = make_instance(cfg, STREAM_TRAIN, 0)
    test = make_instance(cfg, STREAM_TEST, 0)
    assert (train.node_count != test.node_count
            or train.edge_u.tolist() != test.edge_u.tolist())


def test_generate_and_regenerate_bit_identical(tmp_path):
    cfg = tiny_cfg()
    out1 = str(tmp_path / "set1")
    manifest = harness.cmd_generate(cfg, out1, stream="test")
    assert manifest["count"] == cfg.test_count
    assert len(manifest["instances"]) == cfg.test_count
    for entry in manifest["instances"]:
        assert cfg.test_sizes[0] <= entry["n"] <= cfg.test_sizes[1]
        assert os.path.exists(os.path.join(out1, entry["file"]))
    hashes = {e["file"]: file_sha256(os.path.join(out1, e["file"]))
              for e in manifest["instances"]}
    out2 = str(tmp_path / "set2")
    harness.regenerate(os.path.join(out1, "manifest.json"), out2)
    for fname, digest in hashes.items():
        assert file_sha256(os.path.join(out2, fname)) == digest


def test_regenerate_rejects_tampered_manifest(tmp_path):
    cfg = tiny_cfg()
    out = str(tmp_path / "set")
    harness.cmd_generate(cfg, out, stream="val")
    mpath = os.path.join(out, "manifest.json")
    with open(mpath, encoding="utf-8") as fh:
        manifest = json.load(fh)
    manifest["config"] = manifest["config"].replace("er_p = 0.3",
                                                    "er_p = 0.4")
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh)
    with pytest.raises(ParseError):
        harness.regenerate(mpath)


def test_train_zero_episodes_keeps_initialization(tmp_path):
    cfg = tiny_cfg(episodes=0)
    model = str(tmp_path / "zero.model")
    harness.cmd_train(cfg, model)
    params, _meta = embedding.load_model(model)
    fresh = embedding.init_params(cfg.embed_p, 1, 1, cfg.embed_T, cfg.seed,
                                  cfg.extra_layer)
    assert (params.to_vector() == fresh.to_vector()).all()


def test_train_same_seed_same_model_hash(tmp_path):
    paths = []
    for name in ("a.model", "b.model"):
        cfg = tiny_cfg()
        path = str(tmp_path / name)
        harness.cmd_train(cfg, path, log_out=path + ".csv")
        paths.append(path)
    assert file_sha256(paths[0]) == file_sha256(paths[1])
    with open(paths[0] + ".csv", encoding="utf-8") as fh:
        a = fh.read()
    with open(paths[1] + ".csv", encoding="utf-8") as fh:
        b = fh.read()
    assert a == b
    _comment, header, rows = read_csv(paths[0] + ".csv")
    assert header == ["episode", "step", "epsilon", "lr", "loss",
                      "validation_ratio"]
    assert rows


def test_eval_exact_only_and_aggregate_mean(tmp_path):
    cfg = tiny_cfg(methods=("exact",))
    out = str(tmp_path / "results.csv")
    harness.cmd_eval(cfg, out)
    comment, header, rows = read_csv(out)
    assert comment.startswith("# greedyq ")
    assert cfg.config_hash()[:12] in comment
    assert header == ["instance", "n", "method", "value", "ratio",
                      "reference"]
    data = [r for r in rows if r[0] != "mean"]
    mean = [r for r in rows if r[0] == "mean"]
    assert len(data) == cfg.test_count and len(mean) == 1
    assert all(float(r[4]) == 1.0 for r in data)
    assert all(r[5] == "exact" for r in data)
    assert float(mean[0][4]) == 1.0


def test_eval_rows_reproducible_and_ratios_at_least_one(tmp_path):
    cfg = tiny_cfg(methods=("exact", "mvc-approx", "mvc-approx-greedy"))
    out1 = str(tmp_path / "r1.csv")
    out2 = str(tmp_path / "r2.csv")
    harness.cmd_eval(cfg, out1, timings_out=str(tmp_path / "t1.csv"))
    harness.cmd_eval(cfg, out2)
    assert file_sha256(out1) == file_sha256(out2)
    _c, _h, rows = read_csv(out1)
    data = [r for r in rows if r[0] != "mean"]
    assert all(float(r[4]) >= 1.0 for r in data if r[5] == "exact")
    by_method = {}
    for r in data:
        by_method.setdefault(r[2], []).append(float(r[4]))
    for r in rows:
        if r[0] == "mean":
            assert float(r[4]) == pytest.approx(
                np.mean(by_method[r[2]]), abs=1e-12)
    _c, theader, trows = read_csv(str(tmp_path / "t1.csv"))
    assert theader == ["instance", "n", "method", "seconds"]
    assert all(float(r[3]) > 0.0 for r in trows)


def test_eval_with_model_and_generalize_agree(tmp_path):
    cfg = tiny_cfg(methods=("model", "mvc-approx-greedy", "exact"))
    model = str(tmp_path / "m.model")
    harness.cmd_train(cfg, model)
    out = str(tmp_path / "eval.csv")
    harness.cmd_eval(cfg, out, model_path=model)
    _c, _h, rows = read_csv(out)
    model_mean = [r for r in rows if r[0] == "mean" and r[2] == "model"]
    assert len(model_mean) == 1
    grid = str(tmp_path / "grid.csv")
    gridrows = harness.cmd_generalize(cfg, model, [cfg.test_sizes], grid)
    assert len(gridrows) == 1
    train_tag, test_tag, count, ratio, ref = gridrows[0]
    assert (train_tag, test_tag) == ("6-8", "6-8")
    assert count == cfg.test_count and ref == "exact"
    assert float(ratio) == pytest.approx(float(model_mean[0][4]), abs=1e-12)
    _c2, gheader, grows = read_csv(grid)
    assert gheader == ["train_sizes", "test_sizes", "instances",
                       "mean_ratio", "reference"]
    assert len(grows) == 1


def test_eval_requires_model_file_for_model_method(tmp_path):
    cfg = tiny_cfg()
    with pytest.raises(ArgumentError):
        harness.cmd_eval(cfg, str(tmp_path / "x.csv"),
                         methods=("model", "exact"))


def test_timesweep_baselines_survive_oracle_size_limit(tmp_path):
    cfg = tiny_cfg(problem=Problem.MAXCUT, test_sizes=(26, 28),
                   test_count=3, methods=("maxcut-approx", "exact"))
    out = str(tmp_path / "sweep.csv")
    rows = harness.cmd_timesweep(cfg, out)
    assert len(rows) == 3
    assert all(r[0] == "maxcut-approx" for r in rows)
    assert all(float(r[2]) > 0.0 for r in rows)
    # best-known reference is the only value, so every ratio is 1.0
    assert all(float(r[3]) == 1.0 for r in rows)
    _c, header, _data = read_csv(out)
    assert header == ["method", "instance", "seconds", "ratio"]


def test_active_search_reports_ratio_against_exact(tmp_path):
    cfg = tiny_cfg(problem=Problem.TSP, family="tsp-random",
                   train_sizes=(5, 5), test_sizes=(5, 5),
                   eps_anneal_steps=40)
    ps = graphs.gen_tsp_points(5, "random", seed=77)
    g = graphs.knn_graph(ps, 4)
    path = str(tmp_path / "five.graph")
    graphs.save_graph(g, path)
    r1 = harness.cmd_active_search(cfg, path, episodes=3)
    r2 = harness.cmd_active_search(cfg, path, episodes=3)
    assert r1["best_value"] == r2["best_value"]
    assert r1["reference_kind"] == "exact"
    assert r1["ratio"] >= 1.0
    assert sorted(r1["solution"]) == list(range(5))


def test_active_search_uses_bundled_tsplib_optimum():
    cfg = tiny_cfg(problem=Problem.TSP, family="tsp-random", embed_p=4,
                   capacity=60, eps_anneal_steps=60)
    data = os.path.join(os.path.dirname(harness.__file__), "data",
                        "berlin52.tsp")
    report = harness.cmd_active_search(cfg, data, episodes=1)
    assert report["reference"] == 7542.0
    assert report["reference_kind"] == "best-known"
    assert report["problem"] == "tsp"
    assert report["ratio"] >= 1.0


def test_load_single_instance_kinds(tmp_path):
    scp = graphs.gen_scp(10, 0.3, seed=3)
    spath = str(tmp_path / "inst.graph")
    graphs.save_graph(scp, spath)
    _g, kind, best = harness.load_single_instance(spath)
    assert kind is Problem.SCP and best is None
    er = graphs.gen_erdos_renyi(8, 0.3, seed=3)
    gpath = str(tmp_path / "plain.graph")
    graphs.save_graph(er, gpath)
    with pytest.raises(ArgumentError):
        harness.load_single_instance(gpath)
    _g, kind, _best = harness.load_single_instance(gpath, Problem.MAXCUT)
    assert kind is Problem.MAXCUT


def write_tiny_config(path, **overrides):
    kw = dict(TINY)
    kw.update(overrides)
    write_config(ExperimentConfig(**kw), path)


def test_cli_generate_and_eval_roundtrip(tmp_path):
    cfgpath = str(tmp_path / "exp.cfg")
    write_tiny_config(cfgpath)
    out = str(tmp_path / "instances")
    assert cli.main(["generate", "--config", cfgpath, "--out", out,
                     "--count", "2"]) == 0
    assert os.path.exists(os.path.join(out, "manifest.json"))
    results = str(tmp_path / "results.csv")
    assert cli.main(["eval", "--config", cfgpath, "--out", results,
                     "--methods", "exact,mvc-approx-greedy"]) == 0
    assert os.path.exists(results)


def test_cli_argument_errors_exit_2(tmp_path):
    bad = str(tmp_path / "bad.cfg")
    with open(bad, "w", encoding="utf-8") as fh:
        fh.write("[training]\nlearning_rate = 0.1\n")
    assert cli.main(["generate", "--config", bad,
                     "--out", str(tmp_path / "x")]) == 2
    cfgpath = str(tmp_path / "exp.cfg")
    write_tiny_config(cfgpath)
    assert cli.main(["eval", "--config", cfgpath,
                     "--out", str(tmp_path / "r.csv"),
                     "--methods", "model"]) == 2


def test_cli_io_error_exit_3(tmp_path):
    cfgpath = str(tmp_path / "exp.cfg")
    write_tiny_config(cfgpath)
    blocker = str(tmp_path / "blocker")
    with open(blocker, "w", encoding="utf-8") as fh:
        fh.write("not a directory\n")
    assert cli.main(["generate", "--config", cfgpath,
                     "--out", os.path.join(blocker, "sub")]) == 3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_cli_training_error_exit_4(tmp_path):
    cfgpath = str(tmp_path / "exp.cfg")
    write_tiny_config(cfgpath, lr0=1e9, episodes=4)
    assert cli.main(["train", "--config", cfgpath,
                     "--out", str(tmp_path / "m.model")]) == 4


def test_cli_train_episode_override(tmp_path):
    cfgpath = str(tmp_path / "exp.cfg")
    write_tiny_config(cfgpath)
    model = str(tmp_path / "m.model")
    assert cli.main(["train", "--config", cfgpath, "--out", model,
                     "--episodes", "0"]) == 0
    params, _ = embedding.load_model(model)
    fresh = embedding.init_params(TINY["embed_p"], 1, 1, 5, TINY["seed"],
                                  False)
    assert (params.to_vector() == fresh.to_vector()).all()
