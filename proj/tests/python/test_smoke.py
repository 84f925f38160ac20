import json
import math
import os
import subprocess

import numpy as np
import pytest

import si_seg


def write_manifest(directory, layers, height, width):
    doc = {"format": "si-seg-weights/1", "input": {"channels": 1, "height": height, "width": width}, "layers": []}
    for i, layer in enumerate(layers):
        entry = {k: v for k, v in layer.items() if not isinstance(v, np.ndarray)}
        for key, value in layer.items():
            if isinstance(value, np.ndarray):
                name = f"l{i}.{key}.f64"
                value.astype("<f8").tofile(directory / name)
                entry[key] = {"path": name, "count": int(value.size), "shape": list(value.shape)}
        doc["layers"].append(entry)
    path = directory / "manifest.json"
    path.write_text(json.dumps(doc))
    return path


def dense_identity(n, output):
    return [
        {"kind": "dense", "in_features": n, "out_features": n, "weight": np.eye(n), "bias": np.zeros(n)},
        output,
    ]


def test_naive_and_truncated_p():
    assert si_seg.naive_p(1.959964, 1.0) == pytest.approx(0.05, abs=1e-4)
    assert si_seg.truncated_two_sided_p(1.0, 1.0, [(-math.inf, math.inf)]) == pytest.approx(
        math.erfc(1.0 / math.sqrt(2.0)), abs=1e-12
    )
    with pytest.raises(si_seg.ArgumentError):
        si_seg.truncated_two_sided_p(5.0, 1.0, [(-1.0, 1.0)])


def test_trainer_style_manifest_with_sigmoid_output(tmp_path):
    path = write_manifest(tmp_path, dense_identity(4, {"kind": "output_sigmoid", "probability_threshold": 0.5}), 2, 2)
    net = si_seg.load_network(str(path))
    assert net.layer_kinds() == ["dense", "output_sign"]
    mask = si_seg.segment(net, np.array([[0.5, -0.5], [0.0, -1e-3]]))
    assert mask.tolist() == [[1, 0], [1, 0]]


def test_smooth_hidden_layer_needs_cuts(tmp_path):
    layers = [
        {"kind": "dense", "in_features": 4, "out_features": 4, "weight": np.eye(4), "bias": np.zeros(4)},
        {"kind": "activation", "function": "sigmoid"},
        {"kind": "output_sign", "threshold": 0.5},
    ]
    path = write_manifest(tmp_path, layers, 2, 2)
    with pytest.raises(si_seg.ValidationError):
        si_seg.load_network(str(path))
    net = si_seg.load_network(str(path), cuts=3)
    assert net.layer_count == 3


def test_bad_blob_is_rejected(tmp_path):
    path = write_manifest(tmp_path, dense_identity(4, {"kind": "output_sign"}), 2, 2)
    with open(tmp_path / "l0.bias.f64", "ab") as f:
        f.write(b"\0")
    with pytest.raises(si_seg.FormatError):
        si_seg.load_network(str(path))


def test_selective_test_and_save_round_trip(tmp_path):
    net = si_seg.make_cnn4_segmenter(8, 7)
    rng = np.random.default_rng(3)
    image = rng.standard_normal((8, 8))
    image[3:5, 3:5] += 3.0
    res = si_seg.selective_test(net, image, oc=True)
    assert res["detected"]
    assert res["mask"].shape == (8, 8)
    for key in ("p_naive", "p_selective", "p_oc"):
        assert 0.0 <= res[key] <= 1.0
    assert any(lo <= res["z_obs"] <= hi for lo, hi in res["truncation"])

    manifest = si_seg.save_network(net, str(tmp_path / "net"))
    again = si_seg.load_network(str(manifest))
    assert np.array_equal(si_seg.segment(again, image), si_seg.segment(net, image))


def cli():
    path = os.environ.get("SISEG_CLI")
    if not path:
        pytest.skip("SISEG_CLI not set")
    return path


def test_cli_infer(tmp_path):
    exe = cli()
    manifest = si_seg.save_network(si_seg.make_cnn4_segmenter(8, 7), str(tmp_path / "net"))
    rng = np.random.default_rng(11)
    image = rng.standard_normal((8, 8))
    np.savetxt(tmp_path / "x.csv", image, delimiter=",", fmt="%.17g")
    out = subprocess.run(
        [exe, "infer", "--weights", str(manifest), "--image", str(tmp_path / "x.csv"), "--sigma", "1", "--oc",
         "--dump-path", str(tmp_path / "path.jsonl")],
        check=True, capture_output=True, text=True,
    )
    doc = json.loads(out.stdout)
    res = si_seg.selective_test(si_seg.load_network(str(manifest)), image, oc=True)
    assert doc["detected"] == res["detected"]
    if doc["detected"]:
        assert doc["p_selective"] == pytest.approx(res["p_selective"], rel=1e-12, abs=1e-15)
        assert (tmp_path / "path.jsonl").read_text().strip()


def test_cli_errors_exit_with_two(tmp_path):
    exe = cli()
    (tmp_path / "bad.json").write_text("{not json")
    np.savetxt(tmp_path / "x.csv", np.zeros((2, 2)), delimiter=",")
    proc = subprocess.run(
        [exe, "infer", "--weights", str(tmp_path / "bad.json"), "--image", str(tmp_path / "x.csv"), "--sigma", "1"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
    assert "error" in proc.stderr


def test_cli_experiment(tmp_path):
    exe = cli()
    (tmp_path / "cfg.json").write_text(json.dumps({"n": 16, "trials": 10, "threads": 1}))
    out = subprocess.run(
        [exe, "experiment", "fpr", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "out")],
        check=True, capture_output=True, text=True,
    )
    summary = json.loads(out.stdout)
    assert summary["kind"] == "fpr"
    assert len((tmp_path / "out" / "trials.jsonl").read_text().splitlines()) == 10
