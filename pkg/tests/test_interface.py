"""Feedback reduction, the HTTP service, and the CLI commands."""

import http.client
import json
import socket
import threading
from pathlib import Path

import numpy as np
import pytest
import requests

from layoutvae.cli import main
from layoutvae.layoutdata import GridSpec, GridTensor, render_svg, unflatten
from layoutvae.server import (
    ModelService,
    RequestError,
    SessionFeedback,
    grid_from_json,
    grid_to_json,
    make_server,
    reduce_feedback,
)
from layoutvae.vaemodel import LayoutVae, VaeConfig

SMALL_SPEC = GridSpec(6, 2, 2)


def small_model(seed=0, **overrides):
    cfg = VaeConfig(
        input_dim=24, hidden=(16, 12, 8), latent_dim=4, feedback_dim=10, **overrides
    )
    return LayoutVae.init(cfg, seed=seed)


# --- feedback reduction ---


def test_reduce_no_events_is_neutral():
    fv = reduce_feedback([])
    assert np.all(fv.class_weights == 0.5)
    assert np.all(fv.quadrant_weights == 0.5)


def test_reduce_click_adds_fifth():
    fv = reduce_feedback([{"type": "click", "class": "BUTTON"}])
    assert fv.class_weights[2] == pytest.approx(0.7)
    assert fv.class_weights[0] == 0.5


def test_reduce_click_accepts_index_and_lowercase():
    a = reduce_feedback([{"type": "click", "class": 2}])
    b = reduce_feedback([{"type": "click", "class": "button"}])
    assert np.array_equal(a.as_array(), b.as_array())


def test_reduce_dwell_scales_with_seconds():
    fv = reduce_feedback([{"type": "dwell", "quadrant": "top_right", "seconds": 2.5}])
    assert fv.quadrant_weights[1] == pytest.approx(0.75)


def test_reduce_decay_discounts_later_events():
    events = [
        {"type": "click", "class": "BUTTON"},
        {"type": "click", "class": "BUTTON"},
    ]
    fv = reduce_feedback(events, decay=True)
    # 0.5 + 0.2 + 0.2 * 0.9
    assert fv.class_weights[2] == pytest.approx(0.88)


def test_reduce_clamps_at_one():
    fv = reduce_feedback([{"type": "click", "class": "TEXT"}] * 5)
    assert fv.class_weights[0] == 1.0


def test_reduce_rejects_bad_events():
    with pytest.raises(RequestError):
        reduce_feedback([{"type": "hover"}])
    with pytest.raises(RequestError):
        reduce_feedback([{"type": "click", "class": "WIDGET"}])
    with pytest.raises(RequestError):
        reduce_feedback([{"type": "dwell", "quadrant": "middle"}])
    with pytest.raises(RequestError):
        reduce_feedback([{"type": "dwell", "quadrant": 0, "seconds": -1}])
    with pytest.raises(RequestError):
        reduce_feedback(["click"])


def test_session_feedback_accumulates():
    session = SessionFeedback()
    session.add({"type": "click", "class": "ICON"})
    session.add({"type": "dwell", "quadrant": 3, "seconds": 1.0})
    fv = session.vector()
    expected = reduce_feedback(session.events, decay=True)
    assert np.array_equal(fv.as_array(), expected.as_array())


# --- grid JSON ---


def test_grid_json_round_trip():
    rng = np.random.default_rng(0)
    g = GridTensor(SMALL_SPEC, rng.random((6, 2, 2)))
    back = grid_from_json(grid_to_json(g))
    assert back.spec == g.spec
    assert np.array_equal(back.cells, g.cells)


def test_grid_json_flat_order_is_channel_major():
    g = GridTensor(GridSpec(2, 2, 2), np.arange(8, dtype=np.float64).reshape(2, 2, 2) / 8.0)
    doc = grid_to_json(g)
    assert doc["cells"] == [i / 8.0 for i in range(8)]


def test_grid_json_rejects_bad_payloads():
    with pytest.raises(RequestError):
        grid_from_json({"spec": {"c": 6, "h": 2, "w": 2}, "cells": [0.0] * 23})
    with pytest.raises(RequestError):
        grid_from_json({"spec": {"c": 6, "h": 2}, "cells": [0.0] * 24})
    with pytest.raises(RequestError):
        grid_from_json({"spec": {"c": 6, "h": 2, "w": 2}, "cells": [0.0] * 23 + [1.5]})
    with pytest.raises(RequestError):
        grid_from_json([1, 2, 3])


# --- model service ---


@pytest.fixture(scope="module")
def service():
    return ModelService(small_model(seed=3), SMALL_SPEC)


def test_service_rejects_mismatched_spec():
    with pytest.raises(ValueError):
        ModelService(small_model(), GridSpec(6, 20, 12))


def test_model_info_reports_config(service):
    info = service.model_info()
    assert info["input_dim"] == 24
    assert info["latent_dim"] == 4
    assert info["feedback_dim"] == 10
    assert info["hidden"] == [16, 12, 8]
    assert info["recon_loss"] == "bernoulli"
    assert info["feedback_enabled"] is True
    assert info["deterministic_mode"] is False
    assert info["grid"] == {"c": 6, "h": 2, "w": 2}


def test_generate_deterministic_by_seed(service):
    a = service.generate({"count": 3, "seed": 7})
    b = service.generate({"count": 3, "seed": 7})
    assert a == b
    assert len(a["grids"]) == 3 and len(a["svgs"]) == 3
    c = service.generate({"count": 3, "seed": 8})
    assert a != c


def test_generate_count_zero(service):
    assert service.generate({"count": 0}) == {"grids": [], "svgs": []}


def test_generate_z_overrides_count(service):
    out = service.generate({"count": 5, "z": [0.1, -0.2, 0.3, 0.0]})
    assert len(out["grids"]) == 1
    expected = service.model.decode(np.array([0.1, -0.2, 0.3, 0.0]))
    assert out["grids"][0]["cells"] == pytest.approx(expected.tolist(), abs=0)


def test_generate_validates_inputs(service):
    with pytest.raises(RequestError):
        service.generate({"z": [0.0, 0.0, 0.0]})
    with pytest.raises(RequestError):
        service.generate({"count": -1})
    with pytest.raises(RequestError):
        service.generate({"count": 1, "seed": "zero"})
    with pytest.raises(RequestError):
        service.generate({"count": 1, "feedback": "hot"})


def test_generate_feedback_changes_output(service):
    z = {"z": [0.5, 0.5, -0.5, 0.2]}
    plain = service.generate(z)
    hot = service.generate(
        z
        | {
            "feedback": {
                "class_weights": [0, 0, 1, 0, 0, 0],
                "quadrant_weights": [0.5, 0.5, 0.5, 0.5],
            }
        }
    )
    assert plain["grids"] != hot["grids"]


def test_encode_round(service):
    rng = np.random.default_rng(4)
    g = GridTensor(SMALL_SPEC, rng.random((6, 2, 2)))
    out = service.encode({"grid": grid_to_json(g)})
    lat = service.model.encode(g.cells.reshape(-1))
    assert out["mu"] == lat.mu.tolist()
    assert out["log_var"] == lat.log_var.tolist()


def test_encode_requires_matching_grid(service):
    g = GridTensor(GridSpec(6, 2, 3), np.zeros((6, 2, 3)))
    with pytest.raises(RequestError):
        service.encode({"grid": grid_to_json(g)})


def test_interpolate_endpoints_and_midpoint(service):
    z_a = [1.0, 0.0, -1.0, 0.5]
    z_b = [-1.0, 0.5, 1.0, 0.0]
    out = service.interpolate({"z_a": z_a, "z_b": z_b, "steps": 5})
    assert len(out["grids"]) == 5
    end_a = service.model.decode(np.array(z_a))
    end_b = service.model.decode(np.array(z_b))
    mid = service.model.decode(0.5 * np.array(z_a) + 0.5 * np.array(z_b))
    # batched decode may pick a different BLAS kernel than row-at-a-time,
    # so endpoints match to float precision rather than bitwise
    assert out["grids"][0]["cells"] == pytest.approx(end_a.tolist(), abs=1e-12)
    assert out["grids"][-1]["cells"] == pytest.approx(end_b.tolist(), abs=1e-12)
    assert out["grids"][2]["cells"] == pytest.approx(mid.tolist(), abs=1e-12)


def test_interpolate_validates_steps(service):
    z = [0.0, 0.0, 0.0, 0.0]
    with pytest.raises(RequestError):
        service.interpolate({"z_a": z, "z_b": z, "steps": 1})
    with pytest.raises(RequestError):
        service.interpolate({"z_a": z, "z_b": [0.0], "steps": 3})


def test_reduce_endpoint_shape(service):
    out = service.reduce(
        {"events": [{"type": "click", "class": "BUTTON"}], "decay": False}
    )
    assert out["class_weights"][2] == pytest.approx(0.7)
    assert len(out["quadrant_weights"]) == 4
    with pytest.raises(RequestError):
        service.reduce({"events": "none"})
    with pytest.raises(RequestError):
        service.reduce({"events": [], "decay": "yes"})


def test_service_never_mutates_parameters(service):
    before = [p.value.copy() for p in service.model.params.all()]
    service.generate({"count": 2, "seed": 1})
    service.interpolate({"z_a": [0.0] * 4, "z_b": [1.0] * 4, "steps": 3})
    after = [p.value for p in service.model.params.all()]
    assert all(np.array_equal(a, b) for a, b in zip(before, after))


# --- live HTTP ---


@pytest.fixture(scope="module")
def studio_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("studio")
    (root / "index.html").write_text("<html><body>studio</body></html>")
    (root / "app.js").write_text("console.log('hi')")
    (tmp_path_factory.getbasetemp() / "outside.txt").write_text("secret")
    return root


@pytest.fixture(scope="module")
def live_server(studio_dir):
    server = make_server(small_model(seed=3), ("127.0.0.1", 0), SMALL_SPEC, studio_dir)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


def test_http_model_info(live_server):
    r = requests.get(f"{live_server}/api/model", timeout=10)
    assert r.status_code == 200
    assert r.headers["Content-Type"].startswith("application/json")
    assert r.json()["latent_dim"] == 4


def test_http_generate_deterministic(live_server):
    body = {"count": 2, "seed": 7}
    r1 = requests.post(f"{live_server}/api/generate", json=body, timeout=30)
    r2 = requests.post(f"{live_server}/api/generate", json=body, timeout=30)
    assert r1.status_code == 200
    assert r1.content == r2.content
    payload = r1.json()
    assert len(payload["svgs"]) == 2
    assert payload["svgs"][0].startswith("<svg")


def test_http_wrong_z_length_is_400(live_server):
    r = requests.post(f"{live_server}/api/generate", json={"z": [0.0] * 3}, timeout=10)
    assert r.status_code == 400
    assert "length" in r.json()["error"]


def test_http_malformed_json_is_400(live_server):
    r = requests.post(
        f"{live_server}/api/generate",
        data="{oops",
        headers={"Content-Type": "application/json"},
        timeout=10,
    )
    assert r.status_code == 400
    assert "error" in r.json()


def test_http_unknown_endpoint_is_404(live_server):
    assert requests.get(f"{live_server}/api/nope", timeout=10).status_code == 404
    assert requests.post(f"{live_server}/api/nope", json={}, timeout=10).status_code == 404


def test_http_encode_and_interpolate(live_server):
    g = grid_to_json(GridTensor(SMALL_SPEC, np.full((6, 2, 2), 0.25)))
    enc = requests.post(f"{live_server}/api/encode", json={"grid": g}, timeout=10)
    assert enc.status_code == 200
    mu = enc.json()["mu"]
    assert len(mu) == 4
    body = {"z_a": mu, "z_b": [0.0] * 4, "steps": 2}
    inter = requests.post(f"{live_server}/api/interpolate", json=body, timeout=10)
    assert inter.status_code == 200
    assert len(inter.json()["grids"]) == 2


def test_http_feedback_reduce(live_server):
    body = {"events": [{"type": "dwell", "quadrant": "bottom_left", "seconds": 3}]}
    r = requests.post(f"{live_server}/api/feedback/reduce", json=body, timeout=10)
    assert r.status_code == 200
    assert r.json()["quadrant_weights"][2] == pytest.approx(0.8)


def test_http_serves_studio_files(live_server):
    index = requests.get(f"{live_server}/", timeout=10)
    assert index.status_code == 200
    assert "studio" in index.text
    js = requests.get(f"{live_server}/app.js", timeout=10)
    assert js.status_code == 200
    assert "console" in js.text
    assert requests.get(f"{live_server}/missing.css", timeout=10).status_code == 404


def test_http_path_traversal_blocked(live_server):
    # requests normalizes "..", so drive the raw path through http.client
    host, port = live_server.removeprefix("http://").split(":")
    conn = http.client.HTTPConnection(host, int(port), timeout=10)
    try:
        conn.putrequest("GET", "/../outside.txt", skip_host=True)
        conn.putheader("Host", f"{host}:{port}")
        conn.endheaders()
        resp = conn.getresponse()
        assert resp.status == 404
        resp.read()
    finally:
        conn.close()


# --- CLI ---


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One tiny trained model + corpus shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus.jsonl"
    weights = root / "model.bin"
    assert main(["synth", "--count", "24", "--seed", "5", "--out", str(corpus)]) == 0
    code = main(
        [
            "train", "--data", str(corpus), "--out", str(weights),
            "--epochs", "2", "--batch-size", "8", "--grid", "6x4x3", "--seed", "1",
        ]
    )
    assert code == 0
    return {"root": root, "corpus": corpus, "weights": weights}


def test_cli_synth_writes_jsonl(tmp_path):
    out = tmp_path / "c.jsonl"
    assert main(["synth", "--count", "3", "--seed", "0", "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 3
    assert json.loads(lines[0])["id"].startswith("synth-0-")


def test_cli_train_echoes_defaults(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    main(["synth", "--count", "6", "--seed", "2", "--out", str(corpus)])
    capsys.readouterr()
    code = main(
        [
            "train", "--data", str(corpus), "--out", str(tmp_path / "m.bin"),
            "--epochs", "1", "--grid", "6x2x2",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "batch=64" in out
    assert "lr=0.001" in out
    assert "optim=AdamW" in out
    assert "epochs=1" in out  # overridden from the 200 default here for speed


def test_cli_train_writes_weights_and_report(trained):
    weights = trained["weights"]
    assert weights.exists()
    report = json.loads((weights.parent / "model.bin.report.json").read_text())
    assert report["epochs"] == [0, 1]
    assert len(report["train_loss"]) == 2
    assert "best_epoch" in report
    model = LayoutVae.load(weights)
    assert model.config.input_dim == 72


def test_cli_train_missing_out_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--synth", "8"])
    assert exc.value.code == 2


def test_cli_train_needs_enough_docs(tmp_path, capsys):
    corpus = tmp_path / "two.jsonl"
    main(["synth", "--count", "2", "--seed", "0", "--out", str(corpus)])
    code = main(
        ["train", "--data", str(corpus), "--out", str(tmp_path / "m.bin"), "--epochs", "1"]
    )
    assert code == 2
    assert "at least 3" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_cli_train_numeric_blowup_exits_3(tmp_path, capsys):
    code = main(
        [
            "train", "--synth", "8", "--out", str(tmp_path / "m.bin"),
            "--epochs", "3", "--grid", "6x2x2", "--optim", "sgd", "--lr", "1e300",
        ]
    )
    assert code == 3
    assert "numeric error" in capsys.readouterr().err


def test_cli_generate_deterministic(trained, tmp_path):
    args = [
        "generate", "--model", str(trained["weights"]), "--count", "2",
        "--seed", "9", "--grid", "6x4x3",
    ]
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a_dir)]) == 0
    assert main(args + ["--out", str(b_dir)]) == 0
    a_files = sorted(p.name for p in a_dir.iterdir())
    assert a_files == ["grids.json", "layout_000.svg", "layout_001.svg"]
    for name in a_files:
        assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()


def test_cli_generate_count_zero(trained, tmp_path):
    out = tmp_path / "empty"
    code = main(
        [
            "generate", "--model", str(trained["weights"]), "--count", "0",
            "--grid", "6x4x3", "--out", str(out),
        ]
    )
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["grids.json"]
    assert json.loads((out / "grids.json").read_text())["count"] == 0


def test_cli_generate_echoes_feedback(trained, tmp_path):
    fb = {"class_weights": [0, 0, 1, 0, 0, 0], "quadrant_weights": [0.5, 0.5, 0.5, 0.5]}
    out = tmp_path / "fb"
    code = main(
        [
            "generate", "--model", str(trained["weights"]), "--count", "1",
            "--feedback", json.dumps(fb), "--grid", "6x4x3", "--out", str(out),
        ]
    )
    assert code == 0
    meta = json.loads((out / "grids.json").read_text())
    assert meta["feedback"] == fb


def test_cli_generate_explicit_z(trained, tmp_path):
    out = tmp_path / "z"
    z = [0.1] * 64
    code = main(
        [
            "generate", "--model", str(trained["weights"]), "--count", "5",
            "--z", json.dumps(z), "--grid", "6x4x3", "--out", str(out),
        ]
    )
    assert code == 0
    meta = json.loads((out / "grids.json").read_text())
    assert meta["count"] == 1
    assert meta["z"] == z


def test_cli_generate_bad_model_exits_2(tmp_path, capsys):
    code = main(
        [
            "generate", "--model", str(tmp_path / "missing.bin"),
            "--out", str(tmp_path / "o"),
        ]
    )
    assert code == 2


def test_cli_generate_env_model(trained, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("LAYOUTVAE_MODEL", str(trained["weights"]))
    out = tmp_path / "env"
    code = main(["generate", "--count", "1", "--grid", "6x4x3", "--out", str(out)])
    assert code == 0
    monkeypatch.delenv("LAYOUTVAE_MODEL")
    code = main(["generate", "--count", "1", "--grid", "6x4x3", "--out", str(out)])
    assert code == 2
    assert "LAYOUTVAE_MODEL" in capsys.readouterr().err


def test_cli_evaluate_outputs_metrics(trained, tmp_path, capsys):
    out = tmp_path / "metrics.json"
    code = main(
        [
            "evaluate", "--model", str(trained["weights"]),
            "--data", str(trained["corpus"]), "--grid", "6x4x3", "--out", str(out),
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload) >= {"ssim", "mae", "n", "per_example"}
    assert payload["n"] == 24
    assert json.loads(out.read_text()) == payload


def test_cli_evaluate_ablation_flag(trained, capsys):
    code = main(
        [
            "evaluate", "--model", str(trained["weights"]),
            "--data", str(trained["corpus"]), "--grid", "6x4x3", "--ablation", "ae",
        ]
    )
    assert code == 0
    assert json.loads(capsys.readouterr().out)["ablation"] == "ae"


def test_cli_evaluate_empty_corpus_exits_2(trained, tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    code = main(
        [
            "evaluate", "--model", str(trained["weights"]),
            "--data", str(empty), "--grid", "6x4x3",
        ]
    )
    assert code == 2


def test_cli_render(trained, tmp_path):
    out = tmp_path / "render"
    code = main(["render", "--data", str(trained["corpus"]), "--out", str(out)])
    assert code == 0
    svgs = list(out.glob("*.svg"))
    assert len(svgs) == 24
    assert svgs[0].read_text().startswith("<svg")


def test_cli_sweep_lr_table(capsys, tmp_path):
    out = tmp_path / "sweep.json"
    code = main(
        [
            "sweep", "--mode", "lr", "--lrs", "0.005,0.001", "--synth", "12",
            "--epochs", "1", "--batch-size", "8", "--grid", "6x2x2",
            "--out", str(out),
        ]
    )
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("Lr")
    assert "SSIM" in lines[0] and "MAE" in lines[0]
    assert len(lines) == 4  # header, rule, two rows
    payload = json.loads(out.read_text())
    assert payload["mode"] == "lr"
    assert [r["key"] for r in payload["rows"]] == ["0.005", "0.001"]


def test_cli_sweep_optim_table(capsys):
    code = main(
        [
            "sweep", "--mode", "optim", "--kinds", "sgd,adam", "--synth", "12",
            "--epochs", "1", "--batch-size", "8", "--grid", "6x2x2",
        ]
    )
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("Optimizer")
    assert [line.split(" | ")[0].strip() for line in lines[2:]] == ["sgd", "adam"]


def test_cli_serve_port_in_use_exits_2(trained, capsys):
    blocker = socket.socket()
    try:
        blocker.bind(("127.0.0.1", 0))
        blocker.listen(1)
        port = blocker.getsockname()[1]
        code = main(
            [
                "serve", "--model", str(trained["weights"]),
                "--addr", f"127.0.0.1:{port}", "--grid", "6x4x3",
            ]
        )
        assert code == 2
        assert "cannot bind" in capsys.readouterr().err
    finally:
        blocker.close()


def test_cli_serve_bad_addr_exits_2(trained, capsys):
    code = main(["serve", "--model", str(trained["weights"]), "--addr", "nope"])
    assert code == 2


def test_cli_bad_grid_flag_exits_2(capsys):
    # argparse rejects both a missing value and a malformed CxHxW string
    with pytest.raises(SystemExit) as exc:
        main(["train", "--synth", "8", "--out", "x", "--grid"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--model", "m", "--out", "o", "--grid", "6x20"])
    assert exc.value.code == 2
