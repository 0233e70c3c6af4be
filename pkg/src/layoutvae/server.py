"""HTTP JSON inference service over a frozen parameter snapshot.

Endpoints (all JSON bodies, UTF-8):
  GET  /api/model            model shape and flags
  POST /api/generate         {count, seed, z, feedback} -> {grids, svgs}
  POST /api/encode           {grid} -> {mu, log_var}
  POST /api/interpolate      {z_a, z_b, steps, feedback} -> {grids, svgs}
  POST /api/feedback/reduce  {events, decay} -> feedback vector

The model is never mutated; every seeded request builds its own generator so
concurrent requests stay individually deterministic. Errors come back as
{"error": message} with a 4xx/5xx status. When a studio directory is given,
anything outside /api/ is served statically from it.
"""

from __future__ import annotations

import json
import mimetypes
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .layoutdata import ElementClass, GridSpec, GridTensor, render_svg, unflatten
from .vaemodel import (
    N_CLASS_WEIGHTS,
    N_QUADRANT_WEIGHTS,
    FeedbackVector,
    LayoutVae,
)

MAX_BODY_BYTES = 32 * 1024 * 1024
CLICK_DELTA = 0.2
DWELL_DELTA_PER_SECOND = 0.1
DECAY_FACTOR = 0.9

QUADRANT_NAMES = ("top_left", "top_right", "bottom_left", "bottom_right")


class RequestError(ValueError):
    """Client-side problem with a request body; maps to HTTP 400."""


def _bad(msg: str) -> RequestError:
    return RequestError(msg)


def reduce_feedback(events: list[dict], decay: bool = False) -> FeedbackVector:
    """Fold interaction events into a feedback vector.

    Starting from the neutral vector (all 0.5): a class click adds 0.2 to
    that class weight, a dwell adds 0.1 per second to that quadrant weight.
    With decay on, the delta of the i-th event is scaled by 0.9^i, so later
    events in the list count less; callers wanting recency weighting should
    order events newest first. Results clamp to [0,1].
    """
    class_w = np.full(N_CLASS_WEIGHTS, 0.5)
    quad_w = np.full(N_QUADRANT_WEIGHTS, 0.5)
    for i, event in enumerate(events):
        if not isinstance(event, dict):
            raise _bad(f"event {i} is not an object")
        scale = DECAY_FACTOR**i if decay else 1.0
        kind = event.get("type")
        if kind == "click":
            class_w[_class_index(event.get("class"), i)] += CLICK_DELTA * scale
        elif kind == "dwell":
            seconds = event.get("seconds", 1.0)
            if not isinstance(seconds, (int, float)) or seconds < 0:
                raise _bad(f"event {i}: seconds must be a number >= 0")
            idx = _quadrant_index(event.get("quadrant"), i)
            quad_w[idx] += DWELL_DELTA_PER_SECOND * float(seconds) * scale
        else:
            raise _bad(f"event {i}: unknown type {kind!r}")
    np.clip(class_w, 0.0, 1.0, out=class_w)
    np.clip(quad_w, 0.0, 1.0, out=quad_w)
    return FeedbackVector(class_w, quad_w)


def _class_index(value, event_idx: int) -> int:
    if isinstance(value, str):
        try:
            return ElementClass[value.upper()].value
        except KeyError:
            raise _bad(f"event {event_idx}: unknown class {value!r}") from None
    if isinstance(value, int) and 0 <= value < N_CLASS_WEIGHTS:
        return value
    raise _bad(f"event {event_idx}: bad class {value!r}")


def _quadrant_index(value, event_idx: int) -> int:
    if isinstance(value, str):
        name = value.lower()
        if name in QUADRANT_NAMES:
            return QUADRANT_NAMES.index(name)
        raise _bad(f"event {event_idx}: unknown quadrant {value!r}")
    if isinstance(value, int) and 0 <= value < N_QUADRANT_WEIGHTS:
        return value
    raise _bad(f"event {event_idx}: bad quadrant {value!r}")


@dataclass
class SessionFeedback:
    """Client-side accumulator for interaction events."""

    events: list[dict] = field(default_factory=list)
    decay: bool = True

    def add(self, event: dict) -> None:
        self.events.append(event)

    def vector(self) -> FeedbackVector:
        return reduce_feedback(self.events, decay=self.decay)


def grid_to_json(g: GridTensor) -> dict:
    return {
        "spec": {"c": g.spec.channels, "h": g.spec.rows, "w": g.spec.cols},
        "cells": g.cells.reshape(-1).tolist(),
    }


def grid_from_json(obj) -> GridTensor:
    if not isinstance(obj, dict) or "spec" not in obj or "cells" not in obj:
        raise _bad("grid must be an object with spec and cells")
    s = obj["spec"]
    try:
        spec = GridSpec(int(s["c"]), int(s["h"]), int(s["w"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise _bad(f"bad grid spec: {exc}") from None
    cells = np.asarray(obj["cells"], dtype=np.float64)
    if cells.size != spec.flat_dim:
        raise _bad(f"cells length {cells.size} != spec flat dim {spec.flat_dim}")
    if not np.all(np.isfinite(cells)) or cells.min() < 0.0 or cells.max() > 1.0:
        raise _bad("cells must be finite and within [0,1]")
    return unflatten(cells, spec)


def _parse_feedback(obj) -> FeedbackVector | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise _bad("feedback must be an object with class_weights and quadrant_weights")
    try:
        return FeedbackVector.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise _bad(f"bad feedback: {exc}") from None


def _parse_z(obj, latent_dim: int, name: str = "z") -> np.ndarray:
    z = np.asarray(obj, dtype=np.float64).reshape(-1)
    if z.size != latent_dim:
        raise _bad(f"{name} length {z.size} != latent dim {latent_dim}")
    if not np.all(np.isfinite(z)):
        raise _bad(f"{name} entries must be finite")
    return z


class ModelService:
    """Pure request->response logic, independent of HTTP plumbing."""

    def __init__(self, model: LayoutVae, spec: GridSpec | None = None):
        self.model = model
        self.spec = spec or GridSpec()
        if self.spec.flat_dim != model.config.input_dim:
            raise ValueError(
                f"grid spec flat dim {self.spec.flat_dim} != "
                f"model input {model.config.input_dim}"
            )

    def model_info(self) -> dict:
        cfg = self.model.config
        return {
            "input_dim": cfg.input_dim,
            "latent_dim": cfg.latent_dim,
            "feedback_dim": cfg.feedback_dim,
            "hidden": list(cfg.hidden),
            "recon_loss": cfg.recon_loss,
            "feedback_enabled": cfg.feedback_enabled,
            "deterministic_mode": cfg.deterministic_mode,
            "grid": {"c": self.spec.channels, "h": self.spec.rows, "w": self.spec.cols},
        }

    def generate(self, body: dict) -> dict:
        feedback = _parse_feedback(body.get("feedback"))
        if body.get("z") is not None:
            z = _parse_z(body["z"], self.model.config.latent_dim)
            rows = z.reshape(1, -1)
        else:
            count = body.get("count", 1)
            if not isinstance(count, int) or count < 0:
                raise _bad("count must be an integer >= 0")
            seed = body.get("seed", 0)
            if not isinstance(seed, int):
                raise _bad("seed must be an integer")
            rng = np.random.Generator(np.random.PCG64(seed))
            rows = rng.standard_normal((count, self.model.config.latent_dim))
        if rows.shape[0] == 0:
            return {"grids": [], "svgs": []}
        x_hat = self.model.decode(rows, feedback)
        grids = [unflatten(row, self.spec) for row in x_hat]
        return {
            "grids": [grid_to_json(g) for g in grids],
            "svgs": [render_svg(g) for g in grids],
        }

    def encode(self, body: dict) -> dict:
        g = grid_from_json(body.get("grid"))
        if g.spec.flat_dim != self.model.config.input_dim:
            raise _bad(
                f"grid flat dim {g.spec.flat_dim} != model input "
                f"{self.model.config.input_dim}"
            )
        lat = self.model.encode(g.cells.reshape(-1))
        return {"mu": lat.mu.tolist(), "log_var": lat.log_var.tolist()}

    def interpolate(self, body: dict) -> dict:
        latent = self.model.config.latent_dim
        z_a = _parse_z(body.get("z_a"), latent, "z_a")
        z_b = _parse_z(body.get("z_b"), latent, "z_b")
        steps = body.get("steps", 5)
        if not isinstance(steps, int) or steps < 2:
            raise _bad("steps must be an integer >= 2")
        feedback = _parse_feedback(body.get("feedback"))
        t = np.linspace(0.0, 1.0, steps).reshape(-1, 1)
        rows = (1.0 - t) * z_a + t * z_b
        x_hat = self.model.decode(rows, feedback)
        grids = [unflatten(row, self.spec) for row in x_hat]
        return {
            "grids": [grid_to_json(g) for g in grids],
            "svgs": [render_svg(g) for g in grids],
        }

    def reduce(self, body: dict) -> dict:
        events = body.get("events", [])
        if not isinstance(events, list):
            raise _bad("events must be a list")
        decay = body.get("decay", False)
        if not isinstance(decay, bool):
            raise _bad("decay must be a boolean")
        return reduce_feedback(events, decay=decay).to_json()


def make_server(
    model: LayoutVae,
    addr: tuple[str, int],
    spec: GridSpec | None = None,
    studio_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    service = ModelService(model, spec)
    static_root = Path(studio_dir).resolve() if studio_dir else None

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send_json(self, status: int, payload: dict) -> None:
            data = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length", 0) or 0)
            if length > MAX_BODY_BYTES:
                raise _bad("request body too large")
            raw = self.rfile.read(length) if length else b"{}"
            try:
                body = json.loads(raw.decode("utf-8") or "{}")
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise _bad(f"malformed JSON: {exc}") from None
            if not isinstance(body, dict):
                raise _bad("request body must be a JSON object")
            return body

        def _serve_static(self, path: str) -> None:
            if static_root is None:
                self._send_json(404, {"error": f"no such endpoint: {path}"})
                return
            rel = path.lstrip("/") or "index.html"
            target = (static_root / rel).resolve()
            if not target.is_relative_to(static_root) or not target.is_file():
                self._send_json(404, {"error": f"not found: {path}"})
                return
            ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
            data = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            path = self.path.split("?", 1)[0]
            if path == "/api/model":
                self._send_json(200, service.model_info())
            elif path.startswith("/api/"):
                self._send_json(404, {"error": f"no such endpoint: {path}"})
            else:
                self._serve_static(path)

        def do_POST(self):
            path = self.path.split("?", 1)[0]
            routes = {
                "/api/generate": service.generate,
                "/api/encode": service.encode,
                "/api/interpolate": service.interpolate,
                "/api/feedback/reduce": service.reduce,
            }
            handler = routes.get(path)
            if handler is None:
                self._send_json(404, {"error": f"no such endpoint: {path}"})
                return
            try:
                body = self._read_body()
                self._send_json(200, handler(body))
            except RequestError as exc:
                self._send_json(400, {"error": str(exc)})
            except Exception as exc:  # pragma: no cover - defensive
                self._send_json(500, {"error": f"internal error: {exc}"})

    return ThreadingHTTPServer(addr, Handler)
