"""Command-line entry points.

Subcommands: train, generate, evaluate, sweep, synth, render, serve.
Exit codes: 0 success, 2 data or usage errors, 3 numeric failures.
The model path for inference commands defaults to $LAYOUTVAE_MODEL.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

from .evalmetrics import evaluate
from .layoutdata import (
    GridSpec,
    IngestError,
    ValidationError,
    corpus_matrix,
    load_jsonl,
    render_svg,
    save_jsonl,
    split,
    synth_corpus,
)
from .numcore import NumericError, ShapeError
from .server import ModelService, RequestError, make_server
from .training import (
    DEFAULT_SWEEP_KINDS,
    DEFAULT_SWEEP_LRS,
    OptimConfig,
    TrainConfig,
    format_table,
    sweep_lr,
    sweep_optimizers,
    train,
)
from .vaemodel import FormatError, LayoutVae, VaeConfig

OPTIM_DISPLAY = {"sgd": "SGD", "rmsprop": "RMSprop", "adam": "Adam", "adamw": "AdamW"}

EXIT_OK = 0
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _parse_grid(text: str) -> GridSpec:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise ValidationError(f"--grid wants CxHxW, got {text!r}")
    try:
        c, h, w = (int(p) for p in parts)
    except ValueError:
        raise ValidationError(f"--grid wants integers CxHxW, got {text!r}") from None
    return GridSpec(c, h, w)


def _seed_triplet(seed: int) -> dict:
    # disjoint offsets keep init/shuffle/eps streams distinct
    return {"init_seed": seed, "shuffle_seed": 10000 + seed, "eps_seed": 20000 + seed}


def _load_corpus(args) -> list:
    if getattr(args, "synth", None) is not None:
        return synth_corpus(args.seed, args.synth)
    docs = load_jsonl(args.data)
    if not docs:
        raise ValidationError(f"no documents in {args.data}")
    return docs


def _model_path(args) -> Path:
    path = args.model or os.environ.get("LAYOUTVAE_MODEL")
    if not path:
        raise ValidationError("no model path: pass --model or set LAYOUTVAE_MODEL")
    return Path(path)


def _safe_name(raw: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", raw) or "doc"


def cmd_train(args) -> int:
    spec = args.grid
    docs = _load_corpus(args)
    if len(docs) < 3:
        raise ValidationError(f"need at least 3 documents to split, got {len(docs)}")
    train_docs, val_docs, test_docs = split(docs, seed=args.seed)
    config = VaeConfig(
        input_dim=spec.flat_dim,
        recon_loss=args.recon,
        kl_weight=args.beta,
        deterministic_mode=args.deterministic,
        feedback_enabled=not args.no_feedback,
        feedback_dropout=args.feedback_dropout,
    )
    cfg = TrainConfig(
        batch_size=args.batch_size,
        epochs=args.epochs,
        optim=OptimConfig(kind=args.optim, lr=args.lr),
        **_seed_triplet(args.seed),
    )
    print(
        f"config: batch={cfg.batch_size} epochs={cfg.epochs} lr={cfg.optim.lr} "
        f"optim={OPTIM_DISPLAY[cfg.optim.kind]} beta={config.kl_weight} "
        f"recon={config.recon_loss} feedback={'on' if config.feedback_enabled else 'off'} "
        f"deterministic={'on' if config.deterministic_mode else 'off'} "
        f"grid={spec.channels}x{spec.rows}x{spec.cols} "
        f"split={len(train_docs)}/{len(val_docs)}/{len(test_docs)} seed={args.seed}"
    )
    x_train = corpus_matrix(train_docs, spec)
    x_val = corpus_matrix(val_docs, spec)
    report = train(config, x_train, x_val, cfg, spec)
    for i, (t, v) in enumerate(zip(report.train_loss, report.val_loss)):
        print(
            f"epoch {i}: train {t.total:.4f} (recon {t.recon:.4f} kl {t.kl:.4f}) "
            f"val {v.total:.4f} lr {report.lr_trace[i]:.6f}"
        )
    out = Path(args.out)
    report.best_model().save(out)
    report_path = Path(args.report) if args.report else out.with_name(out.name + ".report.json")
    report_path.write_text(json.dumps(report.to_json(), indent=2))
    print(
        f"best epoch {report.best_epoch} "
        f"(val {report.val_loss[report.best_epoch].total:.4f}); "
        f"weights -> {out}, report -> {report_path}"
    )
    return EXIT_OK


def cmd_generate(args) -> int:
    model = LayoutVae.load(_model_path(args))
    service = ModelService(model, args.grid)
    body: dict = {"count": args.count, "seed": args.seed}
    if args.feedback:
        body["feedback"] = json.loads(args.feedback)
    if args.z:
        body["z"] = json.loads(args.z)
    result = service.generate(body)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, svg in enumerate(result["svgs"]):
        (out_dir / f"layout_{i:03d}.svg").write_text(svg)
    meta = {
        "count": len(result["grids"]),
        "seed": args.seed,
        "feedback": body.get("feedback"),
        "z": body.get("z"),
        "grids": result["grids"],
    }
    (out_dir / "grids.json").write_text(json.dumps(meta, indent=2))
    print(f"wrote {len(result['svgs'])} layouts to {out_dir}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = LayoutVae.load(_model_path(args))
    if args.ablation == "ae":
        model = LayoutVae(replace(model.config, deterministic_mode=True), model.params)
    docs = load_jsonl(args.data)
    if not docs:
        raise ValidationError(f"no documents in {args.data}")
    x = corpus_matrix(docs, args.grid)
    report = evaluate(model, x, args.grid)
    payload = report.to_json()
    if args.ablation:
        payload["ablation"] = args.ablation
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = args.grid
    docs = _load_corpus(args)
    train_docs, val_docs, test_docs = split(docs, seed=args.seed)
    x_train = corpus_matrix(train_docs, spec)
    x_val = corpus_matrix(val_docs, spec)
    x_test = corpus_matrix(test_docs, spec)
    config = VaeConfig(input_dim=spec.flat_dim)
    base = TrainConfig(
        batch_size=args.batch_size,
        epochs=args.epochs,
        optim=OptimConfig(lr=args.lr),
    )
    if args.mode == "lr":
        lrs = [float(v) for v in args.lrs.split(",")] if args.lrs else list(DEFAULT_SWEEP_LRS)
        rows = sweep_lr(config, x_train, x_val, x_test, base, lrs, args.seeds, spec)
        table = format_table(rows, "Lr")
    else:
        kinds = args.kinds.split(",") if args.kinds else list(DEFAULT_SWEEP_KINDS)
        rows = sweep_optimizers(config, x_train, x_val, x_test, base, kinds, args.seeds, spec)
        table = format_table(rows, "Optimizer")
    print(table)
    if args.out:
        payload = {"mode": args.mode, "rows": [r.to_json() for r in rows]}
        Path(args.out).write_text(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_synth(args) -> int:
    docs = synth_corpus(args.seed, args.count)
    save_jsonl(docs, args.out)
    print(f"wrote {len(docs)} documents to {args.out}")
    return EXIT_OK


def cmd_render(args) -> int:
    docs = load_jsonl(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for doc in docs:
        (out_dir / f"{_safe_name(doc.id)}.svg").write_text(render_svg(doc))
    print(f"rendered {len(docs)} documents to {out_dir}")
    return EXIT_OK


def cmd_serve(args) -> int:
    model = LayoutVae.load(_model_path(args))
    host, _, port_text = args.addr.rpartition(":")
    if not host or not port_text.isdigit():
        raise ValidationError(f"--addr wants host:port, got {args.addr!r}")
    try:
        server = make_server(model, (host, int(port_text)), args.grid, args.studio_dir)
    except OSError as exc:
        raise ValidationError(f"cannot bind {args.addr}: {exc}") from None
    print(f"serving on http://{host}:{port_text}/ (ctrl-c to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layoutvae",
        description="Feedback-conditioned layout VAE: train, generate, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_grid(p):
        p.add_argument(
            "--grid", type=_parse_grid, default=GridSpec(), metavar="CxHxW",
            help="grid shape (default 6x20x12)",
        )

    def add_model(p):
        p.add_argument("--model", help="weight file (default $LAYOUTVAE_MODEL)")

    p = sub.add_parser("train", help="train a model on JSONL or synthetic data")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="corpus JSONL path")
    src.add_argument("--synth", type=int, metavar="N", help="use N synthetic documents")
    p.add_argument("--out", required=True, help="weight file to write")
    p.add_argument("--report", help="report JSON path (default <out>.report.json)")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--optim", choices=sorted(OPTIM_DISPLAY), default="adamw")
    p.add_argument("--beta", type=float, default=1.0, help="KL weight")
    p.add_argument("--recon", choices=["bernoulli", "gaussian"], default="bernoulli")
    p.add_argument("--deterministic", action="store_true", help="autoencoder ablation")
    p.add_argument("--no-feedback", action="store_true")
    p.add_argument("--feedback-dropout", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    add_grid(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample layouts from a trained model")
    add_model(p)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feedback", help="feedback vector as JSON")
    p.add_argument("--z", help="explicit latent code as a JSON array")
    p.add_argument("--out", required=True, help="output directory")
    add_grid(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="SSIM/MAE of reconstructions on a corpus")
    add_model(p)
    p.add_argument("--data", required=True, help="corpus JSONL path")
    p.add_argument("--ablation", choices=["ae"], help="evaluate autoencoder mode")
    p.add_argument("--out", help="write report JSON here")
    add_grid(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="learning-rate or optimizer sweep")
    p.add_argument("--mode", choices=["lr", "optim"], required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="corpus JSONL path")
    src.add_argument("--synth", type=int, default=256, metavar="N")
    p.add_argument("--seeds", type=int, default=1, help="seeds per cell")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.001, help="base lr (optim mode)")
    p.add_argument("--lrs", help="comma-separated lrs (lr mode)")
    p.add_argument("--kinds", help="comma-separated optimizer kinds (optim mode)")
    p.add_argument("--seed", type=int, default=0, help="corpus/split seed")
    p.add_argument("--out", help="write sweep JSON here")
    add_grid(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a synthetic corpus as JSONL")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render", help="render corpus documents to SVG files")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    add_model(p)
    p.add_argument("--addr", default="127.0.0.1:8000", help="host:port")
    p.add_argument("--studio-dir", help="serve static files from this directory")
    add_grid(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        ValidationError,
        IngestError,
        FormatError,
        RequestError,
        ShapeError,
        FileNotFoundError,
        IsADirectoryError,
        PermissionError,
        json.JSONDecodeError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
