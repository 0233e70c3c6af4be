"""Feedback-conditioned variational autoencoder for UI layout generation.

Pure numpy, hand-written backprop. Layouts are soft occupancy grids
(6 classes x 20 rows x 12 cols by default); the decoder conditions on a
10-entry feedback vector so generation can be steered interactively.
"""

from .evalmetrics import MetricsReport, evaluate, mae, ssim
from .layoutdata import (
    DEFAULT_RICO_MAPPING,
    Element,
    ElementClass,
    GridSpec,
    GridTensor,
    IngestError,
    LayoutDoc,
    ValidationError,
    corpus_matrix,
    flatten,
    ingest_rico,
    load_jsonl,
    rasterize,
    render_svg,
    save_jsonl,
    split,
    synth_corpus,
    unflatten,
)
from .numcore import (
    NumericError,
    ParamTensor,
    ShapeError,
    finite_diff_check,
    matmul,
    zero_grads,
)
from .server import ModelService, SessionFeedback, make_server, reduce_feedback
from .training import (
    OptimConfig,
    Optimizer,
    PlateauConfig,
    PlateauSchedule,
    SweepRow,
    TrainConfig,
    TrainReport,
    format_table,
    sweep_lr,
    sweep_optimizers,
    train,
)
from .vaemodel import (
    FeedbackVector,
    FormatError,
    GaussianLatent,
    LayoutVae,
    LossParts,
    VaeConfig,
    VaeParams,
    feedback_from_layout,
    feedback_matrix,
    kl_divergence,
    load_params,
    recon_loss,
    reparameterize,
    save_params,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_RICO_MAPPING",
    "Element",
    "ElementClass",
    "FeedbackVector",
    "FormatError",
    "GaussianLatent",
    "GridSpec",
    "GridTensor",
    "IngestError",
    "LayoutDoc",
    "LayoutVae",
    "LossParts",
    "MetricsReport",
    "ModelService",
    "NumericError",
    "OptimConfig",
    "Optimizer",
    "ParamTensor",
    "PlateauConfig",
    "PlateauSchedule",
    "SessionFeedback",
    "ShapeError",
    "SweepRow",
    "TrainConfig",
    "TrainReport",
    "VaeConfig",
    "VaeParams",
    "ValidationError",
    "corpus_matrix",
    "evaluate",
    "feedback_from_layout",
    "feedback_matrix",
    "finite_diff_check",
    "flatten",
    "format_table",
    "ingest_rico",
    "kl_divergence",
    "load_jsonl",
    "load_params",
    "mae",
    "make_server",
    "matmul",
    "rasterize",
    "recon_loss",
    "reduce_feedback",
    "render_svg",
    "reparameterize",
    "save_jsonl",
    "save_params",
    "split",
    "ssim",
    "sweep_lr",
    "sweep_optimizers",
    "synth_corpus",
    "train",
    "unflatten",
    "zero_grads",
]
