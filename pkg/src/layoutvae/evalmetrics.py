"""SSIM and MAE between occupancy grids, plus the test-split harness.

SSIM here is the standard Gaussian-window variant (11x11, sigma 1.5,
K1=0.01, K2=0.03, dynamic range 1) computed per channel with reflected
borders and averaged over all window positions and channels. The window
shrinks to min(11, H) x min(11, W) so small grids stay well defined.
Evaluation reconstructs deterministically (z = mu, teacher-forced feedback)
so reported numbers are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .layoutdata import GridSpec, GridTensor, ValidationError, unflatten
from .numcore import ShapeError
from .vaemodel import LayoutVae, feedback_matrix

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 1.0


def gaussian_window(h: int, w: int, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Separable Gaussian kernel normalized to sum 1."""
    if h < 1 or w < 1:
        raise ValueError("window must be at least 1x1")

    def axis(n: int) -> np.ndarray:
        x = np.arange(n) - (n - 1) / 2.0
        return np.exp(-(x**2) / (2.0 * sigma**2))

    win = np.outer(axis(h), axis(w))
    return win / win.sum()


def _windowed_mean(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    """Weighted local mean at every pixel, borders reflected (edge not
    repeated), one output per input position."""
    wh, ww = win.shape
    top, left = (wh - 1) // 2, (ww - 1) // 2
    padded = np.pad(img, ((top, wh - 1 - top), (left, ww - 1 - left)), mode="reflect")
    views = sliding_window_view(padded, (wh, ww))
    return np.einsum("ijkl,kl->ij", views, win)


def _ssim_channel(a: np.ndarray, b: np.ndarray, win: np.ndarray) -> np.ndarray:
    c1 = (SSIM_K1 * SSIM_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_RANGE) ** 2
    mu_a = _windowed_mean(a, win)
    mu_b = _windowed_mean(b, win)
    var_a = _windowed_mean(a * a, win) - mu_a**2
    var_b = _windowed_mean(b * b, win) - mu_b**2
    cov = _windowed_mean(a * b, win) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a: GridTensor, b: GridTensor) -> float:
    """Mean structural similarity over channels and window positions."""
    if a.spec != b.spec:
        raise ShapeError(f"grid specs differ: {a.spec} vs {b.spec}")
    win = gaussian_window(min(SSIM_WINDOW, a.spec.rows), min(SSIM_WINDOW, a.spec.cols))
    values = [
        _ssim_channel(a.cells[c], b.cells[c], win) for c in range(a.spec.channels)
    ]
    return float(np.mean(values))


def mae(a: GridTensor, b: GridTensor) -> float:
    """Mean absolute cell difference over all C*H*W cells."""
    if a.spec != b.spec:
        raise ShapeError(f"grid specs differ: {a.spec} vs {b.spec}")
    return float(np.mean(np.abs(a.cells - b.cells)))


@dataclass
class MetricsReport:
    mean_ssim: float
    mean_mae: float
    n: int
    per_example_ssim: list[float]
    per_example_mae: list[float]

    def to_json(self) -> dict:
        return {
            "ssim": self.mean_ssim,
            "mae": self.mean_mae,
            "n": self.n,
            "per_example": [
                {"ssim": s, "mae": m}
                for s, m in zip(self.per_example_ssim, self.per_example_mae)
            ],
        }


def evaluate(
    model: LayoutVae, test_x: np.ndarray, spec: GridSpec | None = None
) -> MetricsReport:
    """SSIM/MAE of deterministic reconstructions over a test split."""
    test_x = np.asarray(test_x, dtype=np.float64)
    if test_x.ndim != 2 or test_x.shape[0] == 0:
        raise ValidationError("test split is empty")
    if spec is None:
        spec = GridSpec()
    f = feedback_matrix(test_x, spec) if model.config.feedback_enabled else None
    x_hat = model.reconstruct(test_x, f)
    ssims: list[float] = []
    maes: list[float] = []
    for i in range(test_x.shape[0]):
        a = unflatten(test_x[i], spec)
        b = unflatten(x_hat[i], spec)
        ssims.append(ssim(a, b))
        maes.append(mae(a, b))
    return MetricsReport(
        mean_ssim=sum(ssims) / len(ssims),
        mean_mae=sum(maes) / len(maes),
        n=len(ssims),
        per_example_ssim=ssims,
        per_example_mae=maes,
    )
