"""Dense-matrix substrate: affine layers, manual backprop, gradient checking.

All math is done on 2-D float64 numpy arrays in row-major layout, with the
batch along rows (batch x features). Parameters carry their own gradient
buffer; backward passes accumulate (add into) gradients, and the optimizer
or caller is responsible for zeroing them between steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

Matrix = np.ndarray

ACTIVATIONS = ("relu", "sigmoid", "none")


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class NumericError(ArithmeticError):
    """A computation produced or received non-finite values."""


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> Matrix:
    """Coerce nested lists / arrays to a 2-D float64 row-major matrix."""
    m = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if rows is not None and cols is not None and m.shape != (rows, cols):
        raise ShapeError(f"expected shape ({rows}, {cols}), got {m.shape}")
    return m


@dataclass
class ParamTensor:
    """A weight matrix (or bias row) paired with its gradient accumulator."""

    value: Matrix
    grad: Matrix = field(default=None)  # type: ignore[assignment]
    name: str = ""

    def __post_init__(self):
        self.value = as_matrix(self.value)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        else:
            self.grad = as_matrix(self.grad)
            if self.grad.shape != self.value.shape:
                raise ShapeError(
                    f"grad shape {self.grad.shape} != value shape {self.value.shape}"
                )

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def zero_grads(params: Iterable[ParamTensor]) -> None:
    for p in params:
        p.zero_grad()


@dataclass
class LayerCache:
    """Forward-pass intermediates one affine layer needs for its backward pass."""

    input: Matrix
    pre_activation: Matrix
    output: Matrix
    act: str = "none"


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Standard matrix product with an explicit inner-dimension check."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def sigmoid(x: Matrix) -> Matrix:
    """Logistic function, branch form so exp never overflows."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu(x: Matrix) -> Matrix:
    return np.maximum(x, 0.0)


def affine_forward(
    x: Matrix, w: ParamTensor, b: ParamTensor, act: str = "none"
) -> tuple[Matrix, LayerCache]:
    """y = act(x @ W + b), bias broadcast per row.

    x is (batch, in), W is (in, out), b is (1, out). Returns the activated
    output and the cache required by affine_backward.
    """
    if act not in ACTIVATIONS:
        raise ValueError(f"unknown activation {act!r}, expected one of {ACTIVATIONS}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != w.value.shape[0]:
        raise ShapeError(
            f"input shape {x.shape} incompatible with weight shape {w.value.shape}"
        )
    if b.value.shape != (1, w.value.shape[1]):
        raise ShapeError(
            f"bias shape {b.value.shape} incompatible with weight shape {w.value.shape}"
        )
    pre = x @ w.value + b.value
    if act == "relu":
        y = relu(pre)
    elif act == "sigmoid":
        y = sigmoid(pre)
    else:
        y = pre
    return y, LayerCache(input=x, pre_activation=pre, output=y, act=act)


def affine_backward(dy: Matrix, cache: LayerCache, w: ParamTensor, b: ParamTensor) -> Matrix:
    """Backprop one affine layer; accumulates dW, db and returns dx.

    The activation gate is applied first: ReLU passes gradient where the
    pre-activation was > 0, sigmoid scales by y(1 - y), identity passes as is.
    """
    dy = np.asarray(dy, dtype=np.float64)
    if dy.shape != cache.output.shape:
        raise ShapeError(
            f"upstream gradient shape {dy.shape} != output shape {cache.output.shape}"
        )
    if cache.act == "relu":
        g = dy * (cache.pre_activation > 0.0)
    elif cache.act == "sigmoid":
        y = cache.output
        g = dy * y * (1.0 - y)
    else:
        g = dy
    w.grad += cache.input.T @ g
    b.grad += g.sum(axis=0, keepdims=True)
    return g @ w.value.T


def finite_diff_check(
    loss_fn: Callable[[], float],
    params: Sequence[ParamTensor],
    eps: float = 1e-5,
) -> float:
    """Compare analytic gradients against central finite differences.

    loss_fn must be deterministic (fixed inputs, fixed noise), return a scalar
    loss, and accumulate gradients into params. Returns the maximum relative
    error over every parameter entry, with denominator max(|a|, |n|, 1e-8).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    zero_grads(params)
    loss0 = float(loss_fn())
    if not np.isfinite(loss0):
        raise NumericError(f"loss is not finite: {loss0}")
    analytic = [p.grad.copy() for p in params]

    max_rel = 0.0
    for p, g in zip(params, analytic):
        flat_v = p.value.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_v.size):
            orig = flat_v[i]
            flat_v[i] = orig + eps
            lp = float(loss_fn())
            flat_v[i] = orig - eps
            lm = float(loss_fn())
            flat_v[i] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NumericError("perturbed loss is not finite")
            numeric = (lp - lm) / (2.0 * eps)
            denom = max(abs(flat_g[i]), abs(numeric), 1e-8)
            max_rel = max(max_rel, abs(flat_g[i] - numeric) / denom)
    return max_rel
