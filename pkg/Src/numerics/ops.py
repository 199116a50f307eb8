"""Differentiable primitives.

Every function takes tensors (or array-likes, treated as constants) and
returns a tensor recorded on the active tape when any input is tracked.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from Src.common.errors import (
    DegenerateVectorError,
    NonFiniteError,
    NumericalError,
    ShapeError,
)
from Src.numerics.tensor import DTYPE, VJP, Tensor, active_tape

NORM_FLOOR = 1e-12
SIGMOID_CLIP = 36.0

ArrayLike = Tensor | np.ndarray | float | Sequence[float]


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _record(op: str, inputs: Sequence[Tensor], out: np.ndarray, vjp: VJP) -> Tensor:
    tape = active_tape()
    if tape is None:
        return Tensor(out)
    return tape.record(op, inputs, out, vjp)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from exc


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    sa, sb = a.shape, b.shape
    return _record(
        "add",
        (a, b),
        a.data + b.data,
        lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
    )


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    sa, sb = a.shape, b.shape
    return _record(
        "sub",
        (a, b),
        a.data - b.data,
        lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)),
    )


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    ad, bd = a.data, b.data
    return _record(
        "mul",
        (a, b),
        ad * bd,
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def scale(a: ArrayLike, factor: float) -> Tensor:
    a = as_tensor(a)
    factor = float(factor)
    return _record("scale", (a,), a.data * factor, lambda g: (g * factor,))


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """``a`` is a vector or an m×k matrix, ``b`` a k×n matrix."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim not in (1, 2):
        raise ShapeError(f"matmul expects (k,)|(m,k) x (k,n), got {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(
            f"matmul inner dimensions disagree: {a.shape} x {b.shape}"
        )
    ad, bd = a.data, b.data

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ga = g @ bd.T
        gb = np.outer(ad, g) if ad.ndim == 1 else ad.T @ g
        return ga, gb

    return _record("matmul", (a, b), ad @ bd, vjp)


def relu(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    active = x.data > 0
    return _record("relu", (x,), np.where(active, x.data, 0.0), lambda g: (g * active,))


def tanh(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _record("tanh", (x,), out, lambda g: (g * (1.0 - out * out),))


def sigmoid(x: ArrayLike) -> Tensor:
    """Logistic function; inputs clipped to ±36 so outputs stay inside (0, 1).

    The gradient is zero past the clip, matching the flat forward there.
    """
    x = as_tensor(x)
    z = np.clip(x.data, -SIGMOID_CLIP, SIGMOID_CLIP)
    out = 1.0 / (1.0 + np.exp(-z))
    inside = np.abs(x.data) <= SIGMOID_CLIP
    return _record("sigmoid", (x,), out, lambda g: (g * out * (1.0 - out) * inside,))


def linear(x: ArrayLike) -> Tensor:
    return as_tensor(x)


ACTIVATIONS = {
    "relu": relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "linear": linear,
}


def exp(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return _record("exp", (x,), out, lambda g: (g * out,))


def log(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0):
        raise NumericalError("log of a non-positive value")
    xd = x.data
    return _record("log", (x,), np.log(xd), lambda g: (g / xd,))


def _expand(g: np.ndarray, shape: tuple[int, ...], axis: int | None, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape).copy()


def sum(x: ArrayLike, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    shape = x.shape
    out = np.sum(x.data, axis=axis, keepdims=keepdims)
    return _record(
        "sum",
        (x,),
        np.asarray(out, dtype=DTYPE),
        lambda g: (_expand(g, shape, axis, keepdims),),
    )


def mean(x: ArrayLike, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[axis]
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def transpose(x: ArrayLike) -> Tensor:
    """Swap the two axes of a matrix."""
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {x.shape}")
    return _record("transpose", (x,), x.data.T, lambda g: (g.T,))


def reshape(x: ArrayLike, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    original = x.shape
    return _record(
        "reshape", (x,), x.data.reshape(shape), lambda g: (g.reshape(original),)
    )


def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat needs at least one tensor")
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from exc
    sizes = [p.shape[axis] for p in parts]
    cuts = np.cumsum(sizes)[:-1]
    return _record(
        "concat", parts, out, lambda g: tuple(np.split(g, cuts, axis=axis))
    )


def stack(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("stack needs at least one tensor")
    try:
        out = np.stack([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"stack: {exc}") from exc
    count = len(parts)
    return _record(
        "stack",
        parts,
        out,
        lambda g: tuple(np.take(g, i, axis=axis) for i in range(count)),
    )


def take_rows(table: ArrayLike, indices: np.ndarray | Sequence[int]) -> Tensor:
    """Gather rows; gradients scatter-add back into the table."""
    table = as_tensor(table)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(
            f"row index out of range for table with {table.shape[0]} rows"
        )
    shape = table.shape

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        out = np.zeros(shape, dtype=DTYPE)
        np.add.at(out, idx, g)
        return (out,)

    return _record("take_rows", (table,), table.data[idx], vjp)


def l2_normalize(x: ArrayLike, axis: int = -1, floor: float = NORM_FLOOR) -> Tensor:
    """Scale to unit norm along ``axis``; norms at or below ``floor`` raise."""
    x = as_tensor(x)
    norms = np.linalg.norm(x.data, axis=axis, keepdims=True)
    if np.any(norms <= floor):
        raise DegenerateVectorError(
            f"cannot normalise a vector with norm <= {floor:g}"
        )
    out = x.data / norms

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        radial = np.sum(g * out, axis=axis, keepdims=True)
        return ((g - out * radial) / norms,)

    return _record("l2_normalize", (x,), out, vjp)


def rowdot(a: ArrayLike, b: ArrayLike) -> Tensor:
    return sum(mul(a, b), axis=-1)


def cosine_sim(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Cosine along the last axis; a scalar for two vectors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError(f"cosine_sim dimension mismatch: {a.shape} vs {b.shape}")
    return rowdot(l2_normalize(a), l2_normalize(b))


def logsumexp(x: ArrayLike, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Stable log-sum-exp; entries where ``mask`` is False are left out."""
    x = as_tensor(x)
    keep = np.ones(x.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if keep.shape != x.shape:
        raise ShapeError(f"logsumexp mask shape {keep.shape} != {x.shape}")
    if not np.all(np.any(keep, axis=axis)):
        raise ShapeError("logsumexp: a slice has every entry masked out")
    masked = np.where(keep, x.data, -np.inf)
    peak = np.max(masked, axis=axis, keepdims=True)
    weights = np.where(keep, np.exp(masked - peak), 0.0)
    total = np.sum(weights, axis=axis, keepdims=True)
    out_keep = peak + np.log(total)
    softmax = weights / total

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.expand_dims(g, axis) * softmax,)

    return _record("logsumexp", (x,), np.squeeze(out_keep, axis=axis), vjp)


def bce_with_logits(logits: ArrayLike, labels: np.ndarray | Sequence[float]) -> Tensor:
    """Elementwise binary cross-entropy computed from logits."""
    logits = as_tensor(logits)
    y = np.asarray(labels, dtype=DTYPE)
    if y.shape != logits.shape:
        raise ShapeError(f"labels shape {y.shape} != logits shape {logits.shape}")
    z = logits.data
    out = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    prob = 1.0 / (1.0 + np.exp(-np.clip(z, -SIGMOID_CLIP, SIGMOID_CLIP)))
    return _record("bce_with_logits", (logits,), out, lambda g: (g * (prob - y),))


def assert_finite(value: Tensor, what: str) -> Tensor:
    if not np.all(np.isfinite(value.data)):
        raise NonFiniteError(f"{what} is not finite")
    return value


__all__ = [
    "NORM_FLOOR",
    "ACTIVATIONS",
    "as_tensor",
    "add",
    "sub",
    "mul",
    "scale",
    "matmul",
    "relu",
    "tanh",
    "sigmoid",
    "linear",
    "exp",
    "log",
    "sum",
    "mean",
    "transpose",
    "reshape",
    "concat",
    "stack",
    "take_rows",
    "l2_normalize",
    "rowdot",
    "cosine_sim",
    "logsumexp",
    "bce_with_logits",
    "assert_finite",
]
