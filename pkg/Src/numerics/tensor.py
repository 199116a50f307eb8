"""Dense tensors and the reverse-mode differentiation tape.

Operations record onto the tape that is active in the current context
(``with Tape() as tape: ...``). Outside an active tape, or when no input is
tracked, operations return plain constant tensors.
"""

from __future__ import annotations

import contextlib
import contextvars
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from Src.common.errors import FrozenParameterError, ShapeError

DTYPE = np.float64

VJP = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_ACTIVE_TAPE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "active_tape", default=None
)


class Tensor:
    """Row-major float64 array with an optional handle into a tape."""

    __slots__ = ("data", "node_id", "tape")

    def __init__(
        self,
        data: np.ndarray | float | Sequence[float],
        *,
        node_id: int | None = None,
        tape: "Tape | None" = None,
    ) -> None:
        # 0-d stays 0-d (scalar losses)
        self.data = np.asarray(data, dtype=DTYPE, order="C")
        self.node_id = node_id
        self.tape = tape

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def tracked(self) -> bool:
        return self.node_id is not None

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single value, shape is {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = f", node={self.node_id}" if self.node_id is not None else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __add__(self, other: "Tensor | float") -> "Tensor":
        from Src.numerics import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: "Tensor | float") -> "Tensor":
        from Src.numerics import ops

        return ops.sub(self, other)

    def __rsub__(self, other: "Tensor | float") -> "Tensor":
        from Src.numerics import ops

        return ops.sub(other, self)

    def __mul__(self, other: "Tensor | float") -> "Tensor":
        from Src.numerics import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> "Tensor":
        from Src.numerics import ops

        return ops.scale(self, 1.0 / float(other))

    def __neg__(self) -> "Tensor":
        from Src.numerics import ops

        return ops.scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from Src.numerics import ops

        return ops.matmul(self, other)


class Parameter(Tensor):
    """A trainable leaf. Frozen parameters refuse gradients."""

    __slots__ = ("name", "frozen")

    def __init__(self, data: np.ndarray, name: str, *, frozen: bool = False) -> None:
        super().__init__(data)
        self.name = name
        self.frozen = frozen

    def __repr__(self) -> str:
        flag = ", frozen" if self.frozen else ""
        return f"Parameter({self.name!r}, shape={self.shape}{flag})"


@dataclass(slots=True)
class TapeNode:
    op: str
    inputs: tuple[int | None, ...]
    shape: tuple[int, ...]
    vjp: VJP | None = None
    parameter: Parameter | None = None


@dataclass(slots=True)
class Tape:
    """Ordered record of operations; inputs always precede their consumers."""

    nodes: list[TapeNode] = field(default_factory=list)
    _leaves: dict[int, int] = field(default_factory=dict)
    _tokens: list[contextvars.Token] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        self._tokens.append(_ACTIVE_TAPE.set(self))
        return self

    def __exit__(self, *exc_info: object) -> None:
        _ACTIVE_TAPE.reset(self._tokens.pop())

    @property
    def size(self) -> int:
        return len(self.nodes)

    def watch(self, tensor: Tensor) -> int | None:
        """Return the node id for ``tensor`` on this tape (None = constant)."""
        if isinstance(tensor, Parameter):
            key = id(tensor)
            node_id = self._leaves.get(key)
            if node_id is None:
                node_id = len(self.nodes)
                self.nodes.append(
                    TapeNode("leaf", (), tensor.shape, parameter=tensor)
                )
                self._leaves[key] = node_id
            return node_id
        if tensor.node_id is not None and tensor.tape is self:
            return tensor.node_id
        return None

    def record(
        self,
        op: str,
        inputs: Sequence[Tensor],
        out: np.ndarray,
        vjp: VJP,
    ) -> Tensor:
        ids = tuple(self.watch(t) for t in inputs)
        if all(i is None for i in ids):
            return Tensor(out)
        result = Tensor(out, node_id=len(self.nodes), tape=self)
        self.nodes.append(TapeNode(op, ids, result.shape, vjp))
        return result

    def reset(self) -> None:
        self.nodes.clear()
        self._leaves.clear()


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Run operations without recording, even inside an active tape."""
    token = _ACTIVE_TAPE.set(None)
    try:
        yield
    finally:
        _ACTIVE_TAPE.reset(token)


GradientMap = dict[Parameter, np.ndarray]


def backward(loss: Tensor, tape: Tape | None = None) -> GradientMap:
    """Exact reverse-mode gradients of a scalar ``loss`` for every parameter.

    The tape is reset afterwards. A gradient that reaches a frozen parameter
    raises :class:`FrozenParameterError`.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if tape is None:
        tape = loss.tape
    if tape is None or loss.node_id is None or loss.tape is not tape:
        return {}

    grads: dict[int, np.ndarray] = {
        loss.node_id: np.ones(loss.shape, dtype=DTYPE)
    }
    result: GradientMap = {}
    try:
        for node_id in range(loss.node_id, -1, -1):
            grad = grads.pop(node_id, None)
            if grad is None:
                continue
            node = tape.nodes[node_id]
            if node.parameter is not None:
                if node.parameter.frozen:
                    raise FrozenParameterError(
                        f"gradient reached frozen parameter '{node.parameter.name}'"
                    )
                result[node.parameter] = grad
                continue
            for input_id, input_grad in zip(node.inputs, node.vjp(grad)):
                if input_id is None or input_grad is None:
                    continue
                expected = tape.nodes[input_id].shape
                if input_grad.shape != expected:
                    raise ShapeError(
                        f"{node.op}: gradient shape {input_grad.shape} "
                        f"does not match input shape {expected}"
                    )
                if input_id in grads:
                    grads[input_id] = grads[input_id] + input_grad
                else:
                    grads[input_id] = input_grad
    finally:
        tape.reset()
    return result


__all__ = [
    "DTYPE",
    "Tensor",
    "Parameter",
    "TapeNode",
    "Tape",
    "GradientMap",
    "active_tape",
    "no_grad",
    "backward",
]
