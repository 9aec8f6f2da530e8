"""Dense tensors with reverse-mode automatic differentiation.

Every differentiable op builds an output `Tensor` through `make_result`, which
records a `Node` holding the operands, the activations saved for the backward
pass and the backward rule. Nodes carry a global sequence number, so sorting
the nodes reachable from a loss recovers execution order without any shared
mutable tape; independent graphs can be built on different threads.
"""

import itertools
import logging
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from cdan_enhance.core.models.errors import GraphError, NonFiniteError

logger = logging.getLogger(__name__)

DTYPE = np.float64

_grad_enabled: ContextVar[bool] = ContextVar("cdan_grad_enabled", default=True)
_node_counter = itertools.count()

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording a graph (inference, frozen extractors)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


class Node:
    __slots__ = ("op", "inputs", "backward_fn", "seq")

    def __init__(self, op: str, inputs: Tuple["Tensor", ...], backward_fn: BackwardFn):
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.seq = next(_node_counter)

    def release(self):
        self.inputs = ()
        self.backward_fn = None


class Tensor:
    """N-dimensional double-precision array with optional gradient tracking."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_node", "__weakref__")

    def __init__(
        self,
        data: Union[np.ndarray, float, Sequence[float]],
        requires_grad: bool = False,
        name: Optional[str] = None,
    ):
        array = np.array(data, dtype=DTYPE, copy=True)
        self.data: np.ndarray = np.ascontiguousarray(array)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._node: Optional[Node] = None

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        # ops hand over freshly computed arrays; no copy needed
        out = cls.__new__(cls)
        out.data = np.ascontiguousarray(data, dtype=DTYPE)
        out.requires_grad = requires_grad
        out.grad = None
        out.name = None
        out._node = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def item(self) -> float:
        if self.data.size != 1:
            raise GraphError(f"item() needs a single-element tensor, got {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data, requires_grad=False)

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def accumulate_grad(self, grad: np.ndarray):
        if grad.shape != self.data.shape:
            raise GraphError(
                f"Gradient shape {grad.shape} does not match tensor shape {self.shape}"
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=DTYPE, copy=True)
        else:
            self.grad += grad

    def backward(self):
        backward(self)

    def __repr__(self):
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # operator sugar, kept to what the losses and blocks use
    def __add__(self, other):
        from cdan_enhance.engine import functional as F

        return F.add(self, as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        from cdan_enhance.engine import functional as F

        return F.sub(self, as_tensor(other))

    def __mul__(self, other):
        from cdan_enhance.engine import functional as F

        return F.mul(self, as_tensor(other))

    __rmul__ = __mul__


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def make_result(
    op: str,
    data: np.ndarray,
    inputs: Sequence[Tensor],
    backward_fn: BackwardFn,
) -> Tensor:
    """Wrap an op output and record it in the graph when gradients are needed."""
    if not np.isfinite(data).all():
        raise NonFiniteError(
            f"Op '{op}' produced non-finite values for input shapes "
            f"{[tuple(t.shape) for t in inputs]}"
        )
    requires_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor._wrap(data, requires_grad=requires_grad)
    if requires_grad:
        out._node = Node(op, tuple(inputs), backward_fn)
    return out


class Graph:
    """Recorded operations reachable from an output, in execution order."""

    def __init__(self, nodes: List[Node], output: Tensor):
        self.nodes = nodes
        self.output = output

    @classmethod
    def from_output(cls, output: Tensor) -> "Graph":
        seen: Dict[int, Node] = {}
        stack = [output._node] if output._node is not None else []
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            if node.backward_fn is None:
                raise GraphError(
                    f"Graph through op '{node.op}' was already consumed by a previous backward()"
                )
            seen[id(node)] = node
            for t in node.inputs:
                if t._node is not None and id(t._node) not in seen:
                    stack.append(t._node)
        nodes = sorted(seen.values(), key=lambda n: n.seq)
        return cls(nodes, output)

    def backward(self):
        out_node = self.output._node
        node_grads: Dict[int, np.ndarray] = {}
        if out_node is not None:
            node_grads[id(out_node)] = np.ones_like(self.output.data)

        for node in reversed(self.nodes):
            grad_out = node_grads.pop(id(node), None)
            if grad_out is None:
                continue
            input_grads = node.backward_fn(grad_out)
            for t, g in zip(node.inputs, input_grads):
                if g is None or not t.requires_grad:
                    continue
                if t._node is not None:
                    key = id(t._node)
                    if key in node_grads:
                        node_grads[key] = node_grads[key] + g
                    else:
                        node_grads[key] = g
                else:
                    t.accumulate_grad(g)

    def clear(self):
        for node in self.nodes:
            node.release()
        self.nodes = []


def backward(loss: Tensor):
    """Populate `.grad` of every requires_grad leaf reachable from a scalar loss."""
    if loss.data.size != 1:
        raise GraphError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GraphError("backward() called on a tensor that does not require grad")
    if loss._node is None:
        loss.accumulate_grad(np.ones_like(loss.data))
        return
    graph = Graph.from_output(loss)
    logger.debug(f"Backward over {len(graph.nodes)} recorded ops.")
    graph.backward()
    graph.clear()


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum out broadcast dimensions so `grad` matches `shape`."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for dim, extent in enumerate(shape):
        if extent == 1 and grad.shape[dim] != 1:
            grad = grad.sum(axis=dim, keepdims=True)
    return grad
