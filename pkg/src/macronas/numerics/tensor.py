"""Dense float64 tensors with reverse-mode differentiation.

A :class:`Tensor` wraps a C-order ``numpy`` array. Operations on tensors
record their inputs, so the set of live tensors forms an implicit
differentiation graph (DAG); :func:`backward` walks it once in reverse
topological order and returns gradients for every trainable leaf.

Subgradient conventions are fixed so gradient checks are reproducible:
``abs`` at 0 has gradient 0, ``relu`` at 0 has gradient 0, and
``leaky_relu`` at 0 takes the negative-slope branch.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "NonFiniteError",
    "no_grad",
    "backward",
    "constant",
    "parameter",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "absolute",
    "relu",
    "leaky_relu",
    "exp",
    "log",
    "sqrt",
    "power",
    "reduce_sum",
    "reduce_mean",
    "concat_cols",
    "take_rows",
    "segment_sum",
    "segment_mean",
]


class NonFiniteError(ValueError):
    """A public operation produced NaN or infinity."""


# When False, operations do not record inputs and backward() is unavailable
# for the produced tensors. Toggled by no_grad() for inference paths.
_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Run a block without recording the differentiation graph."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _as_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    return np.ascontiguousarray(arr)


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite values produced by '{op}'")
    return arr


class Tensor:
    """A node of the differentiation graph holding a float64 array.

    Leaves are created with :func:`constant` or :func:`parameter`; interior
    nodes are produced by the operations below and remember their parents
    together with a function that maps the upstream gradient to per-parent
    gradient contributions.
    """

    __slots__ = ("data", "trainable", "name", "_parents", "_grad_fn")

    def __init__(
        self,
        values,
        trainable: bool = False,
        name: str | None = None,
        _parents: tuple["Tensor", ...] = (),
        _grad_fn: Callable[[np.ndarray], tuple[np.ndarray | None, ...]] | None = None,
    ):
        self.data = _as_array(values)
        self.trainable = trainable
        self.name = name
        self._parents = _parents
        self._grad_fn = _grad_fn
        if _grad_fn is None:
            # Leaf construction is a public operation; interior nodes are
            # checked at their creating op instead.
            _check_finite(self.data, "tensor")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        """Row-major view of the stored values."""
        return self.data

    @property
    def requires_grad(self) -> bool:
        return self.trainable or bool(self._parents)

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = self.name or ("param" if self.trainable else "tensor")
        return f"Tensor({tag}, shape={self.shape})"

    # Operator sugar; the module-level functions hold the implementations.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(values, name: str | None = None) -> Tensor:
    return Tensor(values, trainable=False, name=name)


def parameter(values, name: str | None = None) -> Tensor:
    return Tensor(values, trainable=True, name=name)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(op: str, out: np.ndarray, parents: Sequence[Tensor], grad_fn) -> Tensor:
    _check_finite(out, op)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Tensor(out, _parents=tuple(parents), _grad_fn=grad_fn)
    return Tensor(out, _grad_fn=_noop_grad)


def _noop_grad(_grad):  # placeholder for constants born from ops
    raise AssertionError("gradient requested from a constant node")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (reverses numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = a.data + b.data

    def grad_fn(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _node("add", out, (a, b), grad_fn)


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = a.data - b.data

    def grad_fn(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _node("sub", out, (a, b), grad_fn)


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = a.data * b.data

    def grad_fn(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _node("mul", out, (a, b), grad_fn)


def div(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data

    def grad_fn(g):
        inv = 1.0 / b.data
        return (
            _unbroadcast(g * inv, a.data.shape),
            _unbroadcast(-g * a.data * inv * inv, b.data.shape),
        )

    return _node("div", out, (a, b), grad_fn)


def neg(a) -> Tensor:
    a = _lift(a)
    return _node("neg", -a.data, (a,), lambda g: (-g,))


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D tensors")
    out = a.data @ b.data

    def grad_fn(g):
        return g @ b.data.T, a.data.T @ g

    return _node("matmul", out, (a, b), grad_fn)


def absolute(a) -> Tensor:
    a = _lift(a)

    def grad_fn(g):
        # Subgradient at 0 is 0 (sign(0) == 0).
        return (g * np.sign(a.data),)

    return _node("abs", np.abs(a.data), (a,), grad_fn)


def relu(a) -> Tensor:
    a = _lift(a)
    out = np.maximum(a.data, 0.0)

    def grad_fn(g):
        return (g * (a.data > 0.0),)

    return _node("relu", out, (a,), grad_fn)


def leaky_relu(a, negative_slope: float = 0.2) -> Tensor:
    if not 0.0 < negative_slope < 1.0:
        raise ValueError("negative_slope must lie in (0, 1)")
    a = _lift(a)
    # max(x, slope*x) equals the leaky form for slope in (0, 1); at exactly
    # 0 the gradient takes the negative-slope branch.
    out = a.data * negative_slope
    np.maximum(out, a.data, out=out)

    def grad_fn(g):
        return (np.where(a.data > 0.0, g, negative_slope * g),)

    return _node("leaky_relu", out, (a,), grad_fn)


def exp(a) -> Tensor:
    a = _lift(a)
    out = np.exp(a.data)
    return _node("exp", out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = _lift(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _node("log", out, (a,), lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = _lift(a)
    with np.errstate(invalid="ignore"):
        out = np.sqrt(a.data)

    def grad_fn(g):
        return (g * 0.5 / out,)

    return _node("sqrt", out, (a,), grad_fn)


def power(a, p: float) -> Tensor:
    """Elementwise a**p for a fixed exponent p."""
    a = _lift(a)
    out = a.data**p

    def grad_fn(g):
        return (g * p * a.data ** (p - 1.0),)

    return _node("power", out, (a,), grad_fn)


def reduce_sum(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        g2 = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g2, a.data.shape).copy(),)

    return _node("sum", out, (a,), grad_fn)


def reduce_mean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def concat_cols(parts: Iterable[Tensor]) -> Tensor:
    """Concatenate 2-D tensors along axis 1."""
    parts = [_lift(p) for p in parts]
    widths = [p.data.shape[1] for p in parts]
    out = np.concatenate([p.data for p in parts], axis=1)
    offsets = np.cumsum([0] + widths)

    def grad_fn(g):
        return tuple(g[:, offsets[i] : offsets[i + 1]] for i in range(len(parts)))

    return _node("concat_cols", out, tuple(parts), grad_fn)


def take_rows(a, index: np.ndarray, scatter_plan: "ScatterPlan | None" = None) -> Tensor:
    """Gather rows of a 2-D tensor; backward scatter-adds into the source.

    A precomputed `scatter_plan` for `index` avoids re-sorting in backward
    when the same index is gathered repeatedly (hot training loops).
    """
    a = _lift(a)
    index = np.asarray(index, dtype=np.intp)
    out = a.data[index]
    nrows = a.data.shape[0]

    def grad_fn(g):
        return (_scatter_add_rows(g, index, nrows, scatter_plan),)

    return _node("take_rows", out, (a,), grad_fn)


class ScatterPlan:
    """Row-summing matrix for one index vector, reusable across ops.

    scatter_add(rows, index) == matrix @ rows with a CSR (num_rows, len
    (index)) selector; sparse matmul beats reduceat/add.at at the sizes
    this engine runs at.
    """

    __slots__ = ("index", "num_rows", "matrix")

    def __init__(self, index: np.ndarray, num_rows: int):
        from scipy import sparse

        self.index = np.asarray(index, dtype=np.intp)
        self.num_rows = int(num_rows)
        n = len(self.index)
        self.matrix = sparse.csr_matrix(
            (np.ones(n), (self.index, np.arange(n))), shape=(self.num_rows, n)
        )

    def apply(self, rows: np.ndarray) -> np.ndarray:
        if rows.ndim == 1:
            return self.matrix @ rows
        return np.asarray(self.matrix @ rows)


def _scatter_add_rows(
    rows: np.ndarray, index: np.ndarray, nrows: int, plan: ScatterPlan | None = None
) -> np.ndarray:
    if plan is None:
        plan = ScatterPlan(index, nrows)
    return plan.apply(rows)


def segment_sum(
    a, segments: np.ndarray, num_segments: int, plan: ScatterPlan | None = None
) -> Tensor:
    """Sum rows of `a` into `num_segments` buckets keyed by `segments`."""
    a = _lift(a)
    segments = np.asarray(segments, dtype=np.intp)
    if plan is None:
        plan = ScatterPlan(segments, num_segments)
    out = plan.apply(a.data)

    def grad_fn(g):
        return (g[segments],)

    return _node("segment_sum", out, (a,), grad_fn)


def segment_mean(
    a, segments: np.ndarray, num_segments: int, plan: ScatterPlan | None = None
) -> Tensor:
    a = _lift(a)
    segments = np.asarray(segments, dtype=np.intp)
    counts = np.bincount(segments, minlength=num_segments).astype(np.float64)
    counts[counts == 0.0] = 1.0
    inv = (1.0 / counts).reshape((num_segments,) + (1,) * (a.data.ndim - 1))
    return mul(segment_sum(a, segments, num_segments, plan), inv)


def _toposort(output: Tensor) -> list[Tensor]:
    """Iterative post-order over the recorded graph; each node once."""
    seen: set[int] = set()
    order: list[Tensor] = []
    stack: list[tuple[Tensor, bool]] = [(output, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def backward(output: Tensor) -> dict[Tensor, np.ndarray]:
    """Gradients of a scalar output with respect to every trainable leaf.

    Returns a map from parameter tensor to its gradient array (same shape).
    Raises if the output is not a scalar or a non-finite gradient appears.
    """
    if output.data.size != 1:
        raise ValueError(f"backward requires a scalar output, got shape {output.shape}")
    grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
    result: dict[Tensor, np.ndarray] = {}
    for node in reversed(_toposort(output)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.trainable:
            result[node] = result[node] + g if node in result else g
        if not node._parents:
            continue
        parent_grads = node._grad_fn(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if not np.isfinite(pg).all():
                raise NonFiniteError("non-finite gradient during backward")
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return result
