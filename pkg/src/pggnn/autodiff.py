"""Small reverse-mode automatic differentiation engine on top of numpy.

Every ``Tensor`` wraps a float64 array.  Operations on tensors that require
gradients record their parents and a backward closure; ``Tensor.backward``
walks the recorded graph in reverse topological order and accumulates
gradients into the leaf tensors (parameters).

Only the operations the protein model needs are provided.  Broadcasting is
supported for elementwise arithmetic and undone on the way back.
"""
from __future__ import annotations

import contextlib
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor", "DimensionError", "ContractError", "EvaluationError",
    "NonFiniteGradientError", "no_grad", "is_grad_enabled", "tensor", "parameter",
    "matmul", "conv2d", "activation", "elu", "relu", "sigmoid", "tanh",
    "instance_norm", "softmax", "softmax_cross_entropy", "concat", "gru_cell",
    "GRUParams", "finite_diff_check", "GradCheckReport", "Module", "AdamState", "Adam",
    "clip_grad_norm",
]


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(RuntimeError):
    """An operation was used outside its contract."""


class EvaluationError(RuntimeError):
    """A function under test produced a non-finite value."""


class NonFiniteGradientError(FloatingPointError):
    """An optimizer step was asked to apply a NaN or infinite gradient."""


_ids = itertools.count(1)
_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording, e.g. for inference on long proteins."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """Float64 array node in a differentiation graph."""

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self.node_id = next(_ids) if requires_grad else None
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    # -- construction helpers -------------------------------------------------
    @classmethod
    def _from_op(cls, data, parents, backward, op):
        out = cls.__new__(cls)
        out.data = data
        out.name = None
        out.op = op
        track = _grad_enabled and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out.grad = None
        out.node_id = next(_ids) if track else None
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self):
        tag = f", op={self.op}" if self.op != "leaf" else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # -- backward -------------------------------------------------------------
    def backward(self) -> None:
        """Populate ``grad`` on every leaf reachable from this scalar."""
        if self.data.size != 1:
            raise ContractError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            return
        order = _topological_order(self)
        grads = {self.node_id: np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(node.node_id, None)
            if g is None:
                continue
            if node.is_leaf:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if parent.node_id in grads:
                    grads[parent.node_id] = grads[parent.node_id] + pg
                else:
                    grads[parent.node_id] = pg

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = _as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(g):
            return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)

        return Tensor._from_op(self.data + other.data, (self, other), backward, "add")

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(g):
            return _unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)

        return Tensor._from_op(self.data - other.data, (self, other), backward, "sub")

    def __rsub__(self, other):
        return _as_tensor(other) - self

    def __mul__(self, other):
        other = _as_tensor(other)
        a, b = self.data, other.data

        def backward(g):
            return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)

        return Tensor._from_op(a * b, (self, other), backward, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError("division by a tensor is not supported")
        return self * (1.0 / float(other))

    def __neg__(self):
        return Tensor._from_op(-self.data, (self,), lambda g: (-g,), "neg")

    def __pow__(self, exponent):
        exponent = float(exponent)
        x = self.data

        def backward(g):
            return (g * exponent * x ** (exponent - 1.0),)

        return Tensor._from_op(x ** exponent, (self,), backward, "pow")

    def __matmul__(self, other):
        return matmul(self, other)

    # -- shape ops ------------------------------------------------------------
    def sum(self, axis=None, keepdims: bool = False) -> Tensor:
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._from_op(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward, "sum")

    def mean(self, axis=None, keepdims: bool = False) -> Tensor:
        n = self.data.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        return Tensor._from_op(self.data.reshape(shape), (self,), lambda g: (g.reshape(old),), "reshape")

    def transpose(self, *axes) -> Tensor:
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return Tensor._from_op(self.data.transpose(axes), (self,),
                               lambda g: (g.transpose(inverse),), "transpose")

    @property
    def T(self) -> Tensor:
        return self.transpose()

    def broadcast_to(self, shape) -> Tensor:
        old = self.shape
        data = np.broadcast_to(self.data, shape).copy()
        return Tensor._from_op(data, (self,), lambda g: (_unbroadcast(g, old),), "broadcast_to")

    def __getitem__(self, index) -> Tensor:
        shape = self.shape

        def backward(g):
            full = np.zeros(shape)
            np.add.at(full, index, g)
            return (full,)

        return Tensor._from_op(self.data[index], (self,), backward, "getitem")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def tensor(data) -> Tensor:
    return Tensor(data)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _topological_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.node_id in seen:
            continue
        seen.add(node.node_id)
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and parent.node_id not in seen:
                stack.append((parent, False))
    return order


# -- linear algebra -------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shapes {a.shape} and {b.shape} do not align")
    x, y = a.data, b.data

    def backward(g):
        return g @ y.T, x.T @ g

    return Tensor._from_op(x @ y, (a, b), backward, "matmul")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._from_op(data, tensors, backward, "concat")


# -- convolution ----------------------------------------------------------------

def _patches(xp: np.ndarray, L: int, W: int, dilation: int) -> np.ndarray:
    c = xp.shape[0]
    cols = np.empty((c, 3, 3, L, W))
    for ky in range(3):
        for kx in range(3):
            cols[:, ky, kx] = xp[:, ky * dilation:ky * dilation + L, kx * dilation:kx * dilation + W]
    return cols.reshape(c * 9, L * W)


def conv2d(x: Tensor, kernels: Tensor, dilation: int = 1) -> Tensor:
    """3x3 cross-correlation, zero padding of width ``dilation`` (shape preserving)."""
    if x.ndim != 3 or kernels.ndim != 4:
        raise DimensionError(f"conv2d expects C×H×W input and O×C×3×3 kernels, got {x.shape}, {kernels.shape}")
    c_in, h, w = x.shape
    c_out, k_in, kh, kw = kernels.shape
    if (kh, kw) != (3, 3):
        raise DimensionError(f"conv2d kernels must be 3×3, got {kh}×{kw}")
    if k_in != c_in:
        raise DimensionError(f"conv2d channel mismatch: input {x.shape}, kernels {kernels.shape}")
    if dilation < 1:
        raise ValueError("dilation must be positive")
    p = dilation
    xp = np.pad(x.data, ((0, 0), (p, p), (p, p)))
    kmat = kernels.data.reshape(c_out, c_in * 9)
    cols = _patches(xp, h, w, p)
    out = (kmat @ cols).reshape(c_out, h, w)
    keep = cols if _grad_enabled and (x.requires_grad or kernels.requires_grad) else None
    del cols

    def backward(g):
        g2 = g.reshape(c_out, h * w)
        dk = (g2 @ keep.T).reshape(kernels.shape)
        dcols = (kmat.T @ g2).reshape(c_in, 3, 3, h, w)
        dxp = np.zeros_like(xp)
        for ky in range(3):
            for kx in range(3):
                dxp[:, ky * p:ky * p + h, kx * p:kx * p + w] += dcols[:, ky, kx]
        return dxp[:, p:p + h, p:p + w], dk

    return Tensor._from_op(out, (x, kernels), backward, "conv2d")


# -- elementwise nonlinearities ---------------------------------------------------

def elu(x: Tensor) -> Tensor:
    d = x.data
    neg = np.expm1(np.minimum(d, 0.0))
    out = np.where(d >= 0, d, neg)
    slope = np.where(d >= 0, 1.0, neg + 1.0)
    return Tensor._from_op(out, (x,), lambda g: (g * slope,), "elu")


def relu(x: Tensor) -> Tensor:
    d = x.data
    mask = d > 0
    return Tensor._from_op(d * mask, (x,), lambda g: (g * mask,), "relu")


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    out[~pos] = e / (1.0 + e)
    return Tensor._from_op(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


_ACTIVATIONS = {"elu": elu, "relu": relu, "sigmoid": sigmoid, "tanh": tanh}


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}; expected one of {sorted(_ACTIVATIONS)}") from None
    return fn(x)


# -- normalization / probabilities ------------------------------------------------

def instance_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each channel of a C×H×W map with its own spatial statistics."""
    if x.ndim != 3 or gamma.shape != (x.shape[0],) or beta.shape != (x.shape[0],):
        raise DimensionError(f"instance_norm shapes x={x.shape}, gamma={gamma.shape}, beta={beta.shape}")
    d = x.data
    n = d.shape[1] * d.shape[2]
    mu = d.mean(axis=(1, 2), keepdims=True)
    centered = d - mu
    inv = 1.0 / np.sqrt((centered ** 2).mean(axis=(1, 2), keepdims=True) + eps)
    xhat = centered * inv
    gm = gamma.data[:, None, None]
    out = gm * xhat + beta.data[:, None, None]

    def backward(g):
        dxhat = g * gm
        dx = inv / n * (n * dxhat - dxhat.sum(axis=(1, 2), keepdims=True)
                        - xhat * (dxhat * xhat).sum(axis=(1, 2), keepdims=True))
        return dx, (g * xhat).sum(axis=(1, 2)), g.sum(axis=(1, 2))

    return Tensor._from_op(out, (x, gamma, beta), backward, "instance_norm")


def _softmax_np(z: np.ndarray, axis: int) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    p = _softmax_np(x.data, axis)

    def backward(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(p, (x,), backward, "softmax")


def softmax_cross_entropy(logits: Tensor, labels, mask=None, axis: int = -1) -> Tensor:
    """Mean of -log softmax(logits)[label] over the unmasked positions.

    ``labels`` and ``mask`` have the shape of ``logits`` with ``axis`` removed.
    """
    z = logits.data
    axis = axis % z.ndim
    labels = np.asarray(labels, dtype=np.int64)
    pos_shape = z.shape[:axis] + z.shape[axis + 1:]
    if labels.shape != pos_shape:
        raise DimensionError(f"labels shape {labels.shape} does not match logits {z.shape} without axis {axis}")
    mask = np.ones(pos_shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        raise ContractError("cross-entropy over an empty set: every position is masked")
    n_bins = z.shape[axis]
    if np.any((labels[mask] < 0) | (labels[mask] >= n_bins)):
        raise ValueError(f"labels must lie in [0, {n_bins}) at unmasked positions")
    safe = np.where(mask, labels, 0)
    shifted = z - z.max(axis=axis, keepdims=True)
    log_p = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    picked = np.take_along_axis(log_p, np.expand_dims(safe, axis), axis=axis).squeeze(axis)
    loss = -(picked * mask).sum() / count

    def backward(g):
        onehot = np.zeros_like(z)
        np.put_along_axis(onehot, np.expand_dims(safe, axis), 1.0, axis=axis)
        grad = (np.exp(log_p) - onehot) * np.expand_dims(mask, axis) / count
        return (g * grad,)

    return Tensor._from_op(np.asarray(loss), (logits,), backward, "softmax_cross_entropy")


# -- recurrent cell ---------------------------------------------------------------

@dataclass
class GRUParams:
    """Gate weights of a GRU cell; ``w_*`` act on the message, ``u_*`` on the state."""

    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_n: Tensor
    u_n: Tensor
    b_n: Tensor

    def tensors(self) -> dict[str, Tensor]:
        return dict(vars(self))


def gru_cell(h: Tensor, m: Tensor, p: GRUParams) -> Tensor:
    """h' = (1 - z) * n + z * h with n = tanh(m W_n + r * (h U_n) + b_n)."""
    if h.shape != m.shape:
        raise DimensionError(f"gru_cell state {h.shape} and message {m.shape} differ")
    d = h.shape[1]
    for key, t in p.tensors().items():
        want = (d,) if key.startswith("b_") else (d, d)
        if t.shape != want:
            raise DimensionError(f"GRU parameter {key} has shape {t.shape}, expected {want}")
    z = sigmoid(m @ p.w_z + h @ p.u_z + p.b_z)
    r = sigmoid(m @ p.w_r + h @ p.u_r + p.b_r)
    n = tanh(m @ p.w_n + r * (h @ p.u_n) + p.b_n)
    return (1.0 - z) * n + z * h


# -- gradient checking ------------------------------------------------------------

@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    max_abs_error: float
    worst: tuple[int, tuple[int, ...]] | None = None  # (input index, coordinate)
    checked: int = 0

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} max_rel={self.max_rel_error:.3e} max_abs={self.max_abs_error:.3e} n={self.checked}"


def finite_diff_check(f: Callable[..., Tensor], inputs, rtol: float = 1e-3, atol: float = 1e-6,
                      h: float = 1e-5, max_coords: int | None = None,
                      rng: np.random.Generator | None = None) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar ``f(*inputs)`` with central differences.

    ``inputs`` is a Tensor or a sequence of Tensors; their ``data`` is perturbed
    in place and restored.  A coordinate passes when
    ``|analytic - numeric| <= atol + rtol * |numeric|``.  With ``max_coords``
    only that many coordinates per input, drawn with ``rng``, are perturbed.
    """
    if isinstance(inputs, Tensor):
        inputs = [inputs]
    inputs = list(inputs)
    saved = [(t.requires_grad, t.grad, t.node_id) for t in inputs]
    for t in inputs:
        if not t.requires_grad:
            t.requires_grad = True
            t.node_id = next(_ids)
        t.grad = np.zeros_like(t.data)

    def evaluate() -> Tensor:
        out = f(*inputs)
        if not np.all(np.isfinite(out.data)):
            raise EvaluationError("function under check returned a non-finite value")
        if out.data.size != 1:
            raise ContractError(f"gradient check needs a scalar function, got shape {out.shape}")
        return out

    try:
        with _enable_grad():
            evaluate().backward()
        analytic = [t.grad.copy() for t in inputs]
        passed, max_rel, max_abs, worst, n = True, 0.0, 0.0, None, 0
        with no_grad():
            for k, t in enumerate(inputs):
                flat = t.data.reshape(-1)
                coords = range(flat.size)
                if max_coords is not None and flat.size > max_coords:
                    rng = rng or np.random.default_rng(0)
                    coords = sorted(rng.choice(flat.size, size=max_coords, replace=False))
                for idx in coords:
                    orig = flat[idx]
                    flat[idx] = orig + h
                    fp = evaluate().item()
                    flat[idx] = orig - h
                    fm = evaluate().item()
                    flat[idx] = orig
                    numeric = (fp - fm) / (2.0 * h)
                    a = analytic[k].reshape(-1)[idx]
                    err = abs(a - numeric)
                    scale = max(abs(a), abs(numeric))
                    rel = err / scale if scale > 0 else 0.0
                    n += 1
                    if err > atol + rtol * abs(numeric):
                        passed = False
                    if scale > atol and rel > max_rel:
                        max_rel = rel
                        worst = (k, np.unravel_index(idx, t.shape))
                    max_abs = max(max_abs, err)
    finally:
        for t, (rg, grad, nid) in zip(inputs, saved):
            t.requires_grad, t.grad, t.node_id = rg, grad, nid
    return GradCheckReport(passed, max_rel, max_abs, worst, n)


@contextlib.contextmanager
def _enable_grad():
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, True
    try:
        yield
    finally:
        _grad_enabled = prev


# -- parameter containers ---------------------------------------------------------

class Module:
    """Collects parameters from attributes, lists and nested modules by name."""

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for key, value in vars(self).items():
            _collect(value, f"{prefix}{key}", out)
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


def _collect(value, name: str, out: dict) -> None:
    if isinstance(value, Tensor):
        if value.requires_grad:
            out[name] = value
    elif isinstance(value, Module):
        out.update(value.named_parameters(prefix=name + "."))
    elif isinstance(value, GRUParams):
        for k, t in value.tensors().items():
            out[f"{name}.{k}"] = t
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _collect(item, f"{name}.{i}", out)


# -- optimization -------------------------------------------------------------------

def clip_grad_norm(params: Iterable[Tensor], max_norm: float) -> float:
    """Rescale gradients in place so their global L2 norm is at most ``max_norm``."""
    params = [p for p in params if p.grad is not None]
    total = float(np.sqrt(sum(float((p.grad ** 2).sum()) for p in params)))
    if np.isfinite(total) and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad *= scale
    return total


@dataclass
class AdamState:
    lr: float = 1.3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


class Adam:
    """Bias-corrected Adam over a name -> parameter mapping."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1.3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, state: AdamState | None = None):
        self.params = dict(params)
        self.state = state or AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for name, p in self.params.items():
            self.state.m.setdefault(name, np.zeros_like(p.data))
            self.state.v.setdefault(name, np.zeros_like(p.data))
            if self.state.m[name].shape != p.shape:
                raise DimensionError(f"Adam moment for {name} has shape {self.state.m[name].shape}, parameter {p.shape}")

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        bad = [n for n, p in self.params.items() if not np.all(np.isfinite(p.grad))]
        if bad:
            raise NonFiniteGradientError(f"non-finite gradient in {', '.join(bad)}; step rejected")
        s = self.state
        s.step += 1
        c1 = 1.0 - s.beta1 ** s.step
        c2 = 1.0 - s.beta2 ** s.step
        for name, p in self.params.items():
            m, v = s.m[name], s.v[name]
            m *= s.beta1
            m += (1.0 - s.beta1) * p.grad
            v *= s.beta2
            v += (1.0 - s.beta2) * p.grad ** 2
            p.data -= s.lr * (m / c1) / (np.sqrt(v / c2) + s.eps)
