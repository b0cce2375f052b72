"""A small reverse-mode differentiation engine over float64 numpy arrays.

Every differentiable operation in the tracker is written against this module so
that its backward rule can be checked against central finite differences
(:func:`grad_check`). Shapes are static; there is no control flow inside a graph.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

# op name -> callable, populated by @register; used by tests to sweep every op
OPS: Dict[str, Callable] = {}

_corrupted: set = set()
_discrete_log: Optional[list] = None


def register(name: str):
    def deco(fn):
        OPS[name] = fn
        return fn
    return deco


@contextlib.contextmanager
def corrupt_backward(*names: str):
    """Deliberately break the backward rule of the named ops (negative controls)."""
    prev = set(_corrupted)
    _corrupted.update(names)
    try:
        yield
    finally:
        _corrupted.clear()
        _corrupted.update(prev)


@contextlib.contextmanager
def record_discrete():
    """Collect every data-dependent discrete choice (ReLU masks, argmax, selections)."""
    global _discrete_log
    prev = _discrete_log
    _discrete_log = []
    try:
        yield _discrete_log
    finally:
        _discrete_log = prev


def recording() -> bool:
    return _discrete_log is not None


def note_discrete(arr) -> None:
    if _discrete_log is not None:
        _discrete_log.append(np.asarray(arr).tobytes())


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "op")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, parents=(), backward_fn=None, op: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op or 'leaf'})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _toposort(self)
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.backward_fn is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            parent_grads = node.backward_fn(g)
            if node.op in _corrupted:
                parent_grads = tuple(None if pg is None else 1.5 * pg + 0.01 for pg in parent_grads)
            for p, pg in zip(node.parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __truediv__(self, o): return div(self, o)
    def __neg__(self): return mul(self, -1.0)
    def __matmul__(self, o): return matmul(self, o)
    def __getitem__(self, idx): return getitem(self, idx)

    def sum(self, axis=None, keepdims=False): return tsum(self, axis, keepdims)
    def mean(self, axis=None, keepdims=False): return mean(self, axis, keepdims)
    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 else shape)


class Parameter(Tensor):
    """A named leaf tensor owned by a model."""

    __slots__ = ("name", "trainable")

    def __init__(self, name: str, data, trainable: bool = True):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=trainable)
        self.name = name
        self.trainable = trainable

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def _toposort(root: Tensor) -> List[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn, op) -> Tensor:
    req = any(p.requires_grad for p in parents)
    # one reduction catches nan/inf; the full scan only runs to rule out overflow of the sum
    if not np.isfinite(np.sum(data)) and not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite value produced by op '{op}'")
    return Tensor(data, req, parents if req else (), backward_fn if req else None, op)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# --- elementwise --------------------------------------------------------------

@register("add")
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


@register("sub")
def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


@register("mul")
def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
                 "mul")


@register("div")
def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * out / b.data, b.shape)), "div")


@register("sqrt")
def sqrt(x) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return _make(out, (x,), lambda g: (g * 0.5 / out,), "sqrt")


@register("exp")
def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return _make(out, (x,), lambda g: (g * out,), "exp")


@register("relu")
def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    if recording():
        note_discrete(np.packbits(mask))
    return _make(x.data * mask, (x,), lambda g: (g * mask,), "relu")


@register("sigmoid")
def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _make(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


# --- shape ops ----------------------------------------------------------------

@register("reshape")
def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


@register("getitem")
def getitem(x, idx) -> Tensor:
    x = as_tensor(x)

    def back(g):
        out = np.zeros_like(x.data)
        np.add.at(out, idx, g)
        return (out,)

    return _make(x.data[idx], (x,), back, "getitem")


@register("concat")
def concat(xs: Sequence, axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    ax = axis % xs[0].ndim
    sizes = np.cumsum([x.shape[ax] for x in xs])[:-1]

    def back(g):
        return tuple(np.split(g, sizes, axis=ax))

    return _make(np.concatenate([x.data for x in xs], axis=ax), tuple(xs), back, "concat")


@register("broadcast_to")
def broadcast_to(x, shape) -> Tensor:
    x = as_tensor(x)
    return _make(np.broadcast_to(x.data, shape).copy(), (x,),
                 lambda g: (_unbroadcast(g, x.shape),), "broadcast_to")


@register("transpose")
def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    inv = None if axes is None else np.argsort(axes)
    return _make(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),), "transpose")


@register("gather")
def gather(x, idx) -> Tensor:
    """``out[...] = x[idx[...]]`` along axis 0; gradients scatter-add back."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    n = x.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"gather index out of range [0, {n}): min {idx.min()}, max {idx.max()}")

    def back(g):
        out = np.zeros_like(x.data)
        np.add.at(out, idx.reshape(-1), g.reshape((-1,) + x.shape[1:]))
        return (out,)

    return _make(x.data[idx], (x,), back, "gather")


# --- reductions -----------------------------------------------------------------

@register("sum")
def tsum(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(x.data.sum(axis=axis, keepdims=keepdims), (x,), back, "sum")


@register("mean")
def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape) / count,)

    return _make(x.data.mean(axis=axis, keepdims=keepdims), (x,), back, "mean")


@register("max")
def tmax(x, axis: int) -> Tensor:
    """Max over one axis; the gradient goes to the first maximal entry."""
    x = as_tensor(x)
    arg = np.argmax(x.data, axis=axis)
    note_discrete(arg)
    out = np.take_along_axis(x.data, np.expand_dims(arg, axis), axis=axis).squeeze(axis)

    def back(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, np.expand_dims(arg, axis), np.expand_dims(g, axis), axis=axis)
        return (gx,)

    return _make(out, (x,), back, "max")


# --- linear algebra -------------------------------------------------------------

@register("matmul")
def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return _make(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


@register("linear")
def linear(x, W, b=None) -> Tensor:
    """Affine map along the last axis: ``x[..., In] @ W[In, Out] + b[Out]``."""
    x, W = as_tensor(x), as_tensor(W)
    if W.ndim != 2 or x.shape[-1] != W.shape[0]:
        raise ValueError(
            f"linear: input last dim {x.shape[-1]} does not match weight shape {W.shape}")
    if b is not None:
        b = as_tensor(b)
        if b.shape != (W.shape[1],):
            raise ValueError(f"linear: bias shape {b.shape} does not match output {W.shape[1]}")
    lead = x.shape[:-1]
    out = (x.data.reshape(-1, W.shape[0]) @ W.data).reshape(lead + (W.shape[1],))
    if b is not None:
        out += b.data

    def back(g):
        g2 = g.reshape(-1, W.shape[1])
        gx = (g2 @ W.data.T).reshape(x.shape)
        gW = x.data.reshape(-1, W.shape[0]).T @ g2
        gb = g2.sum(axis=0) if b is not None else None
        return (gx, gW, gb) if b is not None else (gx, gW)

    parents = (x, W, b) if b is not None else (x, W)
    return _make(out.reshape(lead + (W.shape[1],)), parents, back, "linear")


@register("softmax")
def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (x,), back, "softmax")


# --- losses -------------------------------------------------------------------------

@register("bce_with_logits")
def bce_with_logits(logits, targets) -> Tensor:
    """Elementwise binary cross-entropy on logits (targets are constants)."""
    x = as_tensor(logits)
    t = np.asarray(targets.data if isinstance(targets, Tensor) else targets, dtype=np.float64)
    out = np.maximum(x.data, 0) - x.data * t + np.log1p(np.exp(-np.abs(x.data)))
    sig = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _make(out, (x,), lambda g: (g * (sig - t),), "bce_with_logits")


@register("smooth_l1")
def smooth_l1(x, beta: float = 1.0) -> Tensor:
    """Elementwise Huber-style smooth L1 with transition at ``beta``."""
    x = as_tensor(x)
    a = np.abs(x.data)
    quad = a < beta
    if recording():
        note_discrete(np.packbits(quad))
    out = np.where(quad, 0.5 * x.data ** 2 / beta, a - 0.5 * beta)
    return _make(out, (x,), lambda g: (g * np.where(quad, x.data / beta, np.sign(x.data)),),
                 "smooth_l1")


# --- composite helpers -----------------------------------------------------------------

def mlp2_relu(x, W1, b1, W2, b2) -> Tensor:
    """linear -> ReLU -> linear."""
    return linear(relu(linear(x, W1, b1)), W2, b2)


def gather_neighbors(feats, idx) -> Tensor:
    """``[N, C]`` features and ``[N, k]`` indices -> ``[N, k, C]``."""
    idx = np.asarray(idx)
    if idx.ndim != 2:
        raise ValueError(f"neighbor index must be [N, k], got {idx.shape}")
    return gather(feats, idx)


def l2_normalize(x, axis: int = -1, eps: float = 1e-12) -> Tensor:
    x = as_tensor(x)
    return x / sqrt(tsum(x * x, axis=axis, keepdims=True) + eps)


# --- verification ------------------------------------------------------------------------

@dataclass
class ParamCheck:
    name: str
    max_rel_error: float
    checked: int
    skipped: int
    locus: Optional[str] = None


@dataclass
class GradCheckReport:
    tolerance: float
    entries: List[ParamCheck] = field(default_factory=list)
    failure: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.failure is None and all(
            e.max_rel_error < self.tolerance and e.locus is None for e in self.entries)

    @property
    def max_rel_error(self) -> float:
        return max((e.max_rel_error for e in self.entries), default=0.0)

    def lines(self) -> List[str]:
        out = []
        for e in self.entries:
            status = "ok" if e.max_rel_error < self.tolerance and e.locus is None else "FAIL"
            extra = f" ({e.locus})" if e.locus else ""
            out.append(f"{e.name:<40s} max_rel_err={e.max_rel_error:.3e} "
                       f"checked={e.checked} skipped={e.skipped} {status}{extra}")
        if self.failure:
            out.append(f"failure: {self.failure}")
        return out


def grad_check(fn: Callable[[], Tensor], params: Iterable[Tensor], tolerance: float = 1e-4,
               eps: float = 1e-5, abs_floor: float = 1e-5, names: Optional[Sequence[str]] = None
               ) -> GradCheckReport:
    """Compare analytic gradients of the scalar ``fn()`` with central differences.

    Per element the error is ``|a - n| / max(|a|, |n|, abs_floor)``; each
    parameter reports its worst element. The floor keeps structurally zero
    gradients (e.g. a bias shared by every softmax input) from dividing
    finite-difference roundoff by zero. Perturbations that flip a discrete
    choice inside the graph (ReLU mask, max routing, argmax selection) sit on a
    kink and are skipped.
    """
    params = list(params)
    if names is None:
        names = [getattr(p, "name", f"param{i}") for i, p in enumerate(params)]
    report = GradCheckReport(tolerance)

    for p in params:
        p.grad = None
    try:
        with record_discrete() as base_log:
            loss = fn()
        if loss.data.size != 1:
            raise ValueError("grad_check needs a scalar loss")
        loss.backward()
    except FloatingPointError as exc:
        report.failure = f"forward/backward: {exc}"
        return report
    base_sig = list(base_log)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    def evaluate():
        with record_discrete() as log:
            val = float(fn().data)
        return val, log

    for p, name, ga in zip(params, names, analytic):
        if not np.all(np.isfinite(ga)):
            bad = np.argwhere(~np.isfinite(ga))[0]
            report.entries.append(ParamCheck(name, float("inf"), 0, 0, f"non-finite grad at {tuple(bad)}"))
            continue
        worst, checked, skipped, locus = 0.0, 0, 0, None
        flat = p.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            try:
                flat[i] = orig + eps
                fp, lp = evaluate()
                flat[i] = orig - eps
                fm, lm = evaluate()
            except FloatingPointError as exc:
                locus = f"element {i}: {exc}"
                flat[i] = orig
                break
            finally:
                flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                locus = f"non-finite loss at element {i}"
                break
            if lp != base_sig or lm != base_sig:
                skipped += 1
                continue
            num = (fp - fm) / (2 * eps)
            a = gflat[i]
            err = abs(a - num) / max(abs(a), abs(num), abs_floor)
            if err > worst:
                worst = err
            checked += 1
        report.entries.append(ParamCheck(name, worst if locus is None else float("inf"),
                                         checked, skipped, locus))
    return report


def checksum(params: Mapping[str, Tensor]) -> str:
    import hashlib
    h = hashlib.sha256()
    for name in sorted(params):
        h.update(name.encode())
        h.update(np.ascontiguousarray(params[name].data, dtype="<f8").tobytes())
    return h.hexdigest()
