"""Dense tensors with reverse-mode automatic differentiation.

numpy does the array work; this module adds the gradient plumbing. A
:class:`Tensor` wraps an ndarray plus an optional gradient buffer. Non-leaf
tensors remember their inputs and a backward closure, so calling
``backward()`` on a scalar loss walks the recorded graph in reverse
topological order and accumulates gradients into every tensor that requires
them. Fan-out sums gradients; parameters that the loss never touched keep
their zero buffers.

Training runs in float32. Gradient verification re-runs the same graphs in
float64 by building the inputs with ``dtype=np.float64``; every op preserves
the dtype of its inputs.

Ops accept either the single-sample shapes documented on each function or
the same shape with one extra leading batch axis.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError, ValidationError

DEFAULT_DTYPE = np.float32

LOG_EPS = 1e-12  # clamp for log() in cross_entropy; keeps degenerate predictions finite

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (eval-mode forward passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """n-dimensional dense array with an optional gradient.

    ``grad`` is allocated for leaves that require gradients and for any
    tensor reached by a backward pass; it always matches ``data`` in shape
    and dtype.
    """

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if self.requires_grad else None
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents: tuple["Tensor", ...], op: str, backward):
        out = Tensor.__new__(Tensor)
        out.data = data
        out.op = op
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out.grad = None
            out._parents = parents
            out._backward = backward
        else:
            out.requires_grad = False
            out.grad = None
            out._parents = ()
            out._backward = None
        return out

    # -- conveniences --------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, op={self.op!r})"

    # -- operators -----------------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _as_tensor(other, self.dtype))

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other, self.dtype)))

    def __rsub__(self, other):
        return add(_as_tensor(other, self.dtype), neg(self))

    # -- backward ------------------------------------------------------------

    def backward(self):
        """Accumulate gradients of this scalar into every reachable tensor."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar root, got shape {self.data.shape}")
        order = _toposort(self)
        for t in order:
            if t.requires_grad and t.grad is None:
                t.grad = np.zeros_like(t.data)
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad = self.grad + np.ones_like(self.data)
        for t in reversed(order):
            if t._backward is not None:
                t._backward()


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


@dataclass
class GraphEntry:
    """One node of a recorded computation, in topological order."""

    op: str
    input_ids: tuple[int, ...]
    output_id: int
    shape: tuple[int, ...]


def graph_record(root: Tensor) -> list[GraphEntry]:
    """Topologically ordered record of the graph below ``root``."""
    return [
        GraphEntry(t.op, tuple(id(p) for p in t._parents), id(t), t.data.shape)
        for t in _toposort(root)
    ]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- elementwise and shape ops ------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward():
        if a.requires_grad:
            a.grad += _unbroadcast(out.grad, a.data.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(out.grad, b.data.shape)

    out = Tensor._result(out_data, (a, b), "add", backward)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward():
        if a.requires_grad:
            a.grad += _unbroadcast(out.grad * b.data, a.data.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(out.grad * a.data, b.data.shape)

    out = Tensor._result(out_data, (a, b), "mul", backward)
    return out


def neg(a: Tensor) -> Tensor:
    def backward():
        if a.requires_grad:
            a.grad -= out.grad

    out = Tensor._result(-a.data, (a,), "neg", backward)
    return out


def tsum(a: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""

    def backward():
        if a.requires_grad:
            a.grad += np.full_like(a.data, out.grad.reshape(()))

    out = Tensor._result(np.asarray(a.data.sum(), dtype=a.dtype), (a,), "sum", backward)
    return out


def reshape(a: Tensor, shape) -> Tensor:
    def backward():
        if a.requires_grad:
            a.grad += out.grad.reshape(a.data.shape)

    out = Tensor._result(a.data.reshape(shape), (a,), "reshape", backward)
    return out


def flatten_features(a: Tensor) -> Tensor:
    """Flatten to rank 1, or to (batch, features) when a batch axis leads."""
    if a.data.ndim == 4:
        return reshape(a, (a.data.shape[0], -1))
    return reshape(a, (-1,))


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Join two vectors end to end; the gradient splits at the seam.

    Rank-1 inputs give a rank-1 result. A pair of rank-2 inputs is treated
    as a batch of vectors and joined per row.
    """
    if a.data.ndim != b.data.ndim:
        raise ShapeError(f"concat rank mismatch: {a.data.shape} vs {b.data.shape}")
    if a.data.ndim not in (1, 2):
        raise ShapeError(f"concat expects vectors or batches of vectors, got rank {a.data.ndim}")
    if a.data.ndim == 2 and a.data.shape[0] != b.data.shape[0]:
        raise ShapeError(f"concat batch mismatch: {a.data.shape} vs {b.data.shape}")
    n = a.data.shape[-1]

    def backward():
        if a.requires_grad:
            a.grad += out.grad[..., :n]
        if b.requires_grad:
            b.grad += out.grad[..., n:]

    out = Tensor._result(np.concatenate([a.data, b.data], axis=-1), (a, b), "concat", backward)
    return out


# -- activations ---------------------------------------------------------------


def relu(a: Tensor) -> Tensor:
    def backward():
        if a.requires_grad:
            a.grad += out.grad * (a.data > 0)

    out = Tensor._result(np.maximum(a.data, 0), (a,), "relu", backward)
    return out


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # split by sign so exp() never overflows
    s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    s = s.astype(a.dtype, copy=False)

    def backward():
        if a.requires_grad:
            a.grad += out.grad * s * (1.0 - s)

    out = Tensor._result(s, (a,), "sigmoid", backward)
    return out


def activation(a: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(a)
    if kind == "sigmoid":
        return sigmoid(a)
    raise ValidationError(f"unknown activation kind {kind!r}")


def softmax(a: Tensor) -> Tensor:
    """Probabilities along the last axis, computed with max subtraction."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward():
        if a.requires_grad:
            g = out.grad
            a.grad += y * (g - (g * y).sum(axis=-1, keepdims=True))

    out = Tensor._result(y, (a,), "softmax", backward)
    return out


# -- layers as ops --------------------------------------------------------------


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map ``weight @ x + bias`` with ``weight`` of shape (m, n).

    ``x`` may be a vector (n,) or a batch (N, n).
    """
    m, n = weight.data.shape
    if x.data.shape[-1] != n:
        raise ShapeError(f"dense: input {x.data.shape} does not match weight {weight.data.shape}")
    if bias.data.shape != (m,):
        raise ShapeError(f"dense: bias {bias.data.shape} does not match weight {weight.data.shape}")
    batched = x.data.ndim == 2
    if not batched and x.data.ndim != 1:
        raise ShapeError(f"dense: expected rank 1 or 2 input, got {x.data.shape}")
    out_data = x.data @ weight.data.T + bias.data

    def backward():
        g = out.grad
        if batched:
            if weight.requires_grad:
                weight.grad += g.T @ x.data
            if x.requires_grad:
                x.grad += g @ weight.data
            if bias.requires_grad:
                bias.grad += g.sum(axis=0)
        else:
            if weight.requires_grad:
                weight.grad += np.outer(g, x.data)
            if x.requires_grad:
                x.grad += weight.data.T @ g
            if bias.requires_grad:
                bias.grad += g

    out = Tensor._result(out_data, (x, weight, bias), "dense", backward)
    return out


def _conv_geometry(size: int, k: int, stride: int) -> tuple[int, int, int]:
    """(output size, pad before, pad after) for half padding."""
    out = -(-size // stride)
    before = k // 2
    after = max(0, (out - 1) * stride + k - size - before)
    return out, before, after


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1) -> Tensor:
    """2-D convolution with zero half padding.

    ``x`` is (C_in, H, W) or (N, C_in, H, W); ``kernel`` is
    (C_out, C_in, k, k) with odd k; ``stride`` is 1 or 2. Output spatial
    extent is ceil(H / stride) x ceil(W / stride).
    """
    c_out, c_in, kh, kw = kernel.data.shape
    if kh != kw or kh % 2 == 0:
        raise ValidationError(f"conv2d: kernel must be square with odd size, got {kh}x{kw}")
    if stride not in (1, 2):
        raise ValidationError(f"conv2d: stride must be 1 or 2, got {stride}")
    batched = x.data.ndim == 4
    if not batched and x.data.ndim != 3:
        raise ShapeError(f"conv2d: expected (C,H,W) or (N,C,H,W) input, got {x.data.shape}")
    xb = x.data if batched else x.data[None]
    n, cx, h, w = xb.shape
    if cx != c_in:
        raise ShapeError(
            f"conv2d: input channels {tuple(x.data.shape)} do not match kernel {tuple(kernel.data.shape)}"
        )
    if h < kh or w < kw:
        raise ShapeError(f"conv2d: input spatial dims {h}x{w} smaller than kernel {kh}x{kw}")
    if bias.data.shape != (c_out,):
        raise ShapeError(f"conv2d: bias {bias.data.shape} does not match kernel {tuple(kernel.data.shape)}")

    oh, pt, pb = _conv_geometry(h, kh, stride)
    ow, pl, pr = _conv_geometry(w, kw, stride)
    xpad = np.pad(xb, ((0, 0), (0, 0), (pt, pb), (pl, pr)))

    # gather k*k strided views into a column matrix: (N, C_in*k*k, OH*OW)
    cols = np.empty((n, c_in, kh, kw, oh, ow), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            cols[:, :, u, v] = xpad[:, :, u : u + stride * oh : stride, v : v + stride * ow : stride]
    cols2 = cols.reshape(n, c_in * kh * kw, oh * ow)
    wflat = kernel.data.reshape(c_out, c_in * kh * kw)
    out_data = (wflat @ cols2).reshape(n, c_out, oh, ow) + bias.data[None, :, None, None]
    if not batched:
        out_data = out_data[0]

    def backward():
        g = out.grad if batched else out.grad[None]
        g2 = g.reshape(n, c_out, oh * ow)
        if bias.requires_grad:
            bias.grad += g.sum(axis=(0, 2, 3))
        if kernel.requires_grad:
            kernel.grad += np.tensordot(g2, cols2, axes=([0, 2], [0, 2])).reshape(kernel.data.shape)
        if x.requires_grad:
            dcols = (wflat.T @ g2).reshape(n, c_in, kh, kw, oh, ow)
            dxpad = np.zeros_like(xpad)
            for u in range(kh):
                for v in range(kw):
                    dxpad[:, :, u : u + stride * oh : stride, v : v + stride * ow : stride] += dcols[:, :, u, v]
            dx = dxpad[:, :, pt : pt + h, pl : pl + w]
            x.grad += dx if batched else dx[0]

    out = Tensor._result(out_data, (x, kernel, bias), "conv2d", backward)
    return out


def upsample2x(x: Tensor) -> Tensor:
    """Nearest-neighbor x2 upsampling of (C, H, W) or (N, C, H, W)."""
    if x.data.ndim not in (3, 4):
        raise ShapeError(f"upsample2x: expected (C,H,W) or (N,C,H,W), got {x.data.shape}")
    out_data = x.data.repeat(2, axis=-2).repeat(2, axis=-1)

    def backward():
        if x.requires_grad:
            g = out.grad
            s = g.shape
            blocks = g.reshape(*s[:-2], s[-2] // 2, 2, s[-1] // 2, 2)
            x.grad += blocks.sum(axis=(-3, -1))

    out = Tensor._result(out_data, (x,), "upsample2x", backward)
    return out


class BatchNormState:
    """Running first and second moments plus the update-counter."""

    def __init__(self, num_features: int, dtype=DEFAULT_DTYPE):
        self.running_mean = np.zeros(num_features, dtype=dtype)
        self.running_var = np.ones(num_features, dtype=dtype)
        self.updates = 0

    def copy(self) -> "BatchNormState":
        out = BatchNormState(len(self.running_mean), dtype=self.running_mean.dtype)
        out.running_mean = self.running_mean.copy()
        out.running_var = self.running_var.copy()
        out.updates = self.updates
        return out


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    state: BatchNormState,
    mode: str = "train",
    momentum: float = 0.1,
    epsilon: float = 1e-5,
) -> Tensor:
    """Batch normalization over axis 0 of a (N, F) tensor.

    Train mode normalizes by batch statistics (biased variance) and folds
    them into ``state``; eval mode uses the running statistics. Both apply
    the learnable scale and shift.
    """
    if x.data.ndim != 2:
        raise ShapeError(f"batchnorm: expected (N, F) input, got {x.data.shape}")
    n, f = x.data.shape
    if gamma.data.shape != (f,) or beta.data.shape != (f,):
        raise ShapeError(f"batchnorm: scale/shift must be ({f},)")
    if mode == "train":
        if n < 2:
            raise ValidationError("batchnorm: train mode needs a batch of at least 2")
        mean = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + epsilon)
        xhat = (x.data - mean) * inv_std
        state.running_mean = ((1.0 - momentum) * state.running_mean + momentum * mean).astype(
            state.running_mean.dtype
        )
        state.running_var = ((1.0 - momentum) * state.running_var + momentum * var).astype(
            state.running_var.dtype
        )
        state.updates += 1

        def backward():
            g = out.grad
            if gamma.requires_grad:
                gamma.grad += (g * xhat).sum(axis=0)
            if beta.requires_grad:
                beta.grad += g.sum(axis=0)
            if x.requires_grad:
                dxhat = g * gamma.data
                x.grad += (
                    inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
                )

    elif mode == "eval":
        inv_std = 1.0 / np.sqrt(state.running_var + epsilon)
        xhat = (x.data - state.running_mean) * inv_std

        def backward():
            g = out.grad
            if gamma.requires_grad:
                gamma.grad += (g * xhat).sum(axis=0)
            if beta.requires_grad:
                beta.grad += g.sum(axis=0)
            if x.requires_grad:
                x.grad += g * gamma.data * inv_std

    else:
        raise ValidationError(f"batchnorm: mode must be 'train' or 'eval', got {mode!r}")

    out_data = (gamma.data * xhat + beta.data).astype(x.dtype, copy=False)
    out = Tensor._result(out_data, (x, gamma, beta), f"batchnorm[{mode}]", backward)
    return out


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None = None, mode: str = "train") -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-rate) so the
    expectation is preserved and eval mode is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"dropout: rate must be in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return x
    if mode != "train":
        raise ValidationError(f"dropout: mode must be 'train' or 'eval', got {mode!r}")
    if rng is None:
        raise ValidationError("dropout: train mode needs an explicit rng")
    keep = (rng.random(x.data.shape) >= rate).astype(x.dtype)
    scale = x.dtype.type(1.0 / (1.0 - rate))
    mask = keep * scale

    def backward():
        if x.requires_grad:
            x.grad += out.grad * mask

    out = Tensor._result(x.data * mask, (x,), "dropout", backward)
    return out


# -- losses ---------------------------------------------------------------------


def mse_loss(recon: Tensor, target: Tensor, reduction: str = "sum") -> Tensor:
    """Squared-error reconstruction loss, summed over all elements.

    ``reduction="mean"`` divides by the element count instead.
    """
    if not isinstance(target, Tensor):
        target = Tensor(np.asarray(target, dtype=recon.dtype))
    if recon.data.shape != target.data.shape:
        raise ShapeError(f"mse_loss: shape mismatch {recon.data.shape} vs {target.data.shape}")
    if reduction not in ("sum", "mean"):
        raise ValidationError(f"mse_loss: reduction must be 'sum' or 'mean', got {reduction!r}")
    diff = recon.data - target.data
    total = (diff * diff).sum()
    scale = 1.0 / diff.size if reduction == "mean" else 1.0
    out_data = np.asarray(total * scale, dtype=recon.dtype)

    def backward():
        g = out.grad.reshape(())
        coeff = recon.dtype.type(2.0 * scale) * g
        if recon.requires_grad:
            recon.grad += coeff * diff
        if target.requires_grad:
            target.grad -= coeff * diff

    out = Tensor._result(out_data, (recon, target), "mse_loss", backward)
    return out


def _check_simplex(arr: np.ndarray, tol: float, what: str):
    if np.any(arr < -tol):
        raise ValidationError(f"{what}: entries must be nonnegative")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise ValidationError(f"{what}: entries must sum to 1 (got {sums})")


def cross_entropy(pred_probs: Tensor, target) -> Tensor:
    """Cross entropy ``-sum(target * log(pred))`` against probability targets.

    Targets may be one-hot or soft but must lie on the simplex. ``log`` is
    clamped at ``LOG_EPS``. A (N, k) batch returns the per-sample mean.
    """
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=pred_probs.dtype)
    if pred_probs.data.shape != t.shape:
        raise ShapeError(f"cross_entropy: shape mismatch {pred_probs.data.shape} vs {t.shape}")
    if pred_probs.data.ndim not in (1, 2):
        raise ShapeError(f"cross_entropy: expected (k,) or (N, k), got {pred_probs.data.shape}")
    _check_simplex(t, 1e-6, "cross_entropy target")
    p = pred_probs.data
    clamped = np.maximum(p, LOG_EPS)
    per_sample = -(t * np.log(clamped)).sum(axis=-1)
    scale = 1.0 / per_sample.size
    out_data = np.asarray(per_sample.sum() * scale, dtype=pred_probs.dtype)

    def backward():
        if pred_probs.requires_grad:
            g = out.grad.reshape(())
            active = (p >= LOG_EPS).astype(p.dtype)
            pred_probs.grad += -t / clamped * active * p.dtype.type(scale) * g

    out = Tensor._result(out_data, (pred_probs,), "cross_entropy", backward)
    return out


# -- optimizer --------------------------------------------------------------------


class Adam:
    """Adam with bias correction; state lives alongside the parameter list."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        if any(not p.requires_grad for p in self.params):
            raise ValidationError("Adam: every parameter must require gradients")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g.shape != p.data.shape:
                raise ShapeError(f"Adam: gradient shape {g.shape} does not match parameter {p.data.shape}")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
            p.data -= update.astype(p.data.dtype, copy=False)


# -- verification helpers -----------------------------------------------------------


def finite_diff_gradient(f, x: Tensor, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``, per coordinate."""
    base = x.data.copy()
    grad = np.zeros_like(base, dtype=np.float64)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        x.data = flat.reshape(base.shape)
        f_plus = _scalar(f(x))
        flat[i] = orig - eps
        x.data = flat.reshape(base.shape)
        f_minus = _scalar(f(x))
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * eps)
    x.data = base
    return grad


def _scalar(value) -> float:
    if isinstance(value, Tensor):
        return value.item()
    return float(value)


def check_finite(arr: np.ndarray, where: str):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {where}")


@dataclass
class LossBreakdown:
    """Reconstruction/adversarial terms and their weighted combination."""

    rec: float
    adv: float
    weight: float
    total: float = field(default=0.0)

    def __post_init__(self):
        self.total = self.rec + self.weight * self.adv
