"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every operation returns a :class:`Tensor` that remembers its parents and
a closure computing their gradient contributions.  Calling
``backward()`` on a scalar tensor topologically sorts the graph and
accumulates gradients into every tensor that requires them.

The op set is deliberately small and fused where it pays off: a single
graph node covers a whole multi-head attention core or a layer norm, so
a full encoder-decoder forward/backward stays in the hundreds of numpy
calls rather than tens of thousands.

Dtype is caller-controlled and flows through unchanged: float32 for
training, float64 when checking gradients against finite differences.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (pure inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded graph."""
        if self.data.ndim != 0 and self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other, self.dtype), -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def _as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    """Wrap an op result, recording the graph only when it can matter."""
    track = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=track)
    if track:
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise and linear ops -----------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b, getattr(a, "dtype", None))
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _node(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b, getattr(a, "dtype", None))
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _node(out_data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    out_data = a.data * c

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * c)

    return _node(out_data, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for the 2D@2D and 2D@1D cases used by the model."""
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data @ b.data

    def backward(g):
        if a.data.ndim == 2 and b.data.ndim == 2:
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        elif a.data.ndim == 2 and b.data.ndim == 1:
            if a.requires_grad:
                a._accumulate(np.outer(g, b.data))
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        else:
            raise NotImplementedError(f"matmul backward for shapes {a.data.shape} @ {b.data.shape}")

    return _node(out_data, (a, b), backward)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Fused affine map: x @ w (+ b)."""
    out_data = x.data @ w.data
    if b is not None:
        out_data = out_data + b.data

    def backward(g):
        if x.requires_grad:
            x._accumulate(g @ w.data.T)
        if w.requires_grad:
            w._accumulate(x.data.T @ g)
        if b is not None and b.requires_grad:
            b._accumulate(g.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return _node(out_data, parents, backward)


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit (tanh approximation)."""
    c = float(np.sqrt(2.0 / np.pi))  # plain float so float32 inputs stay float32
    a = 0.044715
    x3 = x.data * x.data * x.data
    u = c * (x.data + a * x3)
    t = np.tanh(u)
    out_data = 0.5 * x.data * (1.0 + t)

    def backward(g):
        if x.requires_grad:
            du = c * (1.0 + 3.0 * a * x.data * x.data)
            dx = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * du
            x._accumulate(g * dx)

    return _node(out_data, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = gamma.data * xhat + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).reshape(-1, x.data.shape[-1]).sum(axis=0))
        if beta.requires_grad:
            beta._accumulate(g.reshape(-1, x.data.shape[-1]).sum(axis=0))
        if x.requires_grad:
            dxhat = g * gamma.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (dxhat - m1 - xhat * m2))

    return _node(out_data, (x, gamma, beta), backward)


def attention(q: Tensor, k: Tensor, v: Tensor, n_heads: int, causal: bool = False) -> Tensor:
    """Multi-head scaled dot-product attention core.

    Takes already-projected query/key/value matrices of shape (Lq, h) and
    (Lk, h), splits them into ``n_heads`` heads, and returns the merged
    (Lq, h) context.  The whole core is one graph node with a hand-derived
    backward pass.
    """
    lq, h = q.data.shape
    lk = k.data.shape[0]
    dh = h // n_heads

    def split(m, length):
        return m.reshape(length, n_heads, dh).transpose(1, 0, 2)  # (H, L, dh)

    inv_sqrt_dh = 1.0 / float(np.sqrt(dh))
    q3, k3, v3 = split(q.data, lq), split(k.data, lk), split(v.data, lk)
    scores = (q3 @ k3.transpose(0, 2, 1)) * inv_sqrt_dh
    if causal:
        if lq != lk:
            raise ValueError("causal attention requires equal query/key lengths")
        mask = np.triu(np.ones((lq, lk), dtype=bool), k=1)
        scores = np.where(mask, -np.inf, scores)
    scores = scores - scores.max(axis=-1, keepdims=True)
    exps = np.exp(scores)
    attn = exps / exps.sum(axis=-1, keepdims=True)  # (H, Lq, Lk)
    out3 = attn @ v3
    out_data = out3.transpose(1, 0, 2).reshape(lq, h)

    def backward(g):
        g3 = g.reshape(lq, n_heads, dh).transpose(1, 0, 2)
        if v.requires_grad:
            dv3 = attn.transpose(0, 2, 1) @ g3
            v._accumulate(dv3.transpose(1, 0, 2).reshape(lk, h))
        da = g3 @ v3.transpose(0, 2, 1)
        ds = attn * (da - (da * attn).sum(axis=-1, keepdims=True))
        if q.requires_grad:
            dq3 = (ds @ k3) * inv_sqrt_dh
            q._accumulate(dq3.transpose(1, 0, 2).reshape(lq, h))
        if k.requires_grad:
            dk3 = (ds.transpose(0, 2, 1) @ q3) * inv_sqrt_dh
            k._accumulate(dk3.transpose(1, 0, 2).reshape(lk, h))

    return _node(out_data, (q, k, v), backward)


def embedding(table: Tensor, ids) -> Tensor:
    """Row gather from an embedding table; backward scatters with np.add.at."""
    idx = np.asarray(ids, dtype=np.intp)
    out_data = table.data[idx]

    def backward(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx, g)

    return _node(out_data, (table,), backward)


def mean_rows(x: Tensor, lo: int, hi: int) -> Tensor:
    """Arithmetic mean of rows lo..hi (inclusive) of a 2D tensor."""
    if not 0 <= lo <= hi < x.data.shape[0]:
        raise IndexError(f"row range ({lo}, {hi}) out of bounds for {x.data.shape[0]} rows")
    n = hi - lo + 1
    out_data = x.data[lo : hi + 1].mean(axis=0)

    def backward(g):
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[lo : hi + 1] += g / n

    return _node(out_data, (x,), backward)


def nll_of_index(logits: Tensor, index: int) -> Tensor:
    """Negative log softmax probability of one index: -log softmax(logits)[index]."""
    z = logits.data
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    out_data = np.asarray(lse - z[index], dtype=z.dtype)

    def backward(g):
        if logits.requires_grad:
            p = np.exp(z - lse)
            p[index] -= 1.0
            logits._accumulate(g * p)

    return _node(out_data, (logits,), backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate is 0."""
    if rate <= 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate).astype(x.data.dtype) / (1.0 - rate)
    out_data = x.data * keep

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * keep)

    return _node(out_data, (x,), backward)


def add_n(tensors: list[Tensor]) -> Tensor:
    """Sum a list of same-shape tensors in one node (loss accumulation)."""
    if not tensors:
        raise ValueError("add_n needs at least one tensor")
    out_data = tensors[0].data.copy()
    for t in tensors[1:]:
        out_data = out_data + t.data

    def backward(g):
        for t in tensors:
            if t.requires_grad:
                t._accumulate(g)

    return _node(out_data, tuple(tensors), backward)
