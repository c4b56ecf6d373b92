"""Neural-network primitives with hand-derived backward passes.

Tensors are plain numpy float64 arrays, row-major.  Every forward here has a
matching backward so the training loop and the finite-difference gradient
checker share one implementation.  Convolution follows the flipped-kernel
(true convolution) index convention by default; pass ``flip=False`` for
cross-correlation.
"""

from __future__ import annotations

import numpy as np

Tensor = np.ndarray


class OpCounter:
    """Tallies scalar multiplications and bias additions during a forward
    pass (activation functions and pooling are not counted)."""

    def __init__(self):
        self.muls = 0
        self.sums = 0

    def add(self, muls: int, sums: int = 0):
        self.muls += int(muls)
        self.sums += int(sums)


# ---------------------------------------------------------------------------
# activations / dense
# ---------------------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0.0)


def relu_backward(dy: Tensor, x: Tensor) -> Tensor:
    return dy * (x > 0.0)


def dense(x: Tensor, W: Tensor, b: Tensor, counter: OpCounter = None):
    """Affine map y = x W^T + b for x of shape (..., d_in)."""
    if counter is not None:
        batch = int(np.prod(x.shape[:-1], dtype=int)) if x.ndim > 1 else 1
        counter.add(batch * W.shape[0] * W.shape[1], batch * b.size)
    return x @ W.T + b


def dense_backward(dy: Tensor, x: Tensor, W: Tensor):
    """Returns (dx, dW, db); leading axes of x/dy are batch-like."""
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dW = dy2.T @ x2
    db = dy2.sum(axis=0)
    dx = (dy2 @ W).reshape(x.shape)
    return dx, dW, db


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _flip2(k: Tensor) -> Tensor:
    return k[..., ::-1, ::-1]


def _windows(x: Tensor, size: int) -> Tensor:
    # (..., n, n) -> (..., n-size+1, n-size+1, size, size)
    return np.lib.stride_tricks.sliding_window_view(x, (size, size),
                                                    axis=(-2, -1))


def conv2d(image: Tensor, kernel: Tensor, bias: float = 0.0,
           flip: bool = True) -> Tensor:
    """Valid 2-D convolution of one image with one kernel, plus a scalar
    bias.  flip=True flips the kernel (true convolution); flip=False is
    cross-correlation.  Output is (n-k+1, n-k+1).
    """
    n, k = image.shape[-1], kernel.shape[-1]
    if k > n:
        raise ValueError("kernel larger than input")
    eff = _flip2(kernel) if flip else kernel
    return np.einsum("ijxy,xy->ij", _windows(image, k), eff) + bias


def conv_forward(x: Tensor, K: Tensor, b: Tensor, flip: bool = True,
                 counter: OpCounter = None) -> Tensor:
    """Batched convolution layer.

    x: (B, C, n, n).  A 3-D kernel stack K (F, k, k) is applied to every
    input channel independently (fan-out; output (B, C*F, m, m)); a 4-D
    stack K (F, C, k, k) sums over input channels in the conventional way
    (output (B, F, m, m)).  b is broadcast per output map.
    """
    k = K.shape[-1]
    if k > x.shape[-1]:
        raise ValueError("kernel larger than input")
    eff = _flip2(K) if flip else K
    win = _windows(x, k)
    if K.ndim == 3:
        out = np.einsum("bcijxy,fxy->bcfij", win, eff)
        out = out.reshape(x.shape[0], -1, out.shape[-2], out.shape[-1])
    elif K.ndim == 4:
        out = np.einsum("bcijxy,fcxy->bfij", win, eff)
    else:
        raise ValueError("kernel stack must be 3-D or 4-D")
    if counter is not None:
        counter.add(x.shape[0] * out.shape[1] * out.shape[-1] ** 2 * k * k
                    * (1 if K.ndim == 3 else K.shape[1]),
                    x.shape[0] * out.shape[1] * out.shape[-1] ** 2)
    return out + np.asarray(b).reshape(1, -1, 1, 1)


def conv_backward(dy: Tensor, x: Tensor, K: Tensor, flip: bool = True,
                  need_dx: bool = True):
    """Gradients of conv_forward.  Returns (dx, dK, db); dx is None when
    need_dx=False (input layer)."""
    B, C = x.shape[0], x.shape[1]
    k = K.shape[-1]
    eff = _flip2(K) if flip else K
    if K.ndim == 3:
        F = K.shape[0]
        dy4 = dy.reshape(B, C, F, dy.shape[-2], dy.shape[-1])
        m = dy4.shape[-1]
        dEff = np.einsum("bcxyij,bcfij->fxy", _windows(x, m), dy4)
        db = dy.sum(axis=(0, 2, 3))
        dx = None
        if need_dx:
            pad = k - 1
            dyp = np.pad(dy4, ((0, 0), (0, 0), (0, 0), (pad, pad),
                               (pad, pad)))
            dx = np.einsum("bcfijxy,fxy->bcij", _windows(dyp, k),
                           _flip2(eff))
    else:
        m = dy.shape[-1]
        dEff = np.einsum("bcxyij,bfij->fcxy", _windows(x, m), dy)
        db = dy.sum(axis=(0, 2, 3))
        dx = None
        if need_dx:
            pad = k - 1
            dyp = np.pad(dy, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
            dx = np.einsum("bfijxy,fcxy->bcij", _windows(dyp, k),
                           _flip2(eff))
    dK = _flip2(dEff) if flip else dEff
    return dx, dK, db


# ---------------------------------------------------------------------------
# pooling / flatten
# ---------------------------------------------------------------------------

def max_pool(x: Tensor, size: int, stride: int = None):
    """Window max over (B, C, n, n); returns (y, cache) where cache holds
    the argmax positions for the backward pass.  size=stride=1 is the
    identity."""
    if stride is None:
        stride = size
    if size == 1 and stride == 1:
        return x, None
    B, C, n, _ = x.shape
    oh = (n - size) // stride + 1
    y = np.empty((B, C, oh, oh))
    arg = np.empty((B, C, oh, oh), dtype=np.intp)
    for i in range(oh):
        for j in range(oh):
            w = x[:, :, i * stride:i * stride + size,
                  j * stride:j * stride + size].reshape(B, C, -1)
            arg[:, :, i, j] = w.argmax(axis=2)
            y[:, :, i, j] = np.take_along_axis(
                w, arg[:, :, i, j, None], axis=2)[:, :, 0]
    return y, (arg, size, stride)


def max_pool_backward(dy: Tensor, cache, x_shape) -> Tensor:
    if cache is None:
        return dy
    arg, size, stride = cache
    dx = np.zeros(x_shape)
    B, C, oh, _ = dy.shape
    bi, ci = np.meshgrid(np.arange(B), np.arange(C), indexing="ij")
    for i in range(oh):
        for j in range(oh):
            di, dj = np.divmod(arg[:, :, i, j], size)
            dx[bi, ci, i * stride + di, j * stride + dj] += dy[:, :, i, j]
    return dx


def flatten(x: Tensor) -> Tensor:
    """Row-major flatten of all non-batch axes."""
    return x.reshape(x.shape[0], -1)


# ---------------------------------------------------------------------------
# recurrent layers
# ---------------------------------------------------------------------------

def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def lstm_forward(x: Tensor, W: Tensor, U: Tensor, b: Tensor,
                 counter: OpCounter = None):
    """LSTM over x (B, T, d) with gate order [input, forget, cell, output]
    stacked in W (4H, d), U (4H, H), b (4H,).  Returns (h_seq (B, T, H),
    cache)."""
    B, T, d = x.shape
    H = U.shape[-1]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    h_seq = np.empty((B, T, H))
    steps = []
    for t in range(T):
        z = x[:, t] @ W.T + h @ U.T + b
        if counter is not None:
            counter.add(B * 4 * H * (d + H) + B * 4 * H, B * 4 * H)
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        steps.append((x[:, t], h, c, i, f, g, o, c_new, tc))
        h, c = h_new, c_new
        h_seq[:, t] = h
    return h_seq, (steps, W, U)


def lstm_backward(dh_seq: Tensor, cache):
    """BPTT for lstm_forward.  dh_seq (B, T, H) carries the loss gradient
    at every timestep (zeros where unused).  Returns (dx, dW, dU, db)."""
    steps, W, U = cache
    T = len(steps)
    B, _, H = dh_seq.shape
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(4 * H)
    dx = np.empty((B, T, W.shape[1]))
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        x_t, h_prev, c_prev, i, f, g, o, c_new, tc = steps[t]
        dh = dh + dh_seq[:, t]
        dc = dc + dh * o * (1.0 - tc * tc)
        do = dh * tc
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate([di * i * (1 - i), df * f * (1 - f),
                             dg * (1 - g * g), do * o * (1 - o)], axis=1)
        dW += dz.T @ x_t
        dU += dz.T @ h_prev
        db += dz.sum(axis=0)
        dx[:, t] = dz @ W
        dh = dz @ U
        dc = dc * f
    return dx, dW, dU, db


def bilstm_forward(x: Tensor, fwd: tuple, bwd: tuple,
                   counter: OpCounter = None):
    """Bidirectional LSTM: concatenates the forward pass with the pass over
    the reversed sequence, per timestep.  fwd/bwd are (W, U, b) triples.
    Returns (h (B, T, 2H), cache)."""
    hf, cf = lstm_forward(x, *fwd, counter=counter)
    hb, cb = lstm_forward(x[:, ::-1], *bwd, counter=counter)
    return np.concatenate([hf, hb[:, ::-1]], axis=2), (cf, cb)


def bilstm_backward(dh: Tensor, cache):
    """Returns (dx, (dWf, dUf, dbf), (dWb, dUb, dbb))."""
    cf, cb = cache
    H = dh.shape[2] // 2
    dxf, dWf, dUf, dbf = lstm_backward(dh[:, :, :H], cf)
    dxb, dWb, dUb, dbb = lstm_backward(dh[:, ::-1, H:], cb)
    return dxf + dxb[:, ::-1], (dWf, dUf, dbf), (dWb, dUb, dbb)


def repeat_vector(h: Tensor, times: int) -> Tensor:
    """Tile a state (B, H) into a sequence (B, times, H)."""
    return np.repeat(h[:, None, :], times, axis=1)


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def xavier(rng: np.random.Generator, shape, fan_in: int, fan_out: int
           ) -> Tensor:
    """Uniform init on +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
