"""The three-block lens-parameter prediction network.

Block 1 estimates the receiver pose (x, y, z, theta_R, phi_R) from the
square matrix of time-averaged received powers; block 2 predicts the
next-step pose from a window of past poses; block 3 regresses the lens
parameters (theta_L, phi_L, f) from a pose.  Each block has an init, a
batched forward that optionally records an operation count, and a backward
returning gradients keyed like the parameter dict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .layers import (OpCounter, Tensor, bilstm_backward, bilstm_forward,
                     conv_backward, conv_forward, dense, dense_backward,
                     flatten, lstm_backward, lstm_forward, max_pool,
                     max_pool_backward, relu, relu_backward, repeat_vector,
                     xavier)

POSE_DIM = 5
LENS_DIM = 3


@dataclass(frozen=True)
class NetSpec:
    """Layer sizes for the three blocks plus training hyperparameters."""

    # block 1 (conv stack): kernel counts, kernel sizes, pool sizes, dense
    N_1: int = 20
    N_k1: int = 2
    N_m1: int = 1
    N_2: int = 20
    N_k2: int = 2
    N_m2: int = 1
    N_f1: int = 20
    N_f2: int = 20
    # block 2 (recurrent): history length, LSTM widths, repeat count, dense
    N_I: int = 10
    N_l1: int = 10
    N_r1: int = 10
    N_l2: int = 10
    N_d1: int = 10
    # block 3 (dense chain)
    N_D1: int = 30
    N_D2: int = 40
    N_D3: int = 30
    # training
    batch: int = 64
    eps_L: float = 1e-3
    epochs: int = 200
    # fan-out second conv stage (each kernel applied to each input map);
    # False sums over input maps in the conventional way
    fanout: bool = True

    def __post_init__(self):
        sizes = (self.N_1, self.N_k1, self.N_m1, self.N_2, self.N_k2,
                 self.N_m2, self.N_f1, self.N_f2, self.N_I, self.N_l1,
                 self.N_r1, self.N_l2, self.N_d1, self.N_D1, self.N_D2,
                 self.N_D3, self.batch, self.epochs)
        if any(int(s) != s or s < 1 for s in sizes):
            raise ValueError("all layer sizes must be integers >= 1")
        if self.eps_L < 0:
            raise ValueError("learning rate must be >= 0")

    def conv_dims(self, n_r: int):
        """(side, conv1, pool1, conv2, pool2, flat) dimension chain for an
        n_r-photodiode input; raises if any stage collapses."""
        side = math.isqrt(n_r)
        if side * side != n_r:
            raise ValueError("N_r must be a perfect square")
        c1 = side - self.N_k1 + 1
        p1 = c1 // self.N_m1
        c2 = p1 - self.N_k2 + 1
        p2 = c2 // self.N_m2
        if min(c1, p1, c2, p2) < 1:
            raise ValueError("conv stack collapses to a non-positive "
                             "dimension for this input size")
        maps = self.N_1 * self.N_2 if self.fanout else self.N_2
        return side, c1, p1, c2, p2, maps * p2 * p2


# ---------------------------------------------------------------------------
# parameter initialization
# ---------------------------------------------------------------------------

BIAS_INIT_LO = 0.01
BIAS_INIT_HI = 0.09


def _bias(rng: np.random.Generator, size: int, fan_in: int) -> Tensor:
    # small positive init: a zero bias parks the downstream relu on its
    # kink whenever a whole layer goes dead for a sample, and a unit fed
    # only nonnegative activations through mostly-negative weights starts
    # dead everywhere unless its bias keeps it open near zero input
    return rng.uniform(BIAS_INIT_LO, BIAS_INIT_HI, size=size)


def init_block1(spec: NetSpec, n_r: int, rng: np.random.Generator) -> dict:
    _, _, _, _, _, flat = spec.conv_dims(n_r)
    k1, k2 = spec.N_k1, spec.N_k2
    p: dict[str, Tensor] = {}
    p["conv1_K"] = xavier(rng, (spec.N_1, k1, k1), k1 * k1, k1 * k1)
    p["conv1_b"] = _bias(rng, spec.N_1, k1 * k1)
    if spec.fanout:
        p["conv2_K"] = xavier(rng, (spec.N_2, k2, k2), k2 * k2, k2 * k2)
        p["conv2_b"] = _bias(rng, spec.N_1 * spec.N_2, k2 * k2)
    else:
        p["conv2_K"] = xavier(rng, (spec.N_2, spec.N_1, k2, k2),
                              spec.N_1 * k2 * k2, k2 * k2)
        p["conv2_b"] = _bias(rng, spec.N_2, spec.N_1 * k2 * k2)
    p["fc1_W"] = xavier(rng, (spec.N_f1, flat), flat, spec.N_f1)
    p["fc1_b"] = _bias(rng, spec.N_f1, flat)
    p["fc2_W"] = xavier(rng, (spec.N_f2, spec.N_f1), spec.N_f1, spec.N_f2)
    p["fc2_b"] = _bias(rng, spec.N_f2, spec.N_f1)
    p["out_W"] = xavier(rng, (POSE_DIM, spec.N_f2), spec.N_f2, POSE_DIM)
    p["out_b"] = _bias(rng, POSE_DIM, spec.N_f2)
    return p


def _init_lstm(rng, prefix, d_in, hidden, p):
    p[prefix + "_W"] = xavier(rng, (4 * hidden, d_in), d_in, hidden)
    p[prefix + "_U"] = xavier(rng, (4 * hidden, hidden), hidden, hidden)
    p[prefix + "_b"] = np.zeros(4 * hidden)


def init_block2(spec: NetSpec, rng: np.random.Generator) -> dict:
    p: dict[str, Tensor] = {}
    _init_lstm(rng, "lstm1", POSE_DIM, spec.N_l1, p)
    _init_lstm(rng, "bi_fwd", spec.N_l1, spec.N_l2, p)
    _init_lstm(rng, "bi_bwd", spec.N_l1, spec.N_l2, p)
    p["td_W"] = xavier(rng, (spec.N_d1, 2 * spec.N_l2), 2 * spec.N_l2,
                       spec.N_d1)
    p["td_b"] = _bias(rng, spec.N_d1, 2 * spec.N_l2)
    p["out_W"] = xavier(rng, (POSE_DIM, spec.N_d1), spec.N_d1, POSE_DIM)
    p["out_b"] = _bias(rng, POSE_DIM, spec.N_d1)
    return p


def init_block3(spec: NetSpec, rng: np.random.Generator) -> dict:
    widths = (POSE_DIM, spec.N_D1, spec.N_D2, spec.N_D3, LENS_DIM)
    names = ("d1", "d2", "d3", "out")
    p: dict[str, Tensor] = {}
    for name, d_in, d_out in zip(names, widths[:-1], widths[1:]):
        p[name + "_W"] = xavier(rng, (d_out, d_in), d_in, d_out)
        p[name + "_b"] = _bias(rng, d_out, d_in)
    return p


# ---------------------------------------------------------------------------
# block 1: pose estimation from the average-power matrix
# ---------------------------------------------------------------------------

def avg_power_matrix(received_samples, n_ta: int) -> Tensor:
    """Mean of the first n_ta received-power vectors, reshaped to the
    physical (row-major) photodiode grid."""
    if n_ta < 1:
        raise ValueError("need at least one averaging slot")
    samples = np.asarray(received_samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < n_ta:
        raise ValueError(f"need {n_ta} sample vectors")
    n_r = samples.shape[1]
    side = math.isqrt(n_r)
    if side * side != n_r:
        raise ValueError("photodiode count must be a perfect square")
    return samples[:n_ta].mean(axis=0).reshape(side, side)


def forward_block1_batch(x: Tensor, p: dict, spec: NetSpec,
                         counter: OpCounter = None,
                         want_cache: bool = False):
    """x: (B, side, side) average-power matrices -> (B, 5) poses."""
    x4 = x[:, None, :, :]
    z1 = conv_forward(x4, p["conv1_K"], p["conv1_b"], counter=counter)
    a1 = relu(z1)
    p1, cache1 = max_pool(a1, spec.N_m1)
    z2 = conv_forward(p1, p["conv2_K"], p["conv2_b"], counter=counter)
    a2 = relu(z2)
    p2, cache2 = max_pool(a2, spec.N_m2)
    fl = flatten(p2)
    zf1 = dense(fl, p["fc1_W"], p["fc1_b"], counter)
    af1 = relu(zf1)
    zf2 = dense(af1, p["fc2_W"], p["fc2_b"], counter)
    af2 = relu(zf2)
    out = dense(af2, p["out_W"], p["out_b"], counter)
    if not want_cache:
        return out
    return out, (x4, z1, a1, p1, cache1, z2, a2, p2, cache2, fl, zf1, af1,
                 zf2, af2)


def backward_block1(dout: Tensor, cache, p: dict) -> dict:
    (x4, z1, a1, p1, cache1, z2, a2, p2, cache2, fl, zf1, af1, zf2,
     af2) = cache
    g: dict[str, Tensor] = {}
    d_af2, g["out_W"], g["out_b"] = dense_backward(dout, af2, p["out_W"])
    d_zf2 = relu_backward(d_af2, zf2)
    d_af1, g["fc2_W"], g["fc2_b"] = dense_backward(d_zf2, af1, p["fc2_W"])
    d_zf1 = relu_backward(d_af1, zf1)
    d_fl, g["fc1_W"], g["fc1_b"] = dense_backward(d_zf1, fl, p["fc1_W"])
    d_p2 = d_fl.reshape(p2.shape)
    d_a2 = max_pool_backward(d_p2, cache2, a2.shape)
    d_z2 = relu_backward(d_a2, z2)
    d_p1, g["conv2_K"], g["conv2_b"] = conv_backward(d_z2, p1, p["conv2_K"])
    d_a1 = max_pool_backward(d_p1, cache1, a1.shape)
    d_z1 = relu_backward(d_a1, z1)
    _, g["conv1_K"], g["conv1_b"] = conv_backward(d_z1, x4, p["conv1_K"],
                                                  need_dx=False)
    return g


def forward_block1(image: Tensor, p: dict, spec: NetSpec) -> Tensor:
    """Single average-power matrix (side, side) -> pose estimate (5,)."""
    return forward_block1_batch(np.asarray(image, dtype=float)[None],
                                p, spec)[0]


# ---------------------------------------------------------------------------
# block 2: next-pose prediction from a pose history
# ---------------------------------------------------------------------------

def forward_block2_batch(x: Tensor, p: dict, spec: NetSpec,
                         counter: OpCounter = None,
                         want_cache: bool = False):
    """x: (B, N_I, 5) pose histories -> (B, 5) next-pose predictions."""
    h_seq, cache_l1 = lstm_forward(x, p["lstm1_W"], p["lstm1_U"],
                                   p["lstm1_b"], counter=counter)
    rep = repeat_vector(h_seq[:, -1], spec.N_r1)
    h_bi, cache_bi = bilstm_forward(
        rep, (p["bi_fwd_W"], p["bi_fwd_U"], p["bi_fwd_b"]),
        (p["bi_bwd_W"], p["bi_bwd_U"], p["bi_bwd_b"]), counter=counter)
    z_td = dense(h_bi, p["td_W"], p["td_b"], counter)
    a_td = relu(z_td)
    last = a_td[:, -1]
    out = dense(last, p["out_W"], p["out_b"], counter)
    if not want_cache:
        return out
    return out, (x, cache_l1, rep, h_bi, cache_bi, z_td, a_td, last)


def backward_block2(dout: Tensor, cache, p: dict) -> dict:
    x, cache_l1, rep, h_bi, cache_bi, z_td, a_td, last = cache
    g: dict[str, Tensor] = {}
    d_last, g["out_W"], g["out_b"] = dense_backward(dout, last, p["out_W"])
    d_atd = np.zeros_like(a_td)
    d_atd[:, -1] = d_last
    d_ztd = relu_backward(d_atd, z_td)
    d_hbi, g["td_W"], g["td_b"] = dense_backward(d_ztd, h_bi, p["td_W"])
    d_rep, fwd_g, bwd_g = bilstm_backward(d_hbi, cache_bi)
    g["bi_fwd_W"], g["bi_fwd_U"], g["bi_fwd_b"] = fwd_g
    g["bi_bwd_W"], g["bi_bwd_U"], g["bi_bwd_b"] = bwd_g
    d_hseq = np.zeros((x.shape[0], x.shape[1], rep.shape[2]))
    d_hseq[:, -1] = d_rep.sum(axis=1)
    _, g["lstm1_W"], g["lstm1_U"], g["lstm1_b"] = lstm_backward(d_hseq,
                                                                cache_l1)
    return g


def forward_block2(history: Tensor, p: dict, spec: NetSpec) -> Tensor:
    """Single pose history (N_I, 5) -> next-pose prediction (5,)."""
    history = np.asarray(history, dtype=float)
    if history.ndim != 2 or history.shape != (spec.N_I, POSE_DIM):
        raise ValueError(f"history must be ({spec.N_I}, {POSE_DIM})")
    return forward_block2_batch(history[None], p, spec)[0]


# ---------------------------------------------------------------------------
# block 3: lens parameters from a pose
# ---------------------------------------------------------------------------

def forward_block3_batch(x: Tensor, p: dict, counter: OpCounter = None,
                         want_cache: bool = False):
    """x: (B, 5) poses -> (B, 3) raw (theta_L, phi_L, f) outputs in label
    space (the training target scale, nominally [0, 1])."""
    z1 = dense(x, p["d1_W"], p["d1_b"], counter)
    a1 = relu(z1)
    z2 = dense(a1, p["d2_W"], p["d2_b"], counter)
    a2 = relu(z2)
    z3 = dense(a2, p["d3_W"], p["d3_b"], counter)
    a3 = relu(z3)
    out = dense(a3, p["out_W"], p["out_b"], counter)
    if not want_cache:
        return out
    return out, (x, z1, a1, z2, a2, z3, a3)


def backward_block3(dout: Tensor, cache, p: dict) -> dict:
    x, z1, a1, z2, a2, z3, a3 = cache
    g: dict[str, Tensor] = {}
    d_a3, g["out_W"], g["out_b"] = dense_backward(dout, a3, p["out_W"])
    d_z3 = relu_backward(d_a3, z3)
    d_a2, g["d3_W"], g["d3_b"] = dense_backward(d_z3, a2, p["d3_W"])
    d_z2 = relu_backward(d_a2, z2)
    d_a1, g["d2_W"], g["d2_b"] = dense_backward(d_z2, a1, p["d2_W"])
    d_z1 = relu_backward(d_a1, z1)
    _, g["d1_W"], g["d1_b"] = dense_backward(d_z1, x, p["d1_W"])
    return g


def forward_block3(pose5: Tensor, p: dict, bounds=None,
                   counter: OpCounter = None) -> Tensor:
    """Single pose (5,) -> (theta_L, phi_L, f).  With bounds given, the raw
    [0, 1]-scale outputs are clamped and affinely mapped onto the box."""
    raw = forward_block3_batch(np.asarray(pose5, dtype=float)[None],
                               p, counter=counter)[0]
    if bounds is None:
        return raw
    return rescale_to_bounds(raw, bounds)


def rescale_to_bounds(raw: Tensor, bounds) -> Tensor:
    """Map raw (theta_L, phi_L, f) values on the [0, 1] label scale onto the
    lens box, clamping at the boundary."""
    lo = np.array([bounds.theta_min, bounds.phi_min, bounds.f_min])
    hi = np.array([bounds.theta_max, bounds.phi_max, bounds.f_max])
    return lo + np.clip(raw, 0.0, 1.0) * (hi - lo)
