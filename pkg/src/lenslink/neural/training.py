"""Block-wise training, finite-difference gradient verification, and the
trained lens-parameter regressor used by the pbml optimization scheme.

Training is plain mini-batch SGD on the mean-squared-error loss
phi = (1/B) sum ||y_hat - y||^2, deterministic for a fixed seed, with an
early stop on a stagnant validation loss and best-validation parameter
restoration.  Inputs are standardized per feature over the training split;
the scalers ride along inside the returned parameter set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import LensState, Pose
from ..optimizers import LensBounds
from .blocks import (NetSpec, backward_block1, backward_block2,
                     backward_block3, forward_block1_batch,
                     forward_block2_batch, forward_block3_batch, init_block1,
                     init_block2, init_block3, rescale_to_bounds)

VAL_PATIENCE = 20


class TrainingDivergence(RuntimeError):
    """Loss became non-finite; .epoch records where."""

    def __init__(self, epoch: int):
        super().__init__(f"training loss diverged at epoch {epoch}")
        self.epoch = epoch


@dataclass
class NetworkParams:
    """Named parameter tensors for one block, plus the feature scalers the
    block was trained with."""

    block_id: int
    tensors: dict[str, np.ndarray]
    history: dict = field(default_factory=dict, repr=False, compare=False)


def _block_api(block_id: int, spec: NetSpec):
    if block_id == 1:
        return (lambda x, p: forward_block1_batch(x, p, spec,
                                                  want_cache=True),
                backward_block1)
    if block_id == 2:
        return (lambda x, p: forward_block2_batch(x, p, spec,
                                                  want_cache=True),
                backward_block2)
    if block_id == 3:
        return (lambda x, p: forward_block3_batch(x, p, want_cache=True),
                backward_block3)
    raise ValueError("block_id must be 1, 2, or 3")


def _init_params(block_id: int, spec: NetSpec, n_r: int,
                 rng: np.random.Generator) -> dict:
    if block_id == 1:
        return init_block1(spec, n_r, rng)
    if block_id == 2:
        return init_block2(spec, rng)
    return init_block3(spec, rng)


def _standardize(train_slice: np.ndarray):
    mean = train_slice.mean(axis=0)
    std = train_slice.std(axis=0)
    return mean, np.maximum(std, 1e-12)


def _mse(pred: np.ndarray, y: np.ndarray) -> float:
    # a diverging run overflows here; the caller detects the inf/nan
    with np.errstate(over="ignore", invalid="ignore"):
        d = pred - y
        return float(np.sum(d * d) / len(y))


def train_block(block_id: int, dataset, spec: NetSpec, seed: int,
                n_r: int = 16, patience: int = VAL_PATIENCE
                ) -> NetworkParams:
    """Train one block on dataset = (inputs, labels) and return the
    parameters from the best-validation epoch.

    The data is shuffled once (seeded) and split 70/10/20 into
    train/validation/test; inputs are standardized per feature over the
    training split, as are the pose labels of blocks 1 and 2 (block 3
    labels are expected on the [0, 1] lens-box scale already).  Raises
    TrainingDivergence if the loss leaves the finite range.
    """
    X, Y = dataset
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = len(X)
    if n == 0 or len(Y) != n:
        raise ValueError("dataset must be nonempty with matched labels")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = max(1, int(round(0.7 * n)))
    n_val = max(1, int(round(0.1 * n)))
    idx_train = perm[:n_train]
    idx_val = perm[n_train:n_train + n_val]
    idx_test = perm[n_train + n_val:]
    if len(idx_val) == 0:
        idx_val = idx_train

    x_mean, x_std = _standardize(X[idx_train])
    if block_id in (1, 2):
        y_mean, y_std = _standardize(Y[idx_train])
    else:
        y_mean = np.zeros(Y.shape[-1])
        y_std = np.ones(Y.shape[-1])
    Xs = (X - x_mean) / x_std
    Ys = (Y - y_mean) / y_std

    params = _init_params(block_id, spec, n_r, rng)
    forward, backward = _block_api(block_id, spec)

    def split_loss(idx):
        pred, _ = forward(Xs[idx], params)
        return _mse(pred, Ys[idx])

    best_val = np.inf
    best_snapshot = {k: v.copy() for k, v in params.items()}
    best_epoch = -1
    train_hist, val_hist = [], []
    stale = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(spec.epochs):
            order = idx_train[rng.permutation(n_train)]
            epoch_loss = 0.0
            for start in range(0, n_train, spec.batch):
                batch = order[start:start + spec.batch]
                pred, cache = forward(Xs[batch], params)
                loss = _mse(pred, Ys[batch])
                if not np.isfinite(loss):
                    raise TrainingDivergence(epoch)
                epoch_loss += loss * len(batch)
                dout = 2.0 * (pred - Ys[batch]) / len(batch)
                grads = backward(dout, cache, params)
                for k, gk in grads.items():
                    params[k] -= spec.eps_L * gk
            train_hist.append(epoch_loss / n_train)
            val = split_loss(idx_val)
            if not np.isfinite(val):
                raise TrainingDivergence(epoch)
            val_hist.append(val)
            if val < best_val:
                best_val = val
                best_snapshot = {k: v.copy() for k, v in params.items()}
                best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if stale >= patience:
                    break

    tensors = best_snapshot
    tensors["x_mean"] = np.asarray(x_mean, dtype=float)
    tensors["x_std"] = np.asarray(x_std, dtype=float)
    tensors["y_mean"] = np.asarray(y_mean, dtype=float)
    tensors["y_std"] = np.asarray(y_std, dtype=float)
    params_out = NetworkParams(block_id=block_id, tensors=tensors)
    params_out.history = {"train_loss": train_hist, "val_loss": val_hist,
                          "best_epoch": best_epoch,
                          "test_loss": (split_loss(idx_test)
                                        if len(idx_test) else None)}
    return params_out


# ---------------------------------------------------------------------------
# inference helpers
# ---------------------------------------------------------------------------

_SCALER_KEYS = ("x_mean", "x_std", "y_mean", "y_std")


def _weights_only(tensors: dict) -> dict:
    return {k: v for k, v in tensors.items() if k not in _SCALER_KEYS}


def predict_block(params: NetworkParams, x: np.ndarray, spec: NetSpec
                  ) -> np.ndarray:
    """Batched prediction in original (de-standardized) units."""
    t = params.tensors
    xs = (np.asarray(x, dtype=float) - t["x_mean"]) / t["x_std"]
    forward, _ = _block_api(params.block_id, spec)
    pred, _ = forward(xs, _weights_only(t))
    return pred * t["y_std"] + t["y_mean"]


def pose_vector(pose: Pose) -> np.ndarray:
    """(x, y, z, theta_R, phi_R) feature vector of a pose."""
    return np.array([pose.position[0], pose.position[1], pose.position[2],
                     pose.theta_R, pose.phi_R])


@dataclass
class PbmlRegressor:
    """Trained pose -> lens-parameter predictor (block 3 plus its box).

    Raw network outputs live on the [0, 1] label scale in the order
    (theta_L, phi_L, f); predictions are clamped and affinely mapped onto
    the lens box.
    """

    params: NetworkParams
    bounds: LensBounds
    spec: NetSpec
    d_len: float = 0.02

    @classmethod
    def train(cls, poses5, lens_labels, bounds: LensBounds,
              spec: NetSpec = None, seed: int = 0, d_len: float = 0.02
              ) -> "PbmlRegressor":
        """lens_labels: (N, 3) physical (theta_L, phi_L, f) triples, e.g.
        from exhaustive searches; they are normalized onto [0, 1] via the
        bounds before training."""
        spec = spec or NetSpec()
        labels = np.asarray(lens_labels, dtype=float)
        lo = np.array([bounds.theta_min, bounds.phi_min, bounds.f_min])
        hi = np.array([bounds.theta_max, bounds.phi_max, bounds.f_max])
        y01 = np.clip((labels - lo) / (hi - lo), 0.0, 1.0)
        params = train_block(3, (np.asarray(poses5, dtype=float), y01),
                             spec, seed)
        return cls(params=params, bounds=bounds, spec=spec, d_len=d_len)

    def predict_lens_batch(self, poses5: np.ndarray) -> np.ndarray:
        """(N, 5) poses -> (N, 3) physical (theta_L, phi_L, f)."""
        raw = predict_block(self.params, poses5, self.spec)
        return rescale_to_bounds(raw, self.bounds)

    def predict_lens(self, pose: Pose) -> LensState:
        th, ph, f = self.predict_lens_batch(pose_vector(pose)[None])[0]
        return LensState(f=float(f), theta_L=float(th), phi_L=float(ph),
                         d_len=self.d_len)


# ---------------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------------

def gradient_check(block_id: int, spec: NetSpec, seed: int,
                   n_r: int = 16, h: float = 1e-5) -> float:
    """Compare analytic gradients against central finite differences on
    every parameter of a randomly initialized block; returns the max
    relative error.  Meant for small specs."""
    rng = np.random.default_rng(seed)
    params = _init_params(block_id, spec, n_r, rng)
    batch = 3
    if block_id == 1:
        side = spec.conv_dims(n_r)[0]
        x = rng.standard_normal((batch, side, side))
        out_dim = 5
    elif block_id == 2:
        x = rng.standard_normal((batch, spec.N_I, 5))
        out_dim = 5
    else:
        x = rng.standard_normal((batch, 5))
        out_dim = 3
    y = rng.standard_normal((batch, out_dim))
    forward, backward = _block_api(block_id, spec)

    def loss():
        pred, _ = forward(x, params)
        return _mse(pred, y)

    pred, cache = forward(x, params)
    grads = backward(2.0 * (pred - y) / batch, cache, params)

    worst = 0.0
    for key in sorted(params):
        flat = params[key].reshape(-1)
        gflat = grads[key].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            hi = loss()
            flat[idx] = orig - h
            lo = loss()
            flat[idx] = orig
            fd = (hi - lo) / (2.0 * h)
            rel = abs(gflat[idx] - fd) / max(abs(gflat[idx]), abs(fd), 1e-8)
            worst = max(worst, rel)
    return worst
