"""From-scratch neural pipeline: pose estimation from received-power maps,
next-pose prediction, and lens-parameter regression."""

from .blocks import (NetSpec, avg_power_matrix, forward_block1,
                     forward_block2, forward_block3, init_block1,
                     init_block2, init_block3, rescale_to_bounds)
from .complexity import ComplexityCounts, complexity_counts
from .layers import (OpCounter, Tensor, bilstm_forward, conv2d, dense,
                     flatten, lstm_forward, max_pool, relu, repeat_vector,
                     xavier)
from .serialize import load_params, save_params
from .training import (NetworkParams, PbmlRegressor, TrainingDivergence,
                       gradient_check, pose_vector, predict_block,
                       train_block)

__all__ = [
    "NetSpec", "avg_power_matrix", "forward_block1", "forward_block2",
    "forward_block3", "init_block1", "init_block2", "init_block3",
    "rescale_to_bounds", "ComplexityCounts", "complexity_counts",
    "OpCounter", "Tensor", "bilstm_forward", "conv2d", "dense", "flatten",
    "lstm_forward", "max_pool", "relu", "repeat_vector", "xavier",
    "load_params", "save_params", "NetworkParams", "PbmlRegressor",
    "TrainingDivergence", "gradient_check", "pose_vector", "predict_block",
    "train_block",
]
