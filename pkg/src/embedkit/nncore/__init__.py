"""Dense-array layers with hand-written backward passes, losses and Adam."""

from .gradcheck import grad_check, relative_error
from .graph import HEADS, LayerGraph
from .layers import (
    ACTIVATIONS,
    Activation,
    Conv1D,
    Dense,
    Dropout,
    Embedding,
    Layer,
    MaxPool,
    activation,
    activation_backward,
    conv1d,
    conv1d_backward,
    dense,
    dropout,
    glorot_uniform,
    max_pool,
    max_pool_backward,
    pool_rows,
    sigmoid,
    softmax,
)
from .losses import LOSSES, fused_gradient, loss, loss_terms
from .optim import AdamState, adam_step
from .recurrent import GATES, Recurrent, bidirectional, gru_cell, init_cell_params, lstm_cell

__all__ = [
    "ACTIVATIONS", "Activation", "AdamState", "Conv1D", "Dense", "Dropout", "Embedding", "GATES",
    "HEADS", "LOSSES", "Layer", "LayerGraph", "MaxPool", "Recurrent", "activation",
    "activation_backward", "adam_step", "bidirectional", "conv1d", "conv1d_backward", "dense",
    "dropout", "fused_gradient", "glorot_uniform", "grad_check", "gru_cell", "init_cell_params",
    "loss", "loss_terms", "lstm_cell", "max_pool", "max_pool_backward", "pool_rows", "relative_error",
    "sigmoid", "softmax",
]
