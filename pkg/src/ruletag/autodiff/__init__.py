"""Minimal reverse-mode differentiation for the tagger."""
from ruletag.autodiff.kernels import BACKEND
from ruletag.autodiff.losses import kl_divergence, mixed_objective, softmax, softmax_cross_entropy
from ruletag.autodiff.lstm import EncoderState, LSTMParams, bi_encode, lstm_cell, lstm_sequence
from ruletag.autodiff.optim import Adam, OptimizerConfig, step
from ruletag.autodiff.tensor import Tensor, add, concat, dropout, matmul, take_rows

__all__ = [
    "BACKEND", "Adam", "EncoderState", "LSTMParams", "OptimizerConfig", "Tensor",
    "add", "bi_encode", "concat", "dropout", "kl_divergence", "lstm_cell", "lstm_sequence",
    "matmul", "mixed_objective", "softmax", "softmax_cross_entropy", "step", "take_rows",
]
