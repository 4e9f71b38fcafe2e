from src.components.numerics.tensor import (
    Parameter, Tensor, as_tensor, broadcast_to, clip_min, concat, exp, gather,
    get_default_dtype, is_grad_enabled, log, no_grad, relu, scatter_add,
    set_default_dtype, sigmoid, softplus, stack, where,
)
from src.components.numerics.ops import (
    AttentionCounter, bilinear_sample, bilinear_sample_batched, conv2d, embedding_width,
    gelu, layer_norm, log_sigmoid, multi_head_attention, sinusoidal_embedding, softmax,
)
from src.components.numerics.gradcheck import grad_check
from src.components.numerics.nn import (
    MLP, Conv2d, LayerNorm, Linear, Module, MultiHeadAttention, activate,
)
from src.components.numerics.serialization import read_json, read_tensor, write_json, write_tensor

__all__ = [
    "Tensor", "Parameter", "as_tensor", "no_grad", "is_grad_enabled",
    "set_default_dtype", "get_default_dtype",
    "broadcast_to", "clip_min", "concat", "exp", "gather", "log", "relu", "scatter_add",
    "sigmoid", "softplus", "stack", "where",
    "AttentionCounter", "bilinear_sample", "bilinear_sample_batched", "conv2d",
    "embedding_width", "gelu", "layer_norm", "log_sigmoid", "multi_head_attention",
    "sinusoidal_embedding", "softmax",
    "grad_check",
    "Module", "Linear", "LayerNorm", "MLP", "Conv2d", "MultiHeadAttention", "activate",
    "read_tensor", "write_tensor", "read_json", "write_json",
]
