from . import _support, ops
from ._support import GradCheckError, NonFiniteError, ShapeError
from .attention import AttentionWeights, multi_head_attention
from .gradcheck import GradCheckReport, grad_check, grad_check_report
from .module import (
    LayerNorm,
    Linear,
    Module,
    cast_parameters,
    init_weight,
    param,
)
from .ops import (
    add,
    avg_pool_2x2,
    concat,
    expand,
    gelu,
    l2_normalize,
    layer_norm,
    linear,
    log_softmax,
    matmul,
    max_pool_2x2,
    mean,
    mul,
    narrow,
    reshape,
    scale,
    select,
    softmax,
    sub,
    sum_,
    swap_last,
    transpose,
)
from .rng import SplitMix64, derive_seed
from .tensor import Tape, Tensor, backward, no_grad

__all__ = [
    "AttentionWeights",
    "GradCheckError",
    "GradCheckReport",
    "LayerNorm",
    "Linear",
    "Module",
    "NonFiniteError",
    "ShapeError",
    "SplitMix64",
    "Tape",
    "Tensor",
    "add",
    "avg_pool_2x2",
    "backward",
    "cast_parameters",
    "concat",
    "derive_seed",
    "expand",
    "gelu",
    "grad_check",
    "grad_check_report",
    "init_weight",
    "l2_normalize",
    "layer_norm",
    "linear",
    "log_softmax",
    "matmul",
    "max_pool_2x2",
    "mean",
    "mul",
    "multi_head_attention",
    "narrow",
    "no_grad",
    "ops",
    "param",
    "reshape",
    "scale",
    "select",
    "softmax",
    "sub",
    "sum_",
    "swap_last",
    "transpose",
]


def enable_debug() -> None:
    _support.DEBUG = True
