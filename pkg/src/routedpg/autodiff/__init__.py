from .adam import AdamState, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import max_relative_error, numeric_gradient
from .tensor import (
    ShapeError,
    Tape,
    Tensor,
    active_tape,
    add,
    concat,
    forward_op,
    from_op,
    matmul,
    maximum,
    mul,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    scale,
    sigmoid,
    slice_axis,
    softmax_rows,
    sub,
    swap_last_axes,
    tanh,
    transpose,
)

__all__ = [
    "AdamState",
    "ShapeError",
    "Tape",
    "Tensor",
    "active_tape",
    "adam_step",
    "add",
    "concat",
    "forward_op",
    "from_op",
    "load_checkpoint",
    "matmul",
    "max_relative_error",
    "maximum",
    "mul",
    "numeric_gradient",
    "reduce_mean",
    "reduce_sum",
    "relu",
    "reshape",
    "save_checkpoint",
    "scale",
    "sigmoid",
    "slice_axis",
    "softmax_rows",
    "sub",
    "swap_last_axes",
    "tanh",
    "transpose",
]
