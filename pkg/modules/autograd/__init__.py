from modules.autograd.graph import (
    ExprGraph,
    Node,
    NodeRef,
    evaluate,
    gradient,
    value_and_gradient,
)
from modules.autograd.ops import register_op
from modules.autograd.rng import RngStream, gaussian
from modules.autograd.tensor import Tensor, as_array

__all__ = [
    "ExprGraph",
    "Node",
    "NodeRef",
    "RngStream",
    "Tensor",
    "as_array",
    "evaluate",
    "gaussian",
    "gradient",
    "register_op",
    "value_and_gradient",
]
