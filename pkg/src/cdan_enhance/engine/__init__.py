from cdan_enhance.engine.tensor import (
    DTYPE,
    Graph,
    Tensor,
    as_tensor,
    backward,
    is_grad_enabled,
    no_grad,
)
from cdan_enhance.engine.functional import RunningStats

__all__ = [
    "DTYPE",
    "Graph",
    "RunningStats",
    "Tensor",
    "as_tensor",
    "backward",
    "is_grad_enabled",
    "no_grad",
]
