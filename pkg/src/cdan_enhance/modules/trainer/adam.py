import logging
from typing import Iterable, List, Tuple

import numpy as np

from cdan_enhance.core.models.errors import MissingGradientError
from cdan_enhance.engine.tensor import Tensor

logger = logging.getLogger(__name__)


class Adam:
    """Bias-corrected Adam over a fixed, named parameter list.

    m, v have the parameter shapes; t counts optimizer steps, not parameters.
    """

    def __init__(
        self,
        named_params: Iterable[Tuple[str, Tensor]],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params: List[Tuple[str, Tensor]] = list(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for _, p in self.params]
        self.v = [np.zeros_like(p.data) for _, p in self.params]

    def step(self):
        missing = [name for name, p in self.params if p.grad is None]
        if missing:
            raise MissingGradientError(
                f"No gradient for parameter '{missing[0]}'"
                + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else "")
            )

        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for (_, p), m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / correction1
            v_hat = v / correction2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        self.zero_grad()

    def zero_grad(self):
        for _, p in self.params:
            p.zero_grad()
