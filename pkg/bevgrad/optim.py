# This file is part of lidarbev-desk.
#
# Copyright (C) 2026  lidarbev-desk contributors.
#
# This program is provided to you as free software: you can redistribute it and/or modify it under
# the terms of the GNU General Public License as published by the Free Software Foundation, either
# version 3 of the License, or (at your option) any later version. It is distributed in the hope
# that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the GNU General Public License for more
# details. You should have received a copy of the GNU General Public License along with this
# program. If not, see https://www.gnu.org/licenses/.

"""
Gradient-descent optimizers over named parameter tensors.
"""

import logging
from typing import Dict, Iterable, Tuple

import numpy as np

from .errors import ShapeError
from .tensor import Tensor


logger = logging.getLogger(__name__)


class AdamW:
    """
    Adam with decoupled weight decay and a fixed step size.

    Parameters are addressed by their path so that moment buffers can be saved next to the
    weights in a checkpoint.
    """

    def __init__(
        self,
        params: Iterable[Tuple[str, Tensor]],
        lr: float = 1e-2,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 1e-2,
    ):
        if lr < 0:
            raise ValueError('Learning rate must be non-negative, got {}'.format(lr))
        self.params: Dict[str, Tensor] = dict(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.steps = 0
        self.first_moment = {path: np.zeros(p.shape) for path, p in self.params.items()}
        self.second_moment = {path: np.zeros(p.shape) for path, p in self.params.items()}

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    def step(self) -> None:
        self.steps += 1
        beta1, beta2 = self.betas
        correction1 = 1.0 - beta1 ** self.steps
        correction2 = 1.0 - beta2 ** self.steps
        for path, param in self.params.items():
            if param.grad is None:
                continue
            if param.grad.shape != param.shape:
                raise ShapeError('Gradient of "{}" has shape {}, expected {}'
                                 .format(path, param.grad.shape, param.shape))
            m = self.first_moment[path]
            v = self.second_moment[path]
            m *= beta1
            m += (1.0 - beta1) * param.grad
            v *= beta2
            v += (1.0 - beta2) * param.grad ** 2
            update = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            param.data = param.data * (1.0 - self.lr * self.weight_decay) - self.lr * update

    def state(self) -> Dict[str, np.ndarray]:
        """
        Returns moment buffers keyed as `<path>#m` / `<path>#v`, plus the step count.
        """
        state = {'#steps': np.array([float(self.steps)])}
        for path in self.params:
            state[path + '#m'] = self.first_moment[path]
            state[path + '#v'] = self.second_moment[path]
        return state

    def load_state(self, state: Dict[str, np.ndarray]) -> None:
        self.steps = int(state.get('#steps', np.zeros(1))[0])
        for path in self.params:
            if path + '#m' in state:
                self.first_moment[path] = np.array(state[path + '#m'], dtype=np.float64)
                self.second_moment[path] = np.array(state[path + '#v'], dtype=np.float64)
            else:
                logger.warning('No optimizer moments stored for "%s"; starting from zero', path)
