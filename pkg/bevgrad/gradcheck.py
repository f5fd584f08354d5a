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
Central finite-difference verification of analytic gradients.

Each check reduces a (possibly tensor-valued) output to a scalar with a fixed random
projection, runs one recorded backward and compares every selected leaf element
against (f(x + h) - f(x - h)) / 2h computed without a tape.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Type

import numpy as np

from .basic_ops import mul, sum as reduce_sum
from .tensor import Primitive, Tape, Tensor, backward, parameter


logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4


@dataclass
class GradCheckResult:
    name: str
    max_error: float
    checked_elements: int
    tolerance: float
    worst: Optional[str] = None
    errors: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def __str__(self) -> str:
        return '{}: max rel err {:.3e} over {} elements (worst at {})'.format(
            self.name, self.max_error, self.checked_elements, self.worst
        )


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """
    Returns |analytic - numeric| / max(1, |analytic|) elementwise.
    """
    return np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))


def _projected(output: Tensor, projection: np.ndarray) -> float:
    return float((output.data * projection).sum())


def check_function(
    fn: Callable[[], Tensor],
    leaves: Sequence[Tensor],
    rng: np.random.Generator,
    name: str = 'function',
    h: float = DEFAULT_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
    max_elements: Optional[int] = None,
) -> GradCheckResult:
    """
    Compares analytic and finite-difference gradients of `fn` w.r.t. `leaves`.

    Args:
        fn: zero-argument callable producing the output from the leaves (by closure)
        leaves: tensors with requires_grad, perturbed in place during the check
        rng: source of the output projection and of the element subset
        name: label used in the result
        h: central difference step
        tolerance: bound on the relative error metric
        max_elements: checks at most this many randomly chosen elements per leaf

    Returns:
        GradCheckResult with the worst relative error found
    """
    for leaf in leaves:
        leaf.zero_grad()
    with Tape():
        output = fn()
        projection = rng.normal(size=output.shape)
        loss = reduce_sum(mul(output, projection))
    backward(loss)

    max_error, worst, checked = 0.0, None, 0
    errors = {}
    for position, leaf in enumerate(leaves):
        analytic = leaf.grad if leaf.grad is not None else np.zeros(leaf.shape)
        if not leaf.data.flags.c_contiguous:
            leaf.data = np.ascontiguousarray(leaf.data)
        flat = leaf.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_elements is not None and flat.size > max_elements:
            indices = np.sort(rng.choice(flat.size, size=max_elements, replace=False))
        numeric = np.zeros(indices.size)
        for k, index in enumerate(indices):
            original = flat[index]
            flat[index] = original + h
            plus = _projected(fn(), projection)
            flat[index] = original - h
            minus = _projected(fn(), projection)
            flat[index] = original
            numeric[k] = (plus - minus) / (2.0 * h)
        errs = relative_error(analytic.reshape(-1)[indices], numeric)
        checked += indices.size
        label = leaf.name or 'input{}'.format(position)
        errors[label] = float(errs.max()) if errs.size else 0.0
        if errs.size and errs.max() > max_error:
            max_error = float(errs.max())
            worst = '{}[{}]'.format(label, int(indices[int(errs.argmax())]))
        leaf.zero_grad()

    result = GradCheckResult(name, max_error, checked, tolerance, worst, errors)
    logger.debug('%s', result)
    return result


def check_primitive(
    primitive_cls: Type[Primitive],
    rng: np.random.Generator,
    h: float = DEFAULT_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
) -> GradCheckResult:
    """
    Gradient check of a registered primitive on one instance drawn from its `sample`.
    """
    arrays, attrs = primitive_cls.sample(rng)
    leaves = [parameter(array, name='{}.in{}'.format(primitive_cls.name, i)) for i, array in enumerate(arrays)]
    return check_function(
        lambda: primitive_cls.apply(*leaves, **attrs), leaves, rng,
        name=primitive_cls.name, h=h, tolerance=tolerance,
    )


def check_all_primitives(
    rng: np.random.Generator,
    instances: int = 5,
    h: float = DEFAULT_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
) -> List[GradCheckResult]:
    """
    Runs `instances` random checks of every registered primitive, in name order.
    """
    results = []
    for _, primitive_cls in sorted(Primitive.registered().items()):
        for _ in range(instances):
            results.append(check_primitive(primitive_cls, rng, h=h, tolerance=tolerance))
    failed = [result for result in results if not result.passed]
    if failed:
        logger.warning('%d of %d primitive gradient checks failed', len(failed), len(results))
    return results
