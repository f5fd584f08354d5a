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
Exceptions raised by the pipeline, its configuration and the experiment harness.
"""

from typing import Dict, List, Sequence


class PipelineError(Exception):
    """Base class for model and harness failures"""
    pass


class GridError(PipelineError, ValueError):
    """Raised when a coordinate or query falls outside its grid"""
    pass


class ConfigError(PipelineError, ValueError):
    """Raised for unknown configuration keys, bad values or invalid combinations"""
    pass


class UnknownDegradationError(PipelineError, ValueError):
    """Raised when a degradation kind is not one of the supported injectors"""
    pass


class TrainingDivergedError(PipelineError, RuntimeError):
    """Raised when the training loss or a gradient stops being finite"""

    def __init__(self, step: int, recent_losses: Sequence[float], bad_params: List[str]):
        self.step = step
        self.recent_losses = list(recent_losses)
        self.bad_params = list(bad_params)
        super().__init__(
            'Training diverged at step {}; recent losses {}; non-finite gradients in {}'.format(
                step, ['{:.4g}'.format(loss) for loss in self.recent_losses], self.bad_params or 'none'
            )
        )

    def diagnostics(self) -> Dict[str, object]:
        return {'step': self.step, 'recent_losses': self.recent_losses, 'bad_params': self.bad_params}
