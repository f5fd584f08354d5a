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
Exceptions raised by the numeric substrate.
"""


class SubstrateError(Exception):
    """Base class for failures inside the numeric substrate"""
    pass


class ShapeError(SubstrateError, ValueError):
    """Raised when operand shapes do not satisfy a primitive's contract"""
    pass


class NonFiniteError(SubstrateError, FloatingPointError):
    """Raised in checked mode when NaN or Inf crosses a primitive boundary"""
    pass


class GradientError(SubstrateError, RuntimeError):
    """Raised when backward is requested for a tensor that is not attached to a live tape"""
    pass


class SnapshotError(SubstrateError, IOError):
    """Raised when a tensor snapshot file is corrupt or truncated"""
    pass
