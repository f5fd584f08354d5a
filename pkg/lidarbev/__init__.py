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
Desk-scale LiDAR-centric multi-modal BEV detection with sparse voxel dilation and
semantic-guided BEV dilation blocks.
"""

from . import errors
from . import metadata
from . import config
from . import geometry
from . import hilbert
from . import modules
from . import scan
from . import svdb
from . import sbdb
from . import view_transform
from ._version import __version__, __version_info__  # noqa F401
