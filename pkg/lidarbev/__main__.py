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

import os
import sys


def _thread_count(argv) -> str:
    for index, arg in enumerate(argv):
        if arg == '--threads' and index + 1 < len(argv):
            return argv[index + 1]
        if arg.startswith('--threads='):
            return arg.split('=', 1)[1]
    return '1'


# numeric libraries read these once, at import
for _variable in ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS'):
    os.environ.setdefault(_variable, _thread_count(sys.argv[1:]))

from lidarbev.cli import main  # noqa E402

if __name__ == '__main__':
    sys.exit(main())
