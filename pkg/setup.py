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

from pathlib import Path
import setuptools


PACKAGE_NAME = 'lidarbev-desk'
parent_dir = Path(__file__).parent
long_description = (parent_dir / 'README.md').read_text()
requirements = [
    line.strip() for line in (parent_dir / 'requirements.txt').read_text().splitlines()
    if line.strip() and not line.startswith('#')
]

version_namespace = {}
version_file = parent_dir / '_version.py'
exec(version_file.read_text(), version_namespace)


setuptools.setup(
    name=PACKAGE_NAME,
    version=version_namespace['__version__'],
    description='Desk-scale LiDAR-centric multi-modal BEV detection with dilation blocks',
    long_description=long_description,
    long_description_content_type='text/markdown',
    include_package_data=True,
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
        'Operating System :: OS Independent',
    ],
    packages=setuptools.find_packages(exclude=['examples', 'examples.*']),
    install_requires=requirements,
    extras_require={'test': ['pytest>=7.0', 'pytest-mock>=3.6']},
    entry_points={'console_scripts': ['lidarbev=lidarbev.cli:main']},
    python_requires='>=3.8',
    license_files=['LICENSE'],
)
