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
Functionality related to the tensor snapshot file format.

A snapshot record is little-endian: u32 rank, rank x u64 extents, then the f64 payload in
row-major order. A keyed state file is u32 entry count followed by, per entry, a u32 key
length, the UTF-8 key and one snapshot record. Every binary file gets a JSON mirror with the
same stem for human inspection.
"""

import json
import logging
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from .errors import SnapshotError


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def encode_record(array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array, dtype='<f8')
    header = struct.pack('<I', array.ndim) + struct.pack('<{}Q'.format(array.ndim), *array.shape)
    return header + array.tobytes()


def decode_record(buffer: bytes, offset: int = 0) -> Tuple[np.ndarray, int]:
    """
    Decodes one snapshot record.

    Args:
        buffer: file content
        offset: position of the record's rank field

    Returns:
        Tuple of:
            [0] decoded float64 array
            [1] offset just past the record
    """
    if len(buffer) < offset + 4:
        raise SnapshotError('Snapshot is corrupt (missing rank)')
    rank, = struct.unpack_from('<I', buffer, offset)
    offset += 4
    if len(buffer) < offset + 8 * rank:
        raise SnapshotError('Snapshot is corrupt (truncated extents)')
    shape = struct.unpack_from('<{}Q'.format(rank), buffer, offset)
    offset += 8 * rank
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    end = offset + 8 * count
    if len(buffer) < end:
        raise SnapshotError('Snapshot is corrupt (payload has {} of {} bytes)'.format(len(buffer) - offset, 8 * count))
    array = np.frombuffer(buffer, dtype='<f8', count=count, offset=offset).astype(np.float64).reshape(shape)
    return array, end


def _mirror_path(path: Path) -> Path:
    return path.with_suffix('.json')


def _json_entry(array: np.ndarray) -> dict:
    return {'shape': list(array.shape), 'data': np.asarray(array, dtype=np.float64).reshape(-1).tolist()}


def save_snapshot(path: PathLike, array: np.ndarray) -> Path:
    """
    Writes one tensor as a snapshot record plus its JSON mirror.
    """
    path = Path(path)
    path.write_bytes(encode_record(np.asarray(array, dtype=np.float64)))
    _mirror_path(path).write_text(json.dumps(_json_entry(array), indent=1))
    return path


def load_snapshot(path: PathLike) -> np.ndarray:
    buffer = Path(path).read_bytes()
    array, end = decode_record(buffer)
    if end != len(buffer):
        raise SnapshotError('Snapshot "{}" has {} trailing bytes'.format(path, len(buffer) - end))
    return array


def save_state(path: PathLike, state: Dict[str, np.ndarray]) -> Path:
    """
    Writes named tensors (e.g. parameters keyed by path) in key order, plus a JSON mirror.
    """
    path = Path(path)
    chunks = [struct.pack('<I', len(state))]
    mirror = OrderedDict()
    for key in sorted(state):
        encoded_key = key.encode('utf-8')
        chunks.append(struct.pack('<I', len(encoded_key)) + encoded_key)
        chunks.append(encode_record(state[key]))
        mirror[key] = _json_entry(state[key])
    path.write_bytes(b''.join(chunks))
    _mirror_path(path).write_text(json.dumps(mirror, indent=1))
    logger.debug('Saved %d tensors to %s', len(state), path)
    return path


def load_state(path: PathLike) -> 'OrderedDict[str, np.ndarray]':
    buffer = Path(path).read_bytes()
    if len(buffer) < 4:
        raise SnapshotError('State file "{}" is corrupt (missing entry count)'.format(path))
    count, = struct.unpack_from('<I', buffer, 0)
    offset = 4
    state = OrderedDict()
    for _ in range(count):
        if len(buffer) < offset + 4:
            raise SnapshotError('State file "{}" is truncated'.format(path))
        key_length, = struct.unpack_from('<I', buffer, offset)
        offset += 4
        key = buffer[offset:offset + key_length]
        if len(key) != key_length:
            raise SnapshotError('State file "{}" is truncated inside a key'.format(path))
        offset += key_length
        state[key.decode('utf-8')], offset = decode_record(buffer, offset)
    if offset != len(buffer):
        raise SnapshotError('State file "{}" has {} trailing bytes'.format(path, len(buffer) - offset))
    return state
