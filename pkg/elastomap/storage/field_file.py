"""Binary field files (SMF1) and CSV export.

Layout, little-endian throughout:
    magic "SMF1" | version u16 | dim u8 | ncomp u8 | dim × size u32 |
    payload float64 row-major (grid axes, then components) | metadata (UTF-8 `key=value` lines)
"""

import logging
import struct
from pathlib import Path

import numpy as np

from ..error_handling import BadMagic, FieldIOError, TruncatedPayload, UnsupportedVersion
from ..fields import ScalarField, TensorField, make_grid
from ..tensor_core import mandel_size

logger = logging.getLogger(__name__)

MAGIC = b"SMF1"
VERSION = 1
_PREAMBLE = struct.Struct("<4sHBB")
_PAYLOAD_DTYPE = np.dtype("<f8")

Field = ScalarField | TensorField


def encode_field(field: Field) -> bytes:
    """Serialize a field with its metadata; the grid kind is stored as `grid=`."""
    dim = field.grid.dim
    shape = field.grid.shape
    metadata = {"grid": "periodic" if field.grid.periodic else "bounded", **field.metadata}
    lines = []
    for key, value in metadata.items():
        text = str(value)
        if "=" in key or "\n" in key or "\n" in text:
            raise FieldIOError(f"Metadata entry {key!r} cannot be stored")
        lines.append(f"{key}={text}\n")

    header = _PREAMBLE.pack(MAGIC, VERSION, dim, field.ncomp) + struct.pack(f"<{dim}I", *shape)
    payload = np.ascontiguousarray(field.values, dtype=_PAYLOAD_DTYPE).tobytes()
    return header + payload + "".join(lines).encode("utf-8")


def decode_field(data: bytes) -> Field:
    """Parse bytes produced by encode_field."""
    if len(data) < _PREAMBLE.size:
        if not MAGIC.startswith(data[:4]):
            raise BadMagic(f"Not a field file (magic {data[:4]!r})")
        raise TruncatedPayload("Header is incomplete", offset=len(data))
    magic, version, dim, ncomp = _PREAMBLE.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"Not a field file (magic {magic!r})")
    if version != VERSION:
        raise UnsupportedVersion(f"Field file version {version} (supported: {VERSION})")
    if dim not in (2, 3) or ncomp not in (1, mandel_size(dim)):
        raise FieldIOError(f"Invalid layout: dim={dim}, ncomp={ncomp}")

    offset = _PREAMBLE.size
    sizes_end = offset + 4 * dim
    if len(data) < sizes_end:
        raise TruncatedPayload("Axis sizes are incomplete", offset=len(data))
    shape = struct.unpack_from(f"<{dim}I", data, offset)
    count = int(np.prod(shape)) * ncomp
    payload_end = sizes_end + count * _PAYLOAD_DTYPE.itemsize
    if len(data) < payload_end:
        raise TruncatedPayload(
            f"Payload needs {payload_end - sizes_end} bytes, found {len(data) - sizes_end}",
            offset=len(data),
        )
    values = np.frombuffer(data, dtype=_PAYLOAD_DTYPE, count=count, offset=sizes_end)

    metadata: dict[str, str] = {}
    for line in data[payload_end:].decode("utf-8").splitlines():
        if line:
            key, _, value = line.partition("=")
            metadata[key] = value
    periodic = metadata.pop("grid", "periodic") == "periodic"
    grid = make_grid(tuple(shape), periodic)

    values = values.astype(np.float64)
    if ncomp == 1:
        return ScalarField(grid, values.reshape(shape), metadata)
    return TensorField(grid, values.reshape(*shape, ncomp), metadata)


def write_field(field: Field, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_field(field))
    logger.debug(f"Wrote {type(field).__name__} {field.grid.shape} to {path}")
    return path


def read_field(path: Path | str) -> Field:
    """Load a ScalarField or TensorField; the component count decides which."""
    path = Path(path)
    try:
        return decode_field(path.read_bytes())
    except FieldIOError as e:
        logger.error(f"Failed to read field file {path}: {e}")
        raise


def export_csv(field: Field, path: Path | str) -> Path:
    """One row per grid point: indices, then components, in `%.17g`."""
    path = Path(path)
    grid_shape = field.grid.shape
    indices = np.indices(grid_shape).reshape(len(grid_shape), -1).T
    values = field.values.reshape(indices.shape[0], -1)
    axes = ["i", "j", "k"][: len(grid_shape)]
    columns = ["value"] if field.ncomp == 1 else [f"c{a}" for a in range(field.ncomp)]
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path,
        np.hstack([indices.astype(np.float64), values]),
        fmt="%.17g",
        delimiter=",",
        header=",".join(axes + columns),
        comments="",
    )
    return path
