"""8-bit grayscale maps (binary PGM) with a sidecar scale record."""

import logging
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from ..error_handling import FieldIOError, InputError, UnsupportedDimension
from ..fields import ScalarField
from ..models import ScaleRecord

logger = logging.getLogger(__name__)

# Half-width added to a degenerate (constant) auto range.
RANGE_GUARD = 1e-12


def scale_path(path: Path) -> Path:
    return path.with_suffix(".scale")


def quantize(values: NDArray[np.float64], scale: ScaleRecord) -> NDArray[np.uint8]:
    """Linear map of [lo, hi] onto gray levels 0..255."""
    levels = np.rint((values - scale.lo) / (scale.hi - scale.lo) * 255.0)
    return np.clip(levels, 0, 255).astype(np.uint8)


def auto_scale(field: ScalarField) -> ScaleRecord:
    lo, hi = float(field.values.min()), float(field.values.max())
    if hi - lo <= 0.0:
        guard = RANGE_GUARD * max(1.0, abs(lo))
        lo, hi = lo - guard, hi + guard
    return ScaleRecord(lo=lo, hi=hi)


def write_pgm(
    field: ScalarField, path: Path | str, value_range: ScaleRecord | tuple[float, float] | None = None
) -> ScaleRecord:
    """Write a P5 image (x to the right, y up) and its `.scale` sidecar; returns the range used."""
    if field.grid.dim != 2:
        raise UnsupportedDimension("Grayscale maps are 2D only")
    if value_range is None:
        scale = auto_scale(field)
    elif isinstance(value_range, ScaleRecord):
        scale = value_range
    else:
        scale = ScaleRecord(lo=value_range[0], hi=value_range[1])
    if not scale.hi > scale.lo:
        raise InputError(f"Empty gray-level range ({scale.lo}, {scale.hi})")

    if value_range is None and np.ptp(field.values) == 0.0:
        # constant field under its own guarded range
        image = np.full(field.values.T.shape, 128, dtype=np.uint8)
    else:
        image = quantize(field.values, scale).T[::-1]
    height, width = image.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + image.tobytes())
    scale_path(path).write_text(f"lo = {scale.lo!r}\nhi = {scale.hi!r}\n", encoding="utf-8")
    logger.debug(f"Wrote {width}x{height} map to {path} (range {scale.lo:.6g}..{scale.hi:.6g})")
    return scale


def read_scale(path: Path | str) -> ScaleRecord:
    """Read the sidecar written next to an image (accepts the image or the sidecar path)."""
    path = Path(path)
    sidecar = path if path.suffix == ".scale" else scale_path(path)
    entries = {}
    for line in sidecar.read_text(encoding="utf-8").splitlines():
        key, sep, value = line.partition("=")
        if sep:
            entries[key.strip()] = value.strip()
    try:
        return ScaleRecord(lo=float(entries["lo"]), hi=float(entries["hi"]))
    except (KeyError, ValueError) as e:
        raise FieldIOError(f"Malformed scale record {sidecar}: {e}") from e


def shared_scale(*fields: ScalarField) -> ScaleRecord:
    """One range covering every field, so their images compare directly."""
    scales = [auto_scale(f) for f in fields]
    return ScaleRecord(lo=min(s.lo for s in scales), hi=max(s.hi for s in scales))
