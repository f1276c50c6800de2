"""On-disk artifacts: field files, CSV exports and grayscale maps."""

from .field_file import export_csv, read_field, write_field
from .images import read_scale, shared_scale, write_pgm

__all__ = ["export_csv", "read_field", "read_scale", "shared_scale", "write_field", "write_pgm"]
