"""Dataset archive converters targeting the canonical motion directory format.

Supported source kinds:

  amass          .npz array containers with SMPL pose sequences
  dip            .npz array containers with poses plus measured IMU channels
  totalcapture   whitespace text files (poses, optional IMU sidecar)

Converters write the canonical on-disk format directly (meta.json + raw
little-endian float32 blobs) plus a catalog.json that the estimation
library's split builder consumes; they talk to that library only through
those files and its command line.
"""

from .manifest import ConversionManifest
from .convert import convert
from .errors import ConvertError, CorruptArchive, UnsupportedSource

__all__ = [
    "ConversionManifest",
    "convert",
    "ConvertError",
    "CorruptArchive",
    "UnsupportedSource",
]
