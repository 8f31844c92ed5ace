import os
from dataclasses import dataclass, field

from .errors import ConvertError

SOURCE_KINDS = ("amass", "dip", "totalcapture")


@dataclass
class ConversionManifest:
    """What to convert and where to put it.

    framerate overrides the source's rate when the source does not record
    one; subset/subject tags flow into catalog.json so the split protocol
    can act on them.
    """

    source: str
    kind: str
    out_dir: str
    framerate: float = None
    subset: str = ""
    subject: str = ""
    recalibrate: bool = False
    force: bool = False
    extra_tags: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ConvertError(f"unknown source kind {self.kind!r}; expected one of {SOURCE_KINDS}")

    def check_output_dir(self):
        if os.path.isdir(self.out_dir) and os.listdir(self.out_dir) and not self.force:
            raise ConvertError(f"{self.out_dir} is not empty (use --force to overwrite)")
