class ConvertError(Exception):
    """Base class for conversion failures."""


class UnsupportedSource(ConvertError):
    """The source kind/extension is not one this tool understands."""


class CorruptArchive(ConvertError):
    """The source exists but its contents are unusable."""
