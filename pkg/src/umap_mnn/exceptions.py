"""Exception hierarchy shared by loaders, graph stages and the CLI."""


class UmapMnnError(Exception):
    """Base class for all package errors."""


class DataError(UmapMnnError):
    """Input data could not be read or is inconsistent."""


class FormatError(DataError):
    """A file does not follow its declared on-disk format."""


class ConsistencyError(DataError):
    """Two inputs disagree, e.g. image and label counts differ."""


class NumericalError(UmapMnnError):
    """A numerical routine produced non-finite values."""
