"""Exception hierarchy shared by all modules.

The CLI maps :class:`UsageError` to exit status 2 and every other
:class:`PhonotypoError` to exit status 1.
"""


class PhonotypoError(Exception):
    """Base class for domain errors."""

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class UsageError(PhonotypoError, ValueError):
    """Invalid arguments or options supplied by the caller."""


class ParseError(PhonotypoError):
    """Malformed database or stream input."""


class ConflictError(ParseError):
    """One glyph ingested with two different feature vectors."""

    def __init__(self, glyph, first, second, inventories=()):
        self.glyph = glyph
        self.first = tuple(first)
        self.second = tuple(second)
        self.inventories = tuple(inventories)
        super().__init__(
            f"conflicting feature vectors for {glyph!r} "
            f"(inventories {', '.join(self.inventories)}): "
            f"{' '.join(self.first)} vs {' '.join(self.second)}"
        )

    def to_dict(self):
        d = super().to_dict()
        d.update(glyph=self.glyph, first=list(self.first), second=list(self.second))
        return d


class SegmentNotFound(PhonotypoError, KeyError):
    """Lookup of a glyph that is not in the segment table."""

    def __init__(self, normalized):
        self.normalized = normalized
        super().__init__(normalized)

    def __str__(self):
        return f"unknown segment {self.normalized!r}"


class DimensionError(PhonotypoError, ValueError):
    """Vectors or arrays of incompatible length."""


class EmptyDatasetError(PhonotypoError):
    """A contrast scope selects no usable instances."""


class DegenerateDataError(PhonotypoError):
    """Training data with a single class."""


class InfeasibleError(PhonotypoError):
    """A lattice admits no valid labeling."""
