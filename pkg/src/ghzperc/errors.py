"""Exception types shared across the package."""


class GhzPercError(Exception):
    """Base class for all ghzperc errors."""


class InvalidDimension(GhzPercError):
    """Grid dimensions below the 2x2 minimum."""


class PartitionInfeasible(GhzPercError):
    """Consumer placement cannot support a four-region quadrant partition."""


class InvalidPartition(GhzPercError):
    """A supplied region partition fails validation."""


class UnsupportedCombination(GhzPercError):
    """Requested parameter combination is out of scope (e.g. division with k > 1)."""


class NoCrossing(GhzPercError):
    """Spanning probability never reaches 0.5 on the searched interval."""


class InvalidConfig(GhzPercError):
    """Configuration value out of domain or structurally invalid."""
