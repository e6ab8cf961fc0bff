"""Exception types shared across the toolkit."""


class GridReconfError(Exception):
    """Base class for all gridreconf errors."""


class InvalidLine(GridReconfError):
    """A referenced line does not exist in the network."""


class NotRadial(GridReconfError):
    """An operation required a radial configuration and got a non-radial one."""


class TooLarge(GridReconfError):
    """Exhaustive enumeration was refused because the search space exceeds the cap."""


class EmptyProfile(GridReconfError):
    """Scenario generation was given an empty load-profile table."""


class TemplateMissingSlot(GridReconfError):
    """A prompt template lacks a placeholder required by the sample fields."""


class ZeroPredictedLines(GridReconfError):
    """A response predicted no open lines, so per-line scaling is undefined."""


class EndpointError(GridReconfError):
    """A request to an inference endpoint failed after retries."""
