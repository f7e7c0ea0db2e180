"""Exception types shared across the package."""


class AbcdeError(Exception):
    """Base class for every error raised by this package."""


class FormatError(AbcdeError):
    """Input file or record is malformed."""


class DuplicateItem(AbcdeError):
    """An item_id appears more than once in a dataset."""


class InvalidWeight(AbcdeError):
    """A weight is missing, non-positive, or non-finite."""


class MissingAssignment(AbcdeError):
    """An item lacks a baseline or experiment cluster id."""


class EmptyPopulation(AbcdeError):
    """No items remain after loading or restriction."""


class KeyMismatch(AbcdeError):
    """Two maps that must cover the same ids do not."""


class NotFound(AbcdeError):
    """Unknown item or cluster id."""


class EmptySlice(AbcdeError):
    """A set operation received an empty item set."""


class EmptySample(AbcdeError):
    """An estimator received an empty sample."""


class NoDiff(AbcdeError):
    """The two clusterings are identical; there is nothing to sample."""


class NotInPopulation(AbcdeError):
    """A requested pair is outside the pair population."""


class NoJudgements(AbcdeError):
    """No judged pairs are available for estimation."""


class UnknownTask(AbcdeError):
    """A judgement references a task id that was never exported."""


class StaleArtifact(AbcdeError):
    """A run artifact no longer matches the recorded hash of its inputs."""
