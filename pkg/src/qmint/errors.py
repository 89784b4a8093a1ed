"""Exception hierarchy shared by every qmint module."""


class QMintError(Exception):
    pass


class CapacityExceeded(QMintError, ValueError):
    pass


class BadTargets(QMintError, ValueError):
    pass


class DimensionMismatch(QMintError, ValueError):
    pass


class BadProbability(QMintError, ValueError):
    pass


class OutsideCodeSpace(QMintError, ValueError):
    pass


class UnknownDenomination(QMintError, ValueError):
    pass


class DuplicateSerial(QMintError):
    pass


class BadTag(QMintError):
    pass


class DeadNote(QMintError):
    pass


class UnknownSerial(QMintError, KeyError):
    pass


class NonPositiveDuration(QMintError, ValueError):
    pass


class OrthogonalPostSelection(QMintError, ZeroDivisionError):
    pass


class TooFewTrials(QMintError, ValueError):
    pass


class PairTooNoisy(QMintError):
    pass


class WrongPhase(QMintError):
    pass


class SessionMismatch(QMintError):
    pass


class BadTopology(QMintError):
    pass


class MissingHalf(QMintError):
    pass


class WrongRegime(QMintError):
    pass


class UnorderedLog(QMintError, ValueError):
    pass


class MissingArtifacts(QMintError, FileNotFoundError):
    pass


class InvariantViolation(QMintError, AssertionError):
    pass


class ScenarioInvalid(QMintError, ValueError):
    """Scenario failed validation. ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
