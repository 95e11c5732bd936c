class SelfPlayError(Exception):
    """Base class for every error raised by this package."""


class TerminalState(SelfPlayError):
    pass


class NotTerminal(SelfPlayError):
    pass


class InactiveRole(SelfPlayError):
    pass


class AlphabetMismatch(SelfPlayError):
    pass


class UnknownGame(SelfPlayError):
    pass


class IllegalPosition(SelfPlayError):
    pass


class NonTerminalHistory(SelfPlayError):
    pass


class EmptyLegalSet(SelfPlayError):
    pass


class ZeroProbabilityAction(SelfPlayError):
    pass


class MissingAdvantage(SelfPlayError):
    pass


class SnapshotMismatch(SelfPlayError):
    pass


class NonFiniteGradient(SelfPlayError):
    pass


class TrainingAborted(SelfPlayError):
    pass


class UnknownScript(SelfPlayError):
    pass


class GameTooLarge(SelfPlayError):
    pass


class ConfigError(SelfPlayError):
    pass


class ReplayDivergence(SelfPlayError):
    def __init__(self, message, trajectory_index=None, turn=None):
        super().__init__(message)
        self.trajectory_index = trajectory_index
        self.turn = turn
