"""Exception hierarchy. Everything raised on bad input derives from ``ShadowlabError``."""


class ShadowlabError(Exception):
    pass


class InvalidWindowError(ShadowlabError, ValueError):
    pass


class ResolutionError(ShadowlabError, ValueError):
    """A coordinate outside the stored window was requested."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class IncomparablePointsError(ShadowlabError, ValueError):
    pass


class InvalidRadiusError(ShadowlabError, ValueError):
    pass


class InvalidTableError(ShadowlabError, ValueError):
    pass


class DepthTooSmallError(ShadowlabError, ValueError):
    def __init__(self, message, pattern=None):
        super().__init__(message)
        self.pattern = pattern


class CorruptedTrajectoryError(ShadowlabError, ValueError):
    pass


class DegenerateInstanceError(ShadowlabError, ValueError):
    pass


class InvalidParameterError(ShadowlabError, ValueError):
    pass


class BudgetError(ShadowlabError, RuntimeError):
    pass


class ConfigError(ShadowlabError, ValueError):
    """Malformed experiment configuration; ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        self.message = message
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(loc + message)
