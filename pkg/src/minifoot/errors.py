"""Exception types shared across the package."""


class MiniFootError(Exception):
    """Base class for all package errors."""


class ConfigError(MiniFootError, ValueError):
    """Invalid configuration value or unknown configuration key."""


class ContractError(MiniFootError, ValueError):
    """A caller violated an operation's precondition."""


class TrainingError(MiniFootError, RuntimeError):
    """Training produced non-finite values or otherwise diverged."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class CheckpointError(MiniFootError, RuntimeError):
    """A checkpoint is missing, corrupted or has the wrong architecture."""


class ReplayParseError(MiniFootError, ValueError):
    """A replay file could not be parsed."""

    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line
        self.path = path
