"""Exception types shared by the solvers and the CLI exit-code mapping."""


class HabitatError(Exception):
    """Base class for library errors."""


class ConfigError(HabitatError, ValueError):
    """Invalid input or configuration (CLI exit code 1)."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class CFLError(HabitatError, ValueError):
    """Time step violates the stability bound."""


class NumericalError(HabitatError, RuntimeError):
    """NaN/inf, failed bracketing or non-convergence (CLI exit code 2)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class AuditFailure(HabitatError, AssertionError):
    """A property audit did not pass (CLI exit code 3)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
