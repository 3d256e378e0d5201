"""Exception hierarchy shared by all psmall modules."""


class PsmallError(Exception):
    """Base class for every error raised by this package."""


class GroundSetMismatchError(PsmallError, ValueError):
    """Two set-valued arguments live on different ground sets."""


class GuardLimitError(PsmallError, ValueError):
    """An exact enumeration was requested beyond its configured guard limits."""


class NotBadError(PsmallError, ValueError):
    """A badness-threshold computation was attempted for a pair without the
    defining sign change (the set is not bad for the family)."""


class PreconditionError(PsmallError, ValueError):
    """A discretization or build precondition failed; the message names the
    violated bound."""


class HypothesisError(PsmallError, ValueError):
    """A verification was attempted on inputs violating the theorem-style
    hypothesis it assumes (e.g. the family is p-small after all)."""


class StageBudgetError(PsmallError, ValueError):
    """A certificate stage exceeded its probability budget.

    ``stage`` names the offending stage so campaign reports can point at it.
    """

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage '{stage}': {message}")


class InstanceParseError(PsmallError, ValueError):
    """A structured-text instance or certificate file failed to parse."""

    def __init__(self, path: str, line_no: int, message: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")
