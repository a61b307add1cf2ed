class NonlocalLabError(Exception):
    exit_code: int = 1


class UsageError(NonlocalLabError):
    """Unknown protocol, audit or state name, or a malformed spec/config line."""
    exit_code = 2


class PreconditionError(NonlocalLabError):
    """Inputs violate an operation's stated preconditions."""
    exit_code = 3


class ResourceExhausted(NonlocalLabError):
    """An ebit pool (or branch budget) ran dry."""
    exit_code = 4


class InvariantBreach(NonlocalLabError):
    """Something that cannot happen by construction happened."""
    exit_code = 5


class OutputError(NonlocalLabError):
    """An artifact could not be written."""
    exit_code = 6
