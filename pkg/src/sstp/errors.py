"""Exception types shared across the pipeline.

The CLI maps UsageError to exit code 2 and every other SstpError to exit
code 3; library callers can catch the subclasses they care about.
"""


class SstpError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(SstpError):
    """Bad flags or arguments (CLI exit code 2)."""


class DataFormatError(SstpError):
    """Malformed input file (parse errors carry a line number or offset)."""


class HorizonMismatchError(SstpError):
    """Scene horizons do not match the dataset or model configuration."""


class ContractError(SstpError):
    """A module precondition was violated (budget, membership, dimensions)."""


class NumericsError(SstpError):
    """Non-finite values where finite ones are required."""
