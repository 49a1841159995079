"""Exception types shared across the package.

Each maps onto one CLI exit code: configuration problems exit with 2,
numerical faults with 3 and resource budget violations with 4.
"""


class NTKSpectraError(Exception):
    exit_code = 1


class ConfigError(NTKSpectraError, ValueError):
    exit_code = 2


class NumericalFault(NTKSpectraError, ArithmeticError):
    exit_code = 3


class BudgetExceeded(NTKSpectraError, MemoryError):
    exit_code = 4
