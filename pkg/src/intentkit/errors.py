"""Toolkit exception hierarchy, mapped to CLI exit codes."""


class ToolkitError(Exception):
    """Base class; subclasses pin the process exit code and error category."""

    exit_code = 1
    category = "error"


class UsageError(ToolkitError):
    exit_code = 2
    category = "usage"


class ConfigError(ToolkitError):
    exit_code = 3
    category = "config"


class NetworkError(ToolkitError):
    exit_code = 4
    category = "network"


class DataFormatError(ToolkitError):
    exit_code = 5
    category = "data-format"


class BudgetExhaustedError(ToolkitError):
    exit_code = 6
    category = "budget-exhausted"
