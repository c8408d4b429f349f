"""Exception hierarchy. Each class carries the process exit code used by the CLI."""


class CoughError(Exception):
    exit_code = 1


class ConfigError(CoughError, ValueError):
    exit_code = 2


class SchemaError(CoughError, ValueError):
    exit_code = 3


class IntegrityError(SchemaError):
    pass


class DataError(CoughError, ValueError):
    exit_code = 4


class DecodeError(DataError):
    pass


class UnsupportedFormatError(DecodeError):
    pass


class TooShortError(DataError):
    pass


class UndefinedAUCError(DataError):
    pass


class LayoutError(DataError):
    pass


class LeakageError(CoughError, RuntimeError):
    exit_code = 5


class NotFittedError(CoughError, RuntimeError):
    exit_code = 5
