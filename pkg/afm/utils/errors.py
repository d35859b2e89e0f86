"""Exception hierarchy shared by the library, the CLI and the HTTP app.

Each error carries the process exit code the CLI reports for it:
1 usage/config, 2 data, 3 numerical failure.
"""


class AFMError(Exception):
    exit_code = 1


# usage / config

class ConfigError(AFMError, ValueError):
    exit_code = 1


class InvalidDimensionError(ConfigError):
    pass


class InvalidRankError(ConfigError):
    pass


class NonstationaryError(ConfigError):
    pass


class DomainError(ConfigError):
    pass


class ShapeError(ConfigError):
    pass


# data

class DataError(AFMError, ValueError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, path, message, row=None, column=None):
        self.path = str(path)
        self.row = row
        self.column = column
        where = ""
        if row is not None:
            where += f", row {row}"
        if column is not None:
            where += f", column {column}"
        super().__init__(f"{self.path}{where}: {message}")


class AlignmentUndefinedError(DataError):
    pass


class DegenerateSeriesError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class TransformError(DataError):
    pass


# numerical

class NumericalError(AFMError, ArithmeticError):
    exit_code = 3


class SingularityError(NumericalError):
    pass


class DivergenceError(NumericalError):
    pass
