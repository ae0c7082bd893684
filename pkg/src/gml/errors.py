"""Exception hierarchy shared by every module."""


class GMLError(Exception):
    """Base class for all package errors."""


class DimensionError(GMLError, ValueError):
    pass


class ParameterError(GMLError, ValueError):
    pass


class DomainError(GMLError, ValueError):
    pass


class NumericError(GMLError, ArithmeticError):
    pass


class DatasetError(GMLError):
    pass


class ParseError(DatasetError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class ConfigError(GMLError, ValueError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
