"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class RuleTagError(Exception):
    exit_code = 1


class ConfigError(RuleTagError, ValueError):
    exit_code = 1


class DataError(RuleTagError, ValueError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class NumericError(RuleTagError, ArithmeticError):
    exit_code = 3
