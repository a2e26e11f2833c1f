"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    pass


class InvalidConfigError(ValueError):
    pass


class NumericalError(ArithmeticError):
    pass


class FormatError(ValueError):
    pass


class UndefinedMetricError(ValueError):
    pass
