"""Exception hierarchy shared by every streambayes module."""


class StreamBayesError(Exception):
    """Base class for all library errors."""


class ValidationError(StreamBayesError):
    """A model failed structural or parametric validation."""

    def __init__(self, report):
        super().__init__(str(report))
        self.report = report


class StructureError(ValidationError):
    """Invalid graph structure (cycles, CLG violations, bad temporal edges)."""

    def __init__(self, message, report=None):
        StreamBayesError.__init__(self, message)
        self.report = report


class InvalidParameter(StreamBayesError):
    pass


class MissingValue(StreamBayesError):
    def __init__(self, variable):
        super().__init__(f"no value assigned to variable {variable!r}")
        self.variable = variable


class UnknownVariable(StreamBayesError, KeyError):
    def __init__(self, name):
        StreamBayesError.__init__(self, f"unknown variable {name!r}")
        self.name = name

    def __str__(self):
        return self.args[0]


class ParseError(StreamBayesError):
    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class SchemaError(StreamBayesError):
    pass


class OrderError(StreamBayesError):
    pass


class AttributeTypeError(StreamBayesError, TypeError):
    """A value or attribute has the wrong state-space type."""


class DomainError(StreamBayesError, ValueError):
    pass


class ConjugacyError(StreamBayesError):
    pass


class NumericalError(StreamBayesError, ArithmeticError):
    pass


class DegenerateEvidence(NumericalError):
    """Evidence has zero probability under the model."""


class TooLarge(StreamBayesError):
    pass


class ConfigError(StreamBayesError, ValueError):
    pass


class EmptyModel(StreamBayesError):
    pass


class UndefinedVarianceMean(NumericalError):
    pass
