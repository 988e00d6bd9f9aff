"""Exception hierarchy shared by all modules."""


class GraphFlowError(Exception):
    pass


class DomainError(GraphFlowError, ValueError):
    """A point lies outside the chart domain it was given in."""


class HypothesisError(GraphFlowError, ValueError):
    pass


class ConfigurationError(GraphFlowError, ValueError):
    """Invalid run configuration. ``violations`` holds (key, message) pairs."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [("", violations)]
        self.violations = list(violations)
        msg = "; ".join(f"{k}: {m}" if k else m for k, m in self.violations)
        super().__init__(msg)


class ChartEscapeError(GraphFlowError):
    """A field value left the domain of the chart it has to be expressed in."""


class NumericalError(GraphFlowError, ArithmeticError):
    pass


class SingularitySuspected(GraphFlowError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
