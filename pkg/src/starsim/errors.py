"""Exception hierarchy shared by every starsim module."""


class StarSimError(Exception):
    """Base class for all starsim errors."""


class SingularImpedance(StarSimError, ZeroDivisionError):
    """A load-impedance denominator vanishes."""


class NotRealizable(StarSimError, ValueError):
    """Impedances are not purely imaginary (not passive lossless)."""


class ProtocolMismatch(StarSimError, ValueError):
    """Coefficients or configuration violate the operating protocol."""


class InvalidWavelength(StarSimError, ValueError):
    pass


class LengthMismatch(StarSimError, ValueError):
    pass


class InfeasibleTargets(StarSimError):
    """The SINR targets cannot be met within the configured power cap."""


class ScenarioMismatch(StarSimError, ValueError):
    """A solver was called on a problem shape it does not support."""


class DegenerateChannel(StarSimError, ValueError):
    pass


class ConfigError(StarSimError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ValidationError(ConfigError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
