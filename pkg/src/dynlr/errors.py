"""Package-level exception types."""


class ConfigError(Exception):
    """Malformed configuration file, preset name, or parameter set."""


class NumericalError(RuntimeError):
    """Iteration became degenerate (zero denominator, divergence)."""
