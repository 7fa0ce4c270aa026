"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid physical or scenario configuration."""


class PreconditionError(ValueError):
    """A mathematical precondition of a synthesis routine does not hold."""


class SynthesisError(RuntimeError):
    """A design step could not produce valid gains."""
