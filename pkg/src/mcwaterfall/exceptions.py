"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A parameter or configuration value is outside its admissible range."""


class GradientError(RuntimeError):
    """The backward sweep hit a non-finite adjoint or an invalid request."""


class WaterfallError(RuntimeError):
    """The priority-of-payments state machine received invalid cash or state."""


class PricingError(RuntimeError):
    """Path-level valuation failed (non-finite present value, bad mode)."""


class MetricsError(RuntimeError):
    """A metric root could not be bracketed or solved."""
