"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: noise spec, system parameters, experiment file."""


class RangeError(OverflowError):
    """A driver offset or absolute index left the signed 64-bit range."""


class DivergenceError(ArithmeticError):
    """A trajectory escaped the representable range of an unclamped system."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"trajectory diverged at step {step}")


class ScheduleInfeasible(RuntimeError):
    """No time on the search grid satisfies the schedule bounds at a level."""

    def __init__(self, level, message=None):
        self.level = level
        super().__init__(message or f"schedule infeasible at level n={level}")


class WeakConstructionUnstable(RuntimeError):
    """The nesting index j0 was not found inside the construction window."""

    def __init__(self, window, message=None):
        self.window = window
        super().__init__(message or f"no nesting index j0 within window {window}")
