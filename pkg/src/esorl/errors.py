"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or inconsistent dimensions."""


class DivergenceError(RuntimeError):
    """A simulated signal became non-finite or left its sanity envelope."""

    def __init__(self, message, t=None, stage=None):
        super().__init__(message)
        self.t = t
        self.stage = stage
