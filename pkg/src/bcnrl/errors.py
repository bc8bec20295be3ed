"""Exception taxonomy shared across the package."""


class BcnrlError(Exception):
    """Base class for all package errors."""


class ConfigError(BcnrlError, ValueError):
    """Invalid configuration: bad shapes, out-of-range hyperparameters, unknown keys."""


class NumericalError(BcnrlError, ArithmeticError):
    """A computed quantity is not finite where finiteness is required."""


class DivergenceError(BcnrlError, RuntimeError):
    """Training aborted because the critic loss crossed the divergence ceiling."""

    def __init__(self, step: int, critic_loss: float, message: str = ""):
        self.step = step
        self.critic_loss = critic_loss
        detail = message or f"critic loss {critic_loss:.3e} exceeded ceiling at step {step}"
        super().__init__(detail)


class EmptySourceError(BcnrlError, RuntimeError):
    """Sampling was requested from an empty dataset or replay buffer."""
