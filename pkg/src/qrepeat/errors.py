"""Exception types shared across the package."""


class QRepeatError(Exception):
    """Base class for all errors raised by qrepeat."""


class DimensionError(QRepeatError, ValueError):
    pass


class StateError(QRepeatError, ValueError):
    """A density matrix violates trace, Hermiticity or positivity bounds."""


class NotHermitianError(QRepeatError, ValueError):
    pass


class NotUnitaryError(QRepeatError, ValueError):
    pass


class WindowError(QRepeatError, ValueError):
    """More steps were requested than the retained chain window supports."""


class IllConditionedKernel(QRepeatError, ArithmeticError):
    """``I - K`` is (numerically) not invertible at some step."""

    def __init__(self, step: int, condition: float, threshold: float):
        self.step = step
        self.condition = condition
        self.threshold = threshold
        super().__init__(
            f"memory kernel at step {step} is ill-conditioned: "
            f"cond(I - K) ~ {condition:.3e} exceeds {threshold:.3e}"
        )


class DegenerateObservable(QRepeatError, ValueError):
    """The observable has an eigenprojector of rank > 1 where rank one is required."""


class MeasurementError(QRepeatError, ArithmeticError):
    pass


class ConfigError(QRepeatError, ValueError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
