"""Exception hierarchy shared by every stage of the simulator."""


class NfdmError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(NfdmError, ValueError):
    """Invalid or inconsistent parameters (grids, physical constants, configs)."""


class NumericalError(NfdmError, ArithmeticError):
    """A numerical stage produced unusable values."""


class NumericalOverflowError(NumericalError):
    def __init__(self, index: int, message: str = "non-finite scattering data"):
        self.index = index
        super().__init__(f"{message} at spectral index {index}")


class NearZeroDenominatorError(NumericalError):
    def __init__(self, index: int, value: float, floor: float):
        self.index = index
        self.value = value
        super().__init__(
            f"|a| = {value:.3e} below floor {floor:.1e} at spectral index {index} "
            "(discrete eigenvalue or numerical failure)"
        )


class LayerPeelingError(NumericalError):
    def __init__(self, time_index: int, value: float, floor: float):
        self.time_index = time_index
        super().__init__(
            f"layer peeling broke down at time index {time_index}: "
            f"|A[k+1, 0]| = {value:.3e} < {floor:.1e}"
        )


class DivergenceError(NumericalError):
    def __init__(self, position: float):
        self.position = position
        super().__init__(f"field became non-finite at z = {position:.6g} m")


class DomainError(NumericalError, ValueError):
    """A value lies outside the domain of an invertible map."""


class FramingError(NfdmError, ValueError):
    """Bit/symbol/sample counts do not fit the configured framing."""


class IllConditionedTrainingError(NumericalError):
    """Least-squares equalizer training matrix is rank deficient."""


class UndefinedQError(NfdmError, ValueError):
    """Q-factor requested for a BER outside (0, 0.5)."""


class DegenerateFitError(NfdmError, ValueError):
    """Distribution fit impossible (too few or degenerate samples)."""
