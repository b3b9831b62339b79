"""Exception types raised across the package."""


class DriftnetError(Exception):
    pass


class ConstraintViolation(DriftnetError, ValueError):
    """Sampling design or argument outside the admissible range."""


class SimulationExplosion(DriftnetError, RuntimeError):
    def __init__(self, step: int, message: str = ""):
        self.step = int(step)
        super().__init__(message or f"state left the admissible region at observation step {step}")


class ClassViolation(DriftnetError, ValueError):
    """Composition-class parameters are inconsistent."""


class NetworkConstraintError(DriftnetError, ValueError):
    """Network parameters violate the magnitude or sparsity constraint."""


class InfeasibleArchitecture(DriftnetError, ValueError):
    def __init__(self, condition: str, message: str):
        self.condition = condition
        super().__init__(message)


class ConfigError(DriftnetError, ValueError):
    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
