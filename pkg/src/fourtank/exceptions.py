"""Exception hierarchy shared by the package.

Every class carries an ``exit_code`` so the command line can map a failure
to a stable process status.
"""


class FourTankError(Exception):
    exit_code = 1


class InvalidInputError(FourTankError, ValueError):
    exit_code = 5


class DomainError(FourTankError, ValueError):
    exit_code = 5


class OverflowEquilibriumError(FourTankError):
    exit_code = 5

    def __init__(self, tank, level, height):
        self.tank = tank
        self.level = level
        self.height = height
        super().__init__(
            f"equilibrium level of tank {tank} is {level:.4g} cm, above the {height:g} cm tank height"
        )


class SynthesisError(FourTankError):
    exit_code = 6


class UncontrollableModeError(SynthesisError):
    def __init__(self, pole):
        self.pole = pole
        super().__init__(f"mode at {pole} is not controllable")


class IllConditionedError(SynthesisError):
    def __init__(self, cond, threshold):
        self.cond = cond
        super().__init__(f"eigenvector matrix condition number {cond:.3g} exceeds {threshold:.3g}")


class MultiplicityError(SynthesisError):
    pass


class IntegrationBlowupError(FourTankError):
    exit_code = 7

    def __init__(self, message, state=None):
        self.state = state
        super().__init__(message)


class ConfigError(FourTankError):
    exit_code = 3


class ScenarioNotFoundError(ConfigError):
    exit_code = 3


class ScenarioParseError(ConfigError):
    exit_code = 4


class ScenarioValidationError(ConfigError):
    exit_code = 5

    def __init__(self, field, message):
        self.field = field
        super().__init__(message if message.startswith(f"{field}:") else f"{field}: {message}")


class ComparisonError(FourTankError):
    exit_code = 8
