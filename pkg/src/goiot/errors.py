"""Exception hierarchy shared by every module.

Each exception carries a ``category`` string; the CLI maps categories to exit codes.
"""


class GoIoTError(Exception):
    category = "error"


class InfeasiblePower(GoIoTError):
    category = "infeasible"


class ZeroGain(GoIoTError):
    category = "infeasible"


class EmptyActionSpace(GoIoTError):
    category = "solver"


class TraceTooShort(GoIoTError):
    category = "diagnostic"


class SubspaceTooLarge(GoIoTError):
    category = "config"


class RankDeficient(GoIoTError):
    category = "infeasible"


class Infeasible(GoIoTError):
    category = "infeasible"


class InfeasibleAction(GoIoTError):
    category = "infeasible"


class EmptySelection(GoIoTError):
    category = "solver"


class ConfigInvalid(GoIoTError):
    category = "config"


class ScenarioError(GoIoTError):
    """Wraps a failure raised inside the slot loop, with the slot index attached."""

    category = "scenario"

    def __init__(self, slot: int, cause: Exception):
        self.slot = slot
        self.cause = cause
        super().__init__(f"slot {slot}: {type(cause).__name__}: {cause}")
