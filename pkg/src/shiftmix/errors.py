"""Exception hierarchy. The CLI maps each family to an exit code."""


class ShiftmixError(Exception):
    exit_code = 1


class ConfigurationError(ShiftmixError):
    exit_code = 1


class DataError(ShiftmixError):
    exit_code = 2


class DegenerateDataError(DataError):
    pass


class NumericError(ShiftmixError):
    exit_code = 3

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class PositivityError(NumericError):
    pass


class CandidateFailures(ShiftmixError):
    """Every candidate in a learner grid failed to fit."""

    exit_code = 3

    def __init__(self, failures):
        self.failures = dict(failures)
        lines = [f"{name}: {err}" for name, err in self.failures.items()]
        super().__init__("all candidates failed:\n  " + "\n  ".join(lines))
