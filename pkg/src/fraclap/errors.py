"""Exception hierarchy shared by all fraclap modules.

Every error carries a short machine-readable ``code`` so the CLI can emit
an error record without string matching.
"""


class FracLapError(Exception):
    code = "FracLapError"

    def to_record(self):
        return {"error": self.code, "message": str(self)}


class TriangleViolation(FracLapError):
    code = "TriangleViolation"


class NonSymmetric(FracLapError):
    code = "NonSymmetric"


class NonPositiveMass(FracLapError):
    code = "NonPositiveMass"


class EmptySpace(FracLapError):
    code = "EmptySpace"


class DisconnectedFilling(FracLapError):
    code = "DisconnectedFilling"


class ParamMismatch(FracLapError):
    code = "ParamMismatch"


class IncompatibleData(FracLapError):
    code = "IncompatibleData"


class NonConvergence(FracLapError):
    code = "NonConvergence"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConstantInput(FracLapError):
    code = "ConstantInput"


class NegativeValues(FracLapError):
    code = "NegativeValues"


class DegenerateSpectrum(FracLapError):
    code = "DegenerateSpectrum"


class RadiusOutOfRange(FracLapError):
    code = "RadiusOutOfRange"


class UnknownFixture(FracLapError):
    code = "UnknownFixture"


class ConfigError(FracLapError):
    code = "ConfigError"
