"""Exception hierarchy. Every error carries a machine-readable ``code``."""


class DampwaveError(Exception):
    code = "ERROR"
    module = "dampwave"

    def to_dict(self):
        return {"error": self.code, "module": self.module, "message": str(self)}


class SpecInvalid(DampwaveError, ValueError):
    code = "SPEC_INVALID"
    module = "exterior-domain"


class GeometryDegenerate(DampwaveError):
    code = "GEOMETRY_DEGENERATE"
    module = "ray-gcc"


class Blowup(DampwaveError, FloatingPointError):
    code = "BLOWUP"
    module = "wave-solver"


class ShapeMismatch(DampwaveError, ValueError):
    code = "SHAPE_MISMATCH"
    module = "wave-solver"


class RadiusOutOfRange(DampwaveError, ValueError):
    code = "RADIUS_OUT_OF_RANGE"
    module = "energy-metrics"


class NonpositiveData(DampwaveError, ValueError):
    code = "NONPOSITIVE_DATA"
    module = "energy-metrics"


class HypothesisViolated(DampwaveError, ValueError):
    code = "HYPOTHESIS_VIOLATED"
    module = "energy-metrics"


class SolverStagnated(DampwaveError, RuntimeError):
    code = "SOLVER_STAGNATED"
    module = "resolvent-lab"


class ParseError(DampwaveError, ValueError):
    code = "PARSE_ERROR"
    module = "cli-harness"

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line

    def to_dict(self):
        d = super().to_dict()
        d["line"] = self.line
        return d


class ValidationError(DampwaveError, ValueError):
    code = "VALIDATION_ERROR"
    module = "cli-harness"

    def __init__(self, field, message=""):
        super().__init__(f"{field}: {message}" if message else field)
        self.field = field

    def to_dict(self):
        d = super().to_dict()
        d["field"] = self.field
        return d


class PlotError(DampwaveError, ValueError):
    code = "PLOT_ERROR"
    module = "cli-harness"
