"""Exception hierarchy.

Every error carries a module-qualified ``code`` so the CLI can map it to an
exit status. :class:`HypothesisFailure` marks inputs on which a mathematical
hypothesis does not hold (recurrent walk, no isoperimetric gap, ...); it is an
expected negative result, not a software fault.
"""


class FloydWalkError(Exception):
    code = "floydwalk.error"

    def __init__(self, message, code=None, evidence=None):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.evidence = evidence


class HypothesisFailure(FloydWalkError):
    code = "floydwalk.hypothesis"


class CapExceeded(FloydWalkError):
    code = "graph_core.cap_exceeded"


class InvalidVertex(FloydWalkError):
    code = "graph_core.invalid_vertex"


class RangeError(FloydWalkError):
    code = "floyd_metric.range"


class AxiomViolation(FloydWalkError):
    code = "floyd_metric.axiom_violation"


class TransienceRequired(HypothesisFailure):
    code = "green_spectral.transience_required"


class NotConverged(FloydWalkError):
    code = "green_spectral.not_converged"


class ConfigError(FloydWalkError):
    code = "cli_io.config"
