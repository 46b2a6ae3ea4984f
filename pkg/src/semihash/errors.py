"""Exception hierarchy.

Every error carries a short ``code`` string so the CLI (and file loaders)
can report distinct failure kinds without string matching.
"""


class SemihashError(Exception):
    code = "error"


class ParameterError(SemihashError, ValueError):
    code = "parameter"


class ConfigError(ParameterError):
    code = "config"


class DimensionError(SemihashError, ValueError):
    code = "dimension"


class InvalidLabelError(SemihashError, ValueError):
    code = "invalid-label"


class NumericError(SemihashError, ArithmeticError):
    code = "numeric"


class DivergenceError(NumericError):
    code = "divergence"

    def __init__(self, stage, iteration, value=float("nan")):
        self.stage = stage
        self.iteration = iteration
        self.value = value
        super().__init__(
            f"{stage}: objective became non-finite ({value}) at iteration {iteration}"
        )


class SingularityError(NumericError):
    code = "singular"


class FormatError(SemihashError, IOError):
    code = "format"


class VersionError(FormatError):
    code = "version"


class TruncatedFileError(FormatError):
    code = "truncated"
