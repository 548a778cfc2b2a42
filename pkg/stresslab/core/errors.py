"""Exception hierarchy. Each error carries the CLI exit code it maps to."""


class StressLabError(Exception):
    exit_code = 1


class ConfigError(StressLabError):
    exit_code = 2

    def __init__(self, message, problems=None):
        self.problems = list(problems or [])
        if self.problems:
            message = f"{message}: " + "; ".join(self.problems)
        super().__init__(message)


class MissingArtifactError(StressLabError):
    exit_code = 3

    def __init__(self, entry, path=None):
        self.entry = entry
        self.path = path
        where = f" (expected at {path})" if path else ""
        super().__init__(f"missing upstream artifact '{entry}'{where}")


class NumericalError(StressLabError):
    exit_code = 4


class CholeskyError(NumericalError):
    pass


class FactorModelError(NumericalError):
    pass


class GarchFitError(NumericalError):
    def __init__(self, message, best=None):
        self.best = best
        if best is not None:
            message = f"{message} (best so far: {best})"
        super().__init__(message)


class DesignMatrixError(NumericalError):
    def __init__(self, aliased):
        self.aliased = list(aliased)
        super().__init__(f"singular design, aliased factors: {', '.join(self.aliased)}")


class InsufficientDataError(NumericalError):
    pass


class IngestError(StressLabError):
    exit_code = 2


class DuplicateKeyError(IngestError):
    pass


class SerializationError(StressLabError):
    exit_code = 2


class ExtractionError(StressLabError):
    pass


class ProviderError(StressLabError):
    pass


class ReplayStructureError(StressLabError):
    def __init__(self, missing_in_a, missing_in_b):
        self.missing_in_a = sorted(missing_in_a)
        self.missing_in_b = sorted(missing_in_b)
        super().__init__(
            f"manifest key sets differ: missing_in_a={self.missing_in_a} "
            f"missing_in_b={self.missing_in_b}"
        )
