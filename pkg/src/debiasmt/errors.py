"""Exception types shared across the toolkit."""


class InvalidArgument(ValueError):
    """An argument violates an operation's preconditions."""


class InvalidState(RuntimeError):
    """Inputs are well-formed but the requested operation cannot proceed."""


class TrainingDivergence(RuntimeError):
    """The training loss became non-finite."""

    def __init__(self, message: str, batch_index: int | None = None):
        super().__init__(message)
        self.batch_index = batch_index


class PathBudgetExceeded(RuntimeError):
    """Exact lattice enumeration would exceed the path budget; use beam mode."""

    def __init__(self, message: str, n_paths: int | None = None):
        super().__init__(message)
        self.n_paths = n_paths


class StageFailure(RuntimeError):
    """A pipeline stage failed; partial artifacts are kept on disk."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
