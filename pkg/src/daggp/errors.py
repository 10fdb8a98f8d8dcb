"""Exception types shared across the package."""


class GraphStructureError(ValueError):
    """The directed edge set is not a DAG or references unknown nodes."""


class InterventionError(ValueError):
    """An intervention assignment violates manipulability or domain rules."""


class DegenerateDataError(ValueError):
    """A regression design matrix is rank deficient.

    The offending columns are listed so callers can tell which conditioning
    variables are collinear (or constant).
    """

    def __init__(self, target: str, columns: tuple[str, ...]):
        self.target = target
        self.columns = columns
        super().__init__(
            f"degenerate design for {target!r}: collinear columns {list(columns)}"
        )


class TransferError(ValueError):
    """A requested intervention set admits no base-function representation."""


class NumericalError(ArithmeticError):
    """A covariance matrix failed its positive-definiteness repair ladder."""
