"""Exception types shared across the package.

Everything derives from ValueError or RuntimeError so callers that do not
care about the fine distinctions can catch the built-ins.
"""


class SectorError(ValueError):
    """Invalid symmetry sector: parity mismatch, out-of-range magnetization,
    or a partition that does not tile the spectrum."""


class ConstructionError(ValueError):
    """Operator construction failed: bad bond/field indices, dimension
    mismatch, or a non-normalized input vector."""


class StateValidationError(ValueError):
    """A density matrix or state vector failed its integrity checks
    (Hermiticity, unit trace, positivity, normalization)."""


class NumericalIntegrityError(RuntimeError):
    """A numerical guard tripped: imaginary residue above threshold,
    eigensolver failure, or a quantity that should be real/finite is not."""


class PipelineError(RuntimeError):
    """Experiment pipeline failure, tagged with the stage that failed."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")
