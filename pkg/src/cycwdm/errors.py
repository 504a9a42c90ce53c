"""Exception hierarchy shared by all cycwdm modules."""


class CycwdmError(Exception):
    """Base class for all cycwdm errors."""


class ParameterError(CycwdmError, ValueError):
    """An operation was called with invalid or inconsistent parameters."""


class ConfigError(CycwdmError):
    """A config file or CLI argument could not be resolved."""


class SimulationError(CycwdmError):
    """A simulation step failed at runtime (not a parameter problem)."""


class EstimationError(SimulationError):
    """A blind estimator (e.g. frequency offset) found no usable feature."""


class SyncError(SimulationError):
    """Pattern synchronization failed to find a dominant correlation peak."""


class EqualizerCollapseError(SimulationError):
    """Both butterfly outputs converged onto the same tributary."""


class CountingError(SimulationError):
    """Bit counting could not resolve the phase/tributary ambiguity."""


class ThresholdRangeError(CycwdmError, ValueError):
    """A measured curve does not straddle the requested threshold."""
