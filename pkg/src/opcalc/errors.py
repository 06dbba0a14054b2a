"""Exception types raised across opcalc."""

import numpy as np


class OpcalcError(Exception):
    """Base class for every error raised by this package."""


class SingularMatrix(OpcalcError, np.linalg.LinAlgError):
    """A pivot fell below threshold; in contour work this means a node sits
    too close to the spectrum."""


class MatrixOverflow(OpcalcError, OverflowError):
    pass


class NoConvergence(OpcalcError, np.linalg.LinAlgError):
    pass


class Defective(OpcalcError, np.linalg.LinAlgError):
    """Eigenvector matrix (or joint eigenbasis) is numerically singular."""


class ContourInvalid(OpcalcError):
    pass


class BranchCutIntersection(OpcalcError):
    pass


class AmbiguousCount(OpcalcError):
    pass


class NoAdmissibleKappa(OpcalcError):
    pass


class StepTooLarge(OpcalcError):
    pass


class NonCommuting(OpcalcError):
    pass


class BranchInconsistency(OpcalcError):
    pass


class NotInCommutant(OpcalcError):
    pass


class BranchWrap(OpcalcError):
    """Principal-branch additivity does not hold; ``result`` carries the
    residual and the 2*pi*i diagnosis."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ConfigInvalid(OpcalcError):
    def __init__(self, message, path="/"):
        super().__init__(f"{path}: {message}")
        self.path = path


class MatrixFileMissing(OpcalcError, FileNotFoundError):
    pass
