"""Fit-then-validate for inequalities with existential constants.

An inequality ``lhs <= C * rhs`` whose constant is only known to exist is
checked by fitting ``C`` on calibration samples and then verifying it on a
disjoint validation set.
"""
from dataclasses import dataclass

import numpy as np

INFLATION = 2.0


@dataclass(frozen=True)
class FittedBound:
    constant: float
    calibration_max: float
    validation_max: float

    @property
    def passed(self):
        return bool(np.isfinite(self.constant) and self.validation_max <= self.constant)

    @property
    def margin(self):
        return self.constant - self.validation_max


def fit_and_validate(calibration, validation, inflation=INFLATION, floor=0.0):
    """``calibration``/``validation`` are arrays of ``lhs / rhs`` ratios.

    ``floor`` keeps the constant away from zero when every calibration ratio
    vanishes (e.g. constant martingales).
    """
    cal = float(np.max(calibration)) if np.size(calibration) else 0.0
    val = float(np.max(validation)) if np.size(validation) else 0.0
    return FittedBound(max(inflation * cal, floor), cal, val)
