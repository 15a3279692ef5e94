# SPDX-License-Identifier: Apache-2.0
"""Exception types raised across rgpssm.

Every error logs itself when constructed so that failures deep inside a filter run are visible
in the experiment log even if a caller swallows the exception. Errors the filter repairs on its
own log at DEBUG and leave the report to the repair.
"""

import logging
from typing import Optional

logger = logging.getLogger(__name__)


class RGPSSMError(Exception):
    """Base class for all rgpssm errors."""

    log_level = logging.ERROR

    def __init__(self, message: str):
        logger.log(self.log_level, "%s: %s", type(self).__name__, message)
        self.message = message
        super().__init__(message)


class DimensionError(RGPSSMError, ValueError):
    """Array shapes are mutually inconsistent."""


class FactorizationError(RGPSSMError):
    """A matrix that must be positive definite could not be factorized."""

    def __init__(self, message: str, block: Optional[int] = None):
        self.block = block
        super().__init__(message if block is None else f"{message} (block {block})")


class DowndateError(FactorizationError):
    """A Cholesky downdate lost positive definiteness."""

    log_level = logging.DEBUG

    def __init__(self, message: str, column: int):
        self.column = column
        super().__init__(f"{message} (column {column})")


class InnovationError(FactorizationError):
    """The innovation covariance is not positive definite."""


class JacobianError(RGPSSMError):
    """A Jacobian provider returned non-finite values."""


class HyperparameterError(RGPSSMError, ValueError):
    """Invalid hyperparameters or hyperparameter index."""


class DatasetError(RGPSSMError, ValueError):
    """A dataset file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class ConfigurationError(RGPSSMError, ValueError):
    """The resolved configuration is invalid."""


class ExperimentError(RGPSSMError):
    """An experiment failed; carries the step at which it failed."""

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        super().__init__(message if step is None else f"step {step}: {message}")
