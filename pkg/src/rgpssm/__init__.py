# SPDX-License-Identifier: Apache-2.0
"""Online Gaussian process state-space filtering with a budgeted inducing set."""

__version__ = "0.1.0"
