# SPDX-License-Identifier: Apache-2.0
"""Model structures: the ModelSpec abstraction and the benchmark systems."""
