# SPDX-License-Identifier: Apache-2.0
"""Benchmark harness: data, experiment runner, reports, acceptance checks and the CLI."""
