# SPDX-License-Identifier: Apache-2.0
"""CARE workbench: stage-gated agent design with helper agents and two-gate evaluation."""

from ._core import CareError, Service, percent, recall_at_k, render_runs

__all__ = ["CareError", "Service", "percent", "recall_at_k", "render_runs", "error_code"]


def error_code(exc: CareError) -> str:
    """Machine-readable code of a CareError, e.g. "gate_not_satisfied"."""
    return exc.args[0]
