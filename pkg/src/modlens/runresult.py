"""Shared result record for optimizer runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RunResult:
    """Outcome of one budget-exact run.

    ``best_curve`` holds raw best-so-far objective values, one entry per
    evaluation; ``best_x`` is the evaluated location of the best value.
    """

    best_curve: np.ndarray
    best_x: np.ndarray | None
    best_f: float
    restarts: int
    n_evals: int
