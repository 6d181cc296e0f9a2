"""Fibered Lyapunov exponents, domination tests, and the contracting-point search."""

from .domination import DominationReport, domination_test
from .exponents import (LyapunovEstimate, PeriodicExponents, SweepResult,
                        exponent_sweep, lyapunov_forward, lyapunov_periodic)
from .finder import (CANDIDATE_CAP, PERIOD_CAP, ContractingPoint,
                     find_contracting_periodic)

__all__ = [
    "LyapunovEstimate", "PeriodicExponents", "SweepResult", "exponent_sweep",
    "lyapunov_forward", "lyapunov_periodic",
    "DominationReport", "domination_test",
    "ContractingPoint", "find_contracting_periodic",
    "PERIOD_CAP", "CANDIDATE_CAP",
]
