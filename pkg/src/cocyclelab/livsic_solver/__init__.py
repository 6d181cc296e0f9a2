from .transfer import (IllConditionedTransfer, PooFailure, SolveReport,
                       TransferFunction, write_transfer_table)
from .solve import (ContinuityReport, birkhoff_obstruction,
                    continuity_in_parameter, holder_bound_check,
                    orbit_residual, solve_diffeo, solve_linear, solve_real,
                    verify_coboundary)

__all__ = [
    "ContinuityReport", "IllConditionedTransfer", "PooFailure",
    "SolveReport", "TransferFunction", "birkhoff_obstruction",
    "continuity_in_parameter", "holder_bound_check", "orbit_residual",
    "solve_diffeo", "solve_linear", "solve_real", "verify_coboundary",
    "write_transfer_table",
]
