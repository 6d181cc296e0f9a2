"""Fiber groups, parameter fields, and cocycle families."""

from .circle import (G_DEFAULT, CircleDiffeo, arnold_bump, c0_distance,
                     c1_distance, diffeo_compose, diffeo_eval, diffeo_invert,
                     diffeo_power, from_callable, group_distance, identity,
                     identity_defect, monotone_repair, rotation)
from .fields import (BaseFunction, Const, Cylinder, OrbitData, Trig,
                     field_from_config)
from .skew import (BumpFactor, CoboundaryCocycle, DiagExpFactor, DiffeoField,
                   FamilyCocycle, FixedMatrixFactor, GridTableCocycle,
                   LinearCocycle, LinearCoboundary, MatrixField, PooReport,
                   RotationFactor, RotationMatrixFactor, SkewSystem,
                   cocycle_product, factor_from_config, fiber_derivative,
                   holder_estimate, make_coboundary, matrix_factor_from_config,
                   poo_check, read_cocycle_table, skew_step, tabulate_cocycle,
                   write_cocycle_table)

__all__ = [
    "G_DEFAULT", "CircleDiffeo", "arnold_bump", "c0_distance", "c1_distance",
    "diffeo_compose", "diffeo_eval", "diffeo_invert", "diffeo_power",
    "from_callable", "group_distance", "identity", "identity_defect",
    "monotone_repair", "rotation",
    "BaseFunction", "Const", "Cylinder", "OrbitData", "Trig",
    "field_from_config",
    "BumpFactor", "CoboundaryCocycle", "DiagExpFactor", "DiffeoField",
    "FamilyCocycle", "FixedMatrixFactor", "GridTableCocycle", "LinearCocycle",
    "LinearCoboundary", "MatrixField", "PooReport", "RotationFactor",
    "RotationMatrixFactor", "SkewSystem", "cocycle_product",
    "factor_from_config", "fiber_derivative", "holder_estimate",
    "make_coboundary", "matrix_factor_from_config", "poo_check",
    "read_cocycle_table", "skew_step", "tabulate_cocycle",
    "write_cocycle_table",
]
