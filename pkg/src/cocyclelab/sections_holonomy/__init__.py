"""Lifted laminations, orbit-closure sections, holonomy, trivialization."""

from .holonomy import (AtlasTooSparse, HolonomyMap, LinearAlongSection,
                       SectionAtlas, SmoothnessReport, Trivialization,
                       build_atlas, conjugated_exponent,
                       derivative_cocycle_along_section, holonomy,
                       holonomy_smoothness_check, trivialize,
                       write_trivialization_table)
from .leaves import (DEPTH_CAP, LiftedLeaf, NoConvergence, leaf_invariance_defect,
                     leaf_neighbor, lift_leaf, stable_lift)
from .sections import (OrbitClosureSection, ReturnClaimViolation,
                       SaturationReport, orbit_closure_section, phase_verdict,
                       saturation_check, write_section_table)

__all__ = [
    "AtlasTooSparse", "HolonomyMap", "LinearAlongSection", "SectionAtlas",
    "SmoothnessReport", "Trivialization", "build_atlas", "conjugated_exponent",
    "derivative_cocycle_along_section", "holonomy",
    "holonomy_smoothness_check", "trivialize", "write_trivialization_table",
    "DEPTH_CAP", "LiftedLeaf", "NoConvergence", "leaf_invariance_defect",
    "leaf_neighbor", "lift_leaf", "stable_lift",
    "OrbitClosureSection", "ReturnClaimViolation", "SaturationReport",
    "orbit_closure_section", "phase_verdict", "saturation_check",
    "write_section_table",
]
