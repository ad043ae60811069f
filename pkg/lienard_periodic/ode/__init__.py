"""Adaptive integration engine."""

from .engine import (
    DenseSegment,
    DormandPrince,
    Section,
    SectionEvent,
    Trajectory,
    VariationalTrajectory,
    integrate,
    integrate_to_section,
    integrate_with_variational,
    variational_rhs,
)

__all__ = [
    "DenseSegment",
    "DormandPrince",
    "Section",
    "SectionEvent",
    "Trajectory",
    "VariationalTrajectory",
    "integrate",
    "integrate_to_section",
    "integrate_with_variational",
    "variational_rhs",
]
