"""
Core data models for the mass-operator workbench.
"""

from .scalar import Scalar
from .expression import (
    ComponentPower, DeltaFactor, Energy, Expr, KernelFactor, MomentumLabel, OperatorFactor, Profile, Term,
)
from .reports import EscapeReport, Report, ReportStatus
from .workbench_config import WorkbenchConfig
from .mass_models import (
    FitResult, FormulaValue, JointSpectrum, MassFormula, MassFormulaKind, ParticleRow, ParticleTable,
    QuantumNumbers,
)
from .measure import Atom, Interval, MassMeasure, MassSample, SampleBatch, Support

__all__ = [
    "Scalar",
    "MomentumLabel",
    "OperatorFactor",
    "DeltaFactor",
    "ComponentPower",
    "Energy",
    "Profile",
    "KernelFactor",
    "Term",
    "Expr",
    "Report",
    "ReportStatus",
    "EscapeReport",
    "WorkbenchConfig",
    "MassFormulaKind",
    "MassFormula",
    "QuantumNumbers",
    "FormulaValue",
    "ParticleRow",
    "ParticleTable",
    "FitResult",
    "JointSpectrum",
    "Atom",
    "Interval",
    "MassMeasure",
    "MassSample",
    "SampleBatch",
    "Support",
]
