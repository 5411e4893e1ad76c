"""
Mass-operator workbench - symbolic and numeric tools for continuum Lie
algebras of creation/annihilation bilinears and the mass operators built
from them.
"""

from .expr_parser import ExpressionParser, parse, render
from .fock_numeric import BlockOperator, BlockState, Grid
from .mass_lab import MassLab
from .relation_suite import RelationSuite

__version__ = "1.0.0"
__author__ = "Mass Operator Workbench Team"

__all__ = [
    "ExpressionParser",
    "parse",
    "render",
    "Grid",
    "BlockState",
    "BlockOperator",
    "RelationSuite",
    "MassLab",
]
