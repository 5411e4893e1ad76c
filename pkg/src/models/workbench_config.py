"""
WorkbenchConfig data model for runtime configuration management.
"""

from dataclasses import dataclass, fields
from typing import Dict, Any
import json
import math


@dataclass
class WorkbenchConfig:
    """
    Configuration settings for the mass-operator workbench.

    Centralizes the symbolic session parameters (species count, momentum
    dimension), the numeric grid, quadrature and sampling defaults, and
    logging behavior.
    """
    # Symbolic session
    species_count: int = 3
    momentum_dimension: int = 3

    # Numeric grid
    grid_points: int = 16
    grid_half_width: float = math.pi
    diff_scheme: str = "spectral"
    profile_sigma: float = 1.0
    numeric_dimension: int = 1

    # Relation suite
    jacobi_samples: int = 200
    seed: int = 42
    exhaustive_species_limit: int = 3
    parallel_workers: int = 1

    # Desk-scale caps
    commutant_dim_cap: int = 512
    nested_depth_cap: int = 6

    # Mass lab / measures
    okubo_casimir_isospin: bool = False
    quadrature_nodes: int = 32
    strict_normalization: bool = True

    # Logging
    log_level: str = "WARNING"
    logs_directory: str = "logs"

    def __post_init__(self):
        self.validate()

    def validate(self) -> bool:
        """
        Validate the configuration settings.

        Returns:
            bool: True if configuration is valid

        Raises:
            ValueError: If any configuration parameter is invalid
        """
        errors = []

        if self.species_count < 1:
            errors.append("Species count must be at least 1")
        if self.momentum_dimension not in (1, 2, 3):
            errors.append("Momentum dimension must be 1, 2 or 3")
        if self.numeric_dimension not in (1, 2, 3):
            errors.append("Numeric dimension must be 1, 2 or 3")
        if self.grid_points <= 0:
            errors.append("Grid points must be positive")
        if self.diff_scheme not in ("spectral", "central-2"):
            errors.append(f"Invalid differentiation scheme: {self.diff_scheme}")
        if self.diff_scheme == "spectral" and self.grid_points > 0 and self.grid_points & (self.grid_points - 1):
            errors.append("Spectral scheme requires a power-of-two grid size")
        if self.grid_half_width <= 0:
            errors.append("Grid half-width must be positive")
        if self.profile_sigma <= 0:
            errors.append("Profile sigma must be positive")
        if self.jacobi_samples < 1:
            errors.append("Jacobi samples must be at least 1")
        if self.exhaustive_species_limit < 1:
            errors.append("Exhaustive species limit must be at least 1")
        if self.parallel_workers < 1:
            errors.append("Parallel workers must be at least 1")
        if self.commutant_dim_cap <= 0:
            errors.append("Commutant dimension cap must be positive")
        if not 1 <= self.nested_depth_cap <= 6:
            errors.append("Nested depth cap must be between 1 and 6")
        if self.quadrature_nodes < 1:
            errors.append("Quadrature nodes must be positive")
        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"Invalid log level: {self.log_level}")

        if errors:
            raise ValueError("Configuration validation failed: " + "; ".join(errors))
        return True

    def to_dict(self) -> Dict[str, Any]:
        """Convert the configuration to a dictionary for serialization."""
        return {item.name: getattr(self, item.name) for item in fields(self)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'WorkbenchConfig':
        """Create WorkbenchConfig from a dictionary."""
        return cls(**data)

    @classmethod
    def from_json_file(cls, file_path: str) -> 'WorkbenchConfig':
        """Load configuration from a JSON file."""
        with open(file_path, 'r', encoding="utf-8") as f:
            data = json.load(f)
        return cls.from_dict(data)

    def to_json_file(self, file_path: str) -> None:
        """Save configuration to a JSON file."""
        with open(file_path, 'w', encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)

    def update(self, **kwargs) -> 'WorkbenchConfig':
        """Create a new configuration with updated parameters."""
        current_dict = self.to_dict()
        current_dict.update(kwargs)
        return WorkbenchConfig.from_dict(current_dict)

    def __str__(self) -> str:
        return (
            f"WorkbenchConfig(N={self.species_count}, d={self.momentum_dimension}, "
            f"grid={self.grid_points}x{self.numeric_dimension} {self.diff_scheme})"
        )
