"""
Pytest configuration and shared fixtures for the workbench test suite.
"""

import json
import shutil
import tempfile
from pathlib import Path

import pytest

from src.expr_parser import ExpressionParser
from src.fock_numeric import Grid
from src.models.workbench_config import WorkbenchConfig

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"
CONFIG_DIR = REPO_ROOT / "config"


@pytest.fixture
def temp_directory():
    """Create a temporary directory for test files."""
    temp_dir = tempfile.mkdtemp()
    yield Path(temp_dir)
    shutil.rmtree(temp_dir)


@pytest.fixture
def parser():
    """Parser for the default session: three species in three dimensions."""
    return ExpressionParser(species_count=3, dimension=3)


@pytest.fixture
def parser_1d():
    """Parser with two species in one dimension."""
    return ExpressionParser(species_count=2, dimension=1)


@pytest.fixture
def small_config():
    """Desk-scale configuration that keeps exhaustive relation checks quick."""
    return WorkbenchConfig(
        species_count=2,
        momentum_dimension=1,
        grid_points=8,
        jacobi_samples=10,
        seed=7,
        log_level="WARNING",
    )


@pytest.fixture
def small_grid():
    """Eight-point spectral grid in one dimension."""
    return Grid(dimension=1, points=8)


@pytest.fixture
def corpus_lines():
    """Expressions from the parser round-trip corpus."""
    lines = (DATA_DIR / "parser_corpus.txt").read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip() and not line.lstrip().startswith("#")]


@pytest.fixture
def octet_csv():
    """Path of the bundled baryon octet/decuplet table."""
    return DATA_DIR / "octet_example.csv"


@pytest.fixture
def write_csv(temp_directory):
    """Write a particle table with the standard header and return its path."""
    def _write(rows, header="name,mass_mev,Y,J,S,multiplet", name="table.csv"):
        path = temp_directory / name
        path.write_text("\n".join([header] + list(rows)) + "\n", encoding="utf-8")
        return path
    return _write


@pytest.fixture
def write_json(temp_directory):
    """Write a JSON document and return its path."""
    def _write(data, name="data.json"):
        path = temp_directory / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def sample_config_dict():
    """Nested configuration dictionary in the on-disk layout."""
    return {
        "symbolic": {"species_count": 2, "momentum_dimension": 1},
        "grid": {"points": 8, "half_width": 3.0, "diff_scheme": "spectral", "dimension": 1, "profile_sigma": 0.8},
        "relations": {"jacobi_samples": 25, "seed": 3, "exhaustive_species_limit": 3, "parallel_workers": 1},
        "caps": {"commutant_dim": 256, "nested_depth": 4},
        "mass_lab": {"okubo_casimir_isospin": True},
        "measures": {"quadrature_nodes": 16},
        "numeric": {"strict_normalization": True},
        "logging": {"level": "INFO", "directory": "logs"},
    }
