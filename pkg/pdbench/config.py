"""
Configuration for the Parkinson's voice benchmark.
Values come from the environment (or a .env file); CLI flags override them.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load .env file
load_dotenv()

# Paths
DATA_PATH = os.getenv("PDBENCH_DATA") or None
OUTPUT_DIR = Path(os.getenv("PDBENCH_OUT", "results"))
GRID_FILE = Path(__file__).with_name("grids.json")

# Reproduction defaults ("the fixed split")
DEFAULT_SEED = int(os.getenv("PDBENCH_SEED", "42"))
DEFAULT_TEST_FRACTION = 0.2
DEFAULT_CV_FOLDS = 5
PCA_VARIANCE = 0.95

# Model files
SCHEMA_VERSION = 1

# Class counts as given in the published dataset description; the data file is authoritative.
STATED_CLASS_COUNTS = {1: 48, 0: 147}


def defaults():
    """Effective defaults as a plain dict (lowest precedence layer)."""
    return {
        "data": DATA_PATH,
        "out": str(OUTPUT_DIR),
        "seed": DEFAULT_SEED,
        "test_fraction": DEFAULT_TEST_FRACTION,
        "cv_folds": DEFAULT_CV_FOLDS,
        "pca_variance": PCA_VARIANCE,
    }
