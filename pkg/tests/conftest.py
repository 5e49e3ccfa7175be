import os
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from pdbench.ingest import FEATURE_NAMES, FILE_COLUMNS, load_dataset

REFERENCE_FILE = Path(__file__).parent / "data" / "parkinsons.data"

# (healthy mean, PD mean, spread) per feature, loosely shaped like the voice data
_PROFILE = {
    "MDVP:Fo(Hz)": (181.9, 145.2, 40.0),
    "MDVP:Fhi(Hz)": (223.6, 188.4, 70.0),
    "MDVP:Flo(Hz)": (145.2, 106.9, 35.0),
    "MDVP:Jitter(%)": (0.0039, 0.0070, 0.002),
    "MDVP:Jitter(Abs)": (0.000023, 0.000051, 0.00002),
    "MDVP:RAP": (0.0019, 0.0038, 0.0015),
    "MDVP:PPQ": (0.0021, 0.0038, 0.0015),
    "Jitter:DDP": (0.0058, 0.0113, 0.004),
    "MDVP:Shimmer": (0.0176, 0.0337, 0.012),
    "MDVP:Shimmer(dB)": (0.163, 0.321, 0.12),
    "Shimmer:APQ3": (0.0095, 0.0175, 0.006),
    "Shimmer:APQ5": (0.0107, 0.0207, 0.008),
    "MDVP:APQ": (0.0133, 0.0276, 0.01),
    "Shimmer:DDA": (0.0284, 0.0526, 0.02),
    "NHR": (0.0115, 0.0292, 0.02),
    "HNR": (24.7, 20.97, 4.0),
    "RPDE": (0.443, 0.517, 0.09),
    "DFA": (0.696, 0.725, 0.05),
    "spread1": (-6.76, -5.33, 0.9),
    "spread2": (0.160, 0.248, 0.07),
    "D2": (2.15, 2.46, 0.35),
    "PPE": (0.123, 0.234, 0.08),
}


def make_voice_frame(n_pd=147, n_healthy=48, seed=0):
    """Synthetic voice table in the published column layout with class-shifted feature means."""
    rng = np.random.default_rng(seed)
    n = n_pd + n_healthy
    status = np.array([1] * n_pd + [0] * n_healthy)
    rng.shuffle(status)
    severity = rng.normal(size=n)
    columns = {}
    for feature in FEATURE_NAMES:
        healthy, pd_mean, spread = _PROFILE[feature]
        centre = np.where(status == 1, pd_mean, healthy)
        values = centre + spread * (0.4 * severity + 0.6 * rng.normal(size=n))
        if healthy > 0:
            values = np.abs(values) + 1e-6
        columns[feature] = values
    names = [f"phon_R01_S{i // 6 + 1:02d}_{i % 6 + 1}" for i in range(n)]
    frame = pd.DataFrame({"name": names, "status": status, **columns})
    return frame[list(FILE_COLUMNS)]


def write_voice_csv(path, frame):
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


@pytest.fixture
def voice_csv(tmp_path):
    return write_voice_csv(tmp_path / "parkinsons.data", make_voice_frame())


@pytest.fixture
def small_voice_csv(tmp_path):
    return write_voice_csv(tmp_path / "small.data", make_voice_frame(n_pd=30, n_healthy=20, seed=3))


@pytest.fixture
def voice_dataset(voice_csv):
    return load_dataset(voice_csv)


@pytest.fixture
def small_voice_dataset(small_voice_csv):
    return load_dataset(small_voice_csv)


@pytest.fixture
def reference_path():
    candidate = os.getenv("PDBENCH_DATA") or str(REFERENCE_FILE)
    if not Path(candidate).exists():
        pytest.skip("reference UCI file not available (set PDBENCH_DATA or add tests/data/parkinsons.data)")
    return Path(candidate)


@pytest.fixture
def reference_dataset(reference_path):
    return load_dataset(reference_path)


@pytest.fixture
def blobs():
    """Two overlapping Gaussian classes in 4-D."""
    rng = np.random.default_rng(7)
    X0 = rng.normal(loc=-1.0, size=(40, 4))
    X1 = rng.normal(loc=1.0, size=(40, 4))
    X = np.vstack([X0, X1])
    y = np.array([0] * 40 + [1] * 40)
    return X, y
