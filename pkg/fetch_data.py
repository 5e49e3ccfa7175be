"""
Download the UCI Parkinson's voice file and check that it loads.
Default destination is tests/data/parkinsons.data, where the reference tests look for it.
"""

import argparse
import os
import sys
from pathlib import Path

import requests

from pdbench.bench import calculate_file_hash
from pdbench.errors import PdBenchError
from pdbench.ingest import class_counts, load_dataset

UCI_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/parkinsons/parkinsons.data"
DEFAULT_DEST = Path(__file__).parent / "tests" / "data" / "parkinsons.data"


def download_dataset(dest=DEFAULT_DEST, url=UCI_URL, force=False):
    """Fetch the file unless it is already present; returns the loaded Dataset."""
    dest = Path(dest)
    if dest.exists() and not force:
        print(f"✓ Already present: {dest}")
        return load_dataset(dest)

    dest.parent.mkdir(parents=True, exist_ok=True)
    print(f"Downloading: {url}")
    response = requests.get(url, timeout=30)
    response.raise_for_status()

    partial = dest.with_suffix(dest.suffix + ".part")
    with open(partial, "wb") as f:
        f.write(response.content)
    try:
        ds = load_dataset(partial)
    except PdBenchError:
        os.remove(partial)
        raise
    os.replace(partial, dest)
    print(f"✓ Saved {len(response.content)} bytes to {dest}")
    return ds


def main(argv=None):
    parser = argparse.ArgumentParser(description="Download the UCI Parkinson's voice file")
    parser.add_argument("--dest", default=str(DEFAULT_DEST))
    parser.add_argument("--url", default=UCI_URL)
    parser.add_argument("--force", action="store_true", help="download even if the file exists")
    args = parser.parse_args(argv)

    try:
        ds = download_dataset(args.dest, args.url, args.force)
    except requests.RequestException as e:
        print(f"\n❌ Download failed: {e}", file=sys.stderr)
        return 1
    except PdBenchError as e:
        print(f"\n❌ Downloaded file is not a valid voice table: {e}", file=sys.stderr)
        return e.exit_code

    counts = class_counts(ds)
    print(f"✓ {len(ds)} records ({counts[1]} PD / {counts[0]} healthy)")
    print(f"✓ sha256 {calculate_file_hash(args.dest)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
