"""
Entry point for the Parkinson's voice benchmark.

    python main.py validate --data parkinsons.data
    python main.py bench --data parkinsons.data --suite all --out results/

See `python main.py --help` for every verb.
"""

import sys

from pdbench.cli import main

if __name__ == "__main__":
    sys.exit(main())
