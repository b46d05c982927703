"""Run the placer CLI from a source checkout: ``python place.py pipeline design.aux``."""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
