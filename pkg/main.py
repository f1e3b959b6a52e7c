#!/usr/bin/env python3
"""ncjtsim entry point: python main.py --help"""

import sys

from ncjtsim.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
