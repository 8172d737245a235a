#!/usr/bin/env python3
"""
Launcher script for the waveguide solvers.

Usage:
    python run_waveguide.py energy --config configs/slab.json
    python run_waveguide.py oracle --config configs/slab.json --format records

Or as a module:
    python -m waveguide.cli slab --config configs/slab.json
"""

import sys

from waveguide.cli import main

if __name__ == "__main__":
    sys.exit(main())
