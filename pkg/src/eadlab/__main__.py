#!/usr/bin/env python3
"""
entry point for running eadlab as a module
usage: python -m eadlab <command> [options]
"""
import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
