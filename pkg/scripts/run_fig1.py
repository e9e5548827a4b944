#!/usr/bin/env python3
"""Run both 2D mixture comparison panels with default settings."""

import sys

from das.cli import main

if __name__ == "__main__":
    extra = sys.argv[1:]
    code = main(["run", "fig1-top", *extra])
    if code == 0:
        code = main(["run", "fig1-bottom", *extra])
    sys.exit(code)
