#!/usr/bin/env python3
"""Run the estimator-rate and tempering-variance studies back to back."""

import sys

from das.cli import main

if __name__ == "__main__":
    extra = sys.argv[1:]
    code = main(["run", "convergence", *extra])
    if code == 0:
        code = main(["run", "variance", *extra])
    sys.exit(code)
