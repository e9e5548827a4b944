#!/usr/bin/env python3
"""Train the toy denoiser and emit its checkpoint, loss curve and score-error
metrics (shortcut for `das train-score`)."""

import sys

from das.cli import main

if __name__ == "__main__":
    sys.exit(main(["train-score", *sys.argv[1:]]))
