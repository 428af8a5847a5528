#!/usr/bin/env python3
"""
riskmap - command-line entry point.

Survival and level-crossing probabilities for Markov-modulated risk
processes observed at Poisson epochs. See riskmap/cli.py for the commands.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.absolute()))

from riskmap.cli import main  # noqa: E402

# ============================================================================
# Main Entry Point
# ============================================================================

if __name__ == "__main__":
    main()
