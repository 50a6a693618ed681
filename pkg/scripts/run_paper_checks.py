#!/usr/bin/env python3
"""Run every verification suite and print the JSON report per check.

Equivalent to ``csib verify <suite>`` over all suites; exits nonzero if
any check fails.
"""

import sys

from csib.cli import main as cli_main

SUITES = [
    "theorem1",
    "corollary1",
    "prop5",
    "discrete",
    "consistency",
    "cloud",
    "modes",
    "gradcheck",
    "forms",
]

if __name__ == "__main__":
    sys.exit(cli_main(["verify", *SUITES]))
