"""
Command-line entry point for the jet-particle registration toolkit
Usage: python jetreg_cli.py COMMAND [flags]
"""

import logging
import sys

from jetreg.app import JetRegApp

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def main(argv=None) -> int:
    """
    Configure logging to standard error and run one command.

    Exit codes: 0 success, 1 invalid arguments or I/O failure,
    2 optimizer or numerical failure, 3 failed check.
    """
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT, stream=sys.stderr)
    return JetRegApp().run(argv)


if __name__ == "__main__":
    sys.exit(main())
