"""
Command orchestration for the jetreg command line
Single Responsibility: High-level command dispatch, error handling and exit codes
"""

import json
import logging
import sys
import traceback
from typing import Optional, Sequence, TextIO

from .arguments import ArgumentProcessor
from .commands import CommandRegistry
from .parallel import set_num_threads
from .reg_types import CommandResult, ErrorType, JetRegError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 2


class JetRegApp:
    """Resolves a command, runs it and turns its result into output and an exit code"""

    EXIT_CODES = {
        ErrorType.VALIDATION_ERROR: 1,
        ErrorType.IO_ERROR: 1,
        ErrorType.NUMERICAL_ERROR: 2,
        ErrorType.OPTIMIZER_ERROR: 2,
        ErrorType.CHECK_FAILED: 3,
    }

    def __init__(self, arguments: Optional[ArgumentProcessor] = None,
                 registry: Optional[CommandRegistry] = None,
                 stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None):
        self.arguments = arguments or ArgumentProcessor()
        self.registry = registry or CommandRegistry()
        self.stdout = stdout or sys.stdout
        self.stderr = stderr or sys.stderr

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """Run one command line and return its exit code"""
        try:
            args = self.arguments.parse(argv)
            config = self.arguments.build_config(args)
        except JetRegError as e:
            return self._finish(CommandResult.error_response(str(e), e.error_type))

        logging.getLogger().setLevel(config.log_level)
        set_num_threads(config.threads)

        handler = self.registry.get_handler(args.command)
        if handler is None:
            return self._finish(CommandResult.error_response(
                f"unknown command '{args.command}'", ErrorType.VALIDATION_ERROR))

        logger.info(f"Executing command '{args.command}'")
        try:
            result = handler.handle(config)
        except JetRegError as e:
            logger.error(f"Command '{args.command}' failed: {str(e)}")
            result = CommandResult.error_response(str(e), e.error_type)
        except OSError as e:
            logger.error(f"I/O error in '{args.command}': {str(e)}")
            result = CommandResult.error_response(str(e), ErrorType.IO_ERROR)
        except Exception as e:
            logger.error(f"Unexpected error in '{args.command}': {str(e)}")
            logger.error(f"Traceback: {traceback.format_exc()}")
            self.stderr.write(f"jetreg: internal error: {str(e)}\n")
            return EXIT_UNEXPECTED
        return self._finish(result)

    def exit_code(self, result: CommandResult) -> int:
        if result.success:
            return EXIT_OK
        return self.EXIT_CODES.get(result.error_type, EXIT_UNEXPECTED)

    def _finish(self, result: CommandResult) -> int:
        data = result.data or {}
        if "report" in data:
            for line in data["report"]:
                self.stdout.write(line + "\n")
        elif result.success:
            self.stdout.write(json.dumps(data, indent=2) + "\n")
        if not result.success:
            self.stderr.write(f"jetreg: error: {result.error}\n")
        return self.exit_code(result)
