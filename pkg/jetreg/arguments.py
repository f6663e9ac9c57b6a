"""
Command-line argument processing
Single Responsibility: Converts command-line flags into a merged RegistrationConfig
"""

import argparse
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence

from .config import LOG_LEVELS, RegistrationConfig
from .factory import PRESETS
from .reg_types import InvalidArgumentError

logger = logging.getLogger(__name__)

COMMANDS = {
    "register": "register a moving image to a fixed image",
    "shoot": "replay a single-particle momentum preset and write the deformed grid",
    "convergence": "measure convergence of the matching functionals on analytic images",
    "gradcheck": "run finite-difference and adjoint consistency checks",
}

_DEFAULTS = RegistrationConfig.defaults()


class _RaisingParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on bad input"""

    def error(self, message: str):
        raise InvalidArgumentError(message)


class ArgumentProcessor:
    """Parses command-line flags and applies them over file, environment and defaults"""

    # (flag, config field, converter, help, extra argparse keywords)
    SHARED_FLAGS: List[tuple] = [
        ("--fixed", "fixed", str, "fixed image (PGM/PNG or synthetic:<kind>)", {}),
        ("--moving", "moving", str, "moving image (PGM/PNG or synthetic:<kind>)", {}),
        ("--jet-order", "jet_order", int, "jet order of the particles", {"choices": (0, 1, 2)}),
        ("--match-order", "match_order", int, "order of the matching functional", {"choices": (0, 1, 2)}),
        ("--grid", "grid", int, "particles per axis", {}),
        ("--sigma", "sigma", float, "kernel width in world units", {}),
        ("--sigma-match", "sigma_match", float, "matching term weight 1/sigma_match", {}),
        ("--steps", "steps", int, "RK4 steps over [0, 1]", {}),
        ("--smooth", "smooth", float, "Gaussian pre-smoothing in pixels", {}),
        ("--maxiter", "maxiter", int, "maximum optimizer iterations", {}),
        ("--out", "out_dir", str, "output directory", {}),
        ("--seed", "seed", int, "random seed", {}),
        ("--threads", "threads", int, "worker threads (env JETREG_THREADS)", {}),
        ("--preset", "preset", str, "momentum preset for shoot", {"choices": PRESETS}),
        ("--kind", "kind", str, "analytic image kind for convergence", {}),
        ("--region", "region", str, "particle region x0,y0,x1,y1", {}),
        ("--resolution", "resolution", int, "resolution of synthetic images", {}),
        ("--pairing", "pairing", str, "second convergence image", {"choices": ("zero", "translated")}),
        ("--quad-res", "quad_res", int, "cells per axis of the reference quadrature", {}),
        ("--log-level", "log_level", str.upper, "log level", {"choices": LOG_LEVELS}),
    ]

    def __init__(self):
        self.parser = self._build_parser()

    def _build_parser(self) -> argparse.ArgumentParser:
        shared = argparse.ArgumentParser(add_help=False)
        for flag, dest, converter, help_text, extra in self.SHARED_FLAGS:
            self._add_flag(shared, flag, dest, converter, help_text, extra)
        shared.add_argument("--config", dest="config_file", default=None,
                            help="JSON config file (flags override its keys)")

        parser = _RaisingParser(prog="jetreg", description="Jet-particle image registration toolkit")
        subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_RaisingParser)
        subparsers.required = True
        for name, help_text in COMMANDS.items():
            sub = subparsers.add_parser(name, parents=[shared], help=help_text, description=help_text)
            if name == "gradcheck":
                self._add_flag(sub, "--tol", "check_tol", float, "largest accepted relative error", {})
            else:
                self._add_flag(sub, "--tol", "tol", float, "gradient max-norm tolerance", {})
            if name in ("register", "shoot"):
                sub.add_argument("--save-trajectory", dest="save_trajectory", action="store_true", default=None,
                                 help="write every time node of the flow into the JSON result")
            if name == "shoot":
                self._add_flag(sub, "--state", "state", str, "JSON initial state replacing the preset", {})
        return parser

    @staticmethod
    def _add_flag(parser: argparse.ArgumentParser, flag: str, dest: str, converter: Callable[[str], Any],
                  help_text: str, extra: Dict[str, Any]):
        # None marks "not given" so lower-precedence sources survive the merge
        parser.add_argument(flag, dest=dest, type=converter, default=None,
                            help=f"{help_text} (default: {getattr(_DEFAULTS, dest)})", **extra)

    def parse(self, argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
        return self.parser.parse_args(argv)

    def overrides(self, args: argparse.Namespace) -> Dict[str, Any]:
        """Config fields given on the command line"""
        fields = {dest for _, dest, _, _, _ in self.SHARED_FLAGS} | {"tol", "check_tol", "save_trajectory", "state"}
        values = {name: value for name, value in vars(args).items() if name in fields and value is not None}
        logger.debug(f"Command-line overrides: {values}")
        return values

    def build_config(self, args: argparse.Namespace) -> RegistrationConfig:
        """Defaults, then environment, then config file, then flags"""
        config = RegistrationConfig.from_environment(RegistrationConfig.defaults())
        if args.config_file:
            config = RegistrationConfig.from_json_file(args.config_file, config)
        return config.merged(self.overrides(args))
