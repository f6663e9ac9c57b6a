"""
Command handlers for the registration toolkit
Single Responsibility: Each handler runs one command and writes its artifacts
"""

import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .config import RegistrationConfig
from .factory import RegistrationProblemFactory
from .flowmap import advect_points, grid_figure, warp_image
from .image import AnalyticField, save_image
from .jet_state import flatten, init_grid, load_state, unflatten
from .kernel import KernelSpec
from .matching import MatchConfig, match_value, oracle_integral, precompute_fixed
from .ode import integrate_adjoint_backward, integrate_forward, integrate_tangent_forward
from .optimize import energy_and_gradient, register
from .output_writer import ResultWriter
from .reg_types import CommandResult, ErrorType, InvalidArgumentError, Rectangle
from .variations import adjoint_apply, tangent_apply

logger = logging.getLogger(__name__)

GRID_HEADER = ["line_id", "t", "x", "y", "logjac"]
JACOBIAN_HEADER = ["particle", "x", "y", "J00", "J01", "J10", "J11", "logdet"]
CONVERGENCE_HEADER = ["h", "F0", "F2", "oracle", "err0", "err2"]
CONVERGENCE_KINDS = ("linear", "quadratic", "trig")
TRANSLATED_SHIFT = (0.05, 0.03)


class CommandHandler(ABC):
    """Abstract base class for command handlers"""

    @abstractmethod
    def handle(self, config: RegistrationConfig) -> CommandResult:
        """Run the command"""
        pass


class RegisterCommand(CommandHandler):
    """Registers a moving image to a fixed image and writes the result artifacts"""

    def __init__(self, grid_lines: int = 21, samples_per_line: int = 101):
        self.grid_lines = grid_lines
        self.samples_per_line = samples_per_line

    def handle(self, config: RegistrationConfig) -> CommandResult:
        logger.info(f"Handling register: {config.fixed} -> {config.moving}")
        problem = RegistrationProblemFactory.create_problem(config)
        result = register(problem)
        out = Path(config.out_dir)
        traj = result.trajectory
        fixed = problem.fixed

        ResultWriter.write_json(out / "result.json", ResultWriter.format_result(
            result, config.to_dict(), include_trajectory=config.save_trajectory))
        warped = warp_image(traj, problem.moving, (fixed.width, fixed.height), domain=fixed.domain)
        save_image(warped, out / "warped.pgm")
        figure = grid_figure(traj, self.grid_lines, self.samples_per_line, domain=fixed.domain)
        ResultWriter.write_csv(out / "grid.csv", GRID_HEADER, figure.rows())
        ResultWriter.write_csv(out / "trace.csv", ["iteration", "energy"], ResultWriter.trace_rows(result.trace))

        end = traj.final
        if end.order >= 1:
            points, jacobians = end.q, end.q1
        else:
            advected = advect_points(traj, traj.initial.q, with_jacobian=True)
            points, jacobians = advected.points, advected.jacobians
        ResultWriter.write_csv(out / "jacobians.csv", JACOBIAN_HEADER,
                               ResultWriter.jacobian_rows(points, jacobians))

        return CommandResult.success_response({
            "status": result.status.value,
            "final_H": result.final_H,
            "final_F": result.final_F,
            "iterations": result.diagnostics["iterations"],
            "out_dir": str(out),
        })


class ShootCommand(CommandHandler):
    """Replays a momentum preset or a saved initial state and writes the deformed grid"""

    def __init__(self, grid_lines: int = 21, samples_per_line: int = 101):
        self.grid_lines = grid_lines
        self.samples_per_line = samples_per_line

    def handle(self, config: RegistrationConfig) -> CommandResult:
        if config.state:
            logger.info(f"Handling shoot from state file {config.state}")
            state0, saved_sigma = load_state(config.state)
            sigma = config.sigma if saved_sigma is None else saved_sigma
            source = f"state:{config.state}"
        else:
            logger.info(f"Handling shoot with preset '{config.preset}'")
            sigma = config.sigma
            state0 = RegistrationProblemFactory.create_preset_state(config.preset, sigma)
            source = config.preset
        spec = KernelSpec(sigma)
        traj = integrate_forward(state0, config.steps, spec)
        out = Path(config.out_dir)

        figure = grid_figure(traj, self.grid_lines, self.samples_per_line, domain=Rectangle.unit_square())
        ResultWriter.write_csv(out / "grid.csv", GRID_HEADER, figure.rows())
        center = advect_points(traj, state0.q, with_jacobian=True)
        energies = traj.energies()
        summary = {
            "preset": source,
            "sigma": sigma,
            "steps": config.steps,
            "initial_state": ResultWriter.format_state(state0, sigma),
            "final_state": ResultWriter.format_state(traj.final, sigma),
            "energy_drift": float(np.ptp(energies)),
        }
        if config.save_trajectory:
            summary["trajectory"] = ResultWriter.format_trajectory(traj)
        ResultWriter.write_json(out / "shoot.json", summary)

        return CommandResult.success_response({
            "preset": source,
            "final_position": traj.final.q[0].tolist(),
            "log_jacobian_at_particle": float(center.log_jacobian()[0]),
            "energy_drift": float(np.ptp(energies)),
        })


def fit_slope(h: np.ndarray, err: np.ndarray, floor: float = 1e-13) -> Optional[float]:
    """Least-squares slope of log err against log h over entries above the round-off floor"""
    keep = err > floor
    if np.count_nonzero(keep) < 2:
        return None
    return float(np.polyfit(np.log(h[keep]), np.log(err[keep]), 1)[0])


class ConvergenceCommand(CommandHandler):
    """Sweeps the lattice spacing and measures the error of the matching functionals"""

    def __init__(self, levels: List[int] = None, slope_levels: List[int] = None):
        self.levels = levels or [1, 2, 3, 4, 5, 6]
        self.slope_levels = slope_levels or [2, 3, 4, 5, 6]

    def sweep(self, kind: str, pairing: str, quad_res: int) -> Dict[str, Any]:
        if kind not in CONVERGENCE_KINDS:
            raise InvalidArgumentError(f"convergence kind must be one of {CONVERGENCE_KINDS}, got '{kind}'")
        domain = Rectangle.unit_square()
        I0 = AnalyticField(kind)
        I1 = AnalyticField(kind, shift=TRANSLATED_SHIFT) if pairing == "translated" else AnalyticField("zero")
        oracle = oracle_integral(I0, I1, quad_res)

        rows = []
        for level in self.levels:
            n = 2 ** level
            state = init_grid(domain, n, 2)
            samples = precompute_fixed(I0, state.q)
            f0 = match_value(samples, I1, state, MatchConfig.for_grid(domain, n, 0, sigma_match=1.0))
            f2 = match_value(samples, I1, state, MatchConfig.for_grid(domain, n, 2, sigma_match=1.0))
            rows.append([1.0 / n, f0, f2, oracle, abs(f0 - oracle), abs(f2 - oracle)])
            logger.debug(f"h=1/{n}: F0={f0:.12g} F2={f2:.12g}")

        table = np.array(rows)
        fit = np.isin(np.array(self.levels), self.slope_levels)
        return {
            "rows": rows,
            "oracle": oracle,
            "slope0": fit_slope(table[fit, 0], table[fit, 4]),
            "slope2": fit_slope(table[fit, 0], table[fit, 5]),
        }

    def handle(self, config: RegistrationConfig) -> CommandResult:
        logger.info(f"Handling convergence study for '{config.kind}' ({config.pairing} pairing)")
        if config.kind not in CONVERGENCE_KINDS:
            return CommandResult.error_response(
                f"convergence kind must be one of {', '.join(CONVERGENCE_KINDS)}", ErrorType.VALIDATION_ERROR)
        study = self.sweep(config.kind, config.pairing, config.quad_res)
        out = Path(config.out_dir)
        summary = {"kind": config.kind, "pairing": config.pairing, "oracle": study["oracle"],
                   "slope0": study["slope0"], "slope2": study["slope2"]}
        ResultWriter.write_csv(out / "convergence.csv", CONVERGENCE_HEADER, study["rows"], notes=summary)
        ResultWriter.write_json(out / "convergence.json", summary)
        return CommandResult.success_response(summary)


class GradCheckCommand(CommandHandler):
    """Finite-difference, duality and pairing checks on a randomized problem"""

    def __init__(self, n_per_axis: int = 2, momentum_scale: float = 0.02, fd_step: float = 1e-6):
        self.n_per_axis = n_per_axis
        self.momentum_scale = momentum_scale
        self.fd_step = fd_step

    def run_checks(self, seed: int, jet_order: int = 2, match_order: int = 2) -> Dict[str, float]:
        problem = RegistrationProblemFactory.create_test_problem(
            seed, self.n_per_axis, jet_order, match_order)
        rng = np.random.default_rng(seed)
        x = rng.normal(scale=self.momentum_scale, size=problem.momentum_size)

        _, grad = energy_and_gradient(x, problem)
        fd = np.zeros_like(x)
        for i in range(x.size):
            step = np.zeros_like(x)
            step[i] = self.fd_step
            fd[i] = (energy_and_gradient(x + step, problem)[0]
                     - energy_and_gradient(x - step, problem)[0]) / (2.0 * self.fd_step)
        grad_err = float(np.max(np.abs(grad - fd)) / max(np.max(np.abs(fd)), 1e-300))

        state = problem.initial_state(x)
        order, n, dim = state.order, state.n_particles, state.dim
        length = flatten(state).size
        delta = unflatten(rng.normal(size=length), order, n, dim)
        lam = unflatten(rng.normal(size=length), order, n, dim)
        forward = lam.dot(tangent_apply(state, delta, problem.spec))
        backward = adjoint_apply(state, lam, problem.spec).dot(delta)
        duality_err = abs(forward + backward) / max(abs(forward), 1e-300)

        traj = integrate_forward(state, problem.steps, problem.spec)
        tangents = integrate_tangent_forward(traj, delta)
        adjoints = integrate_adjoint_backward(traj, lam, return_path=True)
        pairings = np.array([a.dot(d) for a, d in zip(adjoints, tangents)])
        pairing_err = float(np.ptp(pairings) / max(np.max(np.abs(pairings)), 1e-300))

        return {"grad": grad_err, "duality": float(duality_err), "pairing": pairing_err}

    def handle(self, config: RegistrationConfig) -> CommandResult:
        logger.info(f"Handling gradient check with seed {config.seed}")
        errors = self.run_checks(config.seed, config.jet_order, config.match_order)
        report = []
        failed = []
        for name, err in errors.items():
            ok = err < config.check_tol
            report.append(f"max {name} rel err < {config.check_tol:.0e}: {'PASS' if ok else 'FAIL'} ({err:.3e})")
            if not ok:
                failed.append(name)
        data = {"errors": errors, "report": report}
        if failed:
            return CommandResult.error_response(f"check failed: {', '.join(failed)}", ErrorType.CHECK_FAILED, data)
        return CommandResult.success_response(data)


# Open/Closed: new commands register here without touching the dispatcher
class CommandRegistry:
    """Registry for commands and their handlers"""

    def __init__(self):
        self._commands: Dict[str, CommandHandler] = {
            "register": RegisterCommand(),
            "shoot": ShootCommand(),
            "convergence": ConvergenceCommand(),
            "gradcheck": GradCheckCommand(),
        }
        logger.debug(f"Initialized command registry with {len(self._commands)} commands")

    def get_handler(self, name: str) -> Optional[CommandHandler]:
        handler = self._commands.get(name)
        if handler is None:
            logger.warning(f"No handler found for command '{name}'")
        return handler

    def add_command(self, name: str, handler: CommandHandler):
        self._commands[name] = handler
        logger.info(f"Added command: {name} -> {type(handler).__name__}")

    def list_commands(self) -> Dict[str, str]:
        return {name: type(handler).__name__ for name, handler in self._commands.items()}

    def remove_command(self, name: str) -> bool:
        if name in self._commands:
            del self._commands[name]
            logger.info(f"Removed command: {name}")
            return True
        return False
