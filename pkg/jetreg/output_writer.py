"""
Result formatting and artifact writing
Single Responsibility: Serializes results to versioned JSON and CSV files atomically
"""

import csv
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .jet_state import JetState, state_to_dict
from .ode import Trajectory

logger = logging.getLogger(__name__)


class ResultWriter:
    """Formats results and writes plot-ready artifacts"""

    SCHEMA_VERSION = "1.0"

    @classmethod
    def _atomic_write(cls, path, write) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "w", newline="") as handle:
                write(handle)
            os.replace(tmp_name, path)
        except Exception:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
        logger.debug(f"Wrote {path}")
        return path

    @classmethod
    def write_json(cls, path, payload: Dict[str, Any]) -> Path:
        """Write a JSON document tagged with the schema version"""
        document = {"schema_version": cls.SCHEMA_VERSION, **payload}
        return cls._atomic_write(path, lambda handle: json.dump(document, handle, indent=2))

    @classmethod
    def write_csv(cls, path, header: Sequence[str], rows: Iterable[Sequence[Any]],
                  notes: Optional[Dict[str, Any]] = None) -> Path:
        """
        Write a header row and data rows.

        The file opens with `# key value` comment lines: the schema version,
        then any notes.
        """
        def write(handle):
            handle.write(f"# schema_version {cls.SCHEMA_VERSION}\n")
            for key, value in (notes or {}).items():
                handle.write(f"# {key} {value}\n")
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)
        return cls._atomic_write(path, write)

    @classmethod
    def format_state(cls, state: JetState, sigma: Optional[float] = None) -> Dict[str, Any]:
        return state_to_dict(state, sigma)

    @classmethod
    def format_trajectory(cls, traj: Trajectory) -> Dict[str, Any]:
        """Time nodes and the full state at each node"""
        return {
            "times": traj.times.tolist(),
            "sigma": traj.spec.sigma,
            "states": [state_to_dict(s) for s in traj.states],
        }

    @classmethod
    def format_result(cls, result, config: Optional[Dict[str, Any]] = None,
                      include_trajectory: bool = False) -> Dict[str, Any]:
        """Registration summary for result.json"""
        sigma = result.trajectory.spec.sigma
        payload = {
            "status": result.status.value,
            "final_H": result.final_H,
            "final_F": result.final_F,
            "energy": result.energy,
            "grad_norm": result.grad_norm,
            "iterations": result.diagnostics.get("iterations"),
            "diagnostics": result.diagnostics,
            "initial_state": cls.format_state(result.initial_state, sigma),
            "final_state": cls.format_state(result.trajectory.final, sigma),
        }
        if config is not None:
            payload["config"] = config
        if include_trajectory:
            payload["trajectory"] = cls.format_trajectory(result.trajectory)
        return payload

    @classmethod
    def trace_rows(cls, trace: List[float]) -> List[List[Any]]:
        return [[i, value] for i, value in enumerate(trace)]

    @classmethod
    def jacobian_rows(cls, points: np.ndarray, jacobians: np.ndarray) -> List[List[float]]:
        """particle, x, y, J00, J01, J10, J11, log det J"""
        dets = np.linalg.det(jacobians)
        rows = []
        for i, (p, jac, det) in enumerate(zip(points, jacobians, dets)):
            logdet = float(np.log(det)) if det > 0 else float("nan")
            rows.append([i, float(p[0]), float(p[1]), *map(float, jac.ravel()), logdet])
        return rows
