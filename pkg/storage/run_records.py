"""
Output files of a run: CSV tables, JSON documents, and the manifest that
sits next to each data file.
"""
import csv
import json
import logging
import os
import platform
import time
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Optional, Sequence

import mpmath
import numpy as np

logger = logging.getLogger(__name__)

try:
    from importlib.metadata import PackageNotFoundError, version as _dist_version
except ImportError:  # pragma: no cover
    PackageNotFoundError = Exception
    _dist_version = None


def package_version() -> str:
    if _dist_version is None:
        return "unknown"
    try:
        return _dist_version("fiveprime")
    except PackageNotFoundError:
        return "unknown"


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def write_json(path: str, document: Any) -> str:
    _ensure_parent(path)
    with open(path, "w") as f:
        json.dump(_jsonable(document), f, indent=2)
    return path


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    _ensure_parent(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    return path


def write_dict_rows(path: str, rows: Sequence[Dict[str, Any]]) -> str:
    """CSV with the keys of the first row as header."""
    header = list(rows[0].keys()) if rows else []
    return write_csv(path, header, ([row.get(k) for k in header] for row in rows))


def write_grid(path: str, grid) -> str:
    """An ExpSumGrid as CSV (x, y, re, im) plus a JSON sidecar with its digest."""
    xs, ys = grid.x_points, grid.y_points

    def rows():
        for i, x in enumerate(xs.tolist()):
            for j, y in enumerate(ys.tolist()):
                v = grid.values[i, j]
                yield (repr(x), repr(y), repr(float(v.real)), repr(float(v.imag)))

    write_csv(path, ("x", "y", "re", "im"), rows())
    write_json(path + ".json", {"params_digest": grid.params_digest, "nx": int(xs.size), "ny": int(ys.size)})
    return path


def write_solutions(path: str, records) -> str:
    def rows():
        for r in records:
            yield list(r.p) + [repr(r.r1), repr(r.r2), repr(r.weight), r.multiplicity]

    header = ["p1", "p2", "p3", "p4", "p5", "r1", "r2", "weight", "multiplicity"]
    return write_csv(path, header, rows())


class RunRecorder:
    """Collects timings for one command and writes its manifest.

    Without an output path nothing is written.
    """

    def __init__(self, command: str, config_digest: str, out: Optional[str] = None):
        self.command = command
        self.config_digest = config_digest
        self.out = out
        self.started = time.perf_counter()
        self.timings: Dict[str, float] = {}
        self.outputs: List[str] = []

    def time(self, label: str, seconds: float) -> None:
        self.timings[label] = seconds

    def add_output(self, path: str) -> None:
        self.outputs.append(path)

    def manifest(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config_digest": self.config_digest,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "versions": {
                "fiveprime": package_version(),
                "numpy": np.__version__,
                "mpmath": mpmath.__version__,
                "python": platform.python_version(),
            },
            "timings": dict(self.timings, total=time.perf_counter() - self.started),
            "outputs": list(self.outputs),
        }

    def write_manifest(self) -> Optional[str]:
        if not self.out:
            return None
        path = self.out + ".manifest.json"
        try:
            write_json(path, self.manifest())
            logger.info(f"Wrote run manifest {path}")
            return path
        except OSError as e:
            logger.error(f"Failed to write run manifest {path}: {e}")
            raise
