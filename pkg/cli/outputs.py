"""
Result files: CSV tables and the per-run manifest
"""
import logging
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import cv2
import networkx as nx
import numpy as np
import pandas as pd
import pydantic
import scipy

from cli.model_io import canonical_json

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    """Header row, UTF-8, LF endings, shortest round-trip floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    logger.info(f"wrote {len(frame)} rows to {path}")
    return path


def library_versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "networkx": nx.__version__,
        "pydantic": pydantic.VERSION,
        "opencv": cv2.__version__,
    }


@dataclass
class RunManifest:
    """Everything needed to rerun a subcommand and check its outputs."""

    command: str
    argv: List[str]
    options: Dict[str, Any] = field(default_factory=dict)
    seeds: Dict[str, Any] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    converged: Dict[str, bool] = field(default_factory=dict)
    exit_code: Optional[int] = None

    def add_output(self, path: PathLike) -> Path:
        self.outputs.append(Path(path).as_posix())
        return Path(path)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "argv": list(self.argv),
            "options": self.options,
            "seeds": self.seeds,
            "outputs": self.outputs,
            "converged": self.converged,
            "exit_code": self.exit_code,
            "versions": library_versions(),
        }

    def write(self, out_dir: PathLike) -> Path:
        path = Path(out_dir) / f"{self.command}_manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(canonical_json(self.to_dict()), encoding="utf-8")
        logger.info(f"manifest written to {path}")
        return path
