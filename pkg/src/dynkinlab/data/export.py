"""export.py

Writers for the files a run leaves in its output directory.

Surfaces and tables are written with pandas, reports as sorted-key JSON.
Every file carries the config hash and nothing time-dependent, so equal
configs give byte-identical directories.
"""

from __future__ import annotations

import json
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .models import GridFunction, PathBundle, StoppingRegions

SURFACE_FORMATS = ("csv", "json", "npy")


def _coord_names(dim: int) -> list[str]:
    return ["x"] if dim == 1 else [f"x{i + 1}" for i in range(dim)]


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Enum):
        return obj.value
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if is_dataclass(obj):
        return asdict(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"


def write_json(path: str | Path, payload: Dict[str, Any], config_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json({**payload, "config_hash": config_hash}), encoding="utf-8")
    return path


def surface_frame(v: GridFunction, regions: Optional[StoppingRegions] = None) -> pd.DataFrame:
    """Long-format value surface: one row per (time node, space node)."""
    n_t, n_x = v.values.shape
    frame = pd.DataFrame({"t": np.repeat(v.times.nodes, n_x)})
    pts = np.tile(v.grid.points, (n_t, 1))
    for i, name in enumerate(_coord_names(v.grid.dim)):
        frame[name] = pts[:, i]
    frame["v"] = v.values.ravel()
    if regions is not None:
        frame["in_upper_region"] = regions.upper_mask.ravel()
        frame["in_lower_region"] = regions.lower_mask.ravel()
    return frame


def write_surface(directory: str | Path, v: GridFunction, regions: Optional[StoppingRegions], config_hash: str,
                  stem: str = "surface", formats: Sequence[str] = ("csv", "json")) -> List[Path]:
    """Write the value surface in each requested format.

    ``csv`` is the long-format table, ``npy`` the raw ``(n_times, n_nodes)``
    value array and ``json`` the grid metadata needed to read either back.
    """
    unknown = set(formats) - set(SURFACE_FORMATS)
    if unknown:
        raise ValueError(f"unknown surface formats {sorted(unknown)}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        written.append(directory / f"{stem}.csv")
        surface_frame(v, regions).to_csv(written[-1], index=False)
    if "npy" in formats:
        written.append(directory / f"{stem}.npy")
        np.save(written[-1], v.values)
    if "json" in formats:
        meta = {
            "scheme": v.scheme,
            "boundary_policy": v.grid.boundary_policy,
            "axes": [{"lo": a.lo, "hi": a.hi, "n_nodes": a.n_nodes} for a in v.grid.axes],
            "time_nodes": v.times.nodes,
            "contact_eps": None if regions is None else regions.tolerance,
        }
        written.append(write_json(directory / f"{stem}.json", meta, config_hash))
    return written


def write_paths(directory: str | Path, bundle: PathBundle, config_hash: str, fmt: str = "csv",
                stem: str = "paths") -> Path:
    """Path ensemble as long-format CSV or as ``.npy`` with a JSON sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    sidecar = {"model_id": bundle.model_id, "n_paths": bundle.n_paths, "seed": bundle.seed,
               "time_nodes": bundle.grid.nodes, "shape": list(bundle.states.shape)}
    if fmt == "npy":
        target = directory / f"{stem}.npy"
        np.save(target, bundle.states)
    elif fmt == "csv":
        target = directory / f"{stem}.csv"
        n, m, d = bundle.states.shape
        frame = pd.DataFrame({"path": np.repeat(np.arange(n), m), "k": np.tile(np.arange(m), n),
                              "t": np.tile(bundle.grid.nodes, n)})
        flat = bundle.states.reshape(-1, d)
        for i, name in enumerate(_coord_names(d)):
            frame[name] = flat[:, i]
        frame.to_csv(target, index=False)
    else:
        raise ValueError(f"unknown path format {fmt!r}")
    write_json(directory / f"{stem}.json", sidecar, config_hash)
    return target


def write_payoff_samples(path: str | Path, times: np.ndarray, tau_index: np.ndarray, rho_index: np.ndarray,
                         payoffs: np.ndarray) -> Path:
    """Per-path stopping times and realized payoffs of one strategy pair."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"path": np.arange(len(payoffs)), "tau_time": times[tau_index], "rho_time": times[rho_index],
                  "payoff": payoffs}).to_csv(path, index=False)
    return path


def write_table(path: str | Path, rows: Sequence[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(list(rows)).to_csv(path, index=False)
    return path
