"""config.py

Run configuration: TOML documents validated into frozen dataclasses.

Every section has its own dataclass; ``RunConfig`` ties them together and
builds the model, problem, grids and option objects the commands need.
Validation errors raise ``ConfigError`` with the dotted path of the
offending field.  The grammar is documented in ``docs/config_format.md``.
"""

from __future__ import annotations

import hashlib
import json
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from ..core.obstacle import ObstacleProblem, problem_from_specs
from ..core.sde import SdeModel, model_from_catalog
from ..core.solver import SolverOptions
from ..errors import ConfigError, DynkinLabError
from .export import SURFACE_FORMATS
from .models import SpatialGrid, TimeGrid

ORACLE_KINDS = ("heat_cosine", "american_put", "terminal", "gaussian")

_REQUIRED = object()


class _Section:
    """Typed access to one TOML table, tracking the dotted path for errors."""

    def __init__(self, data: Any, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"[{path}] must be a table", path)
        self.data = data
        self.path = path

    def _where(self, key: str) -> str:
        return f"{self.path}.{key}"

    def raw(self, key: str, default: Any = _REQUIRED) -> Any:
        if key not in self.data:
            if default is _REQUIRED:
                raise ConfigError(f"missing required field {self._where(key)}", self._where(key))
            return default
        return self.data[key]

    def number(self, key: str, default: Any = _REQUIRED, positive: bool = False) -> Optional[float]:
        value = self.raw(key, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{self._where(key)} must be a number, got {value!r}", self._where(key))
        if positive and not value > 0:
            raise ConfigError(f"{self._where(key)} must be positive, got {value}", self._where(key))
        return float(value)

    def integer(self, key: str, default: Any = _REQUIRED, minimum: int = 1) -> Optional[int]:
        value = self.raw(key, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{self._where(key)} must be an integer, got {value!r}", self._where(key))
        if value < minimum:
            raise ConfigError(f"{self._where(key)} must be >= {minimum}, got {value}", self._where(key))
        return int(value)

    def string(self, key: str, default: Any = _REQUIRED, choices: Tuple[str, ...] = ()) -> str:
        value = self.raw(key, default)
        if not isinstance(value, str):
            raise ConfigError(f"{self._where(key)} must be a string, got {value!r}", self._where(key))
        if choices and value not in choices:
            raise ConfigError(f"{self._where(key)} must be one of {', '.join(choices)}, got {value!r}",
                              self._where(key))
        return value

    def vector(self, key: str, default: Any = _REQUIRED, integer: bool = False) -> Optional[Tuple]:
        value = self.raw(key, default)
        if value is None:
            return None
        items = list(value) if isinstance(value, (list, tuple)) else [value]
        kinds = (int,) if integer else (int, float)
        if not items or any(isinstance(v, bool) or not isinstance(v, kinds) for v in items):
            what = "integers" if integer else "numbers"
            raise ConfigError(f"{self._where(key)} must be a number or a list of {what}", self._where(key))
        return tuple(int(v) if integer else float(v) for v in items)

    def table(self, key: str, default: Any = _REQUIRED) -> Dict[str, Any]:
        value = self.raw(key, default)
        if not isinstance(value, dict):
            raise ConfigError(f"{self._where(key)} must be a table", self._where(key))
        return dict(value)


@dataclass(frozen=True)
class ModelConfig:
    name: str
    params: Dict[str, Any] = field(default_factory=dict)
    growth_bound: Optional[float] = None


@dataclass(frozen=True)
class ProblemConfig:
    horizon: float
    mode: str
    lower: Any
    upper: Any
    terminal: Any
    bounds: Optional[Tuple[float, float]] = None


@dataclass(frozen=True)
class GridConfig:
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    nodes: Tuple[int, ...]
    time_steps: int
    boundary: str = "dirichlet_from_payoff"
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    seed: int
    n_steps: int = 100
    z_threshold: float = 4.0
    growth_samples: int = 10_000
    path_format: str = "csv"


@dataclass(frozen=True)
class AuditConfig:
    s: float
    x: Tuple[float, ...]
    shifts: Tuple[float, ...] = (0.05,)
    scheme_tolerance: float = 0.02
    martingale_paths: int = 100_000
    martingale_starts: int = 8
    martingale_steps: int = 50
    pointwise_tol: float = 5e-3
    box_margin: float = 0.2
    per_path_samples: bool = False


@dataclass(frozen=True)
class OracleConfig:
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class BenchConfig:
    levels: int = 3
    margin: float = 0.2


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: Tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    """Parsed and validated run configuration."""

    model: ModelConfig
    problem: ProblemConfig
    grid: GridConfig
    mc: McConfig
    audit: Optional[AuditConfig]
    oracle: Optional[OracleConfig]
    bench: BenchConfig
    output: OutputConfig
    config_hash: str
    source: str = "<string>"

    def build_model(self) -> SdeModel:
        try:
            return model_from_catalog(self.model.name, growth_bound=self.model.growth_bound, **self.model.params)
        except DynkinLabError as e:
            raise ConfigError(str(e), "model") from e

    def build_problem(self) -> ObstacleProblem:
        p = self.problem
        try:
            return problem_from_specs(p.horizon, len(self.grid.lo), p.lower, p.upper, p.terminal, p.mode, p.bounds)
        except DynkinLabError as e:
            raise ConfigError(str(e), "problem") from e

    def spatial_grid(self, refine: int = 0) -> SpatialGrid:
        nodes = [(n - 1) * 2 ** refine + 1 for n in self.grid.nodes]
        return SpatialGrid.box(self.grid.lo, self.grid.hi, nodes, self.grid.boundary)

    def time_grid(self, refine: int = 0) -> TimeGrid:
        return TimeGrid.uniform(0.0, self.problem.horizon, self.grid.time_steps * 2 ** refine)

    def box(self, margin: float) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
        """The spatial box shrunk by ``margin`` times each side length."""
        lo = tuple(a + margin * (b - a) for a, b in zip(self.grid.lo, self.grid.hi))
        hi = tuple(b - margin * (b - a) for a, b in zip(self.grid.lo, self.grid.hi))
        return lo, hi


def _model(sec: _Section) -> ModelConfig:
    params = sec.table("params", {})
    return ModelConfig(sec.string("name"), params, sec.number("growth_bound", None))


def _field_spec(sec: _Section, key: str) -> Any:
    value = sec.raw(key)
    if isinstance(value, str):
        if key == "upper" and value.lower() in ("inf", "+inf"):
            return value
        raise ConfigError(f"{sec.path}.{key} must be a number or a field table", f"{sec.path}.{key}")
    if isinstance(value, dict) and "kind" not in value:
        raise ConfigError(f"{sec.path}.{key} needs a 'kind'", f"{sec.path}.{key}.kind")
    if not isinstance(value, (int, float, dict)) or isinstance(value, bool):
        raise ConfigError(f"{sec.path}.{key} must be a number or a field table", f"{sec.path}.{key}")
    return value


def _problem(sec: _Section) -> ProblemConfig:
    bounds = sec.vector("bounds", None)
    if bounds is not None and len(bounds) != 2:
        raise ConfigError("problem.bounds must be [m, M]", "problem.bounds")
    mode = sec.string("mode", "double", ("single", "double"))
    upper = _field_spec(sec, "upper") if "upper" in sec.data else "inf"
    if mode == "double" and isinstance(upper, str):
        raise ConfigError("double-obstacle mode needs a finite upper obstacle", "problem.upper")
    return ProblemConfig(sec.number("horizon", positive=True), mode, _field_spec(sec, "lower"), upper,
                         _field_spec(sec, "terminal"), bounds)


def _grid(sec: _Section) -> GridConfig:
    lo, hi = sec.vector("lo"), sec.vector("hi")
    nodes = sec.vector("nodes", integer=True)
    if not len(lo) == len(hi) == len(nodes):
        raise ConfigError("grid.lo, grid.hi and grid.nodes need one entry per axis", "grid.nodes")
    if len(nodes) > 3:
        raise ConfigError("grids support at most 3 dimensions", "grid.nodes")
    if any(n < 3 for n in nodes):
        raise ConfigError("each axis needs at least 3 nodes", "grid.nodes")
    if any(not a < b for a, b in zip(lo, hi)):
        raise ConfigError("grid.lo must be below grid.hi on every axis", "grid.hi")
    try:
        opts = SolverOptions(
            scheme=sec.string("scheme", "implicit_psor", ("explicit", "implicit_psor")),
            omega=sec.number("omega", 1.5, positive=True),
            psor_tol=sec.number("psor_tol", 1e-9, positive=True),
            max_iter=sec.integer("max_iter", 10_000),
            tol_pde=sec.number("tol_pde", 1e-4, positive=True),
            contact_eps=sec.number("contact_eps", None),
        )
    except DynkinLabError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), "grid") from e
    return GridConfig(lo, hi, nodes, sec.integer("time_steps"),
                      sec.string("boundary", "dirichlet_from_payoff", ("dirichlet_from_payoff", "neumann_zero")),
                      opts)


def _mc(sec: _Section) -> McConfig:
    return McConfig(sec.integer("n_paths"), sec.integer("seed", minimum=0), sec.integer("n_steps", 100),
                    sec.number("z_threshold", 4.0, positive=True), sec.integer("growth_samples", 10_000),
                    sec.string("path_format", "csv", ("csv", "npy")))


def _audit(sec: _Section, dim: int) -> AuditConfig:
    x = sec.vector("x")
    if len(x) != dim:
        raise ConfigError(f"audit.x must have {dim} coordinates", "audit.x")
    margin = sec.number("box_margin", 0.2)
    if not 0.0 <= margin < 0.5:
        raise ConfigError("audit.box_margin must lie in [0, 0.5)", "audit.box_margin")
    return AuditConfig(sec.number("s", 0.0), x, sec.vector("shifts", (0.05,)),
                       sec.number("scheme_tolerance", 0.02), sec.integer("martingale_paths", 100_000, minimum=2),
                       sec.integer("martingale_starts", 8), sec.integer("martingale_steps", 50, minimum=2),
                       sec.number("pointwise_tol", 5e-3), margin, bool(sec.raw("per_path_samples", False)))


def _oracle(sec: _Section) -> OracleConfig:
    kind = sec.string("kind", choices=ORACLE_KINDS)
    return OracleConfig(kind, {k: v for k, v in sec.data.items() if k != "kind"})


def _bench(sec: Optional[_Section]) -> BenchConfig:
    if sec is None:
        return BenchConfig()
    return BenchConfig(sec.integer("levels", 3), sec.number("margin", 0.2))


def _output(sec: Optional[_Section]) -> OutputConfig:
    if sec is None:
        return OutputConfig()
    formats = sec.raw("formats", ["csv", "json"])
    if not isinstance(formats, list) or not formats or any(f not in SURFACE_FORMATS for f in formats):
        raise ConfigError(f"output.formats must be a nonempty list of {', '.join(SURFACE_FORMATS)}",
                          "output.formats")
    return OutputConfig(sec.string("dir", "out"), tuple(formats))


def config_hash(document: Dict[str, Any]) -> str:
    """SHA-256 of the canonical (sorted-key, compact) JSON dump of the document."""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{source}: TOML syntax error: {e}") from e
    known = {"model", "problem", "grid", "mc", "audit", "oracle", "bench", "output"}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown section [{unknown[0]}]", unknown[0])

    def section(name: str, optional: bool = False) -> Optional[_Section]:
        if name not in doc:
            if optional:
                return None
            raise ConfigError(f"missing section [{name}]", name)
        return _Section(doc[name], name)

    grid = _grid(section("grid"))
    audit_sec = section("audit", optional=True)
    oracle_sec = section("oracle", optional=True)
    return RunConfig(
        model=_model(section("model")),
        problem=_problem(section("problem")),
        grid=grid,
        mc=_mc(section("mc")),
        audit=None if audit_sec is None else _audit(audit_sec, len(grid.lo)),
        oracle=None if oracle_sec is None else _oracle(oracle_sec),
        bench=_bench(section("bench", optional=True)),
        output=_output(section("output", optional=True)),
        config_hash=config_hash(doc),
        source=source,
    )


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a TOML run configuration."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text, str(path))

