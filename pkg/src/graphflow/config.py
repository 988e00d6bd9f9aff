"""Run configuration: a flat ``key = value`` document.

Grammar (one entry per line)::

    # comment
    key = value

``value`` is a Python literal (``1.0``, ``64``, ``"sphere"``, ``[0.0, 0.0]``,
``True``, ``None``).  Keys are the field names of :class:`RunConfig`; unknown
keys, type mismatches and invariant violations are all collected and reported
together in one :class:`ConfigurationError`.
"""

from __future__ import annotations

import ast
import math
from dataclasses import MISSING, asdict, dataclass, field, fields

from .errors import ConfigurationError
from .grid import MIN_RESOLUTION
from .manifolds import KINDS, SPHERE, ModelManifold
from .maps import FAMILIES


@dataclass
class RunConfig:
    domain_kind: str = "sphere"
    domain_dim: int = 2
    domain_curvature: float = 1.0
    domain_period: float = 2 * math.pi
    boundary: str = "auto"
    target_kind: str = "sphere"
    target_dim: int = 2
    target_curvature: float = 1.0
    map_family: str = "dilation"
    map_parameter: float = 0.5
    map_point: list = field(default_factory=list)
    map_expression: str = ""
    seed: int = 0
    resolution: int = 64
    cfl_safety: float = 0.2
    t_max: float = 10.0
    max_steps: int | None = None
    dt_request: float | None = None
    diam_tol: float = 1e-3
    tol_eps: float = 1e-3
    tol_logdet: float = 1e-6
    tol_disp: float | None = None
    h2_ceiling: float | None = None
    retry_max: int = 8
    monitor_stride: int = 20
    snapshot_stride: int = 0
    particle_stride: int = 3
    gauge_check: bool = True
    sigma: float = 1.0
    mu: float = 1.0
    oracle_nodes: int = 201
    oracle_sample_dt: float = 0.05
    output_dir: str = "graphflow_out"

    @property
    def exploratory(self) -> bool:
        """True for scaling families with factor >= 1 (outside the length-decreasing regime)."""
        return self.map_family in ("dilation", "stereo_scale", "random") and self.map_parameter >= 1.0

    def domain(self) -> ModelManifold:
        return ModelManifold(self.domain_kind, self.domain_dim, self.domain_curvature)

    def target(self) -> ModelManifold:
        return ModelManifold(self.target_kind, self.target_dim, self.target_curvature)


_OPTIONAL = {"max_steps": int, "dt_request": float, "tol_disp": float, "h2_ceiling": float}
_TYPES = {f.name: f.type for f in fields(RunConfig)}
_PY = {"str": str, "int": int, "float": float, "bool": bool, "list": list}


def _coerce(key, value):
    """Return (value, error message or None)."""
    if key in _OPTIONAL:
        if value is None:
            return None, None
        want = _OPTIONAL[key]
    else:
        want = _PY[_TYPES[key].split()[0]]
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if want is int and isinstance(value, bool):
        return value, f"expected int, got {value!r}"
    if not isinstance(value, want):
        return value, f"expected {want.__name__}, got {type(value).__name__} {value!r}"
    if want is list and not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return value, "expected a list of numbers"
    if want is list:
        value = [float(v) for v in value]
    return value, None


def _validate(cfg: RunConfig):
    errs = []
    pos = ["cfl_safety", "t_max", "diam_tol", "tol_eps", "tol_logdet", "sigma", "mu", "oracle_sample_dt"]
    for k in pos + [k for k in ("dt_request", "tol_disp", "h2_ceiling") if getattr(cfg, k) is not None]:
        v = getattr(cfg, k)
        if not (v > 0 and math.isfinite(v)):
            errs.append((k, f"must be positive and finite, got {v!r}"))
    if cfg.resolution < MIN_RESOLUTION:
        errs.append(("resolution", f"{cfg.resolution} is below the stencil minimum {MIN_RESOLUTION}"))
    if cfg.oracle_nodes < 5:
        errs.append(("oracle_nodes", "must be >= 5"))
    for k in ("monitor_stride", "particle_stride"):
        if getattr(cfg, k) < 1:
            errs.append((k, "must be >= 1"))
    for k in ("snapshot_stride", "retry_max"):
        if getattr(cfg, k) < 0:
            errs.append((k, "must be >= 0"))
    if cfg.max_steps is not None and cfg.max_steps < 0:
        errs.append(("max_steps", "must be >= 0"))
    if not cfg.domain_period > 0:
        errs.append(("domain_period", "must be positive"))
    if cfg.boundary not in ("auto", "atlas", "periodic", "open"):
        errs.append(("boundary", f"unknown boundary policy {cfg.boundary!r}"))
    for side in ("domain", "target"):
        kind = getattr(cfg, f"{side}_kind")
        if kind not in KINDS:
            errs.append((f"{side}_kind", f"must be one of {KINDS}"))
            continue
        try:
            ModelManifold(kind, getattr(cfg, f"{side}_dim"), getattr(cfg, f"{side}_curvature"))
        except ValueError as exc:
            errs.append((f"{side}_curvature", str(exc)))
    if cfg.domain_kind in KINDS and cfg.domain_kind != SPHERE and cfg.domain_kind != "euclidean":
        errs.append(("domain_kind", "the domain must be a sphere or a flat torus"))
    if cfg.domain_dim != 2:
        errs.append(("domain_dim", "only two-dimensional domains are discretized"))
    if cfg.map_family not in FAMILIES:
        errs.append(("map_family", f"must be one of {FAMILIES}"))
    if cfg.map_family in ("dilation", "stereo_scale") and not cfg.map_parameter > 0:
        errs.append(("map_parameter", "scale factor must be positive"))
    if cfg.map_family == "custom" and not cfg.map_expression.strip():
        errs.append(("map_expression", "custom maps need a profile expression in theta"))
    if cfg.map_family == "identity" and (cfg.domain_kind, cfg.domain_dim, cfg.domain_curvature) != (
            cfg.target_kind, cfg.target_dim, cfg.target_curvature):
        errs.append(("map_family", "identity needs identical domain and target"))
    if cfg.map_point and len(cfg.map_point) != cfg.target_dim:
        errs.append(("map_point", f"needs {cfg.target_dim} coordinates"))
    return errs


def config_from_dict(values: dict) -> RunConfig:
    errs = []
    kw = {}
    for key, value in values.items():
        if key not in _TYPES:
            errs.append((key, "unknown key"))
            continue
        v, err = _coerce(key, value)
        if err:
            errs.append((key, err))
        else:
            kw[key] = v
    cfg = RunConfig(**kw)
    if not errs:
        errs = _validate(cfg)
    else:
        errs += [e for e in _validate(cfg) if e[0] not in {k for k, _ in errs}]
    if errs:
        raise ConfigurationError(errs)
    return cfg


def parse_config(text: str) -> RunConfig:
    values = {}
    errs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, rest = line.partition("=")
        key = key.strip()
        if not sep or not key:
            errs.append((f"line {lineno}", "expected 'key = value'"))
            continue
        if key in values:
            errs.append((key, f"line {lineno}: duplicate key"))
            continue
        try:
            values[key] = ast.literal_eval(rest.strip())
        except (ValueError, SyntaxError):
            errs.append((key, f"line {lineno}: not a literal: {rest.strip()!r}"))
    try:
        cfg = config_from_dict(values)
    except ConfigurationError as exc:
        raise ConfigurationError(errs + exc.violations) from None
    if errs:
        raise ConfigurationError(errs)
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def emit_config(cfg: RunConfig) -> str:
    lines = ["# graphflow run configuration (key = python literal)"]
    for k, v in asdict(cfg).items():
        lines.append(f"{k} = {v!r}")
    return "\n".join(lines) + "\n"


def default_config_text() -> str:
    return emit_config(RunConfig())


def defaults() -> dict:
    out = {}
    for f in fields(RunConfig):
        out[f.name] = f.default_factory() if f.default is MISSING else f.default
    return out
