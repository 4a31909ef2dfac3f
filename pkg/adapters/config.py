"""Run configuration adapter: ``key = value`` files, overrides and the run manifest."""

from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from pydantic import ValidationError as PydanticValidationError

from config.settings import Settings, get_settings
from core.domain.problem import MeshMode, ProblemConfig, ReferenceKind
from core.domain.problems import get_problem
from core.exceptions import ConfigurationError, ValidationError
from core.utils.logging import LogCategory, create_logger

logger = create_logger(__name__, LogCategory.IO)

_LIST_FIELDS = {"output_times"}
_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}

# field order of the manifest
MANIFEST_KEYS: Tuple[str, ...] = (
    "problem",
    "dim",
    "domain",
    "boundary",
    "n_elements",
    "degree",
    "t_final",
    "output_times",
    "cfl",
    "m_tvb",
    "dry_mode",
    "delta",
    "mesh_mode",
    "adapt_every",
    "gravity",
    "dry_tol",
    "remap_cfl",
    "smoothing_sweeps",
    "mover_iterations",
    "reference",
    "reference_refinement",
    "snapshot_every",
    "dump_metric",
    "output_dir",
)


def parse_config_text(text: str, source: str = "<string>") -> Dict[str, str]:
    """Raw ``key = value`` pairs; ``#`` starts a comment, blank lines are skipped."""
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{number}: expected 'key = value', got '{raw.strip()}'", config_key=None)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in ProblemConfig.model_fields:
            raise ConfigurationError(f"{source}:{number}: unknown key '{key}'", config_key=key)
        values[key] = value
    return values


def load_config_file(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}", config_key=None, cause=exc) from exc
    logger.debug("config file loaded", path=str(path))
    return parse_config_text(text, str(path))


def _parse_domain(value: str) -> List[Tuple[float, float]]:
    axes = []
    for chunk in value.split(";"):
        parts = chunk.replace(",", " ").replace("(", " ").replace(")", " ").split()
        if len(parts) != 2:
            raise ConfigurationError(f"domain axis '{chunk.strip()}' must have two bounds", config_key="domain")
        axes.append((float(parts[0]), float(parts[1])))
    return axes


def _parse_boundary(value: str) -> Dict[str, str]:
    out = {}
    for item in value.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise ConfigurationError(f"boundary entry '{item}' must be 'side:kind'", config_key="boundary")
        side, kind = (p.strip() for p in item.split(":", 1))
        out[side] = kind
    return out


def coerce_value(key: str, value: Any) -> Any:
    """Turn a raw string into the python value a ProblemConfig field expects."""
    if not isinstance(value, str):
        return value
    if key == "domain":
        return _parse_domain(value)
    if key == "boundary":
        return _parse_boundary(value)
    if key in _LIST_FIELDS:
        return [float(v) for v in value.replace(",", " ").split()]
    annotation = ProblemConfig.model_fields[key].annotation
    if annotation is bool:
        lowered = value.lower()
        if lowered in _BOOL_TRUE:
            return True
        if lowered in _BOOL_FALSE:
            return False
        raise ConfigurationError(f"'{value}' is not a boolean", config_key=key)
    if annotation is int:
        return int(value)
    if annotation is float:
        return float(value)
    return value


def settings_defaults(settings: Settings) -> Dict[str, Any]:
    """Process-wide defaults every run starts from."""
    return {
        "gravity": settings.GRAVITY,
        "dry_tol": settings.DRY_TOLERANCE,
        "remap_cfl": settings.REMAP_CFL,
        "smoothing_sweeps": settings.METRIC_SMOOTHING_SWEEPS,
        "mover_iterations": settings.MOVER_ITERATIONS,
        "reference_refinement": settings.REFERENCE_REFINEMENT,
        "output_dir": settings.OUTPUT_DIR,
    }


def resolve_config(
    problem: Optional[str] = None,
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    settings: Optional[Settings] = None,
) -> ProblemConfig:
    """Settings < registry defaults < config file < overrides (None overrides are ignored)."""
    settings = settings or get_settings()
    file_values = {k: coerce_value(k, v) for k, v in load_config_file(config_file).items()} if config_file else {}
    flag_values = {k: coerce_value(k, v) for k, v in (overrides or {}).items() if v is not None}

    problem_id = flag_values.get("problem") or problem or file_values.get("problem")
    if not problem_id:
        raise ConfigurationError("no problem given (use --problem or a config file)", config_key="problem")

    merged: Dict[str, Any] = settings_defaults(settings)
    merged.update(get_problem(problem_id).default_config())
    merged.update(file_values)
    merged.update(flag_values)
    merged["problem"] = problem_id
    try:
        return ProblemConfig(**merged)
    except PydanticValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(p) for p in first.get("loc", ()))
        raise ValidationError(f"invalid configuration: {location}: {first.get('msg')}", field=location or None) from exc


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (MeshMode, ReferenceKind)):
        return value.value
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, dict):
        return ", ".join(f"{side}:{kind}" for side, kind in sorted(value.items()))
    if isinstance(value, (list, tuple)) and value and isinstance(value[0], (list, tuple)):
        return "; ".join(f"{repr(float(lo))} {repr(float(hi))}" for lo, hi in value)
    if isinstance(value, (list, tuple)):
        return " ".join(repr(float(v)) for v in value)
    return str(value)


def format_manifest(config: ProblemConfig, diagnostics: Optional[Mapping[str, Any]] = None) -> str:
    """Resolved configuration in the config-file format; diagnostics follow as comments."""
    lines = ["# resolved run configuration (re-run with: run --config <this file>)"]
    for key in MANIFEST_KEYS:
        lines.append(f"{key} = {_format_value(getattr(config, key))}")
    if diagnostics:
        lines.append("")
        lines.append("# diagnostics")
        for key in sorted(diagnostics):
            lines.append(f"# {key} = {diagnostics[key]}")
    return "\n".join(lines) + "\n"
