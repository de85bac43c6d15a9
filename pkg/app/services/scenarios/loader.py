"""
Scenario files: YAML on disk, validated into a ScenarioConfig and wired into a ScenarioSpec
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import TypeAdapter, ValidationError

from app.core.config import settings
from app.core.exceptions import ScenarioConfigError
from app.models.schemas import ScenarioConfig, ScenarioInfo
from app.services.scenarios import boat, generic, probe, racing
from app.services.scenarios.base import ScenarioSpec

logger = logging.getLogger(__name__)

config_adapter = TypeAdapter(ScenarioConfig)

BUILDERS = {
    "generic": generic.build,
    "racing": racing.build,
    "boat": boat.build,
    "probe": probe.build,
}


def resolve_path(name_or_path: Union[str, Path], scenario_dir: Optional[str] = None) -> Path:
    """A path to an existing file, or a bare scenario name looked up in the scenario directory."""
    candidate = Path(name_or_path)
    if candidate.is_file():
        return candidate
    base = Path(scenario_dir or settings.SCENARIO_DIR)
    for suffix in (".yaml", ".yml"):
        path = base / f"{candidate.name}{suffix}" if candidate.suffix == "" else base / candidate.name
        if path.is_file():
            return path
    raise ScenarioConfigError([f"scenario '{name_or_path}' not found"], source=str(base))


def _problems(e: ValidationError) -> List[str]:
    return [f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()]


def parse_config(data: Dict[str, Any], source: Optional[str] = None):
    if not isinstance(data, dict):
        raise ScenarioConfigError(["scenario file must hold a mapping"], source=source)
    data = dict(data)
    data.setdefault("scenario", "generic")
    try:
        return config_adapter.validate_python(data)
    except ValidationError as e:
        raise ScenarioConfigError(_problems(e), source=source)


def build_spec(cfg, source: Optional[str] = None) -> ScenarioSpec:
    spec = BUILDERS[cfg.scenario](cfg)
    spec.source = source
    for warning in spec.warnings:
        logger.warning(f"{cfg.name}: {warning}")
    return spec


def load_config(name_or_path: Union[str, Path], scenario_dir: Optional[str] = None):
    path = resolve_path(name_or_path, scenario_dir)
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ScenarioConfigError([f"YAML error: {e}"], source=str(path))
    return parse_config(data, str(path)), path


def load_scenario(name_or_path: Union[str, Path], scenario_dir: Optional[str] = None) -> ScenarioSpec:
    cfg, path = load_config(name_or_path, scenario_dir)
    logger.info(f"Loaded scenario {cfg.name} ({cfg.scenario}) from {path}")
    return build_spec(cfg, str(path))


def list_scenarios(scenario_dir: Optional[str] = None) -> List[ScenarioInfo]:
    base = Path(scenario_dir or settings.SCENARIO_DIR)
    out = []
    for path in sorted(list(base.glob("*.yaml")) + list(base.glob("*.yml"))):
        try:
            cfg, _ = load_config(path)
        except ScenarioConfigError as e:
            logger.warning(f"Skipping {path.name}: {e.message}")
            continue
        out.append(ScenarioInfo(name=path.stem, kind=cfg.scenario, description=cfg.description, path=str(path)))
    return out
