"""JSON files: run configuration, category fits, summaries, manifests, synthetic profiles."""

import json
from pathlib import Path
from typing import Optional, Type, TypeVar

from pydantic import BaseModel, ValidationError

from core.exceptions import ConfigurationError, ParseError
from models.schemas import CategoryFits, RunManifest, SimConfig, SimConfigFile, SimSummary, SyntheticProfile

M = TypeVar("M", bound=BaseModel)


def _dump(path, data: dict) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return str(path)


def _load(path, model: Type[M], module: str) -> M:
    path = Path(path)
    if not path.exists():
        raise ParseError(module, "file not found", path=str(path))
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(module, f"invalid JSON: {e.msg}", path=str(path), line=e.lineno) from None
    try:
        return model.model_validate(data)
    except ValidationError as e:
        detail = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
        raise ConfigurationError(module, f"{path}: {detail}") from None


def load_config(path) -> SimConfig:
    """Validated simulation config. Unknown keys and out-of-range values are rejected."""
    return _load(path, SimConfigFile, "cli").simulation


def save_config(path, cfg: SimConfig) -> str:
    return _dump(path, SimConfigFile(simulation=cfg).model_dump(mode="json"))


def load_fits(path) -> CategoryFits:
    return _load(path, CategoryFits, "supply")


def save_fits(path, fits: CategoryFits) -> str:
    return _dump(path, fits.model_dump(mode="json"))


def load_profile(path) -> SyntheticProfile:
    return _load(path, SyntheticProfile, "cli")


def save_summary(path, summary: SimSummary, cfg: Optional[SimConfig] = None) -> str:
    data = {
        "mean_cost_km": summary.mean_cost,
        "mean_excess_lbs": summary.mean_excess,
        "mean_recovered_lbs": summary.mean_recovered,
        "underrun_days": summary.underrun_days,
        "total_recovered_lbs": summary.total_recovered,
        "unproven_optimal_days": summary.unproven_optimal_days,
        "conservation_checks": summary.conservation_checks,
        "days": summary.days,
    }
    if cfg is not None:
        data["config"] = cfg.model_dump(mode="json")
    return _dump(path, data)


def save_manifest(path, manifest: RunManifest) -> str:
    return _dump(path, manifest.model_dump(mode="json"))
