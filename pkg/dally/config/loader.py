import yaml
from pathlib import Path

from dally.config.schema import ClaimsConfig
from dally.errors import UsageError


def _read_yaml(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise UsageError(f"{path} must be a YAML mapping/object at top level")
    return data


def load_claims(claims_path: str = "configs/claims.yaml") -> ClaimsConfig:
    return ClaimsConfig.model_validate(_read_yaml(claims_path))


def load_claims_text(text: str) -> ClaimsConfig:
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise UsageError("claims document must be a YAML mapping/object at top level")
    return ClaimsConfig.model_validate(data)


def default_claims_path() -> Path:
    return Path(__file__).resolve().parents[2] / "configs" / "claims.yaml"
