"""Run configuration: TOML file -> validated AppConfig, then CLI overrides"""
import os
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Dict, Optional, Sequence

from pydantic import ValidationError

from csaeo.models.config import AppConfig
from csaeo.utils.errors import ConfigError
from csaeo.utils.i18n import t
from csaeo.utils.logger import logger

_TOML_POSITION = re.compile(r"\(at line (\d+), column (\d+)\)")


def _locate(text: str, loc: Sequence[Any]) -> Optional[int]:
    """Line number of a (section, ..., key) path in the TOML text, if it can be found"""
    keys = [str(part) for part in loc if not isinstance(part, int)]
    if not keys:
        return None
    *sections, key = keys
    lines = text.splitlines()
    start = 0
    if sections:
        header = re.compile(r"^\s*\[\s*" + r"\s*\.\s*".join(map(re.escape, sections)) + r"\s*\]")
        for i, line in enumerate(lines):
            if header.match(line):
                start = i + 1
                break
        else:
            return None
    key_line = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for i in range(start, len(lines)):
        if i > start and lines[i].lstrip().startswith("[") and sections:
            break
        if key_line.match(lines[i]):
            return i + 1
    return None


def _format_validation(e: ValidationError, text: str) -> str:
    problems = []
    for error in e.errors():
        path = ".".join(str(part) for part in error["loc"])
        line = _locate(text, error["loc"])
        where = f"{path} (line {line})" if line else path
        problems.append(f"{where}: {error['msg']}")
    return "; ".join(problems)


def parse_config(text: str, path: str = "<string>") -> AppConfig:
    try:
        raw: Dict[str, Any] = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = _TOML_POSITION.search(str(e))
        line, column = match.groups() if match else ("?", "?")
        raise ConfigError(t("config_parse_error", path=path, line=line, column=column, error=e)) from e
    try:
        return AppConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(t("config_invalid", path=path, errors=_format_validation(e, text))) from e


def load_config(path: Optional[str] = None) -> AppConfig:
    """Load a TOML run file; no path gives the built-in defaults"""
    if path is None:
        return AppConfig()
    if not os.path.isfile(path):
        raise ConfigError(t("config_not_found", path=path))
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    cfg = parse_config(text, path)
    logger.debug(f"Loaded configuration from {path}: {cfg.model_dump()}")
    return cfg


def apply_overrides(cfg: AppConfig, seed: Optional[int] = None, jobs: Optional[int] = None,
                    out: Optional[str] = None, overwrite: bool = False) -> AppConfig:
    """Fold CLI flags (and CSAEO_JOBS) into the harness section"""
    update: Dict[str, Any] = {}
    if seed is not None:
        update["seed"] = seed
    if jobs is None and os.getenv("CSAEO_JOBS"):
        try:
            jobs = int(os.getenv("CSAEO_JOBS"))
        except ValueError as e:
            raise ConfigError(t("config_invalid", path="CSAEO_JOBS", errors=e)) from e
    if jobs is not None:
        update["jobs"] = jobs
    if out is not None:
        update["output_dir"] = out
    if overwrite:
        update["overwrite"] = True
    if not update:
        return cfg
    try:
        harness = cfg.harness.model_validate({**cfg.harness.model_dump(), **update})
    except ValidationError as e:
        raise ConfigError(t("config_invalid", path="command line", errors=_format_validation(e, ""))) from e
    return cfg.model_copy(update={"harness": harness})


__all__ = ('parse_config', 'load_config', 'apply_overrides')
