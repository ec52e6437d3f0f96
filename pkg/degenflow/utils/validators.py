import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

try:
    import magic
except ImportError:  # libmagic shared library absent; sniffing below falls back to mime=None
    magic = None
from fastapi import HTTPException
from pydantic import ValidationError
from starlette.datastructures import UploadFile

from degenflow.config import settings
from degenflow.errors import ConfigSyntaxError, ConfigValidationError, DegenflowError
from degenflow.models import ExperimentConfig

logger = logging.getLogger(__name__)

# MIME types libmagic reports for JSON text
JSON_MIME_TYPES = {"application/json", "text/plain", "text/x-json"}


def _dotted(loc: Iterable[Any]) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def parse_config_text(text: str) -> Dict[str, Any]:
    """Parse JSON config text; syntax errors carry line and column"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigSyntaxError(e.msg, e.lineno, e.colno)
    if not isinstance(data, dict):
        raise ConfigValidationError("<root>", "config must be a JSON object")
    return data


def apply_overrides(data: Dict[str, Any], overrides: Optional[Iterable[str]]) -> Dict[str, Any]:
    """Apply `dotted.key=value` overrides; values parse as JSON, else stay strings"""
    for override in overrides or []:
        key, sep, raw = override.partition("=")
        if not sep or not key.strip():
            raise ConfigValidationError(override, "override must look like key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.strip().split(".")
        target: Any = data
        for depth, part in enumerate(parts[:-1]):
            if isinstance(target, list) and part.isdigit() and int(part) < len(target):
                target = target[int(part)]
                continue
            if not isinstance(target, dict):
                raise ConfigValidationError(".".join(parts[:depth + 1]), "cannot override inside a scalar")
            if not isinstance(target.get(part), (dict, list)):
                target[part] = {}
            target = target[part]
        last = parts[-1]
        if isinstance(target, list) and last.isdigit() and int(last) < len(target):
            target[int(last)] = value
        elif isinstance(target, dict):
            target[last] = value
        else:
            raise ConfigValidationError(key, "cannot override inside a scalar")
    return data


def validate_config(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a config dict; the first schema violation is reported by dotted field"""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigValidationError(_dotted(first["loc"]), first["msg"])


def load_config(path, overrides: Optional[Iterable[str]] = None, kind: Optional[str] = None) -> ExperimentConfig:
    """Read, override and validate an experiment config file"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigValidationError("config", f"cannot read {path}: {e.strerror or e}")
    data = apply_overrides(parse_config_text(text), overrides)
    if kind is not None:
        data["kind"] = kind
    config = validate_config(data)
    logger.info(f"Loaded {config.kind.value} config from {path}")
    return config


class FileValidator:
    """Validates uploaded experiment config files"""

    @staticmethod
    async def validate_config_upload(file: UploadFile) -> bytes:
        """Check name, extension, size and content type; returns the file content"""
        if not file.filename:
            raise HTTPException(status_code=400, detail="Filename is required")

        safe_filename = FileValidator._sanitize_filename(file.filename)
        ext = Path(safe_filename).suffix.lower()
        if ext not in settings.ALLOWED_CONFIG_EXTENSIONS:
            raise HTTPException(
                status_code=400,
                detail=f"Invalid file type. Allowed: {sorted(settings.ALLOWED_CONFIG_EXTENSIONS)}"
            )

        content = await file.read()
        if len(content) > settings.MAX_CONFIG_SIZE:
            raise HTTPException(
                status_code=400,
                detail=f"File too large. Max size: {settings.MAX_CONFIG_SIZE / 1024:.0f}KB"
            )
        await file.seek(0)

        # libmagic may be missing on the host; the JSON parse still guards content
        try:
            mime = magic.from_buffer(content[:2048], mime=True)
        except Exception as e:
            logger.debug(f"MIME sniffing unavailable: {e}")
            mime = None
        if mime is not None and mime not in JSON_MIME_TYPES:
            raise HTTPException(status_code=400, detail=f"File is not JSON text (detected {mime})")
        return content

    @staticmethod
    def _sanitize_filename(filename: str) -> str:
        """Remove path separators, null bytes and leading dots"""
        safe = filename.replace('/', '_').replace('\\', '_').replace('\0', '')
        safe = safe.lstrip('.')
        name = Path(safe).stem[:100]
        ext = Path(safe).suffix[:10]
        return f"{name}{ext}"

    @staticmethod
    def parse_upload(content: bytes, overrides: Optional[Iterable[str]] = None,
                     kind: Optional[str] = None) -> ExperimentConfig:
        """Config from uploaded bytes; config errors become HTTP 400 with the error body"""
        try:
            text = content.decode("utf-8")
        except UnicodeDecodeError:
            raise HTTPException(status_code=400, detail="Config must be UTF-8 text")
        try:
            data = apply_overrides(parse_config_text(text), overrides)
            if kind:
                data["kind"] = kind
            return validate_config(data)
        except DegenflowError as e:
            raise HTTPException(status_code=400, detail=e.to_dict())
