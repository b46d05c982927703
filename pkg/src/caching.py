from __future__ import annotations

"""Disk cache for evaluation results so sweeps and tuning never rerun a config."""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

logger = logging.getLogger(__name__)


class ResultCache:
    """JSON results keyed by design fingerprint and configuration."""

    def __init__(self, cache_dir: Path) -> None:
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _key(self, fingerprint: str, config: Mapping[str, Any]) -> str:
        m = hashlib.sha256()
        m.update(fingerprint.encode("utf-8"))
        m.update(json.dumps(dict(config), ensure_ascii=False, sort_keys=True).encode("utf-8"))
        return m.hexdigest()

    def path_for(self, fingerprint: str, config: Mapping[str, Any]) -> Path:
        return self.cache_dir / f"{self._key(fingerprint, config)}.json"

    def get(self, fingerprint: str, config: Mapping[str, Any]) -> Optional[Dict[str, Any]]:
        path = self.path_for(fingerprint, config)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError):
            # corrupt entry, recompute
            logger.warning("dropping corrupt cache entry %s", path.name)
            path.unlink(missing_ok=True)
            return None

    def set(self, fingerprint: str, config: Mapping[str, Any], value: Mapping[str, Any]) -> None:
        path = self.path_for(fingerprint, config)
        tmp = path.with_suffix(f".{os.getpid()}.tmp")
        tmp.write_text(json.dumps(dict(value), ensure_ascii=False, sort_keys=True), encoding="utf-8")
        tmp.replace(path)
