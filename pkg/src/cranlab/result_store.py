"""Result tables and manifests on disk."""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from .constants import MANIFEST_VERSION
from .errors import SchemaError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class ResultStore:
    """Owns one output directory.

    Overwritten files keep their previous version as ``<name>.bak``.
    """

    def __init__(self, output_dir: Union[str, Path]):
        """Initialize result store."""
        self.output_dir = Path(output_dir)

    def _prepare(self, name: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.output_dir / name
        if path.exists():
            # Keep previous version
            path.replace(path.with_name(path.name + ".bak"))
        return path

    def write_csv(self, name: str, columns: Sequence[str], rows: List[Dict[str, Any]]) -> Path:
        """Write rows in column order; missing values are left empty."""
        path = self._prepare(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction="ignore",
                                    lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        logger.info(f"Wrote {len(rows)} rows to {path}")
        return path

    def read_csv(self, name: str) -> List[Dict[str, str]]:
        with open(self.output_dir / name, "r", encoding="utf-8", newline="") as f:
            return list(csv.DictReader(f))

    def write_json(self, name: str, data: Dict[str, Any]) -> Path:
        path = self._prepare(name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False)
        return path

    def write_manifest(self, data: Dict[str, Any], name: str = MANIFEST_NAME) -> Path:
        """Write a manifest stamped with the manifest version."""
        return self.write_json(name, {"manifest_version": MANIFEST_VERSION, **data})

    def load_manifest(self, name: str = MANIFEST_NAME) -> Dict[str, Any]:
        """Load a manifest and validate its version."""
        path = self.output_dir / name
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (json.JSONDecodeError, IOError) as exc:
            raise SchemaError(f"cannot read manifest {path}: {exc}") from exc
        if not isinstance(data, dict) or data.get("manifest_version") != MANIFEST_VERSION:
            raise SchemaError(f"unsupported manifest version in {path}")
        return data

    def backup_of(self, name: str) -> Optional[Path]:
        """Path of the previous version of ``name``, if one was kept."""
        path = self.output_dir / (name + ".bak")
        return path if path.exists() else None
