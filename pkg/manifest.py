# manifest.py
# © 2025 Colt McVey
# Run manifests: a key-value record of everything needed to re-derive a run's bounds.

import hashlib
import logging
from pathlib import Path

import numpy as np

from data_manager import atomic_write_text


def array_checksum(values: np.ndarray) -> str:
    """Stable SHA-1 of an array's float64 bytes."""
    data = np.ascontiguousarray(np.asarray(values, dtype=np.float64)).tobytes()
    return hashlib.sha1(data).hexdigest()


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format(v) for v in value)
    return str(value)


class RunManifest:
    """
    Ordered key-value record written next to a run's CSV. Keys are grouped
    by prefix (config., data., model., topology., protocol., bounds.).
    """
    def __init__(self):
        self.entries: dict[str, str] = {}

    def set(self, key: str, value):
        self.entries[key] = _format(value)

    def update(self, prefix: str, values: dict):
        for key, value in values.items():
            self.set(f"{prefix}.{key}", value)

    def get(self, key: str, default=None) -> str | None:
        return self.entries.get(key, default)

    def to_text(self) -> str:
        return "".join(f"{key} = {value}\n" for key, value in self.entries.items())

    def save(self, path: str | Path) -> Path:
        path = atomic_write_text(path, self.to_text())
        logging.info(f"Manifest saved to {path}")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        manifest = cls()
        for line in Path(path).read_text().splitlines():
            if "=" in line:
                key, value = line.split("=", 1)
                manifest.entries[key.strip()] = value.strip()
        return manifest
