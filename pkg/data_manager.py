# data_manager.py
# © 2025 Colt McVey
# Manages the output directory where runs, manifests and plot series are written.

import os
import logging
import tempfile
from pathlib import Path


def get_output_dir(out_dir: str | Path | None = None) -> Path:
    """
    Gets the writable directory for run artifacts, creating it if needed.
    """
    if out_dir is None:
        out_path = Path(os.getenv("GOSSIPDA_OUT_DIR", Path(".") / "runs"))
    else:
        out_path = Path(out_dir)

    out_path.mkdir(parents=True, exist_ok=True)
    return out_path


def atomic_write_text(path: str | Path, text: str) -> Path:
    """
    Writes text to a temporary file in the target directory, then renames it
    over the destination so readers never observe a partial file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, 'w', newline='') as f:
            f.write(text)
        os.replace(tmp_name, path)
    except OSError as e:
        logging.error(f"Could not write '{path}'. Error: {e}")
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise
    return path
