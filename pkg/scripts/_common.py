"""Helpers shared by the experiment scripts."""
import json
import logging
from pathlib import Path

import numpy as np


def setup(out: str) -> Path:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")
    logging.info("wrote %s", path)
