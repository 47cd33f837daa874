import json
import math
import os
import tempfile

import numpy as np


def ensure_dir(path):
    """Create a directory (and parents) if needed and return it."""
    os.makedirs(path, exist_ok=True)
    return path


def save_atomic(path, data):
    """Write bytes or text to `path` through a temp file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    ensure_dir(directory)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, temp_file_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as temp_file:
            temp_file.write(payload)
        os.replace(temp_file_path, path)
    except BaseException:
        if os.path.exists(temp_file_path):
            os.remove(temp_file_path)
        raise
    return path


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def to_json(data):
    return json.dumps(data, indent=2, sort_keys=True, default=_json_default)


def save_json(path, data):
    return save_atomic(path, to_json(data) + "\n")


def load_json(path):
    """Read a JSON file; malformed content raises ValueError."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as e:
            raise ValueError(f"Malformed JSON in {path}: {e}")


def truncate(value, places=5):
    """Truncate (not round) toward zero to `places` decimals."""
    if value is None or not math.isfinite(value):
        return value
    scale = 10 ** places
    # guard against 0.99999999999 style float noise ending up one unit low
    return math.trunc(round(value * scale, 6)) / scale


def format_truncated(value, places=5):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{truncate(value, places):.{places}f}"


def shape_label(n):
    """Filename/table label for a motif: '5' or 'disc'."""
    return "disc" if n is None or n == "disc" else str(int(n))


def result_filename(group, n):
    return f"{group}_{shape_label(n)}.json"
