"""CSV/JSON emission and the run manifest."""
import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

CSV_FORMAT = "%.9e"


def write_csv(path, header, columns):
    """Columns of equal length to ``path``: one header row, %.9e, comma, LF."""
    data = np.column_stack([np.asarray(c, dtype=float).ravel() for c in columns])
    if data.shape[1] != len(header):
        raise ValueError("header and column count differ")
    _atomic_write(path, lambda fh: np.savetxt(fh, data, fmt=CSV_FORMAT, delimiter=",", newline="\n",
                                              header=",".join(header), comments=""))
    return Path(path)


def read_csv(path):
    """(header, data) of a file written by :func:`write_csv`."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    _atomic_write(path, lambda fh: fh.write(text))
    return Path(path)


def _atomic_write(path, writer):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def code_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Provenance of one CLI invocation."""
    subcommand: str
    flags: dict
    inputs_si: dict
    config_path: str
    config_hash: str
    code_version: str = field(default_factory=code_version)
    started: str = field(default_factory=_now)
    finished: str = ""
    outputs: list = field(default_factory=list)
    checks: list = field(default_factory=list)

    def add(self, path):
        self.outputs.append(str(Path(path).name))
        return path

    def write(self, directory, name="manifest.json"):
        self.finished = _now()
        return write_json(Path(directory) / name, asdict(self))
