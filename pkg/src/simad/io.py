"""Files: dataset CSVs, score CSVs, run configs and model checkpoints.

Checkpoint layout (all integers little-endian)::

    b"SIMADCK1"  u32 version
    u32 n + n bytes   model config as JSON
    u32 tensor count
    per tensor: u32 n + name, u32 rank, rank * u64 dims, float32 payload
    u32 CRC-32 of every preceding byte

>>> from .model import ModelConfig, SimAD
>>> m = SimAD(ModelConfig.tiny(), seed=1)
>>> m2 = checkpoint_from_bytes(checkpoint_to_bytes(m))
>>> all((m2.params[k].data == v.data).all() for k, v in m.params.items())
True
"""

from __future__ import annotations

import csv
import json
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointError, ConfigError, DataFormatError
from .metrics import BiasSpec, MetricReport, ThresholdSpec
from .model import ModelConfig, SimAD
from .trainer import TrainConfig

MAGIC = b"SIMADCK1"
FORMAT_VERSION = 1
TIMESTAMP_COL = "timestamp"
LABEL_COL = "label"
SCORE_COLUMNS = ("score", "mse", "similarity")


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    values: np.ndarray                  # (n, C) float64
    channels: list
    labels: np.ndarray | None = None    # (n,) int8
    timestamps: list | None = None

    def __len__(self):
        return self.values.shape[0]

    def require_labels(self, path=None) -> np.ndarray:
        if self.labels is None:
            raise DataFormatError(f"no '{LABEL_COL}' column", path=path)
        return self.labels


def _parse_float(text, path, line, col):
    try:
        v = float(text)
    except ValueError:
        raise DataFormatError(f"not a number: {text!r}", path, line, col) from None
    if not math.isfinite(v):
        raise DataFormatError(f"non-finite value {text!r}", path, line, col)
    return v


def read_dataset(path) -> Dataset:
    """Parse a CSV with a header row.

    ``timestamp`` and ``label`` columns are optional; every other column is
    a numeric channel.  Errors report ``path:line:column`` (1-based).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError("empty file", path=path)
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataFormatError("duplicate column names", path, 1)
    ts_idx = header.index(TIMESTAMP_COL) if TIMESTAMP_COL in header else None
    lab_idx = header.index(LABEL_COL) if LABEL_COL in header else None
    ch_idx = [i for i in range(len(header)) if i not in (ts_idx, lab_idx)]
    if not ch_idx:
        raise DataFormatError("no channel columns", path, 1)

    values, labels, stamps = [], [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataFormatError(f"expected {len(header)} columns, found {len(row)}", path, ln)
        values.append([_parse_float(row[i], path, ln, i + 1) for i in ch_idx])
        if lab_idx is not None:
            cell = row[lab_idx].strip()
            if cell not in ("0", "1"):
                raise DataFormatError(f"label must be 0 or 1, got {cell!r}", path, ln, lab_idx + 1)
            labels.append(int(cell))
        if ts_idx is not None:
            stamps.append(row[ts_idx])
    if not values:
        raise DataFormatError("no data rows", path=path)
    return Dataset(np.array(values, dtype=np.float64), [header[i] for i in ch_idx],
                   np.array(labels, dtype=np.int8) if lab_idx is not None else None,
                   stamps if ts_idx is not None else None)


def write_dataset(path, values, labels=None, channels=None, timestamps=None) -> None:
    """Write a dataset CSV; floats use shortest round-trip ``repr``."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    channels = list(channels) if channels else [f"c{i}" for i in range(x.shape[1])]
    header = ([TIMESTAMP_COL] if timestamps is not None else []) + channels
    if labels is not None:
        header.append(LABEL_COL)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(x.shape[0]):
            row = [timestamps[i]] if timestamps is not None else []
            row += [repr(float(v)) for v in x[i]]
            if labels is not None:
                row.append(int(labels[i]))
            w.writerow(row)


def read_labels(path) -> np.ndarray:
    """The ``label`` column of any CSV; other columns are not parsed."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError("empty file", path=path)
    header = [h.strip() for h in rows[0]]
    if LABEL_COL not in header:
        raise DataFormatError(f"no '{LABEL_COL}' column", path, 1)
    col = header.index(LABEL_COL)
    out = []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataFormatError(f"expected {len(header)} columns, found {len(row)}", path, ln)
        cell = row[col].strip()
        if cell not in ("0", "1"):
            raise DataFormatError(f"label must be 0 or 1, got {cell!r}", path, ln, col + 1)
        out.append(int(cell))
    return np.array(out, dtype=np.int8)


def write_labels(path, labels) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([LABEL_COL])
        w.writerows([int(v)] for v in labels)


def write_scores(path, total, mse, similarity) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORE_COLUMNS)
        for row in zip(total, mse, similarity):
            w.writerow([repr(float(v)) for v in row])


def read_scores(path) -> np.ndarray:
    """The ``score`` column of a scores CSV (or the only column of a one-column file)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError("empty file", path=path)
    header = [h.strip() for h in rows[0]]
    if "score" in header:
        col = header.index("score")
    elif len(header) == 1:
        col = 0
    else:
        raise DataFormatError("no 'score' column", path, 1)
    out = []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataFormatError(f"expected {len(header)} columns, found {len(row)}", path, ln)
        out.append(_parse_float(row[col], path, ln, col + 1))
    return np.array(out)


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

@dataclass
class MetricOptions:
    threshold: str = "best-f1"
    bias: str = "empirical"
    bias_repetitions: int = 20
    bias_seed: int = 0

    def threshold_spec(self) -> ThresholdSpec:
        return ThresholdSpec.parse(self.threshold)

    def bias_spec(self) -> BiasSpec:
        return BiasSpec.parse(self.bias, repetitions=self.bias_repetitions, seed=self.bias_seed)


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    metrics: MetricOptions = field(default_factory=MetricOptions)

    def validate(self) -> None:
        self.model.validate()
        self.train.validate()
        try:
            self.metrics.threshold_spec()
            self.metrics.bias_spec()
        except ValueError as exc:
            raise ConfigError(f"metrics: {exc}") from None

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "train": self.train.to_dict(),
                "metrics": dict(vars(self.metrics))}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - {"model", "train", "metrics"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        try:
            cfg = cls(ModelConfig.from_dict(d.get("model", {})),
                      TrainConfig.from_dict(d.get("train", {})),
                      MetricOptions(**d.get("metrics", {})))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg


def _parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(base: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings to a config dict (values parsed as JSON if possible)."""
    out = {k: dict(v) for k, v in base.items()}
    for item in overrides or ():
        key, sep, val = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or not name:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        out.setdefault(section, {})[name] = _parse_override_value(val.strip())
    return out


def load_run_config(path=None, overrides=()) -> RunConfig:
    """Read a JSON run config (missing fields take their defaults), then apply overrides."""
    base = {}
    if path is not None:
        path = Path(path)
        try:
            base = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataFormatError(exc.msg, path, exc.lineno, exc.colno) from None
        if not isinstance(base, dict):
            raise ConfigError(f"{path}: top level must be an object")
    return RunConfig.from_dict(apply_overrides(base, overrides))


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def _u32(n: int) -> bytes:
    return struct.pack("<I", n)


def checkpoint_to_bytes(model: SimAD) -> bytes:
    parts = [MAGIC, _u32(FORMAT_VERSION)]
    cfg = json.dumps(model.config.to_dict(), sort_keys=True).encode()
    parts += [_u32(len(cfg)), cfg, _u32(len(model.params))]
    for name, t in model.params.items():
        raw = name.encode()
        arr = np.ascontiguousarray(t.data, dtype="<f4")
        parts += [_u32(len(raw)), raw, _u32(arr.ndim)]
        parts += [struct.pack("<Q", d) for d in arr.shape]
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + _u32(zlib.crc32(body))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise CheckpointError(f"truncated checkpoint at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def checkpoint_from_bytes(buf: bytes) -> SimAD:
    if len(buf) < len(MAGIC) + 8:
        raise CheckpointError("checkpoint too short")
    if buf[:len(MAGIC)] != MAGIC:
        raise CheckpointError("bad magic: not a SimAD checkpoint")
    body, crc = buf[:-4], struct.unpack("<I", buf[-4:])[0]
    r = _Reader(body)
    r.take(len(MAGIC))
    version = r.u32()
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if zlib.crc32(body) != crc:
        raise CheckpointError("checksum mismatch: checkpoint is corrupted")
    try:
        cfg = ModelConfig.from_dict(json.loads(r.take(r.u32()).decode()))
    except (UnicodeDecodeError, json.JSONDecodeError, ConfigError, TypeError) as exc:
        raise CheckpointError(f"bad model config: {exc}") from None
    state = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode()
        shape = tuple(r.u64() for _ in range(r.u32()))
        count = math.prod(shape)
        state[name] = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(shape)
    if r.pos != len(body):
        raise CheckpointError(f"{len(body) - r.pos} trailing bytes")
    model = SimAD(cfg, seed=0)
    try:
        model.load_state_dict(state)
    except ValueError as exc:
        raise CheckpointError(str(exc)) from None
    return model


def save_checkpoint(model: SimAD, path) -> None:
    Path(path).write_bytes(checkpoint_to_bytes(model))


def load_checkpoint(path) -> SimAD:
    return checkpoint_from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# reports and logs
# ---------------------------------------------------------------------------

def write_report(path, report: MetricReport) -> None:
    Path(path).write_text(report.to_json() + "\n")


def read_report(path) -> MetricReport:
    return MetricReport.from_json(Path(path).read_text())


def write_log(path, records) -> None:
    """Training log as one JSON object per line."""
    with Path(path).open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
