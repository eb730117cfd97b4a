"""Run artifacts: field snapshots, the diagnostics CSV and the run manifest.

Snapshots reuse the 64-byte header convention of the weight cache with magic
"FPLS"; the manifest is an append-only JSON-lines file (one object per event),
and the diagnostics CSV has a fixed header naming every DiagnosticsRecord
field, UTF-8, LF line endings, '.' decimal.
"""

import csv
import json
import time

import numpy as np

from . import _binfmt
from .diagnostics import DiagnosticsRecord
from .errors import UsageError
from .lattice import GridSpec, VelocityField


def save_snapshot(path, field: VelocityField, t: float) -> None:
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    header = _binfmt.pack_header(
        b"FPLS", field.grid.n_modes, 0, field.grid.half_length, t, 0.0, payload
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_snapshot(path):
    """Returns (VelocityField, t)."""
    (n, _aux, half_length, t, _), payload = _binfmt.read_block(path, b"FPLS")
    expected = n**3 * 8
    if len(payload) != expected:
        raise UsageError(f"{path}: payload length {len(payload)}, expected {expected}")
    grid = GridSpec(n, half_length)
    vals = np.frombuffer(payload, dtype="<f8").reshape(n, n, n).copy()
    return VelocityField(grid, vals), t


class CsvSink:
    """Writes one CSV row per diagnostics record, flushed per emission."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8", newline="\n")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(DiagnosticsRecord.fieldnames())
        self._fh.flush()
        self.count = 0

    def __call__(self, rec: DiagnosticsRecord) -> None:
        self._writer.writerow([f"{v:.17g}" for v in rec.row()])
        self._fh.flush()
        self.count += 1

    def close(self) -> None:
        self._fh.close()


def read_diagnostics_csv(path):
    """Returns (fieldnames, list of per-column float arrays keyed by name)."""
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UsageError(f"{path}: no records") from None
        rows = [[float(x) for x in row] for row in reader if row]
    if not rows:
        raise UsageError(f"{path}: no records")
    cols = {name: np.array([r[i] for r in rows]) for i, name in enumerate(header)}
    return header, cols


class Manifest:
    """Append-only JSONL manifest; exactly one per run directory."""

    def __init__(self, path):
        self.path = path

    def append(self, event: str, **payload) -> None:
        rec = {"event": event, "wall_time": time.time(), **payload}
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def read(self):
        out = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out
