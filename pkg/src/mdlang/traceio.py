"""Trace persistence: a fixed-width text header followed by a raw
little-endian payload, plus the run manifest and a background writer.

Long runs at femtosecond steps produce large traces, so samples are
streamed to disk in chunks from a dedicated writer thread behind a
bounded queue: the stepping loop blocks only when the queue is full
(back-pressure), and nothing is dropped.  The sample count field in the
header is fixed-width and patched on close, which keeps the format
single-file and seekable.
"""

from __future__ import annotations

import hashlib
import json
import queue
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import TraceRecord, TraceError

MAGIC = "#MDLTRACE 1"
_COUNT_WIDTH = 20


def _header_text(record_meta: dict) -> str:
    lines = [MAGIC]
    for key in ("quantity", "probe", "unit", "dt", "t0", "dtype", "count"):
        lines.append(f"{key}={record_meta[key]}")
    return "\n".join(lines) + "\n\n"


def write_trace(path, record: TraceRecord) -> None:
    """Write a complete trace in one shot."""
    data = np.ascontiguousarray(record.data)
    dtype = "<c16" if np.iscomplexobj(data) else "<f8"
    meta = {
        "quantity": record.quantity, "probe": record.probe, "unit": record.unit,
        "dt": repr(float(record.dt)), "t0": repr(float(record.t0)),
        "dtype": dtype, "count": str(data.size).zfill(_COUNT_WIDTH),
    }
    with open(path, "wb") as fh:
        fh.write(_header_text(meta).encode("utf-8"))
        fh.write(data.astype(dtype).tobytes())


def read_trace(path) -> TraceRecord:
    """Read a trace file; raises :class:`TraceError` with the byte offset
    of the first malformed header line."""
    with open(path, "rb") as fh:
        first = fh.readline()
        if first.decode("utf-8", "replace").strip() != MAGIC:
            raise TraceError(f"{path}: bad magic at byte 0")
        meta = {}
        while True:
            offset = fh.tell()
            line = fh.readline()
            if not line:
                raise TraceError(f"{path}: truncated header at byte {offset}")
            text = line.decode("utf-8", "replace").rstrip("\n")
            if text == "":
                break
            if "=" not in text:
                raise TraceError(f"{path}: malformed header line at byte {offset}")
            key, _, value = text.partition("=")
            meta[key] = value
        try:
            count = int(meta["count"])
            dtype = np.dtype(meta["dtype"])
            dt = float(meta["dt"])
            t0 = float(meta["t0"])
        except (KeyError, ValueError) as exc:
            raise TraceError(f"{path}: incomplete header ({exc})") from None
        payload = fh.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise TraceError(f"{path}: payload shorter than the declared count")
        data = np.frombuffer(payload, dtype=dtype).copy()
    return TraceRecord(data=data, dt=dt, t0=t0, quantity=meta.get("quantity", ""),
                       probe=meta.get("probe", ""), unit=meta.get("unit", ""))


def export_text(path, record: TraceRecord, out_path) -> None:
    """Debug export: two-column time/value text file."""
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(f"# quantity={record.quantity} probe={record.probe} "
                 f"unit={record.unit} dt={record.dt!r} t0={record.t0!r}\n")
        for t, v in zip(record.times, record.data):
            fh.write(f"{float(t)!r}\t{complex(v)!r}\n"
                     if np.iscomplexobj(record.data) else
                     f"{float(t)!r}\t{float(v)!r}\n")


class StreamingTraceFile:
    """Incrementally written trace; the count is patched on close."""

    def __init__(self, path, dt: float, t0: float, quantity: str,
                 probe: str, unit: str, dtype: str = "<f8"):
        self.path = Path(path)
        self.dtype = np.dtype(dtype)
        meta = {"quantity": quantity, "probe": probe, "unit": unit,
                "dt": repr(float(dt)), "t0": repr(float(t0)),
                "dtype": dtype, "count": "0".zfill(_COUNT_WIDTH)}
        header = _header_text(meta).encode("utf-8")
        self._count_offset = header.index(b"count=") + len(b"count=")
        self._fh = open(self.path, "wb")
        self._fh.write(header)
        self.count = 0

    def append(self, chunk: np.ndarray) -> None:
        chunk = np.ascontiguousarray(chunk, dtype=self.dtype)
        self._fh.write(chunk.tobytes())
        self.count += chunk.size

    def close(self) -> None:
        self._fh.seek(self._count_offset)
        self._fh.write(str(self.count).zfill(_COUNT_WIDTH).encode("utf-8"))
        self._fh.close()


class TraceWriter:
    """Background writer with a bounded queue (back-pressure, no loss)."""

    def __init__(self, max_queued_chunks: int = 64):
        self._queue: queue.Queue = queue.Queue(maxsize=max_queued_chunks)
        self._files: dict[str, StreamingTraceFile] = {}
        self._error = None
        self._thread = threading.Thread(target=self._worker, daemon=True)
        self._thread.start()

    def open_trace(self, name: str, *args, **kwargs) -> None:
        self._files[name] = StreamingTraceFile(*args, **kwargs)

    def submit(self, name: str, chunk: np.ndarray) -> None:
        if self._error:
            raise self._error
        self._queue.put((name, chunk))

    def _worker(self):
        while True:
            item = self._queue.get()
            if item is None:
                return
            name, chunk = item
            try:
                self._files[name].append(chunk)
            except Exception as exc:  # surfaced on the next submit/close
                self._error = exc

    def close(self) -> None:
        self._queue.put(None)
        self._thread.join()
        for f in self._files.values():
            f.close()
        if self._error:
            raise self._error


def config_digest(config: dict) -> str:
    """Canonical SHA-256 of a JSON-serializable configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
