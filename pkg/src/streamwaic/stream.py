"""ND-text stream of h-vectors, one MCMC sample per line.

Header (optional when metadata is supplied separately)::

    waic-stream v1 M=<int> mode=<conditional|marginal>

Conditional lines carry ``M`` comma-separated values; marginal lines carry
``4*M`` values ordered by checkpoint fraction, then element. Values are
written with ``repr`` so a replay reproduces every bit.
"""

import json
import re
from pathlib import Path

import numpy as np

from .engine import waic_finalize, waic_init, waic_update
from .exceptions import IntegrityError, StreamFormatError, WaicError
from .partition import PartitionSpec
from .predictive import CONDITIONAL, MARGINAL, PredictiveConfig

HEADER_RE = re.compile(r"^waic-stream v1 M=(\d+) mode=(conditional|marginal)\s*$")


def format_header(M, mode):
    return f"waic-stream v1 M={M} mode={mode}"


def format_line(h):
    return ",".join(repr(float(v)) for v in np.ravel(h))


class StreamWriter:
    """Append h-vectors to a text handle; usable as an ``h_sink`` callback."""

    def __init__(self, handle, M, mode):
        self.handle = handle
        self.handle.write(format_header(M, mode) + "\n")

    def __call__(self, h):
        self.handle.write(format_line(h) + "\n")


def _meta(partition_meta):
    if partition_meta is None:
        return {}
    if isinstance(partition_meta, PartitionSpec):
        return {"M": partition_meta.n_elements}
    if isinstance(partition_meta, dict):
        meta = dict(partition_meta)
    else:
        try:
            meta = json.loads(Path(partition_meta).read_text())
        except ValueError as exc:
            raise StreamFormatError(f"metadata file is not valid JSON: {exc}") from None
    if not isinstance(meta, dict):
        raise StreamFormatError("metadata must be a JSON object")
    if "M" not in meta and "groups" in meta:
        # a partition file: one element per group
        meta["M"] = len(meta["groups"])
    return meta


def iter_stream(lines, M=None, mode=None):
    """Yield ``(line_number, h)`` with ``h`` shaped ``(F, M)``.

    ``M``/``mode`` from the caller must agree with the header when both
    are present.
    """
    lines = iter(lines)
    F = None
    width = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("waic-stream"):
            if lineno != 1:
                raise StreamFormatError("header allowed only on the first line", lineno)
            match = HEADER_RE.match(line)
            if not match:
                raise StreamFormatError(f"bad header {line!r}", lineno)
            hM, hmode = int(match.group(1)), match.group(2)
            if M is not None and hM != M:
                raise IntegrityError(f"stream header says M={hM}, metadata says M={M}")
            if mode is not None and hmode != mode:
                raise IntegrityError(f"stream header says mode={hmode}, metadata says mode={mode}")
            M, mode = hM, hmode
            continue
        if M is None:
            raise StreamFormatError("no header and no metadata: M is unknown", lineno)
        if F is None:
            F = len(PredictiveConfig(mode or CONDITIONAL).fractions)
            width = F * M
        try:
            values = [float(tok) for tok in line.split(",")]
        except ValueError:
            raise StreamFormatError(f"non-numeric value in {line[:60]!r}", lineno) from None
        if len(values) != width:
            raise StreamFormatError(f"expected {width} values, found {len(values)}", lineno)
        yield lineno, np.array(values).reshape(F, M)


def ingest_stream(path, partition_meta=None):
    """Replay a stream file through the online engine and finalize."""
    return waic_finalize(ingest_stream_state(path, partition_meta))


def ingest_stream_state(path, partition_meta=None):
    """Replay a stream file into a fresh state without finalizing."""
    meta = _meta(partition_meta)
    M = meta.get("M")
    mode = meta.get("mode")
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        fh.seek(0)
        match = HEADER_RE.match(first.strip())
        if match:
            M = M if M is not None else int(match.group(1))
            mode = mode or match.group(2)
        if M is None:
            raise StreamFormatError("stream has no header and metadata gives no M", 1)
        mode = mode or CONDITIONAL
        config = PredictiveConfig(mode, meta.get("K", 1000 if mode == MARGINAL else 1))
        state = waic_init(int(M), config)
        for lineno, h in iter_stream(fh, M=int(M), mode=mode):
            try:
                state = waic_update(state, h)
            except WaicError as exc:
                raise type(exc)(f"line {lineno}: {exc}") from exc
    return state


def resume_stream(state, path):
    """Continue ``state`` with the samples in a stream file (no finalize)."""
    mode = state.mode
    with Path(path).open() as fh:
        for lineno, h in iter_stream(fh, M=state.M, mode=mode):
            try:
                state = waic_update(state, h)
            except WaicError as exc:
                raise type(exc)(f"line {lineno}: {exc}") from exc
    return state
