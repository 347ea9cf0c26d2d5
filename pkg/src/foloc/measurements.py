"""Multichannel measurement matrices: assembly, per-type normalization, CSV I/O.

A measurement matrix holds one row per channel and one column per sampling
instant. Column ``j`` is the snapshot taken at ``start_time_s + j / fs``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

NORM_KIND = "max-abs"


class MeasurementError(ValueError):
    """Raised when measurement data violates a structural invariant."""


class CsvFormatError(MeasurementError):
    """Malformed measurement CSV. ``line`` and ``column`` are 1-based."""

    def __init__(self, message, line=None, column=None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.column = column
        self.path = path


@dataclass(frozen=True, order=True)
class MeasurementType:
    """Measurement kind. ``code`` is one of Vm, Va, F, O; ``label`` only for O."""

    code: str
    label: str = ""

    def __post_init__(self):
        if self.code not in ("Vm", "Va", "F", "O"):
            raise MeasurementError(f"unknown measurement type code {self.code!r}")
        if self.code == "O":
            if not self.label or any(c in self.label for c in ",\n\r"):
                raise MeasurementError(f"invalid label for Other type: {self.label!r}")
        elif self.label:
            raise MeasurementError(f"type {self.code} takes no label")

    @classmethod
    def other(cls, label: str) -> "MeasurementType":
        return cls("O", label)

    @classmethod
    def parse(cls, text: str) -> "MeasurementType":
        if text.startswith("O:"):
            return cls("O", text[2:])
        return cls(text)

    def __str__(self):
        return f"O:{self.label}" if self.code == "O" else self.code


VOLTAGE_MAGNITUDE = MeasurementType("Vm")
VOLTAGE_ANGLE = MeasurementType("Va")
FREQUENCY = MeasurementType("F")


@dataclass(frozen=True, order=True)
class Channel:
    bus_id: int
    mtype: MeasurementType = VOLTAGE_MAGNITUDE

    def __post_init__(self):
        if isinstance(self.bus_id, bool) or int(self.bus_id) != self.bus_id or self.bus_id < 1:
            raise MeasurementError(f"bus id must be a positive integer, got {self.bus_id!r}")
        object.__setattr__(self, "bus_id", int(self.bus_id))

    @classmethod
    def parse(cls, text: str) -> "Channel":
        """Parse a ``bus:<id>/<type>`` header token."""
        if not text.startswith("bus:") or "/" not in text:
            raise MeasurementError(f"bad channel header {text!r}")
        bus, _, mtype = text[4:].partition("/")
        try:
            bus_id = int(bus)
        except ValueError:
            raise MeasurementError(f"bad bus id in channel header {text!r}") from None
        return cls(bus_id, MeasurementType.parse(mtype))

    def __str__(self):
        return f"bus:{self.bus_id}/{self.mtype}"


def _check_unique(channels: Sequence[Channel]):
    seen = set()
    for ch in channels:
        if ch in seen:
            raise MeasurementError(f"duplicate channel {ch}")
        seen.add(ch)


@dataclass(frozen=True)
class MeasurementMatrix:
    """Channels x samples matrix of measurement deviations."""

    channels: tuple
    data: np.ndarray
    sample_rate_hz: float
    start_time_s: float = 0.0

    def __post_init__(self):
        channels = tuple(self.channels)
        data = np.array(self.data, dtype=float, copy=True)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        if data.ndim != 2:
            raise MeasurementError(f"data must be 2-D, got shape {data.shape}")
        if data.shape[1] < 1:
            raise MeasurementError("no samples")
        if data.shape[0] != len(channels):
            raise MeasurementError(
                f"{data.shape[0]} data rows but {len(channels)} channels")
        _check_unique(channels)
        if not np.all(np.isfinite(data)):
            row, col = np.argwhere(~np.isfinite(data))[0]
            raise MeasurementError(
                f"non-finite sample at channel {channels[row]}, column {col}")
        fs = float(self.sample_rate_hz)
        if not (fs > 0 and math.isfinite(fs)):
            raise MeasurementError(f"sample rate must be positive, got {self.sample_rate_hz!r}")
        data.flags.writeable = False
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sample_rate_hz", fs)
        object.__setattr__(self, "start_time_s", float(self.start_time_s))

    @property
    def shape(self):
        return self.data.shape

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return (self.n_samples - 1) / self.sample_rate_hz

    @property
    def times(self) -> np.ndarray:
        return self.start_time_s + np.arange(self.n_samples) / self.sample_rate_hz

    def row(self, channel) -> np.ndarray:
        """Series of one channel, given as a Channel or a row index."""
        if isinstance(channel, Channel):
            channel = self.channels.index(channel)
        return self.data[channel]

    def types(self) -> list:
        """Measurement types in order of first occurrence."""
        return list(dict.fromkeys(ch.mtype for ch in self.channels))

    def head(self, n_cols: int) -> "MeasurementMatrix":
        """First ``n_cols`` columns (all of them if fewer exist)."""
        return self.with_data(self.data[:, :n_cols])

    def take(self, rows: Sequence[int]) -> "MeasurementMatrix":
        """Channel subset / permutation by row index."""
        rows = list(rows)
        return MeasurementMatrix(tuple(self.channels[r] for r in rows),
                                 self.data[rows], self.sample_rate_hz, self.start_time_s)

    def with_data(self, data) -> "MeasurementMatrix":
        return MeasurementMatrix(self.channels, data, self.sample_rate_hz, self.start_time_s)

    def scaled(self, factor: float) -> "MeasurementMatrix":
        return self.with_data(self.data * factor)


@dataclass(frozen=True)
class NormalizedMeasurementMatrix(MeasurementMatrix):
    """Measurement matrix whose type blocks were each divided by their max-abs entry."""

    scale_factors: Mapping = field(default_factory=dict)
    warnings: tuple = ()
    norm: str = NORM_KIND


def assemble(samples, sample_rate_hz: float, start_time_s: float = 0.0) -> MeasurementMatrix:
    """Stack per-channel series into a measurement matrix.

    Parameters
    ----------
    samples : mapping of Channel -> sequence, or iterable of (Channel, sequence)
        Row order follows iteration order.
    sample_rate_hz : float
        Sampling frequency; column ``j`` is taken at ``start_time_s + j / fs``.
    """
    pairs = list(samples.items()) if isinstance(samples, Mapping) else list(samples)
    if not pairs:
        raise MeasurementError("no channels")
    channels = [ch for ch, _ in pairs]
    _check_unique(channels)
    rows = []
    n = None
    for ch, series in pairs:
        arr = np.asarray(series, dtype=float).ravel()
        if n is None:
            n = arr.size
            if n < 1:
                raise MeasurementError(f"no samples for channel {ch}")
        elif arr.size != n:
            raise MeasurementError(
                f"channel {ch} has {arr.size} samples, expected {n}")
        rows.append(arr)
    return MeasurementMatrix(tuple(channels), np.vstack(rows), sample_rate_hz, start_time_s)


def normalize(Y: MeasurementMatrix) -> NormalizedMeasurementMatrix:
    """Divide every measurement-type block by its largest absolute entry.

    Rows keep their positions; only values are rescaled. A block that is
    identically zero keeps scale 1 and produces a warning instead of an error.
    """
    data = np.array(Y.data, dtype=float)
    scales = {}
    warns = []
    for mtype in Y.types():
        rows = [i for i, ch in enumerate(Y.channels) if ch.mtype == mtype]
        peak = float(np.max(np.abs(data[rows])))
        if peak == 0.0:
            scales[mtype] = 1.0
            warns.append(f"all-zero block for measurement type {mtype}; scale set to 1")
            continue
        scales[mtype] = peak
        data[rows] /= peak
    return NormalizedMeasurementMatrix(Y.channels, data, Y.sample_rate_hz, Y.start_time_s,
                                       scale_factors=scales, warnings=tuple(warns))


def demean(Y: MeasurementMatrix) -> MeasurementMatrix:
    """Subtract each channel's mean (turns raw readings into deviations)."""
    return Y.with_data(Y.data - Y.data.mean(axis=1, keepdims=True))


# -- CSV ---------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def dumps_csv(Y: MeasurementMatrix) -> str:
    buf = io.StringIO()
    buf.write(f"# fs_hz={_fmt(Y.sample_rate_hz)},start_s={_fmt(Y.start_time_s)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [str(ch) for ch in Y.channels])
    for j, t in enumerate(Y.times):
        writer.writerow([_fmt(t)] + [_fmt(v) for v in Y.data[:, j]])
    return buf.getvalue()


def write_csv(Y: MeasurementMatrix, path) -> None:
    Path(path).write_text(dumps_csv(Y), encoding="ascii", newline="")


def _parse_meta(line: str, path):
    if not line.startswith("# "):
        raise CsvFormatError("expected metadata line '# fs_hz=<real>,start_s=<real>'", 1, path=path)
    meta = {}
    for item in line[2:].split(","):
        key, sep, value = item.partition("=")
        if not sep:
            raise CsvFormatError(f"bad metadata item {item!r}", 1, path=path)
        try:
            meta[key.strip()] = float(value)
        except ValueError:
            raise CsvFormatError(f"non-numeric metadata value {value!r}", 1, path=path) from None
    if set(meta) != {"fs_hz", "start_s"}:
        raise CsvFormatError(f"metadata must define exactly fs_hz and start_s, got {sorted(meta)}",
                             1, path=path)
    return meta["fs_hz"], meta["start_s"]


def loads_csv(text: str, path=None) -> MeasurementMatrix:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CsvFormatError("empty file", path=path)
    fs, start = _parse_meta(lines[0], path)
    if len(lines) < 2:
        raise CsvFormatError("missing header line", 2, path=path)
    header = next(csv.reader([lines[1]]))
    if not header or header[0] != "t":
        raise CsvFormatError("header must start with 't'", 2, 1, path=path)
    if len(header) < 2:
        raise CsvFormatError("header names no channels", 2, path=path)
    channels = []
    seen = set()
    for col, token in enumerate(header[1:], start=2):
        try:
            ch = Channel.parse(token)
        except MeasurementError as exc:
            raise CsvFormatError(str(exc), 2, col, path=path) from None
        if ch in seen:
            raise CsvFormatError(f"duplicate channel {ch}", 2, col, path=path)
        seen.add(ch)
        channels.append(ch)
    width = len(header)
    body = lines[2:]
    if not body:
        raise CsvFormatError("no samples", 3, path=path)
    data = np.empty((len(channels), len(body)))
    for j, (lineno, row) in enumerate(zip(range(3, 3 + len(body)), csv.reader(body))):
        if len(row) != width:
            raise CsvFormatError(f"ragged row: {len(row)} fields, expected {width}",
                                 lineno, path=path)
        for col, cell in enumerate(row, start=1):
            try:
                value = float(cell)
            except ValueError:
                raise CsvFormatError(f"non-numeric cell {cell!r}", lineno, col, path=path) from None
            if not math.isfinite(value):
                raise CsvFormatError(f"non-finite cell {cell!r}", lineno, col, path=path)
            if col > 1:
                data[col - 2, j] = value
    try:
        return MeasurementMatrix(tuple(channels), data, fs, start)
    except MeasurementError as exc:
        raise CsvFormatError(str(exc), path=path) from None


def read_csv(path) -> MeasurementMatrix:
    path = Path(path)
    return loads_csv(path.read_text(encoding="ascii"), path=path)

