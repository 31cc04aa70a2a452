"""Spike trains, sampled signals, Poisson generation and event file I/O.

All times are milliseconds.  Spike events are discrete (neuron, time)
pairs; sampled signals live on a uniform grid with period ``ts_ms``.
When a spike train is laid onto the grid, each event occupies one bin
with amplitude ``1/Ts`` so that a Ts-weighted sum over bins recovers
the spike count (unit Dirac area).  Events are stamped at bin centers
on generation and binned with floor(time/Ts) clamped to the window, so
generate -> discretize -> export round-trips exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    ParameterError,
    ParseError,
    RangeError,
    ShapeError,
)

_EVENT_DTYPE = np.dtype([("neuron", "<u4"), ("time", "<f8"), ("label", "<i4")])
_BINARY_MAGIC = b"SLYR"
_BINARY_VERSION = 1
_CSV_HEADER = "neuron,time_ms,label"


@dataclass(frozen=True)
class SimConfig:
    """Simulation window of ``t_ms`` milliseconds sampled every ``ts_ms``."""

    t_ms: float
    ts_ms: float

    def __post_init__(self):
        if not (self.t_ms > 0.0 and self.ts_ms > 0.0):
            raise ParameterError("t_ms and ts_ms must be positive")
        ratio = self.t_ms / self.ts_ms
        if abs(ratio - round(ratio)) > 1e-9:
            raise ParameterError(
                f"t_ms={self.t_ms} is not an integer multiple of ts_ms={self.ts_ms}"
            )

    @property
    def n_samples(self) -> int:
        return int(round(self.t_ms / self.ts_ms))

    def bin_of(self, time_ms: float) -> int:
        """floor(time/Ts), clamped to [0, n_samples - 1]."""
        n = int(np.floor(time_ms / self.ts_ms))
        return min(max(n, 0), self.n_samples - 1)

    def bin_center(self, n: int) -> float:
        return (n + 0.5) * self.ts_ms


@dataclass(frozen=True)
class SpikeTrain:
    """Discrete spike events over a set of neurons.

    ``events`` is a tuple of (neuron_index, time_ms) pairs, kept sorted
    by (time, neuron).  The constructor normalizes ordering and rejects
    out-of-range neuron indices and negative times.
    """

    neuron_count: int
    events: tuple = ()

    def __post_init__(self):
        if int(self.neuron_count) < 1:
            raise ParameterError("neuron_count must be >= 1")
        object.__setattr__(self, "neuron_count", int(self.neuron_count))
        evts = []
        for neuron, time in self.events:
            neuron, time = int(neuron), float(time)
            if not 0 <= neuron < self.neuron_count:
                raise ParameterError(
                    f"neuron index {neuron} outside [0, {self.neuron_count})"
                )
            if time < 0.0:
                raise ParameterError(f"negative spike time {time}")
            evts.append((neuron, time))
        evts.sort(key=lambda e: (e[1], e[0]))
        object.__setattr__(self, "events", tuple(evts))

    def __len__(self) -> int:
        return len(self.events)

    def times_of(self, neuron: int) -> np.ndarray:
        return np.array([t for n, t in self.events if n == neuron], dtype=float)


@dataclass(frozen=True)
class SpikeTrainSet:
    """An ordered collection of spike trains over a common neuron count."""

    neuron_count: int
    trains: tuple = ()

    def __post_init__(self):
        if int(self.neuron_count) < 1:
            raise ParameterError("neuron_count must be >= 1")
        object.__setattr__(self, "neuron_count", int(self.neuron_count))
        for train in self.trains:
            if train.neuron_count != self.neuron_count:
                raise ShapeError(
                    f"train has {train.neuron_count} neurons, set expects {self.neuron_count}"
                )
        object.__setattr__(self, "trains", tuple(self.trains))

    def __len__(self) -> int:
        return len(self.trains)

    def __iter__(self):
        return iter(self.trains)


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Uniformly sampled multichannel signal, values shaped (channels, bins).

    The value array is float64, C-contiguous and frozen read-only; all
    operations return new instances.
    """

    values: np.ndarray
    ts_ms: float

    def __post_init__(self):
        if self.ts_ms <= 0.0:
            raise ParameterError("ts_ms must be positive")
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ShapeError(f"signal values must be 2-D, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("signal contains non-finite values")
        if vals is self.values:
            vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    @classmethod
    def zeros(cls, channels: int, config: SimConfig) -> "SampledSignal":
        return cls(np.zeros((channels, config.n_samples)), config.ts_ms)


def poisson_spike_train(
    channels: int, rate_hz: float, config: SimConfig, seed: int
) -> SpikeTrain:
    """Generate one event per bin per channel with probability rate*Ts.

    Rates are in Hz, the grid in ms, so the per-bin probability is
    ``rate_hz * ts_ms * 1e-3``.  Events land on bin centers; identical
    seeds give identical trains.
    """
    if channels < 1:
        raise ParameterError("channels must be >= 1")
    if rate_hz < 0.0:
        raise ParameterError("rate_hz must be >= 0")
    p = rate_hz * config.ts_ms * 1e-3
    if p > 1.0:
        raise ParameterError(
            f"rate {rate_hz} Hz exceeds one spike per {config.ts_ms} ms bin"
        )
    rng = np.random.default_rng(seed)
    hits = rng.random((channels, config.n_samples)) < p
    chans, bins = np.nonzero(hits)
    events = [(int(c), config.bin_center(int(n))) for c, n in zip(chans, bins)]
    return SpikeTrain(channels, tuple(events))


def spikes_to_signal(train: SpikeTrain, config: SimConfig) -> SampledSignal:
    """Lay a spike train onto the sampling grid with amplitude 1/Ts per event."""
    values = np.zeros((train.neuron_count, config.n_samples))
    if train.events:
        neurons = np.fromiter((n for n, _ in train.events), dtype=np.intp)
        times = np.fromiter((t for _, t in train.events), dtype=float)
        if times.size and (times.min() < 0.0 or times.max() > config.t_ms):
            bad = times.min() if times.min() < 0.0 else times.max()
            raise RangeError(f"event time {bad} outside window [0, {config.t_ms}]")
        bins = np.clip(
            np.floor(times / config.ts_ms).astype(np.intp), 0, config.n_samples - 1
        )
        np.add.at(values, (neurons, bins), 1.0 / config.ts_ms)
    return SampledSignal(values, config.ts_ms)


def signal_to_spikes(signal: SampledSignal, config: SimConfig) -> SpikeTrain:
    """Inverse of :func:`spikes_to_signal` for binary spike signals.

    Every sample must be 0 or 1/Ts (within 1e-9); nonzero bins become
    events at the bin center.
    """
    amp = 1.0 / config.ts_ms
    vals = signal.values
    ok = (np.abs(vals) <= 1e-9) | (np.abs(vals - amp) <= 1e-9)
    if not ok.all():
        c, n = np.argwhere(~ok)[0]
        raise FormatError(
            f"sample ({c}, {n}) = {vals[c, n]} is neither 0 nor 1/Ts = {amp}"
        )
    chans, bins = np.nonzero(np.abs(vals - amp) <= 1e-9)
    events = [(int(c), config.bin_center(int(n))) for c, n in zip(chans, bins)]
    return SpikeTrain(signal.channels, tuple(events))


def _events_of(sset: SpikeTrainSet):
    """Flatten a set into (neuron, time, label) rows, label = train index."""
    for label, train in enumerate(sset.trains):
        for neuron, time in train.events:
            yield neuron, time, label


def _set_from_rows(rows, neuron_count, train_count):
    """Group labeled event rows back into a SpikeTrainSet."""
    by_label: dict[int, list] = {}
    max_neuron = -1
    for neuron, time, label in rows:
        by_label.setdefault(label, []).append((neuron, time))
        max_neuron = max(max_neuron, neuron)
    if neuron_count is None:
        neuron_count = max_neuron + 1 if max_neuron >= 0 else 1
    if train_count is None:
        train_count = (max(by_label) + 1) if by_label else 0
    elif by_label and max(by_label) >= train_count:
        raise ParseError(
            f"event label {max(by_label)} exceeds requested train count {train_count}"
        )
    trains = [
        SpikeTrain(neuron_count, tuple(by_label.get(i, ()))) for i in range(train_count)
    ]
    return SpikeTrainSet(neuron_count, tuple(trains))


def write_events(path, sset: SpikeTrainSet) -> None:
    """Write a spike-train set; '.csv' extension selects text, else binary.

    CSV: header ``neuron,time_ms,label`` and one decimal-formatted event
    per line.  Binary: magic ``SLYR``, version u16, neuron_count u32,
    event_count u64 and little-endian (u32, f64, i32) event records.
    The event label is the index of its train within the set.
    """
    path = Path(path)
    rows = list(_events_of(sset))
    if path.suffix.lower() == ".csv":
        lines = [_CSV_HEADER]
        lines += [f"{n},{t!r},{label}" for n, t, label in rows]
        path.write_text("\n".join(lines) + "\n")
        return
    rec = np.zeros(len(rows), dtype=_EVENT_DTYPE)
    for i, (n, t, label) in enumerate(rows):
        rec[i] = (n, t, label)
    header = _BINARY_MAGIC + struct.pack(
        "<HIQ", _BINARY_VERSION, sset.neuron_count, len(rows)
    )
    path.write_bytes(header + rec.tobytes())


def read_events(path, neuron_count=None, train_count=None) -> SpikeTrainSet:
    """Read a spike-train set written by :func:`write_events`.

    The binary format stores its own neuron count; for CSV it is inferred
    as max index + 1 unless given.  ``train_count`` pads trailing empty
    trains that carry no events of their own.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_events_csv(path, neuron_count, train_count)
    return _read_events_binary(path, neuron_count, train_count)


def _read_events_csv(path, neuron_count, train_count):
    text = path.read_text()
    lines = text.splitlines()
    if not lines or lines[0].strip() != _CSV_HEADER:
        raise ParseError(f"{path}: line 1: expected header '{_CSV_HEADER}'")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(f"{path}: line {i}: expected 3 fields, got {len(parts)}")
        try:
            rows.append((int(parts[0]), float(parts[1]), int(parts[2])))
        except ValueError as exc:
            raise ParseError(f"{path}: line {i}: {exc}") from exc
    return _set_from_rows(rows, neuron_count, train_count)


def _read_events_binary(path, neuron_count, train_count):
    blob = path.read_bytes()
    head = 4 + struct.calcsize("<HIQ")
    if len(blob) < head:
        raise ParseError(f"{path}: offset {len(blob)}: truncated header")
    if blob[:4] != _BINARY_MAGIC:
        raise ParseError(f"{path}: offset 0: bad magic {blob[:4]!r}")
    version, stored_count, n_events = struct.unpack("<HIQ", blob[4:head])
    if version != _BINARY_VERSION:
        raise ParseError(f"{path}: offset 4: unsupported version {version}")
    expected = head + n_events * _EVENT_DTYPE.itemsize
    if len(blob) != expected:
        raise ParseError(
            f"{path}: offset {len(blob)}: expected {expected} bytes for {n_events} events"
        )
    rec = np.frombuffer(blob, dtype=_EVENT_DTYPE, count=n_events, offset=head)
    rows = [(int(r["neuron"]), float(r["time"]), int(r["label"])) for r in rec]
    if neuron_count is None:
        neuron_count = stored_count
    return _set_from_rows(rows, neuron_count, train_count)
