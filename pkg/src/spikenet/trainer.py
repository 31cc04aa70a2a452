"""Training harness: dataset container, epoch loop, metrics, checkpoints.

Every run is fully determined by (seed, config, dataset): shuffling uses
a per-epoch generator seeded from (seed, epoch) so a resumed run replays
the same order, and batch gradients are reduced in sample-index order
regardless of worker scheduling.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backprop import Gradients, SurrogateConfig, backward, output_error
from .errors import FormatError, ParameterError, ShapeError
from .forward import forward
from .kernels import NeuronConfig
from .losses import LossSpec, loss_value, spike_counts
from .optim import OptimizerState, step
from .signals import SampledSignal, SimConfig, SpikeTrain
from .topology import LayerParams, Network, parse_architecture, render_architecture


@dataclass
class Dataset:
    """Input spike trains paired with integer labels (count mode) or
    target spike trains (precise mode)."""

    samples: list
    class_count: int = 0

    def __post_init__(self):
        if self.samples:
            channels = self.samples[0][0].neuron_count
            for i, (train, label) in enumerate(self.samples):
                if train.neuron_count != channels:
                    raise ShapeError(
                        f"sample {i} has {train.neuron_count} channels, "
                        f"expected {channels}"
                    )
                if isinstance(label, (int, np.integer)):
                    if not 0 <= label < self.class_count:
                        raise ParameterError(
                            f"sample {i} label {label} outside 0..{self.class_count - 1}"
                        )

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class TrainConfig:
    """Epoch-loop parameters; the optimizer travels separately as state."""

    epochs: int
    loss: LossSpec
    surrogate: SurrogateConfig
    batch_size: int = 1
    seed: int = 0
    checkpoint_every: int = 0
    eval_every: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.threads < 1:
            raise ParameterError(
                "epochs must be >= 0, batch_size and threads must be >= 1"
            )
        if self.checkpoint_every < 0 or self.eval_every < 0:
            raise ParameterError("cadences must be nonnegative")


@dataclass(frozen=True)
class MetricRow:
    epoch: int
    split: str
    loss: float
    accuracy: float | None

    def as_csv(self) -> str:
        acc = "" if self.accuracy is None else repr(self.accuracy)
        return f"{self.epoch},{self.split},{repr(self.loss)},{acc}"


METRICS_HEADER = "epoch,split,loss,accuracy"


def classify(s_out: SampledSignal, interval, config: SimConfig) -> int:
    """Class with the highest output spike count in the interval; ties go
    to the lowest index."""
    return int(np.argmax(spike_counts(s_out, interval, config)))


def _sample_pass(net: Network, sample, cfg: TrainConfig, with_grads: bool):
    """Forward (and optionally backward) one sample.

    Returns (loss, correct_or_None, grads_or_None).
    """
    train, label = sample
    cache = forward(net, train)
    if cfg.loss.mode == "precise":
        e = output_error(net, cache, cfg.loss, target=label)
        correct = None
    else:
        e = output_error(net, cache, cfg.loss, label=int(label))
        predicted = classify(cache.output_spikes, cfg.loss.interval, net.sim)
        correct = predicted == int(label)
    loss = loss_value(e)
    grads = backward(net, cache, e, cfg.surrogate) if with_grads else None
    return loss, correct, grads


def _run_samples(net: Network, samples, cfg: TrainConfig, with_grads: bool) -> list:
    """Evaluate samples, possibly on a thread pool; results in input order."""
    if cfg.threads == 1 or len(samples) <= 1:
        return [_sample_pass(net, s, cfg, with_grads) for s in samples]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(lambda s: _sample_pass(net, s, cfg, with_grads), samples))


def train_epoch(
    net: Network,
    dataset: Dataset,
    cfg: TrainConfig,
    optim_state: OptimizerState,
    epoch: int,
) -> MetricRow:
    """One shuffled pass over the dataset with batched averaged updates."""
    if not dataset.samples:
        raise ParameterError("cannot train on an empty dataset")
    order = np.random.default_rng([cfg.seed, epoch]).permutation(len(dataset))
    total_loss = 0.0
    total_correct = 0
    counting = cfg.loss.mode == "count"
    for start in range(0, len(order), cfg.batch_size):
        batch = [dataset.samples[i] for i in order[start : start + cfg.batch_size]]
        results = _run_samples(net, batch, cfg, with_grads=True)
        mean = Gradients.zeros_like(net)
        for loss, correct, grads in results:
            total_loss += loss
            if counting:
                total_correct += bool(correct)
            mean.add_scaled(grads, 1.0 / len(batch))
        step(optim_state, net, mean)
    accuracy = total_correct / len(dataset) if counting else None
    return MetricRow(epoch, "train", total_loss / len(dataset), accuracy)


def evaluate(
    net: Network,
    dataset: Dataset,
    cfg: TrainConfig,
    epoch: int = 0,
    split: str = "eval",
) -> MetricRow:
    """Loss (and accuracy in count mode) without touching parameters."""
    if not dataset.samples:
        raise ParameterError("cannot evaluate an empty dataset")
    results = _run_samples(net, dataset.samples, cfg, with_grads=False)
    total_loss = sum(r[0] for r in results)
    if cfg.loss.mode == "count":
        accuracy = sum(bool(r[1]) for r in results) / len(dataset)
    else:
        accuracy = None
    return MetricRow(epoch, split, total_loss / len(dataset), accuracy)


def write_metrics(path: str | Path, rows, append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, newline="\n") as fh:
        if not append:
            fh.write(METRICS_HEADER + "\n")
        for row in rows:
            fh.write(row.as_csv() + "\n")


def train(
    net: Network,
    optim_state: OptimizerState,
    dataset: Dataset,
    cfg: TrainConfig,
    out_dir: str | Path | None = None,
    eval_set: Dataset | None = None,
    start_epoch: int = 0,
) -> list:
    """Run epochs start_epoch+1 .. cfg.epochs; returns all metric rows.

    With out_dir set, appends rows to metrics.csv as they are produced
    and maintains a rolling checkpoint (always written at the end).
    """
    out = Path(out_dir) if out_dir is not None else None
    rows = []
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if start_epoch == 0:
            write_metrics(out / "metrics.csv", [])
    for epoch in range(start_epoch + 1, cfg.epochs + 1):
        new_rows = [train_epoch(net, dataset, cfg, optim_state, epoch)]
        if eval_set is not None and cfg.eval_every and epoch % cfg.eval_every == 0:
            new_rows.append(evaluate(net, eval_set, cfg, epoch))
        rows.extend(new_rows)
        if out is not None:
            write_metrics(out / "metrics.csv", new_rows, append=True)
            if cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
                save_checkpoint(net, optim_state, out / "checkpoint.slck", epoch)
    if out is not None:
        save_checkpoint(net, optim_state, out / "checkpoint.slck", cfg.epochs)
    return rows


_MAGIC = b"SLCK"
_VERSION = 1


def _pack_str(text: str) -> bytes:
    data = text.encode("utf-8")
    return struct.pack("<I", len(data)) + data


def _pack_array(a: np.ndarray) -> bytes:
    dims = struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    return dims + np.ascontiguousarray(a, dtype="<f8").tobytes()


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("checkpoint truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        values = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return values[0] if len(values) == 1 else values

    def read_str(self) -> str:
        return self.take(self.unpack("<I")).decode("utf-8")

    def read_array(self) -> np.ndarray:
        ndim = self.unpack("<I")
        shape = struct.unpack(f"<{ndim}I", self.take(4 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        flat = np.frombuffer(self.take(8 * count), dtype="<f8")
        return flat.reshape(shape).astype(np.float64)


def save_checkpoint(
    net: Network, optim_state: OptimizerState | None, path: str | Path, epoch: int = 0
) -> None:
    """Write network parameters, neuron/grid settings, optimizer moments
    and the epoch counter in one little-endian container."""
    chunks = [_MAGIC, struct.pack("<H", _VERSION)]
    chunks.append(_pack_str(render_architecture(net.spec)))
    chunks.append(
        struct.pack(
            "<6d",
            net.neuron.theta,
            net.neuron.tau_s,
            net.neuron.tau_r,
            net.sim.ts_ms,
            net.sim.t_ms,
            net.cutoff,
        )
    )
    chunks.append(struct.pack("<I", net.n_transitions))
    for params in net.params:
        if params.weights is None:
            chunks.append(struct.pack("<B", 0))
        else:
            chunks.append(struct.pack("<B", 1) + _pack_array(params.weights))
        chunks.append(_pack_array(params.delays))
    if optim_state is None:
        chunks.append(struct.pack("<B", 0))
    else:
        chunks.append(struct.pack("<B", 1))
        chunks.append(_pack_str(optim_state.method))
        chunks.append(
            struct.pack(
                "<6d",
                optim_state.learning_rate,
                optim_state.delay_lr_scale,
                optim_state.beta1,
                optim_state.beta2,
                optim_state.gamma,
                optim_state.eps_stab,
            )
        )
        chunks.append(struct.pack("<Q", optim_state.step_count))
        buffers = [("m1." + k, v) for k, v in sorted(optim_state.moment1.items())]
        buffers += [("m2." + k, v) for k, v in sorted(optim_state.moment2.items())]
        chunks.append(struct.pack("<I", len(buffers)))
        for name, buf in buffers:
            chunks.append(_pack_str(name) + _pack_array(buf))
    chunks.append(struct.pack("<I", epoch))
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path):
    """Rebuild (net, optim_state, epoch) exactly as saved."""
    cur = _Cursor(Path(path).read_bytes())
    if cur.take(4) != _MAGIC:
        raise FormatError(f"{path}: not a checkpoint file (bad magic)")
    version = cur.unpack("<H")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    spec = parse_architecture(cur.read_str())
    theta, tau_s, tau_r, ts_ms, t_ms, cutoff = cur.unpack("<6d")
    n_transitions = cur.unpack("<I")
    if n_transitions != spec.n_transitions:
        raise FormatError(f"{path}: transition count mismatch")
    params = []
    for _ in range(n_transitions):
        weights = cur.read_array() if cur.unpack("<B") else None
        params.append(LayerParams(weights, cur.read_array()))
    net = Network(
        spec,
        params,
        NeuronConfig(theta=theta, tau_s=tau_s, tau_r=tau_r),
        SimConfig(t_ms=t_ms, ts_ms=ts_ms),
        cutoff,
    )
    optim_state = None
    if cur.unpack("<B"):
        method = cur.read_str()
        lr, dscale, b1, b2, gamma, eps = cur.unpack("<6d")
        optim_state = OptimizerState(
            method=method,
            learning_rate=lr,
            delay_lr_scale=dscale,
            beta1=b1,
            beta2=b2,
            gamma=gamma,
            eps_stab=eps,
        )
        optim_state.step_count = cur.unpack("<Q")
        for _ in range(cur.unpack("<I")):
            name = cur.read_str()
            buf = cur.read_array()
            store = optim_state.moment1 if name.startswith("m1.") else optim_state.moment2
            store[name[3:]] = buf
    epoch = cur.unpack("<I")
    return net, optim_state, epoch
