"""Spiking-network simulation and training with learnable weights and
per-neuron axonal delays.

Spike trains are filtered by a causal response kernel, weighted, and
thresholded with refractory feedback.  Training backpropagates a timed
error signal through kernel correlations and a surrogate derivative of
the spike function, yielding gradients for both weights and delays.
"""

from .backprop import (
    BackpropTrace,
    Gradients,
    SurrogateConfig,
    backward,
    delta_layer,
    finite_diff_gradients,
    output_error,
    rho,
    soft_forward,
    soft_loss,
    soft_spike,
)
from .errors import (
    ConfigError,
    FormatError,
    NumericError,
    ParameterError,
    ParseError,
    RangeError,
    ShapeError,
    SpikeNetError,
)
from .forward import SignalCache, forward, simulate_layer, spike_response
from .kernels import (
    Kernel,
    KernelConfig,
    NeuronConfig,
    convolve,
    correlate,
    make_epsilon,
    make_epsilon_dot,
    make_nu,
)
from .losses import LossSpec, error_count, error_precise, loss_value, spike_counts
from .optim import OptimizerState, clamp_delays, step
from .runconfig import RunConfig, load_config
from .signals import (
    SampledSignal,
    SimConfig,
    SpikeTrain,
    SpikeTrainSet,
    poisson_spike_train,
    read_events,
    signal_to_spikes,
    spikes_to_signal,
    write_events,
)
from .topology import (
    LayerParams,
    LayerSpec,
    Network,
    NetworkSpec,
    apply_linear,
    adjoint_linear,
    init_network,
    parse_architecture,
    render_architecture,
)
from .trainer import (
    Dataset,
    MetricRow,
    TrainConfig,
    classify,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
    train_epoch,
    write_metrics,
)

__version__ = "0.1.0"

__all__ = [
    "BackpropTrace",
    "ConfigError",
    "Dataset",
    "FormatError",
    "Gradients",
    "Kernel",
    "KernelConfig",
    "LayerParams",
    "LayerSpec",
    "LossSpec",
    "MetricRow",
    "Network",
    "NetworkSpec",
    "NeuronConfig",
    "NumericError",
    "OptimizerState",
    "ParameterError",
    "ParseError",
    "RangeError",
    "RunConfig",
    "SampledSignal",
    "ShapeError",
    "SignalCache",
    "SimConfig",
    "SpikeNetError",
    "SpikeTrain",
    "SpikeTrainSet",
    "SurrogateConfig",
    "TrainConfig",
    "adjoint_linear",
    "apply_linear",
    "backward",
    "classify",
    "clamp_delays",
    "convolve",
    "correlate",
    "delta_layer",
    "error_count",
    "error_precise",
    "evaluate",
    "finite_diff_gradients",
    "forward",
    "init_network",
    "load_checkpoint",
    "load_config",
    "loss_value",
    "make_epsilon",
    "make_epsilon_dot",
    "make_nu",
    "output_error",
    "parse_architecture",
    "poisson_spike_train",
    "read_events",
    "render_architecture",
    "rho",
    "save_checkpoint",
    "signal_to_spikes",
    "simulate_layer",
    "soft_forward",
    "soft_loss",
    "soft_spike",
    "spike_counts",
    "spike_response",
    "spikes_to_signal",
    "step",
    "train",
    "train_epoch",
    "write_events",
    "write_metrics",
]
