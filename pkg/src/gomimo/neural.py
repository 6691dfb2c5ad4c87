"""Feed-forward network trained from scratch for bitwise symbol detection.

Four ReLU hidden layers and a Sigmoid output layer produce one fuzzy value
per transmitted bit; training minimizes mean-square error on those fuzzy
outputs with the Adamax optimizer over mini-batches. Everything runs in
double precision and is bit-deterministic for a fixed seed.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingDivergedError
from .modulation import GOSM, GOSMP, GomimoScheme, enumerate_codebook

# Hidden-layer widths used throughout: wide-to-narrow for the 4-bit mapping,
# uniform for the 6-bit one.
HIDDEN_PRESETS = {GOSM: (128, 64, 32, 16), GOSMP: (64, 64, 64, 64)}

ADAMAX_BETA1 = 0.9
ADAMAX_BETA2 = 0.999
ADAMAX_EPS = 1e-8


@dataclass(frozen=True)
class MlpArchitecture:
    """Layer widths (input, 4 hidden, output) plus fixed activations."""

    layer_widths: tuple
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"

    def __post_init__(self):
        if len(self.layer_widths) != 6:
            raise ValueError("expected input + 4 hidden + output widths")
        if any(w < 1 for w in self.layer_widths):
            raise ValueError("all layer widths must be >= 1")

    @property
    def input_width(self) -> int:
        return self.layer_widths[0]

    @property
    def output_width(self) -> int:
        return self.layer_widths[-1]


def preset_architecture(kind: str, input_width: int, output_width: int) -> MlpArchitecture:
    return MlpArchitecture((input_width,) + HIDDEN_PRESETS[kind] + (output_width,))


@dataclass
class MlpParams:
    """Weight matrices and bias vectors, input-to-output order.

    weights[p] has shape (width_p, width_{p+1}); layer p maps z -> z @ W + b.
    """

    weights: list
    biases: list

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    def check_finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and \
            all(np.isfinite(b).all() for b in self.biases)

    @property
    def layer_widths(self) -> tuple:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)


def init_params(arch: MlpArchitecture, rng: np.random.Generator) -> MlpParams:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(arch.layer_widths[:-1], arch.layer_widths[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def _sigmoid(a: np.ndarray) -> np.ndarray:
    # Clipping keeps exp() in range; outputs saturate to exactly 0/1 beyond
    # +-500 either way, so decisions and gradients are unaffected.
    return 1.0 / (1.0 + np.exp(-np.clip(a, -500.0, 500.0)))


def forward(params: MlpParams, inputs: np.ndarray):
    """Run the network; returns (fuzzy outputs in (0,1), activation cache).

    Accepts a single vector or a batch (rows = samples). The cache holds
    every layer's post-activation output, input first, for backward().
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    if x.shape[1] != params.weights[0].shape[0]:
        raise ValueError(
            f"input width {x.shape[1]} does not match network "
            f"width {params.weights[0].shape[0]}")
    cache = [x]
    z = x
    last = len(params.weights) - 1
    for p, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = z @ w + b
        z = _sigmoid(a) if p == last else np.maximum(a, 0.0)
        cache.append(z)
    out = z if np.asarray(inputs).ndim > 1 else z[0]
    return out, cache


def forward_vector(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Inference-only forward for a single vector (the per-symbol hot path).

    Same arithmetic as forward() without the cache bookkeeping.
    """
    z = x
    last = len(params.weights) - 1
    for p, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = z @ w
        a += b
        z = _sigmoid(a) if p == last else np.maximum(a, 0.0, out=a)
    return z


def mse_loss(fuzzy_output: np.ndarray, target_bits: np.ndarray) -> float:
    """Per-bit squared error, averaged across bits and across the batch."""
    fuzzy_output = np.asarray(fuzzy_output, dtype=float)
    target_bits = np.asarray(target_bits, dtype=float)
    if fuzzy_output.shape != target_bits.shape:
        raise ValueError("output and target shapes differ")
    return float(np.mean((fuzzy_output - target_bits) ** 2))


def backward(params: MlpParams, cache: list, target_bits: np.ndarray):
    """Gradients of the batch-mean MSE for every weight and bias.

    cache must come from a forward() call on the same params; the returned
    (weight_grads, bias_grads) mirror the parameter shapes.
    """
    target = np.atleast_2d(np.asarray(target_bits, dtype=float))
    out = cache[-1]
    batch, width = out.shape
    # d loss / d pre-activation of the output layer: MSE through the sigmoid.
    delta = (2.0 / (batch * width)) * (out - target) * out * (1.0 - out)
    weight_grads = [None] * len(params.weights)
    bias_grads = [None] * len(params.biases)
    for p in range(len(params.weights) - 1, -1, -1):
        weight_grads[p] = cache[p].T @ delta
        bias_grads[p] = delta.sum(axis=0)
        if p > 0:
            delta = (delta @ params.weights[p].T) * (cache[p] > 0.0)
    return weight_grads, bias_grads


@dataclass
class AdamaxState:
    """First moments, infinity-norm accumulators, and step counter."""

    first_moment: list
    infinity_norm: list
    step: int = 0
    beta1: float = ADAMAX_BETA1
    beta2: float = ADAMAX_BETA2
    learning_rate: float = 0.01
    epsilon: float = ADAMAX_EPS


def init_adamax(params: MlpParams, learning_rate: float) -> AdamaxState:
    zeros = lambda arrs: [np.zeros_like(a) for a in arrs]
    return AdamaxState(first_moment=zeros(params.weights + params.biases),
                       infinity_norm=zeros(params.weights + params.biases),
                       learning_rate=learning_rate)


def adamax_step(params: MlpParams, grads, state: AdamaxState):
    """One optimizer step, in place; returns (params, state).

    Infinity-norm variant: u tracks max(beta2 * u, |g|) and the update is
    lr/(1 - beta1^t) * m / u. Epsilon only floors u against division by
    zero, so a fresh step moves every coordinate by exactly lr * sign(g).
    """
    weight_grads, bias_grads = grads
    state.step += 1
    correction = state.learning_rate / (1.0 - state.beta1 ** state.step)
    tensors = params.weights + params.biases
    gradient_list = list(weight_grads) + list(bias_grads)
    for theta, g, m, u in zip(tensors, gradient_list,
                              state.first_moment, state.infinity_norm):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        np.maximum(state.beta2 * u, np.abs(g), out=u)
        theta -= correction * m / np.maximum(u, state.epsilon)
    return params, state


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs besides the channel itself."""

    training_snr_db: float
    learning_rate: float
    scaling_factor: float
    flavor: str = "blind"             # blind | zf
    train_size: int = 150_000
    validation_size: int = 50_000
    batch_size: int = 100
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.train_size <= 0 or self.validation_size <= 0 or self.batch_size <= 0:
            raise ValueError("set sizes and batch size must be > 0")
        if self.train_size % self.batch_size != 0:
            raise ValueError("batch size must divide the training-set size")
        if self.flavor not in ("blind", "zf"):
            raise ValueError(f"unknown detector flavor {self.flavor!r}")

    def to_dict(self) -> dict:
        return {
            "training_snr_db": self.training_snr_db,
            "learning_rate": self.learning_rate,
            "scaling_factor": self.scaling_factor,
            "flavor": self.flavor,
            "train_size": self.train_size,
            "validation_size": self.validation_size,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Dataset:
    """Network inputs with bit targets and a record of how they were made."""

    inputs: np.ndarray
    targets: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets must have equal row counts")


def generate_dataset(scheme: GomimoScheme, size: int, channel_entries: np.ndarray,
                     sigma: float, front_end: np.ndarray,
                     rng: np.random.Generator, provenance: dict | None = None) -> Dataset:
    """Draw i.i.d. rows: uniform frame -> transmit -> AWGN -> front end.

    front_end is the matrix applied to the received vector before the
    network sees it: alpha * F for the blind detector, the channel
    pseudo-inverse for the ZF one.
    """
    codebook = enumerate_codebook(scheme)
    frame_idx = rng.integers(0, codebook.size, size=size)
    x = codebook.vectors[frame_idx]
    y = x @ channel_entries.T + rng.normal(0.0, sigma, size=(size, channel_entries.shape[0]))
    return Dataset(inputs=y @ front_end.T,
                   targets=codebook.frames[frame_idx],
                   provenance=provenance or {})


def train(arch: MlpArchitecture, dataset: Dataset, validation_set: Dataset,
          config: TrainConfig):
    """Mini-batch Adamax training; returns (best params, per-epoch MSE log).

    Shuffles once per epoch from the run seed, logs train and validation
    MSE per epoch, and returns the parameters with the lowest validation
    MSE seen. A non-finite loss aborts with the failing epoch.
    """
    if dataset.inputs.shape[1] != arch.input_width:
        raise ValueError("dataset width does not match the network input")
    if dataset.targets.shape[1] != arch.output_width:
        raise ValueError("target width does not match the network output")
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    params = init_params(arch, rng)
    state = init_adamax(params, config.learning_rate)
    best_params = params.copy()
    best_val = np.inf
    log = []
    n = dataset.inputs.shape[0]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        train_mse_sum = 0.0
        for lo in range(0, n, config.batch_size):
            batch = order[lo:lo + config.batch_size]
            out, cache = forward(params, dataset.inputs[batch])
            loss = mse_loss(out, dataset.targets[batch])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            train_mse_sum += loss
            grads = backward(params, cache, dataset.targets[batch])
            adamax_step(params, grads, state)
        train_mse = train_mse_sum / (n // config.batch_size)
        val_mse = evaluate_mse(params, validation_set)
        if not np.isfinite(val_mse):
            raise TrainingDivergedError(epoch)
        log.append({"epoch": epoch, "train_mse": train_mse, "val_mse": val_mse})
        if val_mse < best_val:
            best_val = val_mse
            best_params = params.copy()
    return best_params, log


def evaluate_mse(params: MlpParams, dataset: Dataset, chunk: int = 20_000) -> float:
    """Mean MSE over a dataset, evaluated in chunks."""
    total = 0.0
    n = dataset.inputs.shape[0]
    for lo in range(0, n, chunk):
        out, _ = forward(params, dataset.inputs[lo:lo + chunk])
        total += np.sum((out - dataset.targets[lo:lo + chunk]) ** 2)
    return float(total / dataset.targets.size)


def save_model(path, params: MlpParams, arch: MlpArchitecture, config: TrainConfig) -> None:
    """Self-describing model container; round-trips bit-exactly."""
    meta = {
        "layer_widths": list(arch.layer_widths),
        "hidden_activation": arch.hidden_activation,
        "output_activation": arch.output_activation,
        "train_config": config.to_dict(),
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for i, (w, b) in enumerate(zip(params.weights, params.biases), start=1):
        arrays[f"w{i}"] = np.asarray(w, dtype=np.float64)
        arrays[f"b{i}"] = np.asarray(b, dtype=np.float64)
    np.savez(path, **arrays)


def load_model(path):
    """Inverse of save_model; returns (params, architecture, train config)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"].tobytes()).decode())
        widths = tuple(meta["layer_widths"])
        weights = [data[f"w{i}"] for i in range(1, len(widths))]
        biases = [data[f"b{i}"] for i in range(1, len(widths))]
    arch = MlpArchitecture(widths, meta["hidden_activation"], meta["output_activation"])
    config = TrainConfig(**meta["train_config"])
    return MlpParams(weights, biases), arch, config
