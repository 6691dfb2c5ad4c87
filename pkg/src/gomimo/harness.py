"""Monte Carlo experiment engine: BER sweeps over transmitted SNR, training
MSE logs, the input-ablation comparison, the scaling-factor feasibility
sweep, and the detector timing benchmark.

Reproducibility contract: every SNR point draws from its own generator
seeded by (run seed, point index), so results are identical whether points
run serially or in parallel, and paired experiments (ablation arms, timing
vs sweep) that share a seed consume identical noise streams.
"""

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelMatrix, snr_to_sigma
from .detectors import (BLIND_DNN, Detector, PreprocessConfig, build_detector,
                        feature_matrix, pseudo_inverse)
from .errors import TrainingDivergedError, UnbracketedTargetError
from .modulation import GomimoScheme, enumerate_codebook
from .neural import (MlpArchitecture, MlpParams, TrainConfig, generate_dataset,
                     preset_architecture, train)

CHUNK = 20_000


@dataclass(frozen=True)
class SweepConfig:
    """One BER-vs-SNR measurement campaign for a single detector."""

    scheme: GomimoScheme
    channel: ChannelMatrix
    detector: Detector
    snr_list_db: tuple
    vectors_per_point: int = 100_000
    min_error_count: int = 100
    seed: int = 0
    detector_label: str = ""
    scheme_label: str = ""
    location_label: str = ""

    def __post_init__(self):
        if self.vectors_per_point < 1_000:
            raise ValueError("vectors_per_point must be >= 1000")
        snrs = tuple(float(s) for s in self.snr_list_db)
        if any(b <= a for a, b in zip(snrs, snrs[1:])):
            raise ValueError("snr_list_db must be strictly increasing")
        object.__setattr__(self, "snr_list_db", snrs)


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    bits_sent: int
    bit_errors: int
    ber: float
    standard_error: float
    censored: bool


@dataclass(frozen=True)
class TimingReport:
    detector: str
    vectors_detected: int
    wall_seconds: float
    per_vector_microseconds: float


def _point_rng(seed: int, point_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(point_index,)))


def _draw_chunk(rng, codebook, channel_entries, sigma, count):
    """One chunk of the noise stream: true frame indices and received rows."""
    idx = rng.integers(0, codebook.size, size=count)
    ys = codebook.vectors[idx] @ channel_entries.T \
        + rng.normal(0.0, sigma, size=(count, channel_entries.shape[0]))
    return idx, ys


def run_ber_point(config: SweepConfig, point_index: int) -> BerPoint:
    """Monte Carlo estimate at one SNR point, with early stopping.

    Stops once min_error_count errors have accumulated over at least 1000
    vectors, otherwise runs the whole vector budget. Zero observed errors
    flag the point as censored (BER 0 is an artifact of the budget, not a
    measurement).
    """
    snr_db = config.snr_list_db[point_index]
    sigma = snr_to_sigma(snr_db, config.scheme.constellation.i_av).sigma
    codebook = config.detector.codebook
    rng = _point_rng(config.seed, point_index)
    s = config.scheme.spectral_efficiency_bits
    vectors = 0
    errors = 0
    while vectors < config.vectors_per_point:
        count = min(CHUNK, config.vectors_per_point - vectors)
        idx, ys = _draw_chunk(rng, codebook, config.channel.entries, sigma, count)
        detected = config.detector.detect_batch(ys)
        errors += int(np.sum(detected != codebook.frames[idx]))
        vectors += count
        if errors >= config.min_error_count and vectors >= 1_000:
            break
    bits = vectors * s
    ber = errors / bits
    stderr = float(np.sqrt(ber * (1.0 - ber) / bits)) if bits else 0.0
    return BerPoint(snr_db=snr_db, bits_sent=bits, bit_errors=errors,
                    ber=ber, standard_error=stderr, censored=errors == 0)


def run_ber_sweep(config: SweepConfig, threads: int = 1) -> list:
    """BER at every SNR point; parallel execution changes nothing but time."""
    points = range(len(config.snr_list_db))
    if threads <= 1:
        return [run_ber_point(config, k) for k in points]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run_ber_point, [config] * len(config.snr_list_db), points))


def interpolate_snr_at_ber(curve: list, target_ber: float) -> float:
    """Read the SNR where a measured curve crosses a target BER.

    Works in (snr, log10 ber) space between the bracketing pair; censored
    points never participate. Raises if no adjacent pair brackets the
    target.
    """
    usable = [p for p in curve if not p.censored]
    for p in usable:
        if p.ber == target_ber:
            return p.snr_db
    for p1, p2 in zip(usable, usable[1:]):
        if (p1.ber - target_ber) * (p2.ber - target_ber) < 0:
            l1, l2, lt = np.log10(p1.ber), np.log10(p2.ber), np.log10(target_ber)
            return float(p1.snr_db + (p2.snr_db - p1.snr_db) * (lt - l1) / (l2 - l1))
    raise UnbracketedTargetError(
        f"target BER {target_ber:g} is not bracketed by the measured curve")


@dataclass(frozen=True)
class TrainedDetector:
    """A trained network wrapped as a runnable detector, plus its history."""

    detector: Detector
    params: MlpParams
    architecture: MlpArchitecture
    train_config: TrainConfig
    mse_log: list


def train_detector(scheme: GomimoScheme, channel: ChannelMatrix,
                   config: TrainConfig, arch: MlpArchitecture | None = None,
                   feature_kind: str = "patterns") -> TrainedDetector:
    """Generate data at the training SNR, train, and wrap as a detector.

    feature_kind selects the blind front end: "patterns" for the activation
    indicator matrix, "identity" for amplitude scaling only (ablation arm).
    ZF flavor ignores it and feeds the equalized vector instead.
    """
    codebook = enumerate_codebook(scheme)
    s = scheme.spectral_efficiency_bits
    sigma = snr_to_sigma(config.training_snr_db, scheme.constellation.i_av).sigma
    if config.flavor == "zf":
        equalizer = pseudo_inverse(channel)
        front_end = equalizer.h_pinv
        pre = None
    else:
        equalizer = None
        if feature_kind == "patterns":
            f = feature_matrix(scheme.patterns)
        elif feature_kind == "identity":
            f = np.eye(channel.num_pds)
        else:
            raise ValueError(f"unknown feature kind {feature_kind!r}")
        pre = PreprocessConfig(alpha=config.scaling_factor, feature=f)
        front_end = pre.front_end
    if arch is None:
        arch = preset_architecture(scheme.kind, front_end.shape[0], s)
    data_rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0,)))
    val_rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(1,)))
    provenance = {"scheme": scheme.kind, "snr_db": config.training_snr_db,
                  "seed": config.seed, "flavor": config.flavor}
    train_set = generate_dataset(scheme, config.train_size, channel.entries,
                                 sigma, front_end, data_rng, provenance)
    val_set = generate_dataset(scheme, config.validation_size, channel.entries,
                               sigma, front_end, val_rng, provenance)
    params, log = train(arch, train_set, val_set, config)
    if config.flavor == "zf":
        detector = build_detector("zf_dnn", scheme, codebook,
                                  equalizer=equalizer, network=params)
    else:
        detector = build_detector(BLIND_DNN, scheme, codebook,
                                  preprocess_config=pre, network=params)
    return TrainedDetector(detector=detector, params=params, architecture=arch,
                           train_config=config, mse_log=log)


def run_mse_log(scheme: GomimoScheme, channel: ChannelMatrix,
                train_configs: list) -> list:
    """One training run per config; rows of (training SNR, epoch, MSEs)."""
    rows = []
    for cfg in train_configs:
        trained = train_detector(scheme, channel, cfg)
        for entry in trained.mse_log:
            rows.append({"training_snr_db": cfg.training_snr_db,
                         "epoch": entry["epoch"],
                         "train_mse": entry["train_mse"],
                         "val_mse": entry["val_mse"]})
    return rows


def run_input_ablation(scheme: GomimoScheme, channel: ChannelMatrix,
                       train_config: TrainConfig, snr_list_db, seed: int,
                       vectors_per_point: int = 100_000,
                       min_error_count: int = 100, threads: int = 1,
                       target_ber: float = 1e-3):
    """Train twin blind detectors (feature mixing vs scaling only), sweep both
    on identical noise streams, and read the SNR gain at the target BER.

    Returns (curve with mixing, scaling-only curve, gain in dB); the gain is
    None when either curve fails to bracket the target.
    """
    arms = {}
    for feature_kind in ("patterns", "identity"):
        trained = train_detector(scheme, channel, train_config,
                                 feature_kind=feature_kind)
        sweep = SweepConfig(scheme=scheme, channel=channel,
                            detector=trained.detector, snr_list_db=tuple(snr_list_db),
                            vectors_per_point=vectors_per_point,
                            min_error_count=min_error_count, seed=seed)
        arms[feature_kind] = run_ber_sweep(sweep, threads=threads)
    try:
        gain = interpolate_snr_at_ber(arms["identity"], target_ber) \
            - interpolate_snr_at_ber(arms["patterns"], target_ber)
    except UnbracketedTargetError:
        gain = None
    return arms["patterns"], arms["identity"], gain


def run_alpha_sweep(scheme: GomimoScheme, channel: ChannelMatrix,
                    train_config: TrainConfig, alpha_list, snr_fixed_db,
                    seed: int, vectors_per_point: int = 50_000,
                    min_error_count: int = 100, threads: int = 1) -> list:
    """Train one blind detector per scaling factor and measure BER at fixed
    transmitted SNRs. Training divergence marks the cells, not the run.
    """
    rows = []
    for alpha in alpha_list:
        cfg = replace(train_config, scaling_factor=float(alpha))
        try:
            trained = train_detector(scheme, channel, cfg)
        except TrainingDivergedError:
            for snr in snr_fixed_db:
                rows.append({"alpha": float(alpha), "snr_db": float(snr),
                             "ber": float("nan")})
            continue
        sweep = SweepConfig(scheme=scheme, channel=channel,
                            detector=trained.detector,
                            snr_list_db=tuple(snr_fixed_db),
                            vectors_per_point=vectors_per_point,
                            min_error_count=min_error_count, seed=seed)
        for point in run_ber_sweep(sweep, threads=threads):
            rows.append({"alpha": float(alpha), "snr_db": point.snr_db,
                         "ber": point.ber})
    return rows


def run_timing_benchmark(scheme: GomimoScheme, channel: ChannelMatrix,
                         detectors: dict, vector_count: int, snr_db: float,
                         seed: int = 0):
    """Time online (per-vector) detection of one shared stream per detector.

    The stream is drawn exactly like BER-sweep point 0 at this seed, so
    error counts are comparable with run_ber_sweep. Detection runs strictly
    single-threaded; error counting happens outside the timed section.
    Returns (reports, per-detector bit error counts).
    """
    codebook = next(iter(detectors.values())).codebook
    sigma = snr_to_sigma(snr_db, scheme.constellation.i_av).sigma
    rng = _point_rng(seed, 0)
    idx_parts, y_parts = [], []
    remaining = vector_count
    while remaining > 0:
        count = min(CHUNK, remaining)
        idx, ys = _draw_chunk(rng, codebook, channel.entries, sigma, count)
        idx_parts.append(idx)
        y_parts.append(ys)
        remaining -= count
    true_idx = np.concatenate(idx_parts)
    stream = np.vstack(y_parts)
    true_frames = codebook.frames[true_idx]
    reports, error_counts = [], {}
    for name, det in detectors.items():
        detected = np.empty_like(true_frames)
        t0 = time.perf_counter()
        for i in range(vector_count):
            detected[i] = det.detect(stream[i])
        wall = time.perf_counter() - t0
        reports.append(TimingReport(
            detector=name, vectors_detected=vector_count, wall_seconds=wall,
            per_vector_microseconds=wall / vector_count * 1e6))
        error_counts[name] = int(np.sum(detected != true_frames))
    return reports, error_counts


# --- CSV emission -----------------------------------------------------------
# One header row, UTF-8, '.' decimal separator; floats use repr so identical
# runs produce byte-identical files.

def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_ber_csv(path, entries) -> None:
    """entries: iterable of (detector, scheme, location, BerPoint)."""
    _write_csv(path,
               ["detector", "scheme", "location", "snr_db", "bits", "errors",
                "ber", "stderr", "censored"],
               [(d, s, loc, p.snr_db, p.bits_sent, p.bit_errors, p.ber,
                 p.standard_error, p.censored) for d, s, loc, p in entries])


def write_mse_csv(path, rows) -> None:
    _write_csv(path, ["training_snr_db", "epoch", "train_mse", "val_mse"],
               [(r["training_snr_db"], r["epoch"], r["train_mse"], r["val_mse"])
                for r in rows])


def write_alpha_csv(path, rows) -> None:
    _write_csv(path, ["alpha", "snr_db", "ber"],
               [(r["alpha"], r["snr_db"], r["ber"]) for r in rows])


def write_ablation_csv(path, entries) -> None:
    """entries: iterable of (scheme, input_kind, BerPoint)."""
    _write_csv(path,
               ["scheme", "input", "snr_db", "bits", "errors", "ber", "stderr",
                "censored"],
               [(s, kind, p.snr_db, p.bits_sent, p.bit_errors, p.ber,
                 p.standard_error, p.censored) for s, kind, p in entries])


def write_timing_csv(path, entries) -> None:
    """entries: iterable of (scheme, TimingReport)."""
    _write_csv(path,
               ["detector", "scheme", "vectors", "wall_seconds", "per_vector_us"],
               [(r.detector, s, r.vectors_detected, r.wall_seconds,
                 r.per_vector_microseconds) for s, r in entries])
