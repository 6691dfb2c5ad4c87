"""The four detection schemes: joint ML, ZF-ML, CSI-based ZF-DNN, and the
CSI-free blind DNN pipeline (amplitude scaling, feature mixing, network
inference, hard decision).

Per-vector functions model online, symbol-by-symbol detection: joint ML
scans the codebook candidate by candidate, which is the defining (and
exponentially scaling) computation of exhaustive detection, while the other
three detectors run in a handful of small fixed-size operations. The
*_batch variants are the vectorized equivalents used by the Monte Carlo
harness; tests pin them to the per-vector results exactly.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import ChannelMatrix
from .errors import RankDeficientChannelError
from .modulation import GOSM, Codebook, GomimoScheme, SpatialPatternSet
from .neural import MlpParams, forward, forward_vector

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class EqualizerState:
    """Pseudo-inverse of the channel, ready to left-multiply received vectors."""

    h_pinv: np.ndarray


def pseudo_inverse(channel: ChannelMatrix) -> EqualizerState:
    """Moore-Penrose pseudo-inverse via SVD, with a conditioning guard.

    Indoor optical channels are strongly correlated; past a condition
    number of 1e12 the equalized output is numerically meaningless, so we
    reject instead of returning garbage.
    """
    h = channel.entries
    s = np.linalg.svd(h, compute_uv=False)
    if s[-1] == 0.0 or s[0] / s[-1] > CONDITION_LIMIT:
        raise RankDeficientChannelError(
            f"channel condition number {s[0] / max(s[-1], np.finfo(float).tiny):.3e} "
            f"exceeds {CONDITION_LIMIT:.0e}")
    return EqualizerState(h_pinv=np.linalg.pinv(h))


def zf_equalize(y: np.ndarray, equalizer: EqualizerState) -> np.ndarray:
    """Remove channel crosstalk: x_hat = H^+ y (noise gets amplified)."""
    return equalizer.h_pinv @ np.asarray(y, dtype=float)


def zf_equalize_batch(ys: np.ndarray, equalizer: EqualizerState) -> np.ndarray:
    return np.asarray(ys, dtype=float) @ equalizer.h_pinv.T


def codeword_images(channel: ChannelMatrix, codebook: Codebook) -> np.ndarray:
    """Noise-free received vectors H x for every codeword."""
    return codebook.vectors @ channel.entries.T


def joint_ml_detect(y: np.ndarray, channel: ChannelMatrix, codebook: Codebook,
                    images: np.ndarray | None = None) -> np.ndarray:
    """Exhaustive ML: scan every codeword for the least ||y - Hx||^2.

    Ties resolve to the lowest frame index (scan order). Pass precomputed
    images to skip the H x products.
    """
    y = np.asarray(y, dtype=float)
    if images is None:
        images = codeword_images(channel, codebook)
    best_idx = 0
    best_dist = np.inf
    for c in range(codebook.size):
        diff = y - images[c]
        dist = float(np.square(diff).sum())
        if dist < best_dist:
            best_dist = dist
            best_idx = c
    return codebook.frames[best_idx]


def joint_ml_detect_batch(ys: np.ndarray, channel: ChannelMatrix, codebook: Codebook,
                          images: np.ndarray | None = None,
                          chunk: int = 16384) -> np.ndarray:
    """Vectorized joint ML over rows of ys; same results as the scan."""
    ys = np.asarray(ys, dtype=float)
    if images is None:
        images = codeword_images(channel, codebook)
    out = np.empty(ys.shape[0], dtype=np.intp)
    for lo in range(0, ys.shape[0], chunk):
        block = ys[lo:lo + chunk]
        dists = np.square(block[:, None, :] - images[None, :, :]).sum(axis=2)
        out[lo:lo + chunk] = np.argmin(dists, axis=1)
    return codebook.frames[out]


def _quantize(values: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Index of the nearest constellation level; ties take the lower level."""
    return np.argmin(np.abs(np.asarray(values)[..., None] - levels), axis=-1)


@lru_cache(maxsize=None)
def _pattern_indicators(patterns: SpatialPatternSet) -> np.ndarray:
    rows = patterns.indicator_rows()
    rows.setflags(write=False)
    return rows


def zf_ml_detect(x_zf: np.ndarray, scheme: GomimoScheme) -> np.ndarray:
    """Three-step detection on the equalized vector.

    Step 2 estimates the spatial pattern as the legal activation set
    capturing the most energy of x_zf (ties: lowest pattern index); step 3
    quantizes the active entries onto the PAM grid - entrywise for GOSMP,
    through the mean for GOSM (ties: lower level). Spatial mistakes here
    propagate into the constellation decision, which is exactly the error
    mechanism that separates this detector from joint ML.
    """
    x_zf = np.asarray(x_zf, dtype=float)
    levels = scheme.constellation.levels
    energies = _pattern_indicators(scheme.patterns) @ np.square(x_zf)
    pat_idx = int(np.argmax(energies))
    pattern = scheme.patterns.patterns[pat_idx]
    active = x_zf[list(pattern)]
    sym_bits = scheme.constellation.bits_per_symbol
    if scheme.kind == GOSM:
        code = int(_quantize(active.mean(), levels))
        level_bits = sym_bits
    else:
        code = 0
        for idx in _quantize(active, levels):
            code = (code << sym_bits) | int(idx)
        level_bits = sym_bits * scheme.patterns.num_active
    value = (pat_idx << level_bits) | code
    width = scheme.spectral_efficiency_bits
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)],
                    dtype=np.uint8)


def zf_ml_detect_batch(x_zf: np.ndarray, scheme: GomimoScheme,
                       codebook: Codebook) -> np.ndarray:
    """Vectorized three-step detection over rows of x_zf."""
    x_zf = np.asarray(x_zf, dtype=float)
    n = x_zf.shape[0]
    levels = scheme.constellation.levels
    sym_bits = scheme.constellation.bits_per_symbol
    energies = np.empty((n, len(scheme.patterns.patterns)))
    for pat_idx, pattern in enumerate(scheme.patterns.patterns):
        energies[:, pat_idx] = np.square(x_zf[:, list(pattern)]).sum(axis=1)
    pat_choice = np.argmax(energies, axis=1)
    level_codes = np.zeros(n, dtype=np.intp)
    for pat_idx, pattern in enumerate(scheme.patterns.patterns):
        mask = pat_choice == pat_idx
        if not mask.any():
            continue
        active = x_zf[np.ix_(mask, list(pattern))]
        if scheme.kind == GOSM:
            level_codes[mask] = _quantize(active.mean(axis=1), levels)
        else:
            idx = _quantize(active, levels)
            code = np.zeros(idx.shape[0], dtype=np.intp)
            for col in range(idx.shape[1]):
                code = (code << sym_bits) | idx[:, col]
            level_codes[mask] = code
    # Frame index = pattern bits followed by level bits (natural binary),
    # so the frame table doubles as the bit assembler.
    level_bits = sym_bits if scheme.kind == GOSM \
        else sym_bits * scheme.patterns.num_active
    frame_idx = (pat_choice << level_bits) | level_codes
    return codebook.frames[frame_idx]


def feature_matrix(patterns: SpatialPatternSet) -> np.ndarray:
    """Stack the activation patterns as 0/1 indicator rows.

    Only the square case (pattern count == LED count == PD count) is
    defined; anything else is rejected rather than extrapolated.
    """
    rows = patterns.indicator_rows()
    if rows.shape[0] != patterns.num_leds:
        raise ValueError(
            f"feature matrix must be square: {rows.shape[0]} patterns "
            f"for {patterns.num_leds} LEDs")
    return rows


@dataclass(frozen=True)
class PreprocessConfig:
    """Amplitude scaling plus 0/1 feature mixing applied before the network.

    The standard mixing matrix is feature_matrix(patterns); the identity is
    accepted too (scaling-only front end, used by the input ablation).
    """

    alpha: float
    feature: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "feature", np.asarray(self.feature, dtype=float))
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValueError("alpha must be finite and > 0")
        f = self.feature
        if f.ndim != 2 or not np.isin(f, (0.0, 1.0)).all():
            raise ValueError("feature matrix must be a 2-D 0/1 matrix")

    @property
    def front_end(self) -> np.ndarray:
        return self.alpha * self.feature


def preprocess(y: np.ndarray, config: PreprocessConfig) -> np.ndarray:
    """Scaled feature mixing: y_hat = alpha F y."""
    return config.alpha * (config.feature @ np.asarray(y, dtype=float))


def preprocess_batch(ys: np.ndarray, config: PreprocessConfig) -> np.ndarray:
    return config.alpha * (np.asarray(ys, dtype=float) @ config.feature.T)


def hard_decision(fuzzy_output: np.ndarray) -> np.ndarray:
    """Threshold fuzzy bits at 0.5 (0.5 itself decides 1)."""
    return (np.asarray(fuzzy_output) >= 0.5).astype(np.uint8)


def _check_widths(network: MlpParams, input_width: int, output_width: int) -> None:
    widths = network.layer_widths
    if widths[0] != input_width:
        raise ValueError(f"network expects input width {widths[0]}, got {input_width}")
    if widths[-1] != output_width:
        raise ValueError(f"network output width {widths[-1]} != frame width {output_width}")


def blind_dnn_detect(y: np.ndarray, config: PreprocessConfig, network: MlpParams,
                     frame_bits: int) -> np.ndarray:
    """CSI-free pipeline: preprocess, network forward, hard decision."""
    y_hat = preprocess(y, config)
    _check_widths(network, y_hat.shape[0], frame_bits)
    return hard_decision(forward_vector(network, y_hat))


def zf_dnn_detect(y: np.ndarray, equalizer: EqualizerState, network: MlpParams,
                  frame_bits: int) -> np.ndarray:
    """CSI-based pipeline: ZF equalize, network forward, hard decision."""
    x_zf = zf_equalize(y, equalizer)
    _check_widths(network, x_zf.shape[0], frame_bits)
    return hard_decision(forward_vector(network, x_zf))


JOINT_ML = "joint_ml"
ZF_ML = "zf_ml"
ZF_DNN = "zf_dnn"
BLIND_DNN = "blind_dnn"
DETECTOR_KINDS = (JOINT_ML, ZF_ML, ZF_DNN, BLIND_DNN)


@dataclass(frozen=True)
class Detector:
    """A detection scheme bound to its attachments, ready to run.

    detect() handles one received vector (the online, per-symbol path that
    the timing benchmark measures); detect_batch() is the throughput path
    for Monte Carlo sweeps and returns identical bits.
    """

    kind: str
    scheme: GomimoScheme
    codebook: Codebook
    channel: ChannelMatrix | None = None
    images: np.ndarray | None = None
    equalizer: EqualizerState | None = None
    preprocess_config: PreprocessConfig | None = None
    network: MlpParams | None = None

    def detect(self, y: np.ndarray) -> np.ndarray:
        s = self.scheme.spectral_efficiency_bits
        if self.kind == JOINT_ML:
            return joint_ml_detect(y, self.channel, self.codebook, self.images)
        if self.kind == ZF_ML:
            return zf_ml_detect(zf_equalize(y, self.equalizer), self.scheme)
        if self.kind == ZF_DNN:
            return zf_dnn_detect(y, self.equalizer, self.network, s)
        return blind_dnn_detect(y, self.preprocess_config, self.network, s)

    def detect_batch(self, ys: np.ndarray) -> np.ndarray:
        s = self.scheme.spectral_efficiency_bits
        if self.kind == JOINT_ML:
            return joint_ml_detect_batch(ys, self.channel, self.codebook, self.images)
        if self.kind == ZF_ML:
            return zf_ml_detect_batch(zf_equalize_batch(ys, self.equalizer),
                                      self.scheme, self.codebook)
        if self.kind == ZF_DNN:
            x_zf = zf_equalize_batch(ys, self.equalizer)
            _check_widths(self.network, x_zf.shape[1], s)
            out, _ = forward(self.network, x_zf)
            return hard_decision(out)
        y_hat = preprocess_batch(ys, self.preprocess_config)
        _check_widths(self.network, y_hat.shape[1], s)
        out, _ = forward(self.network, y_hat)
        return hard_decision(out)


def build_detector(kind: str, scheme: GomimoScheme, codebook: Codebook,
                   channel: ChannelMatrix | None = None,
                   equalizer: EqualizerState | None = None,
                   preprocess_config: PreprocessConfig | None = None,
                   network: MlpParams | None = None) -> Detector:
    """Validate that the attachments a detector kind needs are present."""
    if kind not in DETECTOR_KINDS:
        raise ValueError(f"unknown detector kind {kind!r}")
    if kind == JOINT_ML:
        if channel is None:
            raise ValueError("joint_ml needs the channel matrix")
        images = codeword_images(channel, codebook)
        return Detector(kind, scheme, codebook, channel=channel, images=images)
    if kind == ZF_ML:
        if equalizer is None:
            raise ValueError("zf_ml needs an equalizer")
        return Detector(kind, scheme, codebook, equalizer=equalizer)
    if kind == ZF_DNN:
        if equalizer is None or network is None:
            raise ValueError("zf_dnn needs an equalizer and a trained network")
        return Detector(kind, scheme, codebook, equalizer=equalizer, network=network)
    if preprocess_config is None or network is None:
        raise ValueError("blind_dnn needs a preprocess config and a trained network")
    return Detector(kind, scheme, codebook, preprocess_config=preprocess_config,
                    network=network)
