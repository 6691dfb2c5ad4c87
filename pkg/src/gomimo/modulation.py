"""Unipolar non-zero M-PAM levels, legal LED activation patterns, and the
bit <-> intensity-vector codecs for GOSM and GOSMP mapping.

Bit layout (documented, fixed): the first floor(log2 C(Nt, Na)) bits of a
frame select the activation pattern as a natural-binary index into the
pattern list; the remaining bits select PAM levels in natural binary
(level index = bit value + 1). GOSM carries one symbol replicated on all
active LEDs; GOSMP carries one symbol per active LED in ascending LED
order.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

GOSM = "gosm"
GOSMP = "gosmp"

# Matching constellation levels is an exact float comparison up to this
# relative slack; anything further off the grid is not a legal TxVector.
_LEVEL_RTOL = 1e-9


@dataclass(frozen=True)
class PamConstellation:
    """Strictly positive M-PAM intensity grid with average power i_av."""

    order: int
    i_av: float
    levels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "levels", np.asarray(self.levels, dtype=float))

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.order))


def pam_levels(order: int, i_av: float) -> PamConstellation:
    """Unipolar non-zero PAM grid: level m = 2 i_av m / (M + 1), m = 1..M.

    Zero is excluded so an active LED can never be mistaken for an idle one;
    the construction makes the grid average exactly i_av.
    """
    if order < 2 or (order & (order - 1)) != 0:
        raise ValueError(f"PAM order must be a power of 2 >= 2, got {order}")
    if i_av <= 0.0:
        raise ValueError("average optical power must be > 0")
    m = np.arange(1, order + 1, dtype=float)
    return PamConstellation(order=order, i_av=i_av, levels=2.0 * i_av * m / (order + 1))


@dataclass(frozen=True)
class SpatialPatternSet:
    """Ordered list of legal LED activation subsets (0-based indices)."""

    num_leds: int
    num_active: int
    patterns: tuple

    @property
    def index_bits(self) -> int:
        return int(math.log2(len(self.patterns)))

    def indicator_rows(self) -> np.ndarray:
        """0/1 matrix; row i marks the LEDs active in pattern i."""
        rows = np.zeros((len(self.patterns), self.num_leds), dtype=float)
        for i, pat in enumerate(self.patterns):
            rows[i, list(pat)] = 1.0
        return rows


def legal_patterns(num_leds: int, num_active: int) -> SpatialPatternSet:
    """Activation patterns carrying the spatial index bits.

    The 4-choose-2 case is pinned to the unified mapping-table order
    {1,2}, {1,3}, {2,4}, {3,4} (0-based here). Other shapes fall back to
    lexicographic subsets truncated to the largest power of two.
    """
    if not 1 <= num_active <= num_leds:
        raise ValueError(f"need 1 <= Na <= Nt, got Na={num_active}, Nt={num_leds}")
    if (num_leds, num_active) == (4, 2):
        pats = ((0, 1), (0, 2), (1, 3), (2, 3))
    else:
        count = 2 ** int(math.floor(math.log2(math.comb(num_leds, num_active))))
        pats = tuple(itertools.islice(
            itertools.combinations(range(num_leds), num_active), count))
    return SpatialPatternSet(num_leds=num_leds, num_active=num_active, patterns=pats)


def spectral_efficiency(kind: str, order: int, num_leds: int, num_active: int) -> int:
    """Bits per channel use: index bits plus one (GOSM) or Na (GOSMP) symbols."""
    if not 1 <= num_active <= num_leds:
        raise ValueError(f"need 1 <= Na <= Nt, got Na={num_active}, Nt={num_leds}")
    index_bits = int(math.floor(math.log2(math.comb(num_leds, num_active))))
    sym_bits = int(math.log2(order))
    if kind == GOSM:
        return sym_bits + index_bits
    if kind == GOSMP:
        return num_active * sym_bits + index_bits
    raise ValueError(f"unknown mapping kind {kind!r}")


@dataclass(frozen=True)
class GomimoScheme:
    """A complete mapping: constellation, pattern set, and frame width."""

    kind: str
    constellation: PamConstellation
    patterns: SpatialPatternSet
    spectral_efficiency_bits: int

    @property
    def num_leds(self) -> int:
        return self.patterns.num_leds

    @property
    def num_active(self) -> int:
        return self.patterns.num_active


def make_scheme(kind: str, order: int = 4, i_av: float = 1.0,
                num_leds: int = 4, num_active: int = 2) -> GomimoScheme:
    if kind not in (GOSM, GOSMP):
        raise ValueError(f"unknown mapping kind {kind!r}")
    return GomimoScheme(
        kind=kind,
        constellation=pam_levels(order, i_av),
        patterns=legal_patterns(num_leds, num_active),
        spectral_efficiency_bits=spectral_efficiency(kind, order, num_leds, num_active),
    )


def _bits_to_int(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def map_bits(scheme: GomimoScheme, bits) -> np.ndarray:
    """Encode one frame of S bits into the transmitted intensity vector."""
    bits = np.asarray(bits).ravel()
    s = scheme.spectral_efficiency_bits
    if bits.size != s:
        raise ValueError(f"frame must carry exactly {s} bits, got {bits.size}")
    idx_bits = scheme.patterns.index_bits
    sym_bits = scheme.constellation.bits_per_symbol
    pattern = scheme.patterns.patterns[_bits_to_int(bits[:idx_bits])]
    x = np.zeros(scheme.num_leds)
    levels = scheme.constellation.levels
    if scheme.kind == GOSM:
        level = levels[_bits_to_int(bits[idx_bits:idx_bits + sym_bits])]
        x[list(pattern)] = level
    else:
        for k, led in enumerate(pattern):
            lo = idx_bits + k * sym_bits
            x[led] = levels[_bits_to_int(bits[lo:lo + sym_bits])]
    return x


def demap_vector(scheme: GomimoScheme, x) -> np.ndarray:
    """Exact inverse of map_bits; rejects vectors off the codebook."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != scheme.num_leds:
        raise ValueError(f"vector must have {scheme.num_leds} entries, got {x.size}")
    active = tuple(int(i) for i in np.nonzero(x)[0])
    try:
        pat_idx = scheme.patterns.patterns.index(active)
    except ValueError:
        raise ValueError(f"active set {active} is not a legal pattern") from None
    levels = scheme.constellation.levels
    level_idx = []
    for led in active:
        match = np.isclose(x[led], levels, rtol=_LEVEL_RTOL, atol=0.0)
        if not match.any():
            raise ValueError(f"entry {x[led]!r} is not a constellation level")
        level_idx.append(int(np.argmax(match)))
    if scheme.kind == GOSM and len(set(level_idx)) > 1:
        raise ValueError("GOSM requires all active entries equal")
    idx_bits = scheme.patterns.index_bits
    sym_bits = scheme.constellation.bits_per_symbol
    parts = [_int_to_bits(pat_idx, idx_bits)]
    if scheme.kind == GOSM:
        parts.append(_int_to_bits(level_idx[0], sym_bits))
    else:
        parts.extend(_int_to_bits(li, sym_bits) for li in level_idx)
    return np.concatenate(parts)


@dataclass(frozen=True)
class Codebook:
    """All 2^S (frame, vector) pairs in frame-lexicographic order."""

    frames: np.ndarray   # (2^S, S) uint8
    vectors: np.ndarray  # (2^S, Nt) float

    @property
    def size(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_bits(self) -> int:
        return self.frames.shape[1]


def enumerate_codebook(scheme: GomimoScheme) -> Codebook:
    s = scheme.spectral_efficiency_bits
    frames = np.array([_int_to_bits(v, s) for v in range(2 ** s)], dtype=np.uint8)
    vectors = np.array([map_bits(scheme, f) for f in frames])
    return Codebook(frames=frames, vectors=vectors)
