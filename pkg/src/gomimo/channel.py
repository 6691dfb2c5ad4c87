"""Lambertian line-of-sight channel model for indoor LED-to-photodiode links.

Gains are pure DC path gains computed from room geometry and receiver
optics; noise is real zero-mean additive white Gaussian, parameterized by
a transmitted SNR referenced to the average emitted optical power.
"""

from dataclasses import dataclass, field

import numpy as np

DOWN = np.array([0.0, 0.0, -1.0])
UP = np.array([0.0, 0.0, 1.0])


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("normal vector must be nonzero")
    return v / norm


def lambertian_order(semi_angle_deg: float) -> float:
    """Emission order of a Lambertian LED from its half-power semi-angle.

    l = -ln 2 / ln(cos psi). A 60 deg semi-angle gives exactly 1.
    """
    if not 0.0 < semi_angle_deg < 90.0:
        raise ValueError(f"semi-angle must be in (0, 90) deg, got {semi_angle_deg}")
    return -np.log(2.0) / np.log(np.cos(np.radians(semi_angle_deg)))


def lens_gain(incidence_angle_deg: float, lens_refractive_index: float,
              lens_half_fov_deg: float) -> float:
    """Optical concentrator gain: n^2/sin^2(fov) inside the field of view, else 0.

    The boundary angle == fov counts as inside (closed-set convention).
    """
    if not 0.0 <= incidence_angle_deg < 180.0:
        raise ValueError(f"incidence angle must be in [0, 180), got {incidence_angle_deg}")
    if lens_refractive_index < 1.0:
        raise ValueError(f"refractive index must be >= 1, got {lens_refractive_index}")
    if not 0.0 < lens_half_fov_deg <= 90.0:
        raise ValueError(f"half FOV must be in (0, 90], got {lens_half_fov_deg}")
    if incidence_angle_deg > lens_half_fov_deg:
        return 0.0
    return lens_refractive_index ** 2 / np.sin(np.radians(lens_half_fov_deg)) ** 2


@dataclass(frozen=True)
class OpticsParams:
    """Transmitter/receiver optics: LED beam shape and PD front end."""

    semi_angle_deg: float
    responsivity: float
    pd_area: float
    filter_gain: float
    lens_refractive_index: float
    lens_half_fov_deg: float

    def __post_init__(self):
        if not 0.0 < self.semi_angle_deg < 90.0:
            raise ValueError(f"semi-angle out of (0, 90): {self.semi_angle_deg}")
        if self.responsivity <= 0.0:
            raise ValueError("responsivity must be > 0")
        if self.pd_area <= 0.0:
            raise ValueError("PD area must be > 0")
        if not 0.0 < self.filter_gain <= 1.0:
            raise ValueError("filter gain must be in (0, 1]")
        if self.lens_refractive_index < 1.0:
            raise ValueError("lens refractive index must be >= 1")
        if not 0.0 < self.lens_half_fov_deg <= 90.0:
            raise ValueError("lens half FOV must be in (0, 90]")

    @property
    def lambertian_order(self) -> float:
        return lambertian_order(self.semi_angle_deg)

    def lens_gain(self, incidence_angle_deg: float) -> float:
        return lens_gain(incidence_angle_deg, self.lens_refractive_index,
                         self.lens_half_fov_deg)


@dataclass(frozen=True)
class RoomGeometry:
    """LED and PD placement inside a rectangular room.

    LEDs must sit above the PD plane and inside the room footprint; PDs may
    fall outside the footprint (a receiver centered on a corner puts two of
    its PDs at negative coordinates, which is fine for pure geometry).
    """

    room_dims: tuple
    led_positions: np.ndarray
    pd_positions: np.ndarray
    led_normal: np.ndarray = field(default_factory=lambda: DOWN.copy())
    pd_normal: np.ndarray = field(default_factory=lambda: UP.copy())

    def __post_init__(self):
        led = np.atleast_2d(np.asarray(self.led_positions, dtype=float))
        pd = np.atleast_2d(np.asarray(self.pd_positions, dtype=float))
        object.__setattr__(self, "led_positions", led)
        object.__setattr__(self, "pd_positions", pd)
        object.__setattr__(self, "led_normal", _unit(np.asarray(self.led_normal, float)))
        object.__setattr__(self, "pd_normal", _unit(np.asarray(self.pd_normal, float)))
        if led.shape[0] < 1 or pd.shape[0] < 1:
            raise ValueError("need at least one LED and one PD")
        if led.shape[1] != 3 or pd.shape[1] != 3:
            raise ValueError("positions must be 3D points")
        if not (np.isfinite(led).all() and np.isfinite(pd).all()):
            raise ValueError("positions must be finite")
        if led[:, 2].min() <= pd[:, 2].max():
            raise ValueError("all LEDs must sit above all PDs")
        rx, ry, _ = self.room_dims
        if (led[:, 0] < 0).any() or (led[:, 0] > rx).any() \
                or (led[:, 1] < 0).any() or (led[:, 1] > ry).any():
            raise ValueError("LED positions must lie within the room footprint")

    @property
    def num_leds(self) -> int:
        return self.led_positions.shape[0]

    @property
    def num_pds(self) -> int:
        return self.pd_positions.shape[0]


@dataclass(frozen=True)
class ChannelMatrix:
    """DC gain matrix; entry (r, t) couples LED t into PD r."""

    entries: np.ndarray

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.entries, dtype=float))
        object.__setattr__(self, "entries", h)
        if (h < 0).any() or not np.isfinite(h).all():
            raise ValueError("channel gains must be finite and nonnegative")

    @property
    def num_pds(self) -> int:
        return self.entries.shape[0]

    @property
    def num_leds(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class NoiseModel:
    """Per-branch AWGN level, with a record of how it was derived."""

    sigma: float
    derivation_note: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise ValueError(f"sigma must be finite and > 0, got {self.sigma}")


def dc_gain(led_index: int, pd_index: int, geometry: RoomGeometry,
            optics: OpticsParams) -> float:
    """Line-of-sight DC gain between one LED and one PD.

    h = ((l+1) rho A / (2 pi d^2)) * cos^l(phi) * Ts * g(theta) * cos(theta),
    forced to 0 outside the lens field of view or behind either element.
    """
    led = geometry.led_positions[led_index]
    pd = geometry.pd_positions[pd_index]
    delta = pd - led
    d = float(np.linalg.norm(delta))
    if d == 0.0:
        raise ValueError(f"LED {led_index} and PD {pd_index} are coincident")
    cos_phi = float(np.dot(delta, geometry.led_normal)) / d
    cos_theta = float(np.dot(-delta, geometry.pd_normal)) / d
    if cos_phi <= 0.0 or cos_theta <= 0.0:
        return 0.0
    theta_deg = float(np.degrees(np.arccos(np.clip(cos_theta, -1.0, 1.0))))
    if theta_deg > optics.lens_half_fov_deg:
        return 0.0
    l = optics.lambertian_order
    g = optics.lens_gain(theta_deg)
    return ((l + 1.0) * optics.responsivity * optics.pd_area / (2.0 * np.pi * d * d)
            * cos_phi ** l * optics.filter_gain * g * cos_theta)


def build_channel_matrix(geometry: RoomGeometry, optics: OpticsParams) -> ChannelMatrix:
    """Assemble the full PD-by-LED gain matrix for a geometry."""
    h = np.empty((geometry.num_pds, geometry.num_leds))
    for r in range(geometry.num_pds):
        for t in range(geometry.num_leds):
            h[r, t] = dc_gain(t, r, geometry, optics)
    return ChannelMatrix(h)


def snr_to_sigma(snr_tx_db: float, i_av: float) -> NoiseModel:
    """Noise level for a transmitted SNR referenced to the average emitted power.

    SNR_tx(dB) = 10 log10(I_av^2 / sigma^2), i.e. sigma = I_av 10^(-SNR/20).
    """
    if i_av <= 0.0:
        raise ValueError("average optical power must be > 0")
    sigma = i_av * 10.0 ** (-snr_tx_db / 20.0)
    return NoiseModel(sigma=sigma,
                      derivation_note=f"snr_tx_db={snr_tx_db!r} i_av={i_av!r}")


def sigma_to_snr(sigma: float, i_av: float) -> float:
    """Inverse of snr_to_sigma."""
    if i_av <= 0.0 or sigma <= 0.0:
        raise ValueError("sigma and i_av must be > 0")
    return 20.0 * np.log10(i_av / sigma)


def awgn_sample(rng: np.random.Generator, noise: NoiseModel, num_branches: int) -> np.ndarray:
    """Draw one vector of i.i.d. zero-mean Gaussian branch noise."""
    return rng.normal(0.0, noise.sigma, size=num_branches)


def square_array_positions(center_xy: tuple, spacing: float, height: float) -> np.ndarray:
    """2x2 square array footprint around a center point, row-major order."""
    cx, cy = center_xy
    off = spacing / 2.0
    return np.array([
        [cx - off, cy - off, height],
        [cx - off, cy + off, height],
        [cx + off, cy - off, height],
        [cx + off, cy + off, height],
    ])
