"""Deterministic simulator and detector library for generalized optical
MIMO links: Lambertian LOS channel, GOSM/GOSMP mapping, four detection
schemes (joint ML, ZF-ML, ZF-DNN, CSI-free blind DNN), and a seeded Monte
Carlo experiment harness.
"""

__version__ = "0.1.0"

from . import channel, config, detectors, harness, modulation, neural  # noqa: F401
