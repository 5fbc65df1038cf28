"""Rician ground-to-UAV link: gain, rate, and the coverage predicate.

The channel coefficient is h = sqrt(beta) * h_hat with large-scale gain
beta = alpha / (H^2 + d^2)^(kps/2) and Rician small-scale fading
h_hat = sqrt(ks/(ks+1)) * h_los + sqrt(1/(ks+1)) * h_nlos, normalized so
that E[|h_hat|^2] = 1.
"""

import math
from dataclasses import dataclass

import numpy as np

from .world import cell_center


@dataclass
class ChannelSample:
    small_scale: complex     # h_hat
    large_scale: float       # beta
    coeff_mag: float         # |h| = sqrt(beta) * |h_hat|


def large_scale_gain(dist2_ground, cfg):
    """beta as a function of squared ground-projected distance."""
    return cfg.ref_gain_alpha / (cfg.altitude_h ** 2 + dist2_ground) ** (cfg.pathloss_kps / 2.0)


def sample_small_scale(cfg, rng):
    """One Rician draw; the LOS component has unit magnitude."""
    ks = cfg.rician_ks
    nlos = complex(rng.standard_normal(), rng.standard_normal()) / math.sqrt(2.0)
    return math.sqrt(ks / (ks + 1.0)) + math.sqrt(1.0 / (ks + 1.0)) * nlos


def channel_coefficient(gu_pos, uav_cell, cfg, rng=None, small_scale=None):
    """Full channel sample for one user; pass small_scale to reuse a draw."""
    ux, uy = cell_center(uav_cell, cfg)
    dist2 = (gu_pos[0] - ux) ** 2 + (gu_pos[1] - uy) ** 2
    beta = large_scale_gain(dist2, cfg)
    if small_scale is None:
        small_scale = sample_small_scale(cfg, rng)
    return ChannelSample(small_scale=small_scale, large_scale=beta,
                         coeff_mag=math.sqrt(beta) * abs(small_scale))


def rate(coeff_mag, cfg):
    """Achievable uplink rate in bits/s."""
    snr = coeff_mag ** 2 * cfg.tx_power / cfg.noise_sigma2
    return cfg.bandwidth_w * math.log2(1.0 + snr)


def coverage_ok(gu_pos, uav_cell, small_scale_mag, cfg):
    """QoS predicate: ground distance within the radius implied by |h| >= h_min.

    Algebraically identical to sqrt(beta) * |h_hat| >= h_min.
    """
    if cfg.h_min <= 0:
        raise ValueError("h_min must be > 0")
    ux, uy = cell_center(uav_cell, cfg)
    dist2 = (gu_pos[0] - ux) ** 2 + (gu_pos[1] - uy) ** 2
    bound = (cfg.ref_gain_alpha * small_scale_mag ** 2
             / cfg.h_min ** 2) ** (2.0 / cfg.pathloss_kps) - cfg.altitude_h ** 2
    return dist2 <= bound


def draw_samples(world, cfg):
    """One independent channel draw per user for the current slot."""
    rng = world.rng["channel"]
    return [channel_coefficient(gu.pos, world.uav.cell, cfg, rng) for gu in world.gus]
